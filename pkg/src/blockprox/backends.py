"""Selection between the compiled iteration kernels and the Python loops.

The compiled extension accelerates the hot inner loops for instances with an
affine (optionally sin-scaled) expected map and all-box Euclidean geometry,
which covers every synthetic generator on box sets.  Any other instance, or
an interpreter without the built extension, runs the pure-Python loops with
identical semantics.
"""

from __future__ import annotations

from .geometry import BOX, EUCLIDEAN

try:
    from . import _kernels  # noqa: F401

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None
    HAVE_COMPILED = False

COMPILED = "compiled"
PYTHON = "python"


class BackendError(RuntimeError):
    """Requested backend is unavailable for this problem or build."""


def kernel_eligible(problem):
    """True when the compiled fast path can run this instance."""
    if problem.affine is None:
        return False
    return all(
        g.dgf == EUCLIDEAN and g.set.kind == BOX for g in problem.geometries
    )


def select_backend(backend, problem):
    """Resolve "auto"/"compiled"/"python" to a concrete backend name."""
    if backend == PYTHON:
        return PYTHON
    eligible = HAVE_COMPILED and kernel_eligible(problem)
    if backend == COMPILED:
        if not eligible:
            reason = "extension not built" if not HAVE_COMPILED else "problem not kernel-eligible"
            raise BackendError(f"compiled backend unavailable: {reason}")
        return COMPILED
    if backend == "auto":
        return COMPILED if eligible else PYTHON
    raise BackendError(f"unknown backend {backend!r}")
