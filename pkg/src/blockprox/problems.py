"""SCVI problem instances: oracles, synthetic generators, and certificates.

Every generator produces an instance whose expected map is affine,
``F(x) = A x + b``, optionally multiplied by a smooth positive scalar field
``s(x) = s0 + s1 * sin(sum(x))``.  The stochastic oracle adds independent
Gaussian noise per call; the per-coordinate standard deviation inside block i
is ``nu_i / sqrt(n_i)`` so that the second moment of the block noise equals
``nu_i^2`` in the L2 norm (and is bounded by it in the Linf dual norm).

Ground-truth solutions come either from the interior construction
``b = -A xbar`` (so that ``F(xbar) = 0`` and ``xbar`` solves the VI) or from
a deterministic extragradient run stopped at a small natural residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BALL,
    BOX,
    ENTROPY,
    EUCLIDEAN,
    L2,
    SIMPLEX,
    BlockGeometry,
    BlockStructure,
    ComponentSet,
    GeometryError,
    as_flat,
    composite_norm_sq,
)

MONOTONE = "monotone"
STRICTLY_MONOTONE = "strictly_monotone"
STRONGLY_MONOTONE = "strongly_monotone"
PSEUDO_MONOTONE = "pseudo_monotone"
STRICTLY_PSEUDO_MONOTONE = "strictly_pseudo_monotone"
STRONGLY_PSEUDO_MONOTONE = "strongly_pseudo_monotone"
CONVEX_GRADIENT = "convex_gradient"

PROBLEM_FORMAT = "blockprox-problem/1"


class ProblemError(ValueError):
    """Invalid generator parameters or certification failure."""


@dataclass
class ProblemConstants:
    """Per-block problem constants used by the rate formulas.

    Attributes
    ----------
    set_bound : (d,) array
        B_i, a bound on ||x^i||_i over the component set.
    map_bound : (d,) array
        C_i, a bound on ||F_i(x)||_{*i} over the feasible set.
    block_lipschitz : (d,) array
        L_i, the block-Lipschitz constant of F_i in its own block.
    noise_std : (d,) array
        nu_i, bound on the second-draw noise second moment (dual norm).
    noise_std_tilde : (d,) array
        nu_tilde_i, same bound for the first draw of each iteration.
    strong_mu : float or None
        Strong pseudo-monotonicity modulus, when applicable.
    """

    set_bound: np.ndarray
    map_bound: np.ndarray
    block_lipschitz: np.ndarray
    noise_std: np.ndarray
    noise_std_tilde: np.ndarray
    strong_mu: float | None = None

    def __post_init__(self):
        for name in ("set_bound", "map_bound", "block_lipschitz", "noise_std", "noise_std_tilde"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ProblemError(f"constants.{name} must be finite and nonnegative")
        if self.strong_mu is not None and self.strong_mu <= 0:
            raise ProblemError("constants.strong_mu must be positive when given")

    def to_dict(self):
        return {
            "set_bound": self.set_bound.tolist(),
            "map_bound": self.map_bound.tolist(),
            "block_lipschitz": self.block_lipschitz.tolist(),
            "noise_std": self.noise_std.tolist(),
            "noise_std_tilde": self.noise_std_tilde.tolist(),
            "strong_mu": self.strong_mu,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["set_bound"], float),
            np.asarray(d["map_bound"], float),
            np.asarray(d["block_lipschitz"], float),
            np.asarray(d["noise_std"], float),
            np.asarray(d["noise_std_tilde"], float),
            d.get("strong_mu"),
        )


@dataclass
class AffineBase:
    """The affine core F(x) = A x + b with an optional sinusoidal scaling.

    ``scale_kind`` is 0 for no scaling and 1 for s(x) = s0 + s1*sin(sum(x)).
    """

    matrix: np.ndarray
    offset: np.ndarray
    scale_kind: int = 0
    s0: float = 1.0
    s1: float = 0.0

    def scale_at(self, x):
        if self.scale_kind == 0:
            return 1.0
        return self.s0 + self.s1 * np.sin(float(np.sum(x)))

    def scale_range(self):
        if self.scale_kind == 0:
            return 1.0, 1.0
        return self.s0 - abs(self.s1), self.s0 + abs(self.s1)

    def __call__(self, x):
        return self.scale_at(x) * (self.matrix @ x + self.offset)

    def to_dict(self):
        return {
            "matrix": self.matrix.tolist(),
            "offset": self.offset.tolist(),
            "scale_kind": self.scale_kind,
            "s0": self.s0,
            "s1": self.s1,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["matrix"], float),
            np.asarray(d["offset"], float),
            int(d.get("scale_kind", 0)),
            float(d.get("s0", 1.0)),
            float(d.get("s1", 0.0)),
        )


class ScviProblem:
    """A stochastic Cartesian variational inequality instance.

    Parameters
    ----------
    geometries : list of BlockGeometry
    expected_map : callable
        Maps a flat point to the flat expected mapping value F(x).
    constants : ProblemConstants
    monotonicity_class : str
        One of the declared monotonicity classes.
    known_solution : array or None
        A solution of the VI, when available from the construction.
    objective : (callable, float) or None
        The pair (f, f_star) for stochastic convex optimization instances.
    affine : AffineBase or None
        Structural form enabling compiled solver kernels, exact gap
        computation, and serialization.
    meta : dict
        Generator name, parameters and seed, echoed into serialized files.
    """

    def __init__(
        self,
        geometries,
        expected_map,
        constants,
        monotonicity_class,
        known_solution=None,
        objective=None,
        affine=None,
        meta=None,
    ):
        self.geometries = list(geometries)
        self.structure = BlockStructure.from_geometries(self.geometries)
        self.expected_map = expected_map
        self.constants = constants
        self.monotonicity_class = monotonicity_class
        self.known_solution = None if known_solution is None else np.asarray(known_solution, float)
        self.objective = objective
        self.affine = affine
        self.meta = dict(meta or {})
        if self.known_solution is not None and self.known_solution.shape != (self.structure.n,):
            raise ProblemError("known_solution has wrong length")
        # per-coordinate noise scale: block second moment equals nu_i^2 in L2
        sizes = self.structure.sizes.astype(float)
        self._sigma_tilde = np.repeat(constants.noise_std_tilde / np.sqrt(sizes), self.structure.sizes)
        self._sigma = np.repeat(constants.noise_std / np.sqrt(sizes), self.structure.sizes)

    @property
    def d(self):
        return self.structure.d

    @property
    def n(self):
        return self.structure.n

    @property
    def sigma_coord(self):
        """Per-coordinate noise std for the second draw of an iteration."""
        return self._sigma

    @property
    def sigma_coord_tilde(self):
        """Per-coordinate noise std for the first draw of an iteration."""
        return self._sigma_tilde

    def stochastic_map(self, x, rng):
        """One realization F(x, xi) = F(x) + noise.  Consecutive calls are independent."""
        x = as_flat(x)
        return self.expected_map(x) + self._sigma * rng.standard_normal(self.n)

    def feasible(self, x, tol=1e-9):
        x = as_flat(x)
        if x.shape != (self.n,):
            return False
        return all(
            g.feasible(x[s], tol) for g, s in zip(self.geometries, self.structure.slices)
        )

    def sample_point(self, rng):
        return np.concatenate([g.set.sample(rng) for g in self.geometries])

    def objective_value(self, x):
        if self.objective is None:
            raise ProblemError("problem has no objective")
        return self.objective[0](as_flat(x))

    @property
    def f_star(self):
        if self.objective is None:
            raise ProblemError("problem has no objective")
        return self.objective[1]

    def with_noise(self, noise):
        """A copy sharing the deterministic data but with new noise levels."""
        if self.affine is None:
            raise ProblemError("with_noise requires an affine instance")
        nu = np.full(self.d, float(noise))
        constants = ProblemConstants(
            self.constants.set_bound.copy(),
            self.constants.map_bound.copy(),
            self.constants.block_lipschitz.copy(),
            nu,
            nu.copy(),
            self.constants.strong_mu,
        )
        meta = dict(self.meta)
        meta["noise"] = float(noise)
        return ScviProblem(
            self.geometries,
            self.expected_map,
            constants,
            self.monotonicity_class,
            self.known_solution,
            self.objective,
            self.affine,
            meta,
        )

    def to_json(self):
        """Serialize the instance (affine instances only) to a JSON string."""
        if self.affine is None:
            raise ProblemError("only affine instances serialize to JSON")
        doc = {
            "format": PROBLEM_FORMAT,
            "meta": self.meta,
            "geometries": [g.to_dict() for g in self.geometries],
            "affine": self.affine.to_dict(),
            "constants": self.constants.to_dict(),
            "monotonicity_class": self.monotonicity_class,
            "known_solution": None
            if self.known_solution is None
            else self.known_solution.tolist(),
            "objective_quadratic": self.meta.get("objective_quadratic", False),
            "f_star": None if self.objective is None else self.objective[1],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != PROBLEM_FORMAT:
            raise ProblemError(f"unexpected problem format {doc.get('format')!r}")
        geoms = [BlockGeometry.from_dict(g) for g in doc["geometries"]]
        affine = AffineBase.from_dict(doc["affine"])
        constants = ProblemConstants.from_dict(doc["constants"])
        objective = None
        if doc.get("objective_quadratic"):
            Q = affine.matrix
            c = affine.offset

            def f(x, Q=Q, c=c):
                return 0.5 * float(x @ (Q @ x)) + float(c @ x)

            objective = (f, float(doc["f_star"]))
        return cls(
            geoms,
            affine,
            constants,
            doc["monotonicity_class"],
            doc.get("known_solution"),
            objective,
            affine,
            doc.get("meta"),
        )

    def __repr__(self):
        return (
            f"ScviProblem(d={self.d}, n={self.n}, class={self.monotonicity_class},"
            f" affine={self.affine is not None})"
        )


def sample_map(problem, x, rng):
    """Draw one unbiased realization of the stochastic mapping at ``x``."""
    return problem.stochastic_map(x, rng)


# ---------------------------------------------------------------------------
# analytic constants for (scaled) affine maps
# ---------------------------------------------------------------------------


def _coordinate_ranges(A, b, geometries, structure):
    """Per-coordinate interval [lo_j, hi_j] of (A x + b)_j over the feasible set."""
    n = structure.n
    lo = np.array(b, dtype=float)
    hi = np.array(b, dtype=float)
    for geom, s in zip(geometries, structure.slices):
        sub = A[:, s]
        cset = geom.set
        if cset.kind == BOX:
            center = 0.5 * (cset.lower + cset.upper)
            half = 0.5 * (cset.upper - cset.lower)
            mid = sub @ center
            dev = np.abs(sub) @ half
            lo += mid - dev
            hi += mid + dev
        elif cset.kind == BALL:
            mid = sub @ cset.center
            dev = cset.radius * np.linalg.norm(sub, axis=1)
            lo += mid - dev
            hi += mid + dev
        elif cset.kind == SIMPLEX:
            lo += sub.min(axis=1)
            hi += sub.max(axis=1)
        else:  # pragma: no cover
            raise GeometryError(f"unsupported set kind {cset.kind}")
    return lo, hi


def _affine_constants(A, b, geometries, structure):
    """Analytic (C_i, L_i) certificates for F(x) = A x + b on the product set."""
    lo, hi = _coordinate_ranges(A, b, geometries, structure)
    amp = np.maximum(np.abs(lo), np.abs(hi))
    d = structure.d
    map_bound = np.zeros(d)
    block_lip = np.zeros(d)
    for i, (geom, s) in enumerate(zip(geometries, structure.slices)):
        if geom.norm_kind == L2:
            map_bound[i] = float(np.linalg.norm(amp[s]))
            block_lip[i] = float(np.linalg.norm(A[s, s], ord=2))
        else:
            # dual norm is Linf; block norm is L1
            map_bound[i] = float(amp[s].max())
            block_lip[i] = float(np.abs(A[s, s]).max())
    return map_bound, block_lip


def _scaled_block_lipschitz(base_lip, base_map_bound, s1, geometries):
    """Block-Lipschitz bound after multiplying by s(x) = s0 + s1 sin(sum x)."""
    extra = np.zeros_like(base_lip)
    for i, geom in enumerate(geometries):
        # |s(x)-s(y)| <= |s1| * ||x^i - y^i||_1; convert L1 to the block norm
        fac = np.sqrt(geom.dim) if geom.norm_kind == L2 else 1.0
        extra[i] = abs(s1) * fac * base_map_bound[i]
    return extra


def _make_sets(d, sizes, set_kind, halfwidth, rng):
    geoms = []
    for sz in sizes:
        if set_kind == BOX:
            cset = ComponentSet.box(np.full(sz, -halfwidth), np.full(sz, halfwidth))
            geoms.append(BlockGeometry(cset, EUCLIDEAN))
        elif set_kind == BALL:
            cset = ComponentSet.ball(np.zeros(sz), halfwidth)
            geoms.append(BlockGeometry(cset, EUCLIDEAN))
        elif set_kind == SIMPLEX:
            geoms.append(BlockGeometry(ComponentSet.simplex(sz), EUCLIDEAN))
        elif set_kind == "entropy_simplex":
            geoms.append(BlockGeometry(ComponentSet.simplex(sz), ENTROPY))
        else:
            raise ProblemError(f"unknown set kind {set_kind!r}")
    return geoms


def _interior_anchor(geoms, rng):
    parts = []
    for geom in geoms:
        mid = geom.set.interior_point()
        probe = geom.set.sample(rng)
        parts.append(0.5 * mid + 0.5 * probe if geom.set.kind != BALL else 0.5 * probe)
    return np.concatenate(parts)


def _normalize_sizes(d, block_size):
    if np.isscalar(block_size):
        return [int(block_size)] * int(d)
    sizes = [int(s) for s in block_size]
    if len(sizes) != d:
        raise ProblemError("block_size list length must equal d")
    return sizes


def _random_structured_matrix(n, mu, l_bound, rng, skew_fraction=0.5):
    """A = mu*I + S + Q with S skew, Q PSD, ||A||_2 <= l_bound, sym part >= mu*I."""
    if l_bound < mu:
        raise ProblemError("l_bound must be at least mu")
    rho = l_bound - mu
    M = rng.standard_normal((n, n))
    S = 0.5 * (M - M.T)
    s_norm = np.linalg.norm(S, 2)
    if s_norm > 0 and rho > 0:
        S *= skew_fraction * rho / s_norm
    else:
        S = np.zeros((n, n))
    B = rng.standard_normal((n, n))
    Q = B.T @ B
    q_norm = np.linalg.norm(Q, 2)
    if q_norm > 0 and rho > 0:
        Q *= (1.0 - skew_fraction) * rho / q_norm
    else:
        Q = np.zeros((n, n))
    return mu * np.eye(n) + S + Q


def make_strongly_monotone_affine(
    d,
    block_size,
    mu,
    l_bound,
    noise,
    set_kind=BOX,
    seed=0,
    halfwidth=1.0,
    skew_fraction=0.5,
):
    """A strongly monotone affine SCVI with a known interior solution.

    F(x) = A x + b where A = mu*I + skew + PSD with spectrum capped by
    ``l_bound``, and b = -A xbar for an interior point xbar, so xbar solves
    the VI with F(xbar) = 0.
    """
    if mu <= 0:
        raise ProblemError("mu must be positive")
    sizes = _normalize_sizes(d, block_size)
    rng = np.random.default_rng(seed)
    geoms = _make_sets(d, sizes, set_kind, halfwidth, rng)
    structure = BlockStructure(sizes)
    A = _random_structured_matrix(structure.n, mu, l_bound, rng, skew_fraction)
    xbar = _interior_anchor(geoms, rng)
    b = -A @ xbar
    affine = AffineBase(A, b)
    map_bound, block_lip = _affine_constants(A, b, geoms, structure)
    nu = np.full(d, float(noise))
    constants = ProblemConstants(
        np.array([g.bound() for g in geoms]), map_bound, block_lip, nu, nu.copy(), float(mu)
    )
    meta = {
        "generator": "strongly_monotone_affine",
        "seed": int(seed),
        "params": {
            "d": int(d),
            "block_size": sizes,
            "mu": float(mu),
            "l_bound": float(l_bound),
            "noise": float(noise),
            "set_kind": set_kind,
            "halfwidth": float(halfwidth),
            "skew_fraction": float(skew_fraction),
        },
    }
    return ScviProblem(
        geoms, affine, constants, STRONGLY_PSEUDO_MONOTONE, xbar, None, affine, meta
    )


def make_monotone_affine(d, block_size, noise, psd_weight=0.05, seed=0, halfwidth=1.0):
    """A merely monotone affine SCVI dominated by its skew-symmetric part.

    The symmetric part is ``psd_weight`` times a unit-norm PSD matrix
    (``psd_weight=0`` gives a purely rotational map).  The solution is the
    interior point used in the offset construction.
    """
    if psd_weight < 0:
        raise ProblemError("psd_weight must be nonnegative")
    sizes = _normalize_sizes(d, block_size)
    rng = np.random.default_rng(seed)
    geoms = _make_sets(d, sizes, BOX, halfwidth, rng)
    structure = BlockStructure(sizes)
    n = structure.n
    M = rng.standard_normal((n, n))
    S = 0.5 * (M - M.T)
    S /= np.linalg.norm(S, 2)
    B = rng.standard_normal((n, n))
    Q = B.T @ B
    Q /= np.linalg.norm(Q, 2)
    A = S + psd_weight * Q
    xbar = _interior_anchor(geoms, rng)
    b = -A @ xbar
    affine = AffineBase(A, b)
    map_bound, block_lip = _affine_constants(A, b, geoms, structure)
    nu = np.full(d, float(noise))
    constants = ProblemConstants(
        np.array([g.bound() for g in geoms]), map_bound, block_lip, nu, nu.copy(), None
    )
    meta = {
        "generator": "monotone_affine",
        "seed": int(seed),
        "params": {
            "d": int(d),
            "block_size": sizes,
            "noise": float(noise),
            "psd_weight": float(psd_weight),
            "halfwidth": float(halfwidth),
        },
    }
    return ScviProblem(geoms, affine, constants, MONOTONE, xbar, None, affine, meta)


def make_strictly_pseudo_monotone(base, offset=1.5, amplitude=1.0):
    """Scale a strongly monotone affine instance by s(x) = offset + amplitude*sin(sum x).

    The scaled map shares the base solution, is strictly (indeed strongly,
    with modulus s_min * mu) pseudo-monotone, and is generically
    non-monotone.
    """
    if base.affine is None or base.affine.scale_kind != 0:
        raise ProblemError("base must be an unscaled affine instance")
    if base.constants.strong_mu is None:
        raise ProblemError("base must be strongly monotone")
    s_min = offset - abs(amplitude)
    s_max = offset + abs(amplitude)
    if s_min <= 0:
        raise ProblemError("scaling must be bounded away from zero (offset > |amplitude|)")
    affine = AffineBase(base.affine.matrix, base.affine.offset, 1, float(offset), float(amplitude))
    extra = _scaled_block_lipschitz(
        base.constants.block_lipschitz, base.constants.map_bound, amplitude, base.geometries
    )
    constants = ProblemConstants(
        base.constants.set_bound.copy(),
        s_max * base.constants.map_bound,
        s_max * base.constants.block_lipschitz + extra,
        base.constants.noise_std.copy(),
        base.constants.noise_std_tilde.copy(),
        s_min * base.constants.strong_mu,
    )
    meta = {
        "generator": "strictly_pseudo_monotone",
        "seed": base.meta.get("seed"),
        "params": {"offset": float(offset), "amplitude": float(amplitude), "base": base.meta},
    }
    return ScviProblem(
        base.geometries,
        affine,
        constants,
        STRICTLY_PSEUDO_MONOTONE,
        base.known_solution,
        None,
        affine,
        meta,
    )


def make_scop_quadratic(d, block_size, spectrum, noise, seed=0, halfwidth=1.0):
    """A stochastic convex optimization instance f(x) = 0.5 x'Qx + c'x on boxes.

    ``spectrum`` gives the (nonnegative) eigenvalues of Q; zero eigenvalues
    are allowed and give a merely convex objective.  The optimal value is
    computed once at generation time by a deterministic extragradient run.
    """
    sizes = _normalize_sizes(d, block_size)
    structure = BlockStructure(sizes)
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (structure.n,):
        raise ProblemError(f"spectrum must have length n = {structure.n}")
    if np.any(spectrum < 0):
        raise ProblemError("curvature spectrum must be nonnegative")
    rng = np.random.default_rng(seed)
    geoms = _make_sets(d, sizes, BOX, halfwidth, rng)
    V = np.linalg.qr(rng.standard_normal((structure.n, structure.n)))[0]
    Q = (V * spectrum) @ V.T
    Q = 0.5 * (Q + Q.T)
    c = rng.uniform(-1.0, 1.0, structure.n)
    affine = AffineBase(Q, c)

    def f(x, Q=Q, c=c):
        return 0.5 * float(x @ (Q @ x)) + float(c @ x)

    lip = max(float(spectrum.max()), 1e-12)
    x_star, residual = _solve_affine_vi(affine, geoms, structure, 0.5 / lip)
    map_bound, block_lip = _affine_constants(Q, c, geoms, structure)
    nu = np.full(d, float(noise))
    constants = ProblemConstants(
        np.array([g.bound() for g in geoms]), map_bound, block_lip, nu, nu.copy(), None
    )
    meta = {
        "generator": "scop_quadratic",
        "seed": int(seed),
        "params": {
            "d": int(d),
            "block_size": sizes,
            "spectrum": spectrum.tolist(),
            "noise": float(noise),
            "halfwidth": float(halfwidth),
        },
        "objective_quadratic": True,
        "solve_residual": residual,
    }
    return ScviProblem(
        geoms, affine, constants, CONVEX_GRADIENT, x_star, (f, f(x_star)), affine, meta
    )


def make_nash_quadratic(d, block_size, coupling, noise, seed=0, halfwidth=1.0):
    """A quadratic Nash game whose concatenated gradient map is strongly monotone.

    Player i minimizes 0.5 x_i' H_i x_i + x_i' sum_j G_ij x_j + c_i' x_i over a
    box; the game map stacks the partial gradients.  ``coupling`` controls the
    spectral norm of each off-diagonal block and must stay below the
    diagonal-dominance threshold, otherwise the monotonicity certificate
    fails and generation is refused.
    """
    sizes = _normalize_sizes(d, block_size)
    structure = BlockStructure(sizes)
    rng = np.random.default_rng(seed)
    geoms = _make_sets(d, sizes, BOX, halfwidth, rng)
    n = structure.n
    M = np.zeros((n, n))
    for i, si in enumerate(structure.slices):
        sz = sizes[i]
        V = np.linalg.qr(rng.standard_normal((sz, sz)))[0]
        eig = rng.uniform(1.0, 2.0, sz)
        M[si, si] = (V * eig) @ V.T
        for j, sj in enumerate(structure.slices):
            if i == j:
                continue
            G = rng.standard_normal((sz, sizes[j]))
            G *= coupling / max(np.linalg.norm(G, 2), 1e-12)
            M[si, sj] = G
    sym_min = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    if sym_min <= 1e-8:
        raise ProblemError(
            f"coupling too strong: symmetric part has min eigenvalue {sym_min:.3e}"
        )
    c = rng.uniform(-1.0, 1.0, n)
    affine = AffineBase(M, c)
    lip = float(np.linalg.norm(M, 2))
    x_star, residual = _solve_affine_vi(affine, geoms, structure, 0.5 / lip)
    map_bound, block_lip = _affine_constants(M, c, geoms, structure)
    nu = np.full(d, float(noise))
    constants = ProblemConstants(
        np.array([g.bound() for g in geoms]), map_bound, block_lip, nu, nu.copy(), sym_min
    )
    meta = {
        "generator": "nash_quadratic",
        "seed": int(seed),
        "params": {
            "d": int(d),
            "block_size": sizes,
            "coupling": float(coupling),
            "noise": float(noise),
            "halfwidth": float(halfwidth),
        },
        "solve_residual": residual,
    }
    return ScviProblem(
        geoms, affine, constants, STRONGLY_PSEUDO_MONOTONE, x_star, None, affine, meta
    )


def _solve_affine_vi(affine, geoms, structure, gamma, tol=1e-12, max_iter=500_000, x0=None):
    """Deterministic extragradient on the expected map, stopped at a small
    natural residual ||x - project(x - F(x))||.  Returns (x, residual)."""
    if x0 is None:
        x = np.concatenate([g.set.interior_point() for g in geoms])
    else:
        x = np.asarray(x0, dtype=float).copy()
    sets = [g.set for g in geoms]

    def proj(v):
        return np.concatenate([s.project(v[sl]) for s, sl in zip(sets, structure.slices)])

    residual = np.inf
    for _ in range(max_iter):
        fx = affine(x)
        residual = float(np.linalg.norm(x - proj(x - fx)))
        if residual <= tol:
            break
        y = proj(x - gamma * fx)
        x = proj(x - gamma * affine(y))
    return x, residual


def solve_deterministic(problem, x0=None, tol=1e-12, max_iter=500_000):
    """High-precision deterministic extragradient solve of an affine instance.

    Step size 1/(2L) with L a Lipschitz bound of the (scaled) map.  Used for
    ground truth and for uniqueness checks from multiple starts.
    """
    if problem.affine is None:
        raise ProblemError("deterministic solve requires an affine instance")
    aff = problem.affine
    _, s_max = aff.scale_range()
    lip = s_max * float(np.linalg.norm(aff.matrix, 2))
    if aff.scale_kind != 0:
        lo, hi = _coordinate_ranges(aff.matrix, aff.offset, problem.geometries, problem.structure)
        f_sup = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        lip += abs(aff.s1) * np.sqrt(problem.n) * f_sup
    return _solve_affine_vi(
        aff, problem.geometries, problem.structure, 0.5 / max(lip, 1e-12), tol, max_iter, x0
    )


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


@dataclass
class MonotonicityCertificate:
    """Sampling certificate for a declared monotonicity class."""

    mono_class: str
    n_pairs: int
    n_effective: int  # pairs where the (pseudo-monotone) premise held
    passed: bool
    worst_margin: float
    mu: float | None = None
    violation: dict | None = None

    def to_dict(self):
        return {
            "mono_class": self.mono_class,
            "n_pairs": self.n_pairs,
            "n_effective": self.n_effective,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "mu": self.mu,
            "violation": self.violation,
        }


_CLASS_ALIASES = {
    CONVEX_GRADIENT: MONOTONE,
}


def certify_monotonicity(problem, mono_class=None, n_samples=10_000, seed=0, mu=None, tol=1e-10):
    """Sample random feasible pairs and test the defining inequality of a class.

    Pseudo-monotone variants test the implication form: only pairs where the
    premise <F(y), x-y> >= 0 holds are counted.  A failed certificate is a
    report, not an exception.
    """
    if n_samples < 1:
        raise ProblemError("n_samples must be >= 1")
    mono_class = mono_class or problem.monotonicity_class
    mono_class = _CLASS_ALIASES.get(mono_class, mono_class)
    if mu is None:
        mu = problem.constants.strong_mu
    if mono_class in (STRONGLY_MONOTONE, STRONGLY_PSEUDO_MONOTONE) and mu is None:
        raise ProblemError(f"class {mono_class} needs a modulus mu")
    rng = np.random.default_rng(seed)
    geoms, structure = problem.geometries, problem.structure
    worst = np.inf
    violation = None
    n_effective = 0
    for _ in range(n_samples):
        x = problem.sample_point(rng)
        y = problem.sample_point(rng)
        dist_sq = composite_norm_sq(geoms, structure, x - y)
        if dist_sq == 0.0:
            continue
        fx = problem.expected_map(x)
        if mono_class in (MONOTONE, STRICTLY_MONOTONE, STRONGLY_MONOTONE):
            gap = float((fx - problem.expected_map(y)) @ (x - y))
            n_effective += 1
        else:
            if float(problem.expected_map(y) @ (x - y)) < 0.0:
                continue  # premise fails; pair carries no information
            gap = float(fx @ (x - y))
            n_effective += 1
        margin = gap / dist_sq
        if margin < worst:
            worst = margin
            violation = {"x": x.tolist(), "y": y.tolist(), "margin": margin}
    if n_effective == 0:
        return MonotonicityCertificate(mono_class, n_samples, 0, False, np.nan, mu)
    if mono_class in (MONOTONE, PSEUDO_MONOTONE):
        passed = worst >= -tol
    elif mono_class in (STRICTLY_MONOTONE, STRICTLY_PSEUDO_MONOTONE):
        passed = worst > 0.0
    else:
        passed = worst >= mu * (1.0 - 1e-10)
    return MonotonicityCertificate(
        mono_class,
        n_samples,
        n_effective,
        bool(passed),
        float(worst),
        mu,
        None if passed else violation,
    )


@dataclass
class ConstantsCertificate:
    """Sampled versus declared problem constants."""

    passed: bool
    sampled_map_bound: np.ndarray
    sampled_block_lipschitz: np.ndarray
    sampled_set_bound: np.ndarray
    declared: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "passed": self.passed,
            "sampled_map_bound": self.sampled_map_bound.tolist(),
            "sampled_block_lipschitz": self.sampled_block_lipschitz.tolist(),
            "sampled_set_bound": self.sampled_set_bound.tolist(),
            "declared": self.declared,
        }


def certify_constants(problem, n_samples=10_000, seed=0, slack=1.0 + 1e-9):
    """Check that sampled map values stay within the declared C_i, L_i, B_i."""
    rng = np.random.default_rng(seed)
    geoms, structure = problem.geometries, problem.structure
    d = structure.d
    c_seen = np.zeros(d)
    l_seen = np.zeros(d)
    b_seen = np.zeros(d)
    for _ in range(n_samples):
        x = problem.sample_point(rng)
        fx = problem.expected_map(x)
        y = x.copy()
        i = int(rng.integers(d))
        s = structure.slices[i]
        y[s] = geoms[i].set.sample(rng)
        fy = problem.expected_map(y)
        step = geoms[i].norm(y[s] - x[s])
        if step > 1e-12:
            l_seen[i] = max(l_seen[i], geoms[i].dual_norm_value(fy[s] - fx[s]) / step)
        for j, sj in enumerate(structure.slices):
            c_seen[j] = max(c_seen[j], geoms[j].dual_norm_value(fx[sj]))
            b_seen[j] = max(b_seen[j], geoms[j].norm(x[sj]))
    cst = problem.constants
    passed = (
        np.all(c_seen <= cst.map_bound * slack)
        and np.all(l_seen <= cst.block_lipschitz * slack)
        and np.all(b_seen <= cst.set_bound * slack)
    )
    return ConstantsCertificate(
        bool(passed),
        c_seen,
        l_seen,
        b_seen,
        {
            "map_bound": cst.map_bound.tolist(),
            "block_lipschitz": cst.block_lipschitz.tolist(),
            "set_bound": cst.set_bound.tolist(),
        },
    )
