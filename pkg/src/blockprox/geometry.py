"""Component sets, distance-generating functions, Bregman distances and prox maps.

Each coordinate block of a Cartesian feasible set carries its own geometry: a
bounded convex component set, a distance-generating function (DGF), and a
norm pair.  Two geometries are supported:

* ``euclidean``: omega(x) = 0.5 ||x||_2^2 on any component set, self-dual
  L2 norm, strong-convexity and smoothness moduli both equal to 1.  The prox
  map reduces to a Euclidean projection of a gradient step.
* ``entropy``: omega(x) = sum_j x_j log x_j on the probability simplex,
  L1 norm with Linf dual, Pinsker modulus 1.  The prox map is the
  exponential-weights multiplicative update.

The gradient of the entropy DGF is unbounded at the simplex boundary, so all
log evaluations clamp coordinates to the interior ``[ENTROPY_EPS, 1]`` and
renormalize first.  The smoothness modulus reported for the entropy geometry
is the conservative surrogate ``1 / ENTROPY_EPS`` valid on that clamped
interior.
"""

from __future__ import annotations

import numpy as np

BOX = "box"
BALL = "ball"
SIMPLEX = "simplex"

EUCLIDEAN = "euclidean"
ENTROPY = "entropy"

L2 = "l2"
L1 = "l1"

#: interior clamp for entropy log evaluations
ENTROPY_EPS = 1e-12

#: feasibility slack used by membership checks
FEAS_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometry configuration or infeasible input."""


def _as_vector(v, dim=None, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise GeometryError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise GeometryError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"{name} contains non-finite entries")
    return v


class ComponentSet:
    """A nonempty, closed, convex, bounded component set.

    Use the constructors :meth:`box`, :meth:`ball`, or :meth:`simplex`.
    """

    def __init__(self, kind, dim, lower=None, upper=None, center=None, radius=None):
        self.kind = kind
        self.dim = int(dim)
        if self.dim < 1:
            raise GeometryError("set dimension must be >= 1")
        self.lower = lower
        self.upper = upper
        self.center = center
        self.radius = radius

    @classmethod
    def box(cls, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise GeometryError("box bounds must have equal shapes")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise GeometryError("box bounds must be finite (bounded set required)")
        if np.any(lower > upper):
            raise GeometryError("box requires lower <= upper elementwise")
        return cls(BOX, lower.shape[0], lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        radius = float(radius)
        if radius <= 0:
            raise GeometryError("ball radius must be positive")
        if not np.all(np.isfinite(center)):
            raise GeometryError("ball center must be finite")
        return cls(BALL, center.shape[0], center=center, radius=radius)

    @classmethod
    def simplex(cls, dim):
        return cls(SIMPLEX, dim)

    def project(self, p):
        """Euclidean projection of ``p`` onto the set."""
        p = _as_vector(p, self.dim, "point")
        if self.kind == BOX:
            return np.clip(p, self.lower, self.upper)
        if self.kind == BALL:
            delta = p - self.center
            nrm = np.linalg.norm(delta)
            if nrm <= self.radius:
                return p.copy()
            return self.center + delta * (self.radius / nrm)
        return _project_simplex(p)

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        if self.kind == BOX:
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        if self.kind == BALL:
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    def bound(self, norm=L2):
        """Radius B with ||x|| <= B for every member, in the given norm."""
        if self.kind == BOX:
            corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
            return float(np.linalg.norm(corner)) if norm == L2 else float(corner.sum())
        if self.kind == BALL:
            if norm == L2:
                return float(np.linalg.norm(self.center) + self.radius)
            return float(np.abs(self.center).sum() + self.radius * np.sqrt(self.dim))
        return 1.0

    def sample(self, rng):
        """A uniformly random feasible point."""
        if self.kind == BOX:
            return rng.uniform(self.lower, self.upper)
        if self.kind == BALL:
            direction = rng.standard_normal(self.dim)
            nrm = np.linalg.norm(direction)
            if nrm == 0.0:
                return self.center.copy()
            rad = self.radius * rng.random() ** (1.0 / self.dim)
            return self.center + direction * (rad / nrm)
        return rng.dirichlet(np.ones(self.dim))

    def interior_point(self):
        if self.kind == BOX:
            return 0.5 * (self.lower + self.upper)
        if self.kind == BALL:
            return self.center.copy()
        return np.full(self.dim, 1.0 / self.dim)

    def support_max(self, g):
        """max over the set of <g, z> (closed form per set kind)."""
        g = _as_vector(g, self.dim, "direction")
        if self.kind == BOX:
            return float(np.sum(np.where(g >= 0, g * self.upper, g * self.lower)))
        if self.kind == BALL:
            return float(g @ self.center + self.radius * np.linalg.norm(g))
        return float(g.max())

    def argmax_linear(self, g):
        """A maximizer of <g, z> over the set."""
        g = _as_vector(g, self.dim, "direction")
        if self.kind == BOX:
            return np.where(g >= 0, self.upper, self.lower).astype(float)
        if self.kind == BALL:
            nrm = np.linalg.norm(g)
            if nrm == 0.0:
                return self.center.copy()
            return self.center + g * (self.radius / nrm)
        out = np.zeros(self.dim)
        out[int(np.argmax(g))] = 1.0
        return out

    def to_dict(self):
        if self.kind == BOX:
            return {"kind": BOX, "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.kind == BALL:
            return {"kind": BALL, "center": self.center.tolist(), "radius": self.radius}
        return {"kind": SIMPLEX, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == BOX:
            return cls.box(d["lower"], d["upper"])
        if kind == BALL:
            return cls.ball(d["center"], d["radius"])
        if kind == SIMPLEX:
            return cls.simplex(d["dim"])
        raise GeometryError(f"unknown set kind {kind!r}")

    def __repr__(self):
        return f"ComponentSet({self.kind}, dim={self.dim})"


def _project_simplex(v):
    # Sorting-based projection onto the unit simplex (Duchi et al. 2008).
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, n + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class BlockGeometry:
    """A component set paired with a DGF and a norm.

    Parameters
    ----------
    cset : ComponentSet
    dgf : {"euclidean", "entropy"}
        The entropy DGF is only defined on simplex sets.
    """

    def __init__(self, cset, dgf=EUCLIDEAN):
        self.set = cset
        self.dgf = dgf
        if dgf == EUCLIDEAN:
            self.norm_kind = L2
            self.mu_omega = 1.0
            self.l_omega = 1.0
        elif dgf == ENTROPY:
            if cset.kind != SIMPLEX:
                raise GeometryError("entropy DGF pairs only with simplex sets")
            self.norm_kind = L1
            self.mu_omega = 1.0  # Pinsker constant w.r.t. the L1 norm
            self.l_omega = 1.0 / ENTROPY_EPS  # surrogate for the clamped interior
        else:
            raise GeometryError(f"unknown DGF {dgf!r}")

    @property
    def dim(self):
        return self.set.dim

    def bound(self):
        return self.set.bound(self.norm_kind)

    def norm(self, v):
        v = np.asarray(v, dtype=float)
        if self.norm_kind == L2:
            return float(np.linalg.norm(v))
        return float(np.abs(v).sum())

    def dual_norm_value(self, v):
        v = np.asarray(v, dtype=float)
        if self.norm_kind == L2:
            return float(np.linalg.norm(v))
        return float(np.abs(v).max()) if v.size else 0.0

    def interior(self, x):
        """Clamp to the evaluation interior (no-op for euclidean)."""
        if self.dgf == EUCLIDEAN:
            return np.asarray(x, dtype=float)
        y = np.clip(np.asarray(x, dtype=float), ENTROPY_EPS, 1.0)
        return y / y.sum()

    def omega(self, x):
        if self.dgf == EUCLIDEAN:
            return 0.5 * float(x @ x)
        y = self.interior(x)
        return float(np.sum(y * np.log(y)))

    def omega_grad(self, x):
        if self.dgf == EUCLIDEAN:
            return np.asarray(x, dtype=float).copy()
        y = self.interior(x)
        return 1.0 + np.log(y)

    def feasible(self, x, tol=FEAS_TOL):
        return self.set.contains(x, tol)

    def to_dict(self):
        return {"set": self.set.to_dict(), "dgf": self.dgf}

    @classmethod
    def from_dict(cls, d):
        return cls(ComponentSet.from_dict(d["set"]), d.get("dgf", EUCLIDEAN))

    def __repr__(self):
        return f"BlockGeometry({self.set!r}, dgf={self.dgf})"


def bregman_distance(geom, x, y):
    """Bregman distance D(x, y) = omega(y) - omega(x) - <grad omega(x), y - x>.

    ``x`` is the anchor; for the entropy geometry both arguments are clamped
    to the interior before any log is taken, and the value reduces to the
    KL divergence KL(y || x) on the simplex.
    """
    x = _as_vector(x, geom.dim, "x")
    y = _as_vector(y, geom.dim, "y")
    _require_feasible(geom, x, "x")
    _require_feasible(geom, y, "y")
    return bregman_raw(geom, x, y)


def bregman_raw(geom, x, y):
    """bregman_distance without feasibility validation, for inner loops."""
    if geom.dgf == EUCLIDEAN:
        diff = y - x
        return 0.5 * float(diff @ diff)
    return geom.omega(y) - geom.omega(x) - float(geom.omega_grad(x) @ (y - x))


def prox_map(geom, x, y):
    """The prox mapping P(x, y) = argmin_z { <y, z> + D(x, z) } over the set.

    Closed forms throughout: the euclidean DGF gives a projected gradient
    step ``project(x - y)``; the entropy DGF gives the exponential-weights
    update ``z_j proportional to x_j * exp(-y_j)``.
    """
    x = _as_vector(x, geom.dim, "x")
    y = _as_vector(y, geom.dim, "y")
    _require_feasible(geom, x, "x")
    return prox_map_raw(geom, x, y)


def prox_map_raw(geom, x, y):
    """prox_map without input validation, for solver inner loops."""
    if geom.dgf == EUCLIDEAN:
        return geom.set.project(x - y)
    anchor = geom.interior(x)
    w = np.log(anchor) - y
    w -= w.max()
    z = np.exp(w)
    return z / z.sum()


def project(cset, p):
    """Euclidean projection onto a component set (idempotent)."""
    return cset.project(p)


def dual_norm(geom, v):
    """Dual norm of a block: L2 is self-dual; the L1 primal norm has Linf dual."""
    v = _as_vector(v, geom.dim, "v")
    return geom.dual_norm_value(v)


def _require_feasible(geom, v, name):
    if not geom.feasible(v):
        raise GeometryError(f"{name} is not feasible for {geom.set!r}")


class BlockStructure:
    """Block sizes and flat-array offsets for a Cartesian product of sets."""

    def __init__(self, sizes):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        if self.sizes.ndim != 1 or np.any(self.sizes < 1):
            raise GeometryError("block sizes must be positive integers")
        self.d = int(self.sizes.shape[0])
        self.offsets = np.zeros(self.d + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=self.offsets[1:])
        self.n = int(self.offsets[-1])
        self.slices = [slice(int(self.offsets[i]), int(self.offsets[i + 1])) for i in range(self.d)]

    @classmethod
    def from_geometries(cls, geoms):
        return cls([g.dim for g in geoms])

    def split(self, flat):
        flat = np.asarray(flat, dtype=float)
        return [flat[s] for s in self.slices]

    def __eq__(self, other):
        return isinstance(other, BlockStructure) and np.array_equal(self.sizes, other.sizes)

    def __repr__(self):
        return f"BlockStructure(sizes={self.sizes.tolist()})"


class BlockVector:
    """A point of the product space, stored flat with block views.

    Constructed either from a flat array (``BlockVector(structure, data)``)
    or from per-block vectors (:meth:`from_blocks`).
    """

    def __init__(self, structure, data=None):
        self.structure = structure
        if data is None:
            self.data = np.zeros(structure.n)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != (structure.n,):
                raise GeometryError(
                    f"flat data has shape {data.shape}, expected ({structure.n},)"
                )
            self.data = data

    @classmethod
    def from_blocks(cls, blocks):
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        structure = BlockStructure([b.shape[0] for b in blocks])
        return cls(structure, np.concatenate(blocks))

    @property
    def d(self):
        return self.structure.d

    @property
    def blocks(self):
        return self.structure.split(self.data)

    def block(self, i):
        return self.data[self.structure.slices[i]]

    def copy(self):
        return BlockVector(self.structure, self.data.copy())

    def __len__(self):
        return self.structure.n

    def __repr__(self):
        return f"BlockVector(d={self.d}, n={self.structure.n})"


def as_flat(x):
    """Accept a BlockVector or array-like; return the flat float array."""
    if isinstance(x, BlockVector):
        return x.data
    return np.asarray(x, dtype=float)


def composite_norm_sq(geoms, structure, v):
    """Squared composite norm sum_i ||v^i||_i^2 (block norms per geometry)."""
    v = as_flat(v)
    total = 0.0
    for geom, s in zip(geoms, structure.slices):
        total += geom.norm(v[s]) ** 2
    return total
