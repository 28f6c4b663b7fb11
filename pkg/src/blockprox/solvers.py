"""Randomized-block and full-block stochastic mirror-prox solvers.

Two algorithms:

* :func:`run_bsmp` - per iteration, one block is drawn from a probability
  vector and updated by two consecutive prox steps; the first evaluates the
  block of the stochastic map at the current iterate, the second at the
  extrapolated point, both anchored at the current iterate.  An optional
  weighted running average of the iterates with weights ``gamma_k^r`` is
  maintained.
* :func:`run_smp` - every block is updated each iteration, and the weighted
  average is taken over the extrapolated points ``y_{k+1}`` instead.

Randomness contract: a run with seed s draws, in order, the initial point
(block by block), then per chunk of ``CHUNK`` iterations the block picks (as
uniforms through the inverse CDF, block algorithm only), the first noise
panel, and the second noise panel.  Chunk boundaries are fixed, so traces do
not depend on checkpoint placement, and a run is a pure function of
(problem, config, backend).

The running average ``S_{k+1} = S_k + gamma_{k+1}^r`` makes the closed form
``xbar_k = sum_t gamma_t^r x_t / sum_t gamma_t^r`` hold exactly; the
full-block average is seeded at zero weight so that ``ybar_1 = y_1``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .geometry import as_flat, composite_norm_sq, prox_map_raw

CHUNK = 16384

HARMONIC = "harmonic"
INV_SQRT = "inv_sqrt"
CONSTANT = "constant"

BSMP = "bsmp"
SMP = "smp"


class SolverError(ValueError):
    """Invalid solver configuration."""


class DivergenceError(RuntimeError):
    """Iterate norm exceeded the guard threshold; signals a geometry bug."""


@dataclass
class StepsizeSchedule:
    """Step-size rule gamma_k.

    kinds: ``harmonic`` (gamma0 at k=0, gamma0/k after; square-summable and
    non-summable), ``inv_sqrt`` (gamma0/sqrt(k+1), non-increasing), and
    ``constant``.
    """

    kind: str
    gamma0: float

    def __post_init__(self):
        if self.kind not in (HARMONIC, INV_SQRT, CONSTANT):
            raise SolverError(f"unknown schedule kind {self.kind!r}")
        self.gamma0 = float(self.gamma0)
        if not np.isfinite(self.gamma0) or self.gamma0 <= 0:
            raise SolverError("schedule gamma0 must be positive")

    def gamma(self, k):
        if self.kind == HARMONIC:
            return self.gamma0 if k == 0 else self.gamma0 / k
        if self.kind == INV_SQRT:
            return self.gamma0 / np.sqrt(k + 1.0)
        return self.gamma0

    def gammas(self, k0, k1):
        """Vector of gamma_k for k in [k0, k1)."""
        ks = np.arange(k0, k1, dtype=float)
        if self.kind == HARMONIC:
            return self.gamma0 / np.maximum(ks, 1.0)
        if self.kind == INV_SQRT:
            return self.gamma0 / np.sqrt(ks + 1.0)
        return np.full(k1 - k0, self.gamma0)

    def to_dict(self):
        return {"kind": self.kind, "gamma0": self.gamma0}


def _validate_probs(block_probs, d):
    if block_probs is None:
        return np.full(d, 1.0 / d)
    p = np.asarray(block_probs, dtype=float)
    if p.shape != (d,):
        raise SolverError(f"block_probs must have length d = {d}")
    if np.any(p <= 0):
        raise SolverError("block probabilities must all be positive")
    if abs(p.sum() - 1.0) > 1e-12:
        raise SolverError("block probabilities must sum to 1")
    return p


@dataclass
class BsmpConfig:
    """Configuration of the randomized-block solver."""

    schedule: StepsizeSchedule
    iterations: int
    seed: int = 0
    block_probs: object = None
    averaging_exponent: float | None = None
    checkpoints: object = None
    track_error: bool = False

    def __post_init__(self):
        self.iterations = int(self.iterations)
        if self.iterations < 0:
            raise SolverError("iterations must be nonnegative")
        if self.averaging_exponent is not None:
            self.averaging_exponent = float(self.averaging_exponent)
            if self.averaging_exponent >= 1.0:
                raise SolverError("averaging exponent must be strictly below 1")

    def to_dict(self):
        return {
            "algorithm": BSMP,
            "schedule": self.schedule.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "block_probs": None if self.block_probs is None else list(map(float, self.block_probs)),
            "averaging_exponent": self.averaging_exponent,
        }


@dataclass
class SmpConfig:
    """Configuration of the full-block solver (always maintains the average)."""

    schedule: StepsizeSchedule
    iterations: int
    seed: int = 0
    averaging_exponent: float = 0.0
    checkpoints: object = None
    track_error: bool = False

    def __post_init__(self):
        self.iterations = int(self.iterations)
        if self.iterations < 0:
            raise SolverError("iterations must be nonnegative")
        self.averaging_exponent = float(self.averaging_exponent)
        if self.averaging_exponent >= 1.0:
            raise SolverError("averaging exponent must be strictly below 1")

    def to_dict(self):
        return {
            "algorithm": SMP,
            "schedule": self.schedule.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "averaging_exponent": self.averaging_exponent,
        }


@dataclass
class RunTrace:
    """Checkpointed snapshots of a solver run.

    ``iterates[j]`` is x_k after ``ks[j]`` iterations.  ``averages[j]`` holds
    the weighted average at that point: xbar_k for the block algorithm, or
    ybar_k for the full-block algorithm (NaN at k=0, where the average over
    extrapolated points is not yet defined).  ``error``, when tracked, holds
    the composite-norm distance to the known solution after every iteration
    (index k, length K+1).
    """

    ks: np.ndarray
    iterates: np.ndarray
    averages: np.ndarray | None
    avg_weight: np.ndarray | None
    error: np.ndarray | None
    algorithm: str
    backend: str
    seed: int
    wall_time: float
    config: dict = field(default_factory=dict)

    def checkpoint_index(self, k):
        idx = np.searchsorted(self.ks, k)
        if idx == len(self.ks) or self.ks[idx] != k:
            raise KeyError(f"no checkpoint at iteration {k}")
        return int(idx)

    def iterate_at(self, k):
        return self.iterates[self.checkpoint_index(k)]

    def average_at(self, k):
        if self.averages is None:
            raise KeyError("run kept no averages")
        return self.averages[self.checkpoint_index(k)]


def default_checkpoints(iterations):
    """Geometric ks plus multiples of K/20, always including 0 and K."""
    ks = {0, iterations}
    j = 1
    while j <= iterations:
        ks.add(j)
        j *= 2
    stride = max(1, iterations // 20)
    ks.update(range(stride, iterations + 1, stride))
    return sorted(ks)


def _resolve_checkpoints(checkpoints, iterations):
    if checkpoints is None:
        return default_checkpoints(iterations)
    ks = sorted({int(k) for k in checkpoints} | {0, iterations})
    if ks[0] < 0 or ks[-1] > iterations:
        raise SolverError("checkpoints must lie in [0, iterations]")
    return ks


def weighted_average_update(s_weight, xbar, x_new, gamma_new, r):
    """One step of the weighted-average recursion.

    Returns ``(S', xbar')`` with ``S' = S + gamma_new^r`` and
    ``xbar' = (S xbar + gamma_new^r x_new) / S'``, so that the running
    average equals the closed-form weighted sum of all iterates seen.
    """
    if s_weight <= 0:
        raise SolverError("running weight must be positive")
    if r >= 1.0:
        raise SolverError("averaging exponent must be strictly below 1")
    w = float(gamma_new) ** r
    s_new = s_weight + w
    return s_new, xbar + (w / s_new) * (x_new - xbar)


def auto_gamma0(problem, rule, gamma=1.0):
    """Prescribed gamma0 for the two analyzed regimes.

    ``harmonic_strong``: d * max_i L_omega_i / mu, for the harmonic schedule
    on strongly pseudo-monotone instances.  ``sqrt_d``: gamma * sqrt(d), for
    the averaged inverse-sqrt schedule (free factor ``gamma`` defaults to 1).
    """
    if rule == "harmonic_strong":
        mu = problem.constants.strong_mu
        if mu is None:
            raise SolverError("harmonic_strong rule needs the strong modulus mu")
        l_max = max(g.l_omega for g in problem.geometries)
        return problem.d * l_max / mu
    if rule == "sqrt_d":
        return float(gamma) * np.sqrt(problem.d)
    raise SolverError(f"unknown auto-gamma0 rule {rule!r}")


# ---------------------------------------------------------------------------
# python loops (generic fallback; same array contract as the compiled kernels)
# ---------------------------------------------------------------------------


def _bsmp_chunk_python(problem, x, blocks, gam, wavg, xbar, s_weight, zt, z, err, x_star):
    geoms = problem.geometries
    slices = problem.structure.slices
    sig_t = problem.sigma_coord_tilde
    sig = problem.sigma_coord
    fmap = problem.expected_map
    for t in range(gam.shape[0]):
        i = int(blocks[t])
        s = slices[i]
        gk = gam[t]
        g = fmap(x)[s] + sig_t[s] * zt[t, s]
        anchor = x[s].copy()
        x[s] = prox_map_raw(geoms[i], anchor, gk * g)
        g2 = fmap(x)[s] + sig[s] * z[t, s]
        x[s] = prox_map_raw(geoms[i], anchor, gk * g2)
        if xbar is not None:
            w = wavg[t]
            s_weight = s_weight + w
            xbar += (w / s_weight) * (x - xbar)
        if err is not None:
            err[t] = np.sqrt(composite_norm_sq(geoms, problem.structure, x - x_star))
    return s_weight


def _smp_chunk_python(problem, x, gam, wavg, ybar, s_weight, zt, z, err, x_star):
    geoms = problem.geometries
    slices = problem.structure.slices
    sig_t = problem.sigma_coord_tilde
    sig = problem.sigma_coord
    fmap = problem.expected_map
    y = np.empty_like(x)
    for t in range(gam.shape[0]):
        gk = gam[t]
        fx = fmap(x) + sig_t * zt[t]
        for i, s in enumerate(slices):
            y[s] = prox_map_raw(geoms[i], x[s], gk * fx[s])
        fy = fmap(y) + sig * z[t]
        for i, s in enumerate(slices):
            x[s] = prox_map_raw(geoms[i], x[s], gk * fy[s])
        if ybar is not None:
            w = wavg[t]
            s_weight = s_weight + w
            ybar += (w / s_weight) * (y - ybar)
        if err is not None:
            err[t] = np.sqrt(composite_norm_sq(geoms, problem.structure, x - x_star))
    return s_weight


def _kernel_args(problem):
    aff = problem.affine
    lower = np.concatenate([g.set.lower for g in problem.geometries])
    upper = np.concatenate([g.set.upper for g in problem.geometries])
    return (
        np.ascontiguousarray(aff.matrix),
        np.ascontiguousarray(aff.offset),
        int(aff.scale_kind),
        float(aff.s0),
        float(aff.s1),
        problem.structure.offsets,
        lower,
        upper,
        problem.sigma_coord_tilde,
        problem.sigma_coord,
    )


def bsmp_step(problem, x, gamma, block, rng):
    """One randomized-block step at a given block index.

    Draws the two noise realizations from ``rng`` (a full standard-normal
    panel each, of which only the active block is consumed) and returns the
    next iterate; blocks other than ``block`` are copied unchanged.
    """
    x = as_flat(x).copy()
    zt = rng.standard_normal((1, problem.n))
    z = rng.standard_normal((1, problem.n))
    blocks = np.array([block], dtype=np.int64)
    gam = np.array([float(gamma)])
    _bsmp_chunk_python(problem, x, blocks, gam, None, None, 1.0, zt, z, None, None)
    return x


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _initial_point(problem, rng):
    return np.concatenate([g.set.sample(rng) for g in problem.geometries])


def _guard_threshold(problem):
    return 1e3 * max(g.bound() for g in problem.geometries)


def run_bsmp(problem, config, backend="auto"):
    """Run the randomized-block stochastic mirror-prox algorithm.

    Returns a :class:`RunTrace`; deterministic given (problem, config,
    backend).
    """
    return _run(problem, BSMP, config, backend)


def run_smp(problem, config, backend="auto"):
    """Run the full-block stochastic mirror-prox algorithm with averaging."""
    return _run(problem, SMP, config, backend)


def _run(problem, algorithm, config, backend):
    t_start = time.perf_counter()
    chosen = backends.select_backend(backend, problem)
    schedule = config.schedule
    K = config.iterations
    r = config.averaging_exponent
    averaging = algorithm == SMP or r is not None
    if algorithm == BSMP:
        probs = _validate_probs(config.block_probs, problem.d)
        cum_probs = np.cumsum(probs)
    else:
        probs = None

    rng = np.random.default_rng(config.seed)
    x = _initial_point(problem, rng)
    n = problem.n

    if algorithm == BSMP and averaging:
        s_weight = schedule.gamma(0) ** r
        avg = x.copy()
    elif algorithm == SMP:
        s_weight = 0.0
        avg = np.zeros(n)
    else:
        s_weight = 0.0
        avg = None

    checkpoints = _resolve_checkpoints(config.checkpoints, K)
    ck_set = set(checkpoints)
    n_ck = len(checkpoints)
    snaps = np.empty((n_ck, n))
    avg_snaps = np.empty((n_ck, n)) if averaging else None
    weight_snaps = np.empty(n_ck) if averaging else None

    track_error = bool(config.track_error)
    if track_error and problem.known_solution is None:
        raise SolverError("track_error requires a problem with a known solution")
    x_star = problem.known_solution
    error = np.empty(K + 1) if track_error else None
    if track_error:
        error[0] = np.sqrt(composite_norm_sq(problem.geometries, problem.structure, x - x_star))

    ck_idx = 0

    def snapshot(k):
        nonlocal ck_idx
        snaps[ck_idx] = x
        if averaging:
            if algorithm == SMP and k == 0:
                avg_snaps[ck_idx] = np.nan  # ybar_0 is not a feasible average
            else:
                avg_snaps[ck_idx] = avg
            weight_snaps[ck_idx] = s_weight
        ck_idx += 1

    snapshot(0)
    guard = _guard_threshold(problem)
    use_kernel = chosen == backends.COMPILED
    if use_kernel:
        kargs = _kernel_args(problem)
        from . import _kernels
    dummy = np.zeros(1)

    for c0 in range(0, K, CHUNK):
        c1 = min(c0 + CHUNK, K)
        m = c1 - c0
        if algorithm == BSMP:
            u = rng.random(m)
            blocks = np.minimum(
                np.searchsorted(cum_probs, u, side="right"), problem.d - 1
            ).astype(np.int64)
        zt = rng.standard_normal((m, n))
        z = rng.standard_normal((m, n))
        gam = schedule.gammas(c0, c1)
        if averaging:
            if algorithm == BSMP:
                wavg = schedule.gammas(c0 + 1, c1 + 1) ** r
            else:
                wavg = gam ** config.averaging_exponent
        else:
            wavg = None

        cuts = [k for k in checkpoints if c0 < k < c1]
        a = c0
        for b_end in cuts + [c1]:
            lo, hi = a - c0, b_end - c0
            if hi > lo:
                seg = slice(lo, hi)
                err_seg = error[a + 1 : b_end + 1] if track_error else None
                if use_kernel:
                    fn = _kernels.bsmp_chunk if algorithm == BSMP else _kernels.smp_chunk
                    pos = (blocks[seg], gam[seg]) if algorithm == BSMP else (gam[seg],)
                    s_weight = fn(
                        *kargs,
                        x,
                        *pos,
                        1 if averaging else 0,
                        wavg[seg] if averaging else dummy,
                        avg if averaging else dummy,
                        s_weight,
                        zt[seg],
                        z[seg],
                        1 if track_error else 0,
                        err_seg if track_error else dummy,
                        x_star if track_error else dummy,
                    )
                else:
                    if algorithm == BSMP:
                        s_weight = _bsmp_chunk_python(
                            problem, x, blocks[seg], gam[seg],
                            wavg[seg] if averaging else None,
                            avg, s_weight, zt[seg], z[seg], err_seg, x_star,
                        )
                    else:
                        s_weight = _smp_chunk_python(
                            problem, x, gam[seg],
                            wavg[seg], avg, s_weight, zt[seg], z[seg], err_seg, x_star,
                        )
            if b_end in ck_set and b_end < c1:
                snapshot(b_end)
            a = b_end
        if c1 in ck_set:
            snapshot(c1)
        if np.max(np.abs(x)) > guard:
            raise DivergenceError(
                f"iterate norm exceeded {guard:.3e}; projections must be broken"
            )

    cfg = config.to_dict()
    cfg["checkpoints"] = checkpoints
    return RunTrace(
        ks=np.asarray(checkpoints, dtype=np.int64),
        iterates=snaps,
        averages=avg_snaps,
        avg_weight=weight_snaps,
        error=error,
        algorithm=algorithm,
        backend=chosen,
        seed=config.seed,
        wall_time=time.perf_counter() - t_start,
        config=cfg,
    )
