"""Error functionals, rate constants, rate fitting, and auxiliary verifiers.

The Lyapunov function is the block-probability-weighted Bregman distance
``L(x, y) = sum_i p_i^{-1} D_i(x^i, y^i)``; the mean-squared error uses the
composite norm ``||v||^2 = sum_i ||v^i||_i^2`` (squared L1 per block for
entropy geometry, which is exactly the norm the rate bounds are stated in).

The gap function ``G(x) = sup_{y in X} <F(y), x - y>`` is approximated from
below: every method only evaluates feasible candidates, and the candidate
``y = x`` guarantees nonnegativity.  For affine monotone maps the supremum
is a concave quadratic maximized exactly (with a concavity certificate); a
grid search serves as the brute-force oracle in low dimension, and a
multi-start numerical ascent covers everything else.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import BALL, BOX, BlockStructure, as_flat, bregman_raw, composite_norm_sq


class MetricError(ValueError):
    """Invalid metric inputs."""


class GapError(RuntimeError):
    """Gap method inapplicable or failed to certify its tolerance."""


def mse(geoms, x, x_star):
    """Squared composite-norm distance sum_i ||x^i - x*^i||_i^2."""
    structure = BlockStructure.from_geometries(geoms)
    x = as_flat(x)
    x_star = as_flat(x_star)
    if x.shape != x_star.shape:
        raise MetricError("shape mismatch")
    return composite_norm_sq(geoms, structure, x - x_star)


def lyapunov(block_probs, geoms, x, y):
    """L(x, y) = sum_i p_i^{-1} D_i(x^i, y^i); zero iff x = y."""
    structure = BlockStructure.from_geometries(geoms)
    p = np.asarray(block_probs, dtype=float)
    if p.shape != (structure.d,):
        raise MetricError("block_probs length must match the number of blocks")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise MetricError("block_probs must be a positive probability vector")
    x = as_flat(x)
    y = as_flat(y)
    total = 0.0
    for pi, geom, s in zip(p, geoms, structure.slices):
        total += bregman_raw(geom, x[s], y[s]) / pi
    return total


# ---------------------------------------------------------------------------
# gap function
# ---------------------------------------------------------------------------


def gap_function(problem, x, method="auto", resolution=1e-2, starts=16, tol=None):
    """Lower approximation of G(x) = sup_{y in X} <F(y), x - y>.

    method: ``affine_exact`` (concave QP solved by projected gradient ascent
    to a 1e-10 certificate; requires an unscaled affine monotone map),
    ``grid`` (brute force, test oracle for small n), ``multistart``
    (derivative-free projected ascent from ``starts`` points), or ``auto``.
    """
    x = as_flat(x)
    if not problem.feasible(x, tol=1e-7):
        raise MetricError("gap_function requires a feasible point")
    if method == "auto":
        method = (
            "affine_exact"
            if problem.affine is not None and problem.affine.scale_kind == 0
            else "multistart"
        )
    if method == "affine_exact":
        return _gap_affine_exact(problem, x, tol=1e-10 if tol is None else tol)
    if method == "grid":
        return _gap_grid(problem, x, resolution)
    if method == "multistart":
        return _gap_multistart(problem, x, starts, tol=1e-8 if tol is None else tol)
    raise GapError(f"unknown gap method {method!r}")


def _gap_affine_exact(problem, x, tol, max_iter=500_000):
    aff = problem.affine
    if aff is None or aff.scale_kind != 0:
        raise GapError("affine_exact needs an unscaled affine map")
    A, b = aff.matrix, aff.offset
    H = 0.5 * (A + A.T)
    if float(np.linalg.eigvalsh(H).min()) < -1e-8:
        raise GapError("affine_exact needs a monotone map (PSD symmetric part)")
    sets = [g.set for g in problem.geometries]
    slices = problem.structure.slices
    lin = A.T @ x - b

    def value(y):
        return float((A @ y + b) @ (x - y))

    smooth = 2.0 * float(np.linalg.norm(H, 2))
    if smooth < 1e-14:
        # purely skew map: the objective is linear in y
        y = np.concatenate([s.argmax_linear(lin[sl]) for s, sl in zip(sets, slices)])
        return value(y)
    y = x.copy()
    step = 1.0 / smooth
    for _ in range(max_iter):
        g = lin - 2.0 * (H @ y)
        cert = sum(s.support_max(g[sl]) - float(g[sl] @ y[sl]) for s, sl in zip(sets, slices))
        if cert <= tol:
            return value(y)
        y = np.concatenate([s.project(y[sl] + step * g[sl]) for s, sl in zip(sets, slices)])
    raise GapError(f"gap ascent failed to certify tolerance {tol:g}")


def _gap_candidates_1d(cset, resolution):
    if cset.kind == BOX:
        grids = []
        for lo, hi in zip(cset.lower, cset.upper):
            num = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
            grids.append(np.linspace(lo, hi, num))
        pts = np.array(list(itertools.product(*grids)))
        return pts
    if cset.kind == BALL:
        grids = []
        for j in range(cset.dim):
            lo = cset.center[j] - cset.radius
            hi = cset.center[j] + cset.radius
            num = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
            grids.append(np.linspace(lo, hi, num))
        pts = np.array(list(itertools.product(*grids)))
        keep = np.linalg.norm(pts - cset.center, axis=1) <= cset.radius + 1e-12
        return np.vstack([pts[keep], cset.center])
    # simplex: compositions of m = ceil(1/resolution) steps
    m = max(1, int(math.ceil(1.0 / resolution)))
    pts = []
    for combo in itertools.combinations(range(m + cset.dim - 1), cset.dim - 1):
        parts = []
        prev = -1
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(m + cset.dim - 2 - prev)
        pts.append(np.asarray(parts, dtype=float) / m)
    return np.asarray(pts)


def _gap_grid(problem, x, resolution, max_points=8_000_000):
    per_block = [_gap_candidates_1d(g.set, resolution) for g in problem.geometries]
    total = int(np.prod([p.shape[0] for p in per_block], dtype=np.float64))
    if total > max_points:
        raise GapError(f"grid of {total} points exceeds the {max_points} cap")
    candidates = per_block[0]
    for nxt in per_block[1:]:
        candidates = np.hstack(
            [np.repeat(candidates, nxt.shape[0], axis=0), np.tile(nxt, (candidates.shape[0], 1))]
        )
    best = 0.0  # candidate y = x gives exactly 0
    aff = problem.affine
    if aff is not None:
        vals = np.einsum(
            "ij,ij->i", candidates @ aff.matrix.T + aff.offset, x[None, :] - candidates
        )
        if aff.scale_kind == 1:
            vals *= aff.s0 + aff.s1 * np.sin(candidates.sum(axis=1))
        best = max(best, float(vals.max()))
    else:
        for y in candidates:
            best = max(best, float(problem.expected_map(y) @ (x - y)))
    return best


def _gap_multistart(problem, x, starts, tol, max_iter=2000):
    rng = np.random.default_rng(0)
    sets = [g.set for g in problem.geometries]
    slices = problem.structure.slices

    def value(y):
        return float(problem.expected_map(y) @ (x - y))

    def num_grad(y, h=1e-6):
        g = np.empty_like(y)
        for j in range(y.shape[0]):
            yp = y.copy()
            ym = y.copy()
            yp[j] += h
            ym[j] -= h
            g[j] = (value(yp) - value(ym)) / (2 * h)
        return g

    def project(v):
        return np.concatenate([s.project(v[sl]) for s, sl in zip(sets, slices)])

    candidates = [x.copy(), np.concatenate([s.interior_point() for s in sets])]
    candidates += [problem.sample_point(rng) for _ in range(max(0, starts - 2))]
    best = 0.0
    for y in candidates:
        y = project(y)
        val = value(y)
        step = 1.0
        for _ in range(max_iter):
            g = num_grad(y)
            improved = False
            t = step
            for _ in range(30):
                y_new = project(y + t * g)
                v_new = value(y_new)
                if v_new > val + 1e-12:
                    y, val, step, improved = y_new, v_new, min(t * 2.0, 1e6), True
                    break
                t *= 0.5
            if not improved or np.linalg.norm(t * g) < tol:
                break
        best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# rate constants
# ---------------------------------------------------------------------------


@dataclass
class RateConstants:
    """Constants of the three rate guarantees and their drift coefficients.

    ``lyapunov_drift`` is the coefficient of gamma_k^2 in the one-step
    Lyapunov recursion, sum_i ((C_i^2 + nu_i^2)/mu_omega_i + 2 L_i B_i (C_i
    + nu~_i)); ``gap_drift`` is its counterpart in the full-block gap
    analysis, sum_i (2/mu_omega_i)(2 C_i^2 + nu~_i^2 + 1.25 nu_i^2).  The
    guarantees are then

    * MSE <= mse_constant * d / k, with
      mse_constant = 4 * lyapunov_drift * (max L_omega)^2 / (mu^2 min mu_omega)
    * E f(xbar_K) - f* <= objective_constant * sqrt(d/K), with
      objective_constant = (2-r) 2^{1-r/2} (2 sum L_omega B^2 / g
                           + g * lyapunov_drift / (1-r))
    * E G(ybar_K) <= gap_constant / sqrt(K), with
      gap_constant = (2-r) 2^{1-r/2} (4 sum L_omega B^2 / g0
                     + g0 * gap_drift / (1-r))
    """

    lyapunov_drift: float
    gap_drift: float
    mse_constant: float | None = None
    objective_constant: float | None = None
    gap_constant: float | None = None

    def to_dict(self):
        return {
            "lyapunov_drift": self.lyapunov_drift,
            "gap_drift": self.gap_drift,
            "mse_constant": self.mse_constant,
            "objective_constant": self.objective_constant,
            "gap_constant": self.gap_constant,
        }


def rate_constants(constants, geoms, r=None, gamma0=None, gamma_factor=None, mu=None):
    """Evaluate the rate constants from certified problem constants.

    ``gamma_factor`` is the free factor in gamma0 = gamma_factor * sqrt(d)
    for the averaged block scheme; ``gamma0`` is the full-block scheme's
    step scale.  Constants whose inputs are missing come back as None.
    """
    if r is not None and r >= 1.0:
        raise MetricError("averaging exponent r must be strictly below 1")
    mu_omega = np.array([g.mu_omega for g in geoms])
    l_omega = np.array([g.l_omega for g in geoms])
    big_b = constants.set_bound
    big_c = constants.map_bound
    big_l = constants.block_lipschitz
    nu = constants.noise_std
    nu_t = constants.noise_std_tilde
    theta = float(
        np.sum((big_c**2 + nu**2) / mu_omega + 2.0 * big_l * big_b * (big_c + nu_t))
    )
    gap_drift = float(np.sum((2.0 / mu_omega) * (2.0 * big_c**2 + nu_t**2 + 1.25 * nu**2)))
    if mu is None:
        mu = constants.strong_mu
    mse_c = None
    if mu is not None:
        mse_c = 4.0 * theta * float(l_omega.max()) ** 2 / (mu**2 * float(mu_omega.min()))
    obj_c = None
    if r is not None and gamma_factor is not None:
        lead = (2.0 - r) * 2.0 ** (1.0 - 0.5 * r)
        sum_lb = float(np.sum(l_omega * big_b**2))
        obj_c = lead * (2.0 * sum_lb / gamma_factor + gamma_factor * theta / (1.0 - r))
    gap_c = None
    if r is not None and gamma0 is not None:
        lead = (2.0 - r) * 2.0 ** (1.0 - 0.5 * r)
        sum_lb = float(np.sum(l_omega * big_b**2))
        gap_c = lead * (4.0 * sum_lb / gamma0 + gamma0 * gap_drift / (1.0 - r))
    return RateConstants(theta, gap_drift, mse_c, obj_c, gap_c)


def lyapunov_contraction(constants, geoms, block_probs):
    """The one-step contraction coefficient 2 mu min_i p_i / max_i L_omega_i."""
    if constants.strong_mu is None:
        raise MetricError("contraction coefficient needs the strong modulus mu")
    p = np.asarray(block_probs, dtype=float)
    return 2.0 * constants.strong_mu * float(p.min()) / max(g.l_omega for g in geoms)


def averaged_objective_bound(constants, geoms, block_probs, schedule, r, K):
    """Finite-horizon bound on E[f(xbar_K)] - f* for the averaged block scheme.

    Evaluates, with the exact step sums of the given schedule,
    ``(sum_k g_k^r)^{-1} (2 g_K^{r-1} sum_i p_i^{-1} L_omega_i B_i^2
    + theta sum_k g_k^{r+1})`` over k = 0..K.
    """
    p = np.asarray(block_probs, dtype=float)
    gams = schedule.gammas(0, K + 1)
    sum_r = float(np.sum(gams**r))
    sum_r1 = float(np.sum(gams ** (r + 1.0)))
    l_omega = np.array([g.l_omega for g in geoms])
    theta = rate_constants(constants, geoms).lyapunov_drift
    lead = 2.0 * gams[-1] ** (r - 1.0) * float(np.sum(l_omega * constants.set_bound**2 / p))
    return (lead + theta * sum_r1) / sum_r


def smp_gap_bound(constants, geoms, schedule, r, K):
    """Finite-horizon bound on E[G(ybar_K)] for the full-block scheme."""
    gams = schedule.gammas(0, K)
    sum_r = float(np.sum(gams**r))
    sum_r1 = float(np.sum(gams ** (r + 1.0)))
    l_omega = np.array([g.l_omega for g in geoms])
    gap_drift = rate_constants(constants, geoms).gap_drift
    lead = 4.0 * gams[-1] ** (r - 1.0) * float(np.sum(l_omega * constants.set_bound**2))
    return (lead + gap_drift * sum_r1) / sum_r


# ---------------------------------------------------------------------------
# rate fitting and auxiliary verifiers
# ---------------------------------------------------------------------------


def fit_rate(ks, values, k_min=100):
    """Least-squares slope and intercept of log(value) against log(k)."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = ks >= k_min
    ks, values = ks[mask], values[mask]
    if ks.shape[0] < 5:
        raise MetricError("need at least 5 checkpoints at or beyond k_min")
    if np.any(values <= 0):
        raise MetricError("rate fit needs positive values")
    slope, intercept = np.polyfit(np.log(ks), np.log(values), 1)
    return float(slope), float(intercept)


@dataclass
class RecursionReport:
    """Worst-case simulation report for the recursive-sequence rate lemma."""

    passed: bool
    general_ok: bool
    special_ok: bool | None
    max_ratio: float
    k_threshold: int
    inputs: dict

    def to_dict(self):
        return {
            "passed": self.passed,
            "general_ok": self.general_ok,
            "special_ok": self.special_ok,
            "max_ratio": self.max_ratio,
            "k_threshold": self.k_threshold,
            "inputs": self.inputs,
        }


def verify_recursion_lemma(alpha, beta, gamma, e0, iterations=100_000):
    """Simulate e_{k+1} = (1 - alpha*gamma_k) e_k + beta*gamma_k^2 at equality.

    Steps are gamma_0 = gamma and gamma_k = gamma/k.  Checks the 1/k bound
    max{beta*gamma^2/(alpha*gamma - 1), K e_K}/k from k = ceil(alpha*gamma)
    on, and additionally the 8*beta/(alpha^2 k) bound for k >= 2 when
    gamma = 2/alpha.  The sequence is clamped at zero where the equality
    recursion would turn negative (a nonnegative sequence cannot follow the
    equality there, and zero is the extreme admissible value).
    """
    alpha, beta, gamma, e0 = map(float, (alpha, beta, gamma, e0))
    if alpha <= 0 or beta < 0 or gamma <= 0 or e0 < 0:
        raise MetricError("alpha, gamma must be positive and beta, e0 nonnegative")
    if alpha * gamma <= 1.0:
        raise MetricError("need gamma > 1/alpha")
    K = int(iterations)
    e = np.empty(K + 1)
    e[0] = e0
    # While gamma_k >= 1/alpha the contraction factor can be nonpositive and
    # the clamp at zero may fire; past that point the recursion is linear
    # with factors in (0, 1) and solves in closed form via products.
    k_lin = min(int(math.floor(alpha * gamma)) + 1, K)
    val = e0
    for k in range(k_lin):
        gk = gamma if k == 0 else gamma / k
        val = (1.0 - alpha * gk) * val + beta * gk * gk
        if val < 0.0:
            val = 0.0
        e[k + 1] = val
    if k_lin < K and alpha * gamma <= 20.0:
        ks = np.arange(k_lin, K, dtype=float)
        factors = 1.0 - alpha * gamma / ks
        drifts = beta * (gamma / ks) ** 2
        prods = np.cumprod(factors)
        e[k_lin + 1 :] = prods * (e[k_lin] + np.cumsum(drifts / prods))
    else:
        for k in range(k_lin, K):
            gk = gamma / k
            val = (1.0 - alpha * gk) * val + beta * gk * gk
            e[k + 1] = val
    k0 = int(math.ceil(alpha * gamma))
    slack = 1.0 + 1e-12
    general_ok = True
    if k0 <= K:
        theta = max(beta * gamma**2 / (alpha * gamma - 1.0), k0 * e[k0])
        ks = np.arange(k0, K + 1, dtype=float)
        general_ok = bool(np.all(e[k0:] * ks <= theta * slack + 1e-300))
    special_ok = None
    max_ratio = 0.0
    if abs(gamma - 2.0 / alpha) <= 1e-12 * gamma and K >= 2:
        bound8 = 8.0 * beta / alpha**2
        ks = np.arange(2, K + 1, dtype=float)
        scaled = e[2:] * ks
        if beta > 0:
            max_ratio = float(scaled.max() / bound8)
            special_ok = bool(max_ratio <= slack)
        else:
            max_ratio = float(scaled.max())
            special_ok = bool(max_ratio <= 1e-300)
    passed = general_ok and (special_ok is None or special_ok)
    return RecursionReport(
        passed,
        general_ok,
        special_ok,
        max_ratio,
        k0,
        {"alpha": alpha, "beta": beta, "gamma": gamma, "e0": e0, "iterations": K},
    )


@dataclass
class StepsizeSumsReport:
    """Upper/lower bound verification for inverse-sqrt step-size sums."""

    passed: bool
    upper_ok: bool
    lower_ok: bool
    threshold_met: bool
    sum_r_plus_1: float
    upper_bound: float
    sum_r: float
    lower_bound: float
    inputs: dict

    def to_dict(self):
        return {
            "passed": self.passed,
            "upper_ok": self.upper_ok,
            "lower_ok": self.lower_ok,
            "threshold_met": self.threshold_met,
            "sum_r_plus_1": self.sum_r_plus_1,
            "upper_bound": self.upper_bound,
            "sum_r": self.sum_r,
            "lower_bound": self.lower_bound,
            "inputs": self.inputs,
        }


def verify_stepsize_sums(gamma0, r, iterations):
    """Check the two step-sum bounds for gamma_k = gamma0/sqrt(k+1).

    Upper (any horizon): sum_{k=0}^K gamma_k^{r+1} <= gamma0^{r+1}
    (1 + ((K+2)^{(1-r)/2}-1) / ((1-r)/2)).  Lower (stated for K >= 4):
    sum_{k=0}^{K-1} gamma_k^r >= gamma0^r (K+1)^{1-r/2} / (2 (1-r/2)).
    Horizons at or below the rate-statement threshold
    max(ceil(((3-r)/2)^{2/(1-r)}), 3) are flagged ``threshold_met=False``
    rather than failed, and the lower bound is only enforced from K = 4 on.
    """
    gamma0 = float(gamma0)
    r = float(r)
    K = int(iterations)
    if r >= 1.0:
        raise MetricError("r must be strictly below 1")
    if gamma0 <= 0:
        raise MetricError("gamma0 must be positive")
    if K < 1:
        raise MetricError("need at least 1 iteration")
    ks = np.arange(K + 1, dtype=float)
    gams = gamma0 / np.sqrt(ks + 1.0)
    sum_r1 = float(np.sum(gams ** (r + 1.0)))
    sum_r = float(np.sum(gams[:K] ** r))
    half = 0.5 * (1.0 - r)
    upper = gamma0 ** (r + 1.0) * (1.0 + ((K + 2.0) ** half - 1.0) / half)
    lower = gamma0**r * (K + 1.0) ** (1.0 - 0.5 * r) / (2.0 * (1.0 - 0.5 * r))
    upper_ok = bool(sum_r1 <= upper * (1.0 + 1e-12))
    lower_ok = bool(sum_r >= lower * (1.0 - 1e-12)) if K >= 4 else True
    threshold = max(math.ceil(((3.0 - r) / 2.0) ** (2.0 / (1.0 - r))), 3)
    return StepsizeSumsReport(
        upper_ok and lower_ok,
        upper_ok,
        lower_ok,
        K > threshold,
        sum_r1,
        upper,
        sum_r,
        lower,
        {"gamma0": gamma0, "r": r, "iterations": K},
    )
