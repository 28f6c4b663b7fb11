"""The acceptance suite: executable exit criteria with fixed seeds.

Each criterion function builds its own fixed-seed instances, runs the checks
at the stated tolerances, and returns a :class:`CriterionResult`; the
aggregate runner prints one pass/fail line per criterion.  Everything here
is deterministic, so two consecutive runs produce identical reports (up to
wall-clock fields).

Where a criterion pins parameters (dimensions, noise, step rule) those are
frozen below; instance-scale choices that the criteria leave open (box
sizes, spectra) are fixed at values where the asymptotic regime is visible
inside the tested iteration window.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics as mt
from . import problems as pb
from . import solvers as sv
from .geometry import (
    ENTROPY,
    BlockGeometry,
    ComponentSet,
    bregman_distance,
    dual_norm,
    prox_map,
)


@dataclass
class CriterionResult:
    name: str
    title: str
    passed: bool
    runtime: float
    limit: float
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def runtime_ok(self):
        return self.runtime < self.limit

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {status} ({self.runtime:.1f}s/{self.limit:.0f}s) {self.title}"

    def to_dict(self, with_runtime=True):
        doc = {
            "name": self.name,
            "title": self.title,
            "passed": self.passed,
            "failures": list(self.failures),
            "details": self.details,
        }
        if with_runtime:
            doc["runtime"] = self.runtime
            doc["runtime_limit"] = self.limit
            doc["runtime_ok"] = self.runtime_ok
        return doc


def _finish(name, title, limit, t0, failures, details):
    runtime = time.perf_counter() - t0
    passed = not failures and runtime < limit
    if runtime >= limit:
        failures = failures + [f"runtime {runtime:.1f}s exceeded {limit:.0f}s"]
    return CriterionResult(name, title, passed, runtime, limit, failures, details)


# ---------------------------------------------------------------------------
# A1: prox-mapping property suite
# ---------------------------------------------------------------------------


def _a1_geometries():
    rng = np.random.default_rng(20260801)
    box = ComponentSet.box(rng.uniform(-1.5, -0.2, 3), rng.uniform(0.2, 1.5, 3))
    ball = ComponentSet.ball(rng.uniform(-0.5, 0.5, 3), 1.3)
    return [
        ("euclidean/box", BlockGeometry(box)),
        ("euclidean/ball", BlockGeometry(ball)),
        ("euclidean/simplex", BlockGeometry(ComponentSet.simplex(3))),
        ("entropy/simplex", BlockGeometry(ComponentSet.simplex(3), dgf=ENTROPY)),
    ]


def _a1_sample(geom, rng, interior):
    if not interior:
        return geom.set.sample(rng)
    z = rng.dirichlet(np.ones(geom.dim))
    return 0.8 * z + 0.2 / geom.dim


def check_prox_properties(geom, n_samples, tol, rng, interior=False):
    """Check the six Bregman/prox inequalities on random inputs.

    Returns a list of failure strings (empty when everything holds).  For
    the entropy geometry, pairs are drawn from a fixed interior and the
    smoothness modulus of the pair is ``2 / min_j x_j`` (the chi-square
    bound on KL divergence over that interior).
    """
    failures = []
    mu = geom.mu_omega
    for trial in range(n_samples):
        x = _a1_sample(geom, rng, interior)
        z = _a1_sample(geom, rng, interior)
        y2 = _a1_sample(geom, rng, interior)
        yd = rng.standard_normal(geom.dim)
        yd2 = rng.standard_normal(geom.dim)

        dxz = bregman_distance(geom, x, z)
        l_pair = geom.l_omega if not interior else 2.0 / float(np.min(x))
        dist_sq = geom.norm(z - x) ** 2
        if dxz < 0.5 * mu * dist_sq - tol:
            failures.append(f"(a) lower bound violated at trial {trial}")
        if dxz > 0.5 * l_pair * dist_sq + tol:
            failures.append(f"(a) upper bound violated at trial {trial}")

        p = prox_map(geom, x, yd)
        lhs_b = bregman_distance(geom, p, z)
        rhs_b = dxz + float(yd @ (z - p)) - bregman_distance(geom, x, p)
        if lhs_b > rhs_b + tol:
            failures.append(f"(b) three-point inequality violated at trial {trial}")

        rhs_c = dxz + float(yd @ (z - x)) + dual_norm(geom, yd) ** 2 / (2.0 * mu)
        if lhs_b > rhs_c + tol:
            failures.append(f"(c) descent inequality violated at trial {trial}")

        if geom.norm(prox_map(geom, x, np.zeros(geom.dim)) - x) > tol:
            failures.append(f"(d) zero-step fixed point violated at trial {trial}")

        p2 = prox_map(geom, x, yd2)
        if geom.norm(p - p2) > dual_norm(geom, yd - yd2) + tol:
            failures.append(f"(e) nonexpansiveness violated at trial {trial}")

        lhs_f = dxz
        rhs_f = (
            bregman_distance(geom, x, y2)
            + bregman_distance(geom, y2, z)
            + float((geom.omega_grad(y2) - geom.omega_grad(x)) @ (z - y2))
        )
        if abs(lhs_f - rhs_f) > tol:
            failures.append(f"(f) three-point identity violated at trial {trial}")
        if len(failures) > 10:
            break
    return failures


def criterion_a1(n_samples=1000):
    t0 = time.perf_counter()
    failures = []
    for label, geom in _a1_geometries():
        entropy = geom.dgf == ENTROPY
        rng = np.random.default_rng(20260802)
        tol = 1e-8 if entropy else 1e-10
        bad = check_prox_properties(geom, n_samples, tol, rng, interior=entropy)
        failures += [f"{label}: {msg}" for msg in bad]
    return _finish(
        "A1", "prox-mapping properties (a-f), 4 geometries x 1000 samples", 5.0, t0,
        failures, {"n_samples": n_samples},
    )


# ---------------------------------------------------------------------------
# A2: mean-squared-error rate of the randomized-block solver
# ---------------------------------------------------------------------------


def criterion_a2(replications=100, gamma0_scale=1.0):
    t0 = time.perf_counter()
    problem = pb.make_strongly_monotone_affine(
        d=8, block_size=4, mu=0.5, l_bound=1.0, noise=0.1, seed=20260809, halfwidth=0.1
    )
    failures = []
    prescribed = sv.auto_gamma0(problem, "harmonic_strong")
    gamma0 = prescribed * gamma0_scale
    if abs(gamma0 - problem.d * max(g.l_omega for g in problem.geometries) / 0.5) > 1e-12:
        failures.append(
            f"step rule violated: gamma0 = {gamma0} is not d*max(L_omega)/mu = {prescribed}"
        )
    cks = sorted({100, 1000, 10_000} | {2**j for j in range(7, 14)})
    sched = sv.StepsizeSchedule(sv.HARMONIC, gamma0)
    vals = np.empty((replications, len(cks)))
    for rep in range(replications):
        cfg = sv.BsmpConfig(sched, iterations=10_000, seed=[9000, rep], checkpoints=cks)
        trace = sv.run_bsmp(problem, cfg)
        vals[rep] = [
            mt.mse(problem.geometries, trace.iterate_at(k), problem.known_solution)
            for k in cks
        ]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(replications)
    mse_c = mt.rate_constants(problem.constants, problem.geometries).mse_constant
    checked = {}
    for k in (100, 1000, 10_000):
        j = cks.index(k)
        bound = mse_c * problem.d / k
        checked[k] = {"mean": mean[j], "se": se[j], "bound": bound}
        if mean[j] > bound + 3 * se[j]:
            failures.append(f"MSE at k={k}: {mean[j]:.4g} above bound {bound:.4g} + 3 SE")
    slope, _ = mt.fit_rate(np.asarray(cks, float), mean, k_min=100)
    if not -1.3 <= slope <= -0.7:
        failures.append(f"MSE slope {slope:+.3f} outside [-1.3, -0.7]")
    return _finish(
        "A2", "O(d/k) mean-squared-error bound for the block solver", 60.0, t0,
        failures, {"slope": slope, "bound_checks": checked, "a_constant": mse_c},
    )


# ---------------------------------------------------------------------------
# A3: averaged objective rate on convex quadratic instances
# ---------------------------------------------------------------------------


def criterion_a3(replications=32):
    t0 = time.perf_counter()
    problem = pb.make_scop_quadratic(
        d=9,
        block_size=3,
        spectrum=np.linspace(0.5, 2.0, 27),
        noise=1.5,
        seed=20260810,
        halfwidth=0.4,
    )
    gamma0 = sv.auto_gamma0(problem, "sqrt_d")
    sched = sv.StepsizeSchedule(sv.INV_SQRT, gamma0)
    cks = [64 * 2**j for j in range(9)]
    probs = np.full(problem.d, 1.0 / problem.d)
    failures = []
    details = {"gamma0": gamma0, "slopes": {}}
    for r in (0.0, -1.0, 0.5):
        vals = np.empty((replications, len(cks)))
        for rep in range(replications):
            cfg = sv.BsmpConfig(
                sched, iterations=cks[-1], seed=[777, rep], checkpoints=cks,
                averaging_exponent=r,
            )
            trace = sv.run_bsmp(problem, cfg)
            vals[rep] = [
                problem.objective_value(trace.average_at(k)) - problem.f_star for k in cks
            ]
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(replications)
        for j, k in enumerate(cks):
            bound = mt.averaged_objective_bound(
                problem.constants, problem.geometries, probs, sched, r, k
            )
            if mean[j] > bound + 3 * se[j]:
                failures.append(
                    f"r={r}: objective gap at K={k}: {mean[j]:.4g} above bound {bound:.4g}"
                )
        slope, _ = mt.fit_rate(np.asarray(cks, float), mean, k_min=64)
        details["slopes"][f"r={r}"] = slope
        if not -0.65 <= slope <= -0.35:
            failures.append(f"r={r}: slope {slope:+.3f} outside [-0.65, -0.35]")
    return _finish(
        "A3", "O(sqrt(d)/sqrt(K)) averaged objective bound, r in {0, -1, 0.5}", 120.0,
        t0, failures, details,
    )


# ---------------------------------------------------------------------------
# A4: gap-function rate of the full-block solver
# ---------------------------------------------------------------------------


def criterion_a4(replications=50):
    t0 = time.perf_counter()
    problem = pb.make_monotone_affine(
        d=3, block_size=2, noise=1.0, psd_weight=0.05, seed=20260811, halfwidth=0.5
    )
    gamma0 = 1.0
    sched = sv.StepsizeSchedule(sv.INV_SQRT, gamma0)
    cks = [256, 512, 1024, 2048, 4096]
    vals = np.empty((replications, len(cks)))
    for rep in range(replications):
        cfg = sv.SmpConfig(
            sched, iterations=cks[-1], seed=[555, rep], checkpoints=cks,
            averaging_exponent=0.0,
        )
        trace = sv.run_smp(problem, cfg)
        vals[rep] = [
            mt.gap_function(problem, trace.average_at(k), method="affine_exact")
            for k in cks
        ]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(replications)
    gap_c = mt.rate_constants(
        problem.constants, problem.geometries, r=0.0, gamma0=gamma0
    ).gap_constant
    failures = []
    checked = {}
    for k in (256, 1024, 4096):
        j = cks.index(k)
        bound = gap_c / np.sqrt(k)
        checked[k] = {"mean": mean[j], "se": se[j], "bound": bound}
        if mean[j] > bound + 3 * se[j]:
            failures.append(f"gap at K={k}: {mean[j]:.4g} above bound {bound:.4g} + 3 SE")
    slope, _ = mt.fit_rate(np.asarray(cks, float), mean, k_min=100)
    if not -0.65 <= slope <= -0.35:
        failures.append(f"gap slope {slope:+.3f} outside [-0.65, -0.35]")
    return _finish(
        "A4", "O(1/sqrt(K)) expected-gap bound for the full-block solver", 120.0, t0,
        failures, {"slope": slope, "bound_checks": checked, "m_constant": gap_c},
    )


# ---------------------------------------------------------------------------
# A5/A6: auxiliary sequence lemmas
# ---------------------------------------------------------------------------


def criterion_a5(n_draws=100):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260805)
    failures = []
    worst = 0.0
    for i in range(n_draws):
        alpha = 10.0 ** rng.uniform(-1.0, 1.0)
        beta = 10.0 ** rng.uniform(-2.0, 2.0)
        e0 = rng.uniform(0.0, 100.0)
        report = mt.verify_recursion_lemma(alpha, beta, 2.0 / alpha, e0, iterations=100_000)
        worst = max(worst, report.max_ratio)
        if not report.passed:
            failures.append(f"draw {i}: alpha={alpha:.3g} beta={beta:.3g} e0={e0:.3g}")
    return _finish(
        "A5", "recursive-sequence rate bound 8*beta/(alpha^2 k), 100 draws", 5.0, t0,
        failures, {"worst_ratio": worst},
    )


def criterion_a6():
    t0 = time.perf_counter()
    failures = []
    for gamma0 in (1.0, 2.5):
        for r in (-1.0, -0.5, 0.0, 0.5, 0.9):
            for K in (100, 10_000, 1_000_000):
                report = mt.verify_stepsize_sums(gamma0, r, K)
                if not report.passed:
                    failures.append(f"gamma0={gamma0} r={r} K={K}")
                if not report.threshold_met:
                    failures.append(f"gamma0={gamma0} r={r} K={K}: threshold unexpectedly unmet")
    return _finish(
        "A6", "inverse-sqrt step-sum bounds, r in {-1,...,0.9}, K up to 1e6", 5.0, t0,
        failures, {},
    )


# ---------------------------------------------------------------------------
# A7: almost-sure convergence on a certified non-monotone instance
# ---------------------------------------------------------------------------


def criterion_a7(seeds=(0, 1, 2, 3, 4)):
    t0 = time.perf_counter()
    base = pb.make_strongly_monotone_affine(
        d=4, block_size=2, mu=1.0, l_bound=2.0, noise=0.05, seed=20260812, halfwidth=1.0
    )
    problem = pb.make_strictly_pseudo_monotone(base)
    failures = []
    mono_cert = pb.certify_monotonicity(problem, "monotone", n_samples=20_000, seed=1)
    if mono_cert.passed:
        failures.append("instance unexpectedly passed the plain-monotonicity certificate")
    pseudo_cert = pb.certify_monotonicity(problem, n_samples=20_000, seed=2)
    if not pseudo_cert.passed:
        failures.append("instance failed its strict pseudo-monotonicity certificate")
    gamma0 = sv.auto_gamma0(problem, "harmonic_strong")
    sched = sv.StepsizeSchedule(sv.HARMONIC, gamma0)
    finals, decades = [], []
    for s in seeds:
        cfg = sv.BsmpConfig(sched, iterations=100_000, seed=[31_000, s], track_error=True)
        trace = sv.run_bsmp(problem, cfg)
        err = trace.error
        final = float(err[-1])
        finals.append(final)
        if final >= 5e-2:
            failures.append(f"seed {s}: final error {final:.4g} >= 5e-2")
        maxima = [float(np.max(err[10**m + 1 : 10**(m + 1) + 1])) for m in (2, 3, 4)]
        decades.append(maxima)
        if not (maxima[0] > maxima[1] > maxima[2]):
            failures.append(f"seed {s}: decade maxima {maxima} not decreasing")
    return _finish(
        "A7", "almost-sure convergence sanity on a non-monotone scaled instance", 60.0,
        t0, failures,
        {"finals": finals, "decade_maxima": decades, "violation_margin": mono_cert.worst_margin},
    )


# ---------------------------------------------------------------------------
# A8/A9/A10: averaging identity, one-step recursion, uniqueness
# ---------------------------------------------------------------------------


def criterion_a8(n_sequences=100):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260808)
    failures = []
    for i in range(n_sequences):
        length = int(rng.integers(20, 80))
        gams = 10.0 ** rng.uniform(-1.5, 0.5, length)
        xs = rng.standard_normal((length, 3))
        for r in (-1.0, 0.0, 0.5):
            s_weight = gams[0] ** r
            xbar = xs[0].copy()
            for k in range(1, length):
                s_weight, xbar = sv.weighted_average_update(s_weight, xbar, xs[k], gams[k], r)
            weights = gams**r
            direct = (weights[:, None] * xs).sum(axis=0) / weights.sum()
            if np.max(np.abs(xbar - direct)) > 1e-12:
                failures.append(f"sequence {i}, r={r}: recursion deviates from closed form")
    return _finish(
        "A8", "weighted-average recursion matches its closed form to 1e-12", 2.0, t0,
        failures, {},
    )


def _one_step_recursion_gap(problem, probs, gamma, x, rng):
    """max over test iterates of (enumerated E[L(x_{k+1}, x*)] - RHS)."""
    x_star = problem.known_solution
    lhs = 0.0
    for i in range(problem.d):
        x_next = sv.bsmp_step(problem, x, gamma, i, rng)
        lhs += probs[i] * mt.lyapunov(probs, problem.geometries, x_next, x_star)
    fx = problem.expected_map(x)
    theta = mt.rate_constants(problem.constants, problem.geometries).lyapunov_drift
    rhs = (
        mt.lyapunov(probs, problem.geometries, x, x_star)
        + gamma * float(fx @ (x_star - x))
        + theta * gamma**2
    )
    return lhs - rhs


def criterion_a9(n_points=20):
    t0 = time.perf_counter()
    cases = [
        ("euclidean d=4", pb.make_strongly_monotone_affine(4, 2, 1.0, 2.0, 0.0, seed=1), [0.5, 0.2, 0.2, 0.1]),
        ("euclidean d=8", pb.make_strongly_monotone_affine(8, 2, 0.5, 1.5, 0.0, seed=2), None),
        ("entropy d=3", pb.make_strongly_monotone_affine(3, 3, 1.0, 2.0, 0.0, set_kind="entropy_simplex", seed=3), None),
    ]
    failures = []
    worst = -np.inf
    for label, problem, skew in cases:
        prob_vecs = [np.full(problem.d, 1.0 / problem.d)]
        if skew is not None:
            prob_vecs.append(np.asarray(skew))
        rng = np.random.default_rng(20260809)
        for probs in prob_vecs:
            for _ in range(n_points):
                x = problem.sample_point(rng)
                for gamma in (0.05, 0.5):
                    gap = _one_step_recursion_gap(problem, probs, gamma, x, rng)
                    worst = max(worst, gap)
                    if gap > 1e-9:
                        failures.append(f"{label}: recursion violated by {gap:.3g}")
    return _finish(
        "A9", "one-step Lyapunov recursion by block enumeration (zero noise)", 10.0, t0,
        failures, {"worst_gap": worst},
    )


def criterion_a10(n_instances=3):
    t0 = time.perf_counter()
    failures = []
    dists = []
    for i in range(n_instances):
        base = pb.make_strongly_monotone_affine(
            d=3, block_size=2, mu=1.0, l_bound=2.0, noise=0.0, seed=20260813 + i
        )
        problem = pb.make_strictly_pseudo_monotone(base)
        lo = np.concatenate([g.set.lower for g in problem.geometries])
        hi = np.concatenate([g.set.upper for g in problem.geometries])
        xa, res_a = pb.solve_deterministic(problem, x0=lo, tol=1e-12)
        xb, res_b = pb.solve_deterministic(problem, x0=hi, tol=1e-12)
        dist = float(np.linalg.norm(xa - xb))
        dists.append(dist)
        if dist > 1e-6:
            failures.append(f"instance {i}: antipodal solves ended {dist:.3g} apart")
        if max(res_a, res_b) > 1e-9:
            failures.append(f"instance {i}: residuals {res_a:.3g}, {res_b:.3g} did not converge")
    return _finish(
        "A10", "uniqueness under strict pseudo-monotonicity (antipodal solves)", 10.0,
        t0, failures, {"distances": dists},
    )


ALL_CRITERIA = (
    criterion_a1,
    criterion_a2,
    criterion_a3,
    criterion_a4,
    criterion_a5,
    criterion_a6,
    criterion_a7,
    criterion_a8,
    criterion_a9,
    criterion_a10,
)


@dataclass
class AcceptanceReport:
    results: list
    passed: bool

    def to_dict(self, with_runtime=True):
        return {
            "passed": self.passed,
            "criteria": [r.to_dict(with_runtime) for r in self.results],
        }


def run_acceptance_suite(quiet=False):
    """Run every criterion; prints one line per criterion unless quiet."""
    results = []
    for fn in ALL_CRITERIA:
        result = fn()
        results.append(result)
        if not quiet:
            print(result.line())
            for msg in result.failures:
                print(f"    {msg}")
    report = AcceptanceReport(results, all(r.passed for r in results))
    if not quiet:
        print("acceptance:", "PASS" if report.passed else "FAIL")
    return report
