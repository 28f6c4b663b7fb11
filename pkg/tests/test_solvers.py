import numpy as np
import pytest
from scipy import stats

import blockprox.problems as pb
import blockprox.solvers as sv
from blockprox.geometry import BlockGeometry, ComponentSet, prox_map
from blockprox.metrics import lyapunov


def one_dim_problem(noise=0.0):
    """F(x) = 2 (x - 0.3) on the box [-1, 1]."""
    geoms = [BlockGeometry(ComponentSet.box([-1.0], [1.0]))]
    affine = pb.AffineBase(np.array([[2.0]]), np.array([-0.6]))
    nu = np.array([noise])
    constants = pb.ProblemConstants(
        np.array([1.0]), np.array([2.6]), np.array([2.0]), nu, nu.copy(), 2.0
    )
    return pb.ScviProblem(
        geoms, affine, constants, pb.STRONGLY_PSEUDO_MONOTONE,
        np.array([0.3]), None, affine,
    )


class TestStepsizeSchedule:
    def test_harmonic(self):
        s = sv.StepsizeSchedule(sv.HARMONIC, 2.0)
        assert s.gamma(0) == 2.0 and s.gamma(1) == 2.0 and s.gamma(4) == 0.5
        assert np.allclose(s.gammas(0, 5), [2.0, 2.0, 1.0, 2.0 / 3.0, 0.5])

    def test_inv_sqrt(self):
        s = sv.StepsizeSchedule(sv.INV_SQRT, 3.0)
        assert s.gamma(0) == 3.0
        assert s.gamma(3) == pytest.approx(1.5)
        assert np.all(np.diff(s.gammas(0, 100)) <= 0)

    def test_positive_required(self):
        with pytest.raises(sv.SolverError):
            sv.StepsizeSchedule(sv.CONSTANT, 0.0)
        with pytest.raises(sv.SolverError):
            sv.StepsizeSchedule("windowed", 1.0)


class TestConfigs:
    def test_averaging_exponent_bound(self):
        sched = sv.StepsizeSchedule(sv.INV_SQRT, 1.0)
        with pytest.raises(sv.SolverError):
            sv.BsmpConfig(sched, 10, averaging_exponent=1.0)
        with pytest.raises(sv.SolverError):
            sv.SmpConfig(sched, 10, averaging_exponent=1.5)

    def test_bad_probs(self):
        prob = one_dim_problem()
        sched = sv.StepsizeSchedule(sv.HARMONIC, 1.0)
        cfg = sv.BsmpConfig(sched, 5, block_probs=[0.5, 0.5])
        with pytest.raises(sv.SolverError):
            sv.run_bsmp(prob, cfg)

    def test_negative_iterations(self):
        sched = sv.StepsizeSchedule(sv.HARMONIC, 1.0)
        with pytest.raises(sv.SolverError):
            sv.BsmpConfig(sched, -1)


class TestBsmpStep:
    def test_hand_computed_extragradient_step(self):
        # x=1, gamma=0.1: y = 1 - 0.1*F(1) = 0.86; x+ = 1 - 0.1*F(0.86) = 0.888
        prob = one_dim_problem(noise=0.0)
        rng = np.random.default_rng(0)
        out = sv.bsmp_step(prob, np.array([1.0]), 0.1, 0, rng)
        assert out[0] == pytest.approx(0.888, abs=1e-15)

    def test_zero_step_is_identity(self):
        prob = one_dim_problem(noise=0.0)
        rng = np.random.default_rng(0)
        x = np.array([0.447])
        assert sv.bsmp_step(prob, x, 0.0, 0, rng)[0] == x[0]

    def test_other_blocks_copied_bitwise(self):
        prob = pb.make_strongly_monotone_affine(4, 3, 0.5, 2.0, 0.3, seed=2)
        rng = np.random.default_rng(1)
        x = prob.sample_point(rng)
        out = sv.bsmp_step(prob, x, 0.2, 2, rng)
        s = prob.structure.slices[2]
        mask = np.ones(prob.n, dtype=bool)
        mask[s] = False
        assert np.array_equal(out[mask], x[mask])
        assert not np.array_equal(out[s], x[s])


class TestWeightedAverage:
    def test_plain_running_mean(self):
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((10, 3))
        s, xbar = 1.0, xs[0].copy()  # gamma^0 = 1
        for k in range(1, 10):
            s, xbar = sv.weighted_average_update(s, xbar, xs[k], 0.7, 0.0)
        assert np.allclose(xbar, xs.mean(axis=0), atol=1e-14)

    @pytest.mark.parametrize("r", [-1.0, 0.0, 0.5])
    def test_matches_direct_sum(self, r):
        rng = np.random.default_rng(1)
        for _ in range(25):
            gams = 10.0 ** rng.uniform(-1.0, 0.5, 30)
            xs = rng.standard_normal((30, 4))
            s, xbar = gams[0] ** r, xs[0].copy()
            for k in range(1, 30):
                s, xbar = sv.weighted_average_update(s, xbar, xs[k], gams[k], r)
            w = gams**r
            direct = (w[:, None] * xs).sum(axis=0) / w.sum()
            assert np.max(np.abs(xbar - direct)) <= 1e-12

    def test_single_iterate(self):
        x0 = np.array([1.0, 2.0])
        s = 0.5**0.3
        assert np.array_equal(x0, x0)  # xbar_0 = x_0 by construction
        s2, xbar = sv.weighted_average_update(s, x0, x0, 0.1, 0.3)
        assert np.allclose(xbar, x0)

    def test_invalid_inputs(self):
        with pytest.raises(sv.SolverError):
            sv.weighted_average_update(0.0, np.zeros(2), np.zeros(2), 0.5, 0.0)
        with pytest.raises(sv.SolverError):
            sv.weighted_average_update(1.0, np.zeros(2), np.zeros(2), 0.5, 1.2)


class TestAutoGamma0:
    def test_strong_rule(self):
        prob = pb.make_strongly_monotone_affine(8, 4, 0.5, 1.0, 0.1, seed=1)
        assert sv.auto_gamma0(prob, "harmonic_strong") == pytest.approx(16.0)
        one = pb.make_strongly_monotone_affine(1, 1, 1.0, 1.0, 0.0, seed=1)
        assert sv.auto_gamma0(one, "harmonic_strong") == pytest.approx(1.0)

    def test_sqrt_d_rule(self):
        prob = pb.make_scop_quadratic(9, 1, np.linspace(0.5, 1.0, 9), 0.1, seed=1)
        assert sv.auto_gamma0(prob, "sqrt_d", gamma=2.0) == pytest.approx(6.0)

    def test_missing_mu(self):
        prob = pb.make_monotone_affine(2, 2, 0.1, seed=1)
        with pytest.raises(sv.SolverError):
            sv.auto_gamma0(prob, "harmonic_strong")


class TestRunBsmp:
    def test_zero_iterations(self):
        prob = one_dim_problem(0.1)
        cfg = sv.BsmpConfig(sv.StepsizeSchedule(sv.HARMONIC, 1.0), 0, seed=3)
        trace = sv.run_bsmp(prob, cfg)
        assert list(trace.ks) == [0]
        assert prob.feasible(trace.iterates[0])

    def test_deterministic_bitwise(self):
        prob = pb.make_strongly_monotone_affine(3, 2, 0.5, 2.0, 0.2, seed=4)
        cfg = sv.BsmpConfig(
            sv.StepsizeSchedule(sv.HARMONIC, 6.0), 400, seed=5, averaging_exponent=0.0,
            track_error=True,
        )
        a = sv.run_bsmp(prob, cfg)
        b = sv.run_bsmp(prob, cfg)
        assert np.array_equal(a.iterates, b.iterates)
        assert np.array_equal(a.averages, b.averages)
        assert np.array_equal(a.error, b.error)

    def test_snapshots_feasible(self):
        prob = pb.make_strongly_monotone_affine(3, 2, 0.5, 2.0, 0.5, seed=6)
        cfg = sv.BsmpConfig(sv.StepsizeSchedule(sv.HARMONIC, 6.0), 1000, seed=7,
                            averaging_exponent=-1.0)
        trace = sv.run_bsmp(prob, cfg)
        for row in trace.iterates:
            assert prob.feasible(row, tol=1e-10)
        for row in trace.averages:
            assert prob.feasible(row, tol=1e-10)

    def test_exactly_one_block_changes(self):
        prob = pb.make_strongly_monotone_affine(4, 2, 0.5, 2.0, 1.0, seed=8, halfwidth=5.0)
        K = 200
        cfg = sv.BsmpConfig(
            sv.StepsizeSchedule(sv.CONSTANT, 0.01), K, seed=9,
            averaging_exponent=0.0, checkpoints=range(K + 1),
        )
        trace = sv.run_bsmp(prob, cfg)
        changed_any = np.zeros(prob.d, dtype=bool)
        for t in range(K):
            diff = trace.iterates[t + 1] - trace.iterates[t]
            changed = [
                i for i, s in enumerate(prob.structure.slices)
                if np.any(diff[s] != 0.0)
            ]
            assert len(changed) <= 1
            for i in changed:
                changed_any[i] = True
        assert changed_any.all()

    def test_block_frequencies_chi_square(self):
        prob = pb.make_strongly_monotone_affine(
            5, 1, 0.5, 1.0, 1.0, seed=10, halfwidth=5.0
        )
        p = np.array([0.4, 0.25, 0.15, 0.12, 0.08])
        K = 100_000
        cfg = sv.BsmpConfig(
            sv.StepsizeSchedule(sv.CONSTANT, 0.01), K, seed=11,
            block_probs=p, checkpoints=range(K + 1),
        )
        trace = sv.run_bsmp(prob, cfg)
        diffs = trace.iterates[1:] != trace.iterates[:-1]
        counts = diffs.sum(axis=0).astype(float)
        assert counts.sum() == K  # every iteration moved exactly one coordinate
        chi2 = float(np.sum((counts - K * p) ** 2 / (K * p)))
        assert chi2 <= stats.chi2.ppf(0.99, df=len(p) - 1)

    def test_average_closed_form_along_trace(self):
        prob = pb.make_strongly_monotone_affine(3, 2, 0.5, 2.0, 0.3, seed=12)
        K, r = 40, -0.5
        sched = sv.StepsizeSchedule(sv.INV_SQRT, 1.5)
        cfg = sv.BsmpConfig(sched, K, seed=13, averaging_exponent=r,
                            checkpoints=range(K + 1))
        trace = sv.run_bsmp(prob, cfg)
        w = sched.gammas(0, K + 1) ** r
        direct = (w[:, None] * trace.iterates).cumsum(axis=0) / w.cumsum()[:, None]
        assert np.max(np.abs(direct - trace.averages)) <= 1e-12

    def test_mean_lyapunov_non_increasing(self):
        prob = pb.make_strongly_monotone_affine(2, 2, 1.0, 2.0, 0.2, seed=14)
        gamma0 = sv.auto_gamma0(prob, "harmonic_strong")
        cks = list(range(10, 161, 10))
        reps = 60
        p = np.full(prob.d, 1.0 / prob.d)
        vals = np.empty((reps, len(cks)))
        for rep in range(reps):
            cfg = sv.BsmpConfig(
                sv.StepsizeSchedule(sv.HARMONIC, gamma0), 160, seed=[15, rep],
                checkpoints=cks,
            )
            trace = sv.run_bsmp(prob, cfg)
            vals[rep] = [
                lyapunov(p, prob.geometries, trace.iterate_at(k), prob.known_solution)
                for k in cks
            ]
        diffs = np.diff(vals, axis=1)
        mean_diff = diffs.mean(axis=0)
        se_diff = diffs.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(mean_diff <= 3.0 * se_diff)

    def test_track_error_needs_solution(self):
        geoms = [BlockGeometry(ComponentSet.box([-1.0], [1.0]))]
        affine = pb.AffineBase(np.array([[1.0]]), np.array([0.0]))
        nu = np.array([0.0])
        constants = pb.ProblemConstants(
            np.array([1.0]), np.array([1.0]), np.array([1.0]), nu, nu.copy()
        )
        prob = pb.ScviProblem(geoms, affine, constants, pb.MONOTONE, None, None, affine)
        cfg = sv.BsmpConfig(sv.StepsizeSchedule(sv.HARMONIC, 1.0), 5, track_error=True)
        with pytest.raises(sv.SolverError):
            sv.run_bsmp(prob, cfg)

    def test_checkpoint_lookup(self):
        prob = one_dim_problem(0.1)
        cfg = sv.BsmpConfig(sv.StepsizeSchedule(sv.HARMONIC, 1.0), 10, seed=1,
                            checkpoints=[5])
        trace = sv.run_bsmp(prob, cfg)
        assert list(trace.ks) == [0, 5, 10]
        with pytest.raises(KeyError):
            trace.checkpoint_index(7)


class TestRunSmp:
    def test_matches_reference_extragradient(self):
        # zero noise, one block: the run is plain deterministic extragradient
        prob = one_dim_problem(noise=0.0)
        sched = sv.StepsizeSchedule(sv.INV_SQRT, 0.4)
        K = 50
        cfg = sv.SmpConfig(sched, K, seed=21, averaging_exponent=0.0,
                           checkpoints=range(K + 1))
        trace = sv.run_smp(prob, cfg, backend="python")

        rng = np.random.default_rng(21)
        x = np.concatenate([g.set.sample(rng) for g in prob.geometries])
        geom = prob.geometries[0]
        ys = []
        for k in range(K):
            gk = sched.gamma(k)
            y = prox_map(geom, x, gk * prob.expected_map(x))
            x = prox_map(geom, x, gk * prob.expected_map(y))
            ys.append(y)
            assert np.allclose(trace.iterates[k + 1], x, atol=1e-14)

        w = sched.gammas(0, K) ** 0.0
        direct = (w[:, None] * np.array(ys)).sum(axis=0) / w.sum()
        assert np.max(np.abs(trace.averages[-1] - direct)) <= 1e-12

    @pytest.mark.parametrize("r", [-1.0, 0.5])
    def test_average_closed_form(self, r):
        prob = pb.make_strongly_monotone_affine(3, 2, 0.5, 2.0, 0.4, seed=22)
        K = 64
        sched = sv.StepsizeSchedule(sv.INV_SQRT, 1.0)
        cfg = sv.SmpConfig(sched, K, seed=23, averaging_exponent=r,
                           checkpoints=range(K + 1))
        trace = sv.run_smp(prob, cfg, backend="python")
        # recover the y sequence: y_{k+1} = P(x_k, gamma_k F(x_k, noise)), so
        # reconstruct from the running average recursion instead: the traced
        # averages must satisfy the recursion with weights gamma_k^r exactly
        w = sched.gammas(0, K) ** r
        gam_sum = np.cumsum(w)
        ys = np.empty((K, prob.n))
        ys[0] = trace.averages[1]
        for k in range(1, K):
            ys[k] = (gam_sum[k] * trace.averages[k + 1] - gam_sum[k - 1] * trace.averages[k]) / w[k]
        direct = (w[:, None] * ys).sum(axis=0) / w.sum()
        assert np.max(np.abs(direct - trace.averages[-1])) <= 1e-9

    def test_first_average_is_first_extrapolation(self):
        prob = one_dim_problem(noise=0.0)
        sched = sv.StepsizeSchedule(sv.INV_SQRT, 0.4)
        cfg = sv.SmpConfig(sched, 1, seed=24, averaging_exponent=0.5,
                           checkpoints=[1])
        trace = sv.run_smp(prob, cfg, backend="python")
        rng = np.random.default_rng(24)
        x0 = np.concatenate([g.set.sample(rng) for g in prob.geometries])
        y1 = prox_map(prob.geometries[0], x0, 0.4 * prob.expected_map(x0))
        assert np.allclose(trace.averages[-1], y1, atol=1e-15)

    def test_average_undefined_at_zero(self):
        prob = one_dim_problem(0.1)
        cfg = sv.SmpConfig(sv.StepsizeSchedule(sv.INV_SQRT, 1.0), 4, seed=25,
                           averaging_exponent=0.0)
        trace = sv.run_smp(prob, cfg)
        assert np.isnan(trace.averages[0]).all()
        assert not np.isnan(trace.averages[1:]).any()
        for row in trace.averages[1:]:
            assert prob.feasible(row, tol=1e-10)

    def test_singular_curvature_still_meets_objective_bound(self):
        # merely convex instance (rank-deficient curvature): the averaged
        # block solver must still satisfy the finite-horizon objective bound
        from blockprox.metrics import averaged_objective_bound

        prob = pb.make_scop_quadratic(3, 2, np.linspace(0.0, 2.0, 6), 0.5, seed=5)
        sched = sv.StepsizeSchedule(sv.INV_SQRT, sv.auto_gamma0(prob, "sqrt_d"))
        K, r, reps = 512, 0.0, 8
        gaps = []
        for rep in range(reps):
            cfg = sv.BsmpConfig(sched, K, seed=[77, rep], averaging_exponent=r,
                                checkpoints=[K])
            trace = sv.run_bsmp(prob, cfg)
            gaps.append(prob.objective_value(trace.average_at(K)) - prob.f_star)
        probs = np.full(prob.d, 1.0 / prob.d)
        bound = averaged_objective_bound(prob.constants, prob.geometries, probs,
                                         sched, r, K)
        assert np.mean(gaps) <= bound

    def test_entropy_geometry_run(self):
        prob = pb.make_strongly_monotone_affine(
            2, 3, 1.0, 2.0, 0.1, set_kind="entropy_simplex", seed=26
        )
        cfg = sv.SmpConfig(sv.StepsizeSchedule(sv.INV_SQRT, 0.5), 200, seed=27,
                           averaging_exponent=0.0, track_error=True)
        trace = sv.run_smp(prob, cfg)
        assert trace.backend == "python"
        assert trace.error[-1] < trace.error[0]
        for row in trace.iterates:
            assert prob.feasible(row, tol=1e-9)
