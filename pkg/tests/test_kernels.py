"""Compiled-versus-Python backend agreement on identical pre-drawn noise."""

import numpy as np
import pytest

import blockprox.problems as pb
import blockprox.solvers as sv
from blockprox import backends

needs_compiled = pytest.mark.skipif(
    not backends.HAVE_COMPILED, reason="compiled extension not built"
)


def affine_problem(noise=0.3):
    return pb.make_strongly_monotone_affine(3, [2, 3, 1], 0.5, 2.0, noise, seed=31)


class TestSelection:
    def test_python_always_available(self):
        prob = affine_problem()
        assert backends.select_backend("python", prob) == "python"

    def test_entropy_ineligible(self):
        prob = pb.make_strongly_monotone_affine(
            2, 3, 1.0, 2.0, 0.1, set_kind="entropy_simplex", seed=1
        )
        assert not backends.kernel_eligible(prob)
        assert backends.select_backend("auto", prob) == "python"
        if backends.HAVE_COMPILED:
            with pytest.raises(backends.BackendError):
                backends.select_backend("compiled", prob)

    def test_unknown_backend(self):
        with pytest.raises(backends.BackendError):
            backends.select_backend("gpu", affine_problem())

    @needs_compiled
    def test_auto_prefers_compiled(self):
        assert backends.select_backend("auto", affine_problem()) == "compiled"


@needs_compiled
class TestAgreement:
    def assert_traces_close(self, a, b, atol=1e-9):
        assert np.array_equal(a.ks, b.ks)
        np.testing.assert_allclose(a.iterates, b.iterates, atol=atol, rtol=0)
        if a.averages is not None:
            np.testing.assert_allclose(a.averages, b.averages, atol=atol, rtol=0)
        if a.error is not None:
            np.testing.assert_allclose(a.error, b.error, atol=atol, rtol=0)

    @pytest.mark.parametrize("r", [None, 0.0, -1.0])
    def test_bsmp(self, r):
        prob = affine_problem()
        cfg = sv.BsmpConfig(
            sv.StepsizeSchedule(sv.HARMONIC, 8.0), 3000, seed=7,
            averaging_exponent=r, track_error=True,
            block_probs=[0.5, 0.3, 0.2],
        )
        self.assert_traces_close(
            sv.run_bsmp(prob, cfg, backend="compiled"),
            sv.run_bsmp(prob, cfg, backend="python"),
        )

    def test_bsmp_scaled_map(self):
        prob = pb.make_strictly_pseudo_monotone(affine_problem(noise=0.1))
        cfg = sv.BsmpConfig(
            sv.StepsizeSchedule(sv.HARMONIC, 12.0), 3000, seed=8, track_error=True
        )
        self.assert_traces_close(
            sv.run_bsmp(prob, cfg, backend="compiled"),
            sv.run_bsmp(prob, cfg, backend="python"),
        )

    def test_smp(self):
        prob = affine_problem()
        cfg = sv.SmpConfig(
            sv.StepsizeSchedule(sv.INV_SQRT, 1.0), 2000, seed=9,
            averaging_exponent=0.5, track_error=True,
        )
        self.assert_traces_close(
            sv.run_smp(prob, cfg, backend="compiled"),
            sv.run_smp(prob, cfg, backend="python"),
        )

    def test_smp_scaled_map(self):
        prob = pb.make_strictly_pseudo_monotone(affine_problem(noise=0.2))
        cfg = sv.SmpConfig(
            sv.StepsizeSchedule(sv.INV_SQRT, 0.5), 2000, seed=10,
            averaging_exponent=0.0,
        )
        self.assert_traces_close(
            sv.run_smp(prob, cfg, backend="compiled"),
            sv.run_smp(prob, cfg, backend="python"),
        )

    def test_chunk_boundaries_do_not_change_results(self):
        # identical run with and without interior checkpoints
        prob = affine_problem()
        sched = sv.StepsizeSchedule(sv.HARMONIC, 8.0)
        plain = sv.BsmpConfig(sched, 500, seed=11, checkpoints=[500])
        fine = sv.BsmpConfig(sched, 500, seed=11, checkpoints=[13, 100, 307, 500])
        a = sv.run_bsmp(prob, plain)
        b = sv.run_bsmp(prob, fine)
        assert np.array_equal(a.iterates[-1], b.iterates[-1])
