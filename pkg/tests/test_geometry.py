import numpy as np
import pytest

from blockprox.geometry import (
    ENTROPY,
    BlockGeometry,
    BlockStructure,
    BlockVector,
    ComponentSet,
    GeometryError,
    bregman_distance,
    composite_norm_sq,
    dual_norm,
    project,
    prox_map,
)


def euclid(cset):
    return BlockGeometry(cset)


def entropy_simplex(dim):
    return BlockGeometry(ComponentSet.simplex(dim), dgf=ENTROPY)


class TestComponentSet:
    def test_box_validation(self):
        with pytest.raises(GeometryError):
            ComponentSet.box([1.0], [0.0])
        with pytest.raises(GeometryError):
            ComponentSet.box([-np.inf], [0.0])

    def test_ball_validation(self):
        with pytest.raises(GeometryError):
            ComponentSet.ball([0.0, 0.0], 0.0)

    def test_project_box(self):
        box = ComponentSet.box([0.0, 0.0], [1.0, 1.0])
        assert np.allclose(box.project([2.0, 0.5]), [1.0, 0.5])

    def test_project_simplex_vertex_direction(self):
        simplex = ComponentSet.simplex(2)
        assert np.allclose(simplex.project([2.0, 0.0]), [1.0, 0.0])

    def test_project_ball_radial(self):
        ball = ComponentSet.ball([0.0, 0.0], 1.0)
        assert np.allclose(ball.project([3.0, 4.0]), [0.6, 0.8])

    @pytest.mark.parametrize(
        "cset",
        [
            ComponentSet.box([-1.0, 0.2, -3.0], [0.5, 0.9, 4.0]),
            ComponentSet.ball([0.3, -0.2], 1.7),
            ComponentSet.simplex(4),
        ],
    )
    def test_project_idempotent_and_feasible(self, cset):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = rng.standard_normal(cset.dim) * 3.0
            q = cset.project(p)
            assert cset.contains(q, tol=1e-9)
            assert np.max(np.abs(cset.project(q) - q)) <= 1e-12

    def test_project_returns_feasible_input(self):
        box = ComponentSet.box([-1.0], [1.0])
        assert box.project([0.3])[0] == 0.3

    @pytest.mark.parametrize(
        "cset",
        [
            ComponentSet.box([-1.0, 0.2], [0.5, 0.9]),
            ComponentSet.ball([0.3, -0.2, 0.1], 1.7),
            ComponentSet.simplex(3),
        ],
    )
    @pytest.mark.parametrize("norm", ["l2", "l1"])
    def test_bound_by_membership_sampling(self, cset, norm):
        rng = np.random.default_rng(1)
        bound = cset.bound(norm)
        for _ in range(500):
            x = cset.sample(rng)
            assert cset.contains(x, tol=1e-9)
            value = np.linalg.norm(x) if norm == "l2" else np.abs(x).sum()
            assert value <= bound + 1e-12

    def test_support_max_matches_argmax(self):
        rng = np.random.default_rng(2)
        for cset in (
            ComponentSet.box([-1.0, -2.0], [0.5, 3.0]),
            ComponentSet.ball([0.1, 0.4], 0.8),
            ComponentSet.simplex(3),
        ):
            for _ in range(50):
                g = rng.standard_normal(cset.dim)
                y = cset.argmax_linear(g)
                assert cset.contains(y, tol=1e-9)
                assert abs(cset.support_max(g) - g @ y) <= 1e-10

    def test_roundtrip_dict(self):
        for cset in (
            ComponentSet.box([-1.0], [2.0]),
            ComponentSet.ball([0.0, 1.0], 2.0),
            ComponentSet.simplex(5),
        ):
            back = ComponentSet.from_dict(cset.to_dict())
            assert back.kind == cset.kind and back.dim == cset.dim


class TestBlockGeometry:
    def test_entropy_requires_simplex(self):
        with pytest.raises(GeometryError):
            BlockGeometry(ComponentSet.box([0.0], [1.0]), dgf=ENTROPY)

    def test_moduli(self):
        g = euclid(ComponentSet.box([-1.0], [1.0]))
        assert g.mu_omega == 1.0 and g.l_omega == 1.0
        ge = entropy_simplex(3)
        assert ge.mu_omega == 1.0 and ge.l_omega == 1e12
        assert ge.mu_omega <= ge.l_omega

    def test_norms(self):
        g = euclid(ComponentSet.box([-1.0, -1.0], [1.0, 1.0]))
        assert g.norm([3.0, 4.0]) == pytest.approx(5.0)
        ge = entropy_simplex(2)
        assert ge.norm([0.25, -0.75]) == pytest.approx(1.0)


class TestBregmanDistance:
    def test_zero_at_equal_points(self):
        g = euclid(ComponentSet.box([-1.0, -1.0], [1.0, 1.0]))
        x = np.array([0.3, -0.2])
        assert bregman_distance(g, x, x) == 0.0

    def test_euclidean_half_square(self):
        g = euclid(ComponentSet.box([-2.0, -2.0], [2.0, 2.0]))
        assert bregman_distance(g, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_entropy_value(self):
        # direct evaluation of omega(y) - omega(x) - <grad omega(x), y - x>
        # with omega(z) = sum z_j log z_j
        g = entropy_simplex(2)
        expected = 0.25 * np.log(0.5) + 0.75 * np.log(1.5)
        got = bregman_distance(g, [0.5, 0.5], [0.25, 0.75])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        g = euclid(ComponentSet.box([-1.0], [1.0]))
        with pytest.raises(GeometryError):
            bregman_distance(g, [0.0, 0.0], [0.0])

    def test_infeasible_rejected(self):
        g = euclid(ComponentSet.box([-1.0], [1.0]))
        with pytest.raises(GeometryError):
            bregman_distance(g, [2.0], [0.0])


class TestProxMap:
    def test_box_clamp(self):
        g = euclid(ComponentSet.box([-1.0], [1.0]))
        assert prox_map(g, [0.5], [2.0])[0] == pytest.approx(-1.0)

    @pytest.mark.parametrize(
        "geom",
        [
            euclid(ComponentSet.box([-1.0, -1.0], [1.0, 1.0])),
            euclid(ComponentSet.ball([0.0, 0.0], 1.0)),
            euclid(ComponentSet.simplex(2)),
            entropy_simplex(2),
        ],
    )
    def test_zero_step_is_identity(self, geom):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = geom.set.sample(rng)
            assert geom.norm(prox_map(geom, x, np.zeros(geom.dim)) - x) <= 1e-9

    def test_entropy_closed_form(self):
        g = entropy_simplex(2)
        got = prox_map(g, [0.5, 0.5], [np.log(2.0), 0.0])
        assert np.allclose(got, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)

    def test_entropy_against_numeric_minimizer(self):
        # brute 1-D search over the 2-simplex parameterized as (t, 1-t),
        # with the objective <y, z> + sum_j z_j log(z_j / x_j) on the grid
        g = entropy_simplex(2)
        rng = np.random.default_rng(4)
        ts = np.linspace(1e-9, 1.0 - 1e-9, 20001)
        zs = np.column_stack([ts, 1.0 - ts])
        for _ in range(20):
            x = rng.dirichlet([2.0, 2.0])
            y = rng.standard_normal(2)
            objective = zs @ y + np.sum(zs * np.log(zs / x), axis=1)
            best = ts[int(np.argmin(objective))]
            got = prox_map(g, x, y)
            assert abs(got[0] - best) <= 1e-3
            j = int(np.argmin(np.abs(ts - got[0])))
            assert objective[j] <= objective.min() + 1e-8

    def test_prox_output_feasible(self):
        rng = np.random.default_rng(5)
        for geom in (
            euclid(ComponentSet.box([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5])),
            euclid(ComponentSet.ball([0.2, 0.0], 0.7)),
            entropy_simplex(3),
        ):
            for _ in range(100):
                x = geom.set.sample(rng)
                y = 3.0 * rng.standard_normal(geom.dim)
                assert geom.set.contains(prox_map(geom, x, y), tol=1e-10)

    def test_non_finite_rejected(self):
        g = euclid(ComponentSet.box([-1.0], [1.0]))
        with pytest.raises(GeometryError):
            prox_map(g, [0.0], [np.nan])


class TestDualNorm:
    def test_values(self):
        g2 = euclid(ComponentSet.box([-1.0, -1.0], [1.0, 1.0]))
        assert dual_norm(g2, [3.0, 4.0]) == pytest.approx(5.0)
        g1 = entropy_simplex(2)
        assert dual_norm(g1, [3.0, -4.0]) == pytest.approx(4.0)
        assert dual_norm(g2, [0.0, 0.0]) == 0.0


class TestProxPropertyLoops:
    """Smaller-sample versions of the full property suite (acceptance A1)."""

    @pytest.mark.parametrize(
        "geom,tol,interior",
        [
            (euclid(ComponentSet.box([-1.0, -0.5, -1.5], [0.8, 1.0, 0.2])), 1e-10, False),
            (euclid(ComponentSet.ball([0.1, -0.3, 0.0], 1.2)), 1e-10, False),
            (euclid(ComponentSet.simplex(3)), 1e-10, False),
            (entropy_simplex(3), 1e-8, True),
        ],
    )
    def test_bregman_prox_inequalities(self, geom, tol, interior):
        from blockprox.acceptance import check_prox_properties

        rng = np.random.default_rng(6)
        failures = check_prox_properties(geom, 300, tol, rng, interior=interior)
        assert failures == []


class TestBlockVector:
    def test_from_blocks_and_views(self):
        bv = BlockVector.from_blocks([[1.0, 2.0], [3.0], [4.0, 5.0, 6.0]])
        assert bv.d == 3
        assert len(bv) == 6
        assert np.allclose(bv.block(1), [3.0])
        bv.block(2)[0] = 9.0
        assert bv.data[3] == 9.0

    def test_structure_mismatch(self):
        structure = BlockStructure([2, 2])
        with pytest.raises(GeometryError):
            BlockVector(structure, np.zeros(3))

    def test_composite_norm_decomposes(self):
        geoms = [
            euclid(ComponentSet.box([-1.0, -1.0], [1.0, 1.0])),
            entropy_simplex(3),
        ]
        structure = BlockStructure.from_geometries(geoms)
        rng = np.random.default_rng(7)
        for _ in range(50):
            v = rng.standard_normal(structure.n)
            per_block = sum(
                geoms[i].norm(v[structure.slices[i]]) ** 2 for i in range(2)
            )
            assert composite_norm_sq(geoms, structure, v) == pytest.approx(per_block, rel=1e-12)

    def test_project_function_alias(self):
        box = ComponentSet.box([0.0, 0.0], [1.0, 1.0])
        assert np.allclose(project(box, [2.0, 0.5]), [1.0, 0.5])
