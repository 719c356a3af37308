import numpy as np
import pytest

from dhtexp.errors import ConfigurationError
from dhtexp.info import kl_div
from dhtexp.prob import joint, marginalize
from dhtexp.projection import (
    EntropyFloorConstraint,
    MarginalConstraint,
    min_kl,
    min_kl_bruteforce,
    t_set_constraints,
    t_set_projection,
)


def rand_uvw(rng):
    P_UV = rng.dirichlet(np.ones(4)).reshape(2, 2)
    Q_UV = rng.dirichlet(np.ones(4)).reshape(2, 2)
    P_WU = rng.dirichlet(np.ones(2), size=2)
    P = joint([("U", 2), ("V", 2), ("W", 2)], P_UV[:, :, None] * P_WU[:, None, :])
    Q = joint([("U", 2), ("V", 2), ("W", 2)], Q_UV[:, :, None] * P_WU[:, None, :])
    return P, Q


class TestMinKL:
    def test_unconstrained_is_zero(self, rng):
        P, Q = rand_uvw(rng)
        assert min_kl(Q).value == pytest.approx(0.0, abs=1e-12)

    def test_single_marginal_closed_form(self, rng):
        # pinning one marginal: minimum is the divergence of that marginal
        P, Q = rand_uvw(rng)
        res = min_kl(Q, [MarginalConstraint(marginalize(P, ("U", "W")))])
        expected = kl_div(marginalize(P, ("U", "W")), marginalize(Q, ("U", "W")))
        assert res.value == pytest.approx(expected, abs=1e-9)
        np.testing.assert_allclose(marginalize(res.argmin, ("U", "W")).probs,
                                   marginalize(P, ("U", "W")).probs, atol=1e-9)

    def test_argmin_meets_constraints(self, rng):
        P, Q = rand_uvw(rng)
        cons, _ = t_set_constraints("T1", P)
        res = min_kl(Q, cons)
        for c in cons:
            np.testing.assert_allclose(marginalize(res.argmin, c.axes).probs, c.target.probs, atol=1e-8)
        assert res.value == pytest.approx(kl_div(res.argmin, Q), abs=1e-9)

    def test_off_support_infeasible(self):
        Q = joint([("A", 2), ("B", 2)], [[0.5, 0.5], [0.0, 0.0]])
        target = joint([("A", 2)], [0.5, 0.5])
        res = min_kl(Q, [MarginalConstraint(target)])
        assert not res.feasible and res.value == np.inf

    def test_floor_binding(self, rng):
        P, Q = rand_uvw(rng)
        cons, floors = t_set_constraints("T2", P)
        res = min_kl(Q, cons, floors, witness=P)
        from dhtexp.info import cond_entropy
        assert cond_entropy(res.argmin, "W", "V") >= floors[0].floor - 1e-8

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(3)
        for kind in ("T1", "T2", "T3"):
            for _ in range(3):
                P, Q = rand_uvw(rng)
                m, f = t_set_constraints(kind, P)
                fast = min_kl(Q, m, f, witness=P).value
                slow = min_kl_bruteforce(Q, m, f, step=1e-3, seeds=[P])
                assert abs(fast - slow) <= 1e-3


class TestTSets:
    def test_relaxation_order(self, rng):
        for _ in range(10):
            P, Q = rand_uvw(rng)
            t1 = t_set_projection("T1", P, Q).value
            t2 = t_set_projection("T2", P, Q).value
            t3 = t_set_projection("T3", P, Q).value
            assert t3 <= t2 + 1e-9 <= t1 + 2e-9

    def test_bounded_by_true_divergence(self, rng):
        # P itself lies in every T-set
        for _ in range(10):
            P, Q = rand_uvw(rng)
            for kind in ("T1", "T2", "T3"):
                assert t_set_projection(kind, P, Q).value <= kl_div(P, Q) + 1e-9

    def test_identical_marginals_give_zero(self, ex1):
        # Q_UV has the same uniform marginals as P_UV, and W carries only U
        wu = np.array([[0.7, 0.3], [0.2, 0.8]])
        P = joint([("U", 2), ("V", 2), ("W", 2)], ex1.P_UV.probs[:, :, None] * wu[:, None, :])
        Q = joint([("U", 2), ("V", 2), ("W", 2)], ex1.Q_UV.probs[:, :, None] * wu[:, None, :])
        assert t_set_projection("T3", P, Q).value == pytest.approx(0.0, abs=1e-10)

    def test_t2_floor_degenerates_when_independent(self):
        P = joint([("U", 2), ("V", 2), ("W", 2)], np.full((2, 2, 2), 0.125))
        m, f = t_set_constraints("T2", P)
        assert not f and len(m) == 3

    def test_unknown_kind(self, rng):
        P, Q = rand_uvw(rng)
        with pytest.raises(ValueError):
            t_set_constraints("T9", P)


class TestBruteforce:
    def test_is_upper_bound(self, rng):
        P, Q = rand_uvw(rng)
        m, f = t_set_constraints("T1", P)
        assert min_kl_bruteforce(Q, m, f, step=1e-2, seeds=[P]) >= min_kl(Q, m, f).value - 1e-9

    def test_vacuous_floor_matches_unfloored(self, rng):
        P, Q = rand_uvw(rng)
        m, _ = t_set_constraints("T3", P)
        floor = [EntropyFloorConstraint("W", ("V",), 0.0)]
        with_floor = min_kl_bruteforce(Q, m, floor, step=1e-2, seeds=[P])
        assert with_floor == pytest.approx(min_kl_bruteforce(Q, m, step=1e-2, seeds=[P]), abs=1e-9)

    def test_thin_feasible_set_found_through_seed(self):
        # P_UW has cells near 0.004 and 0.008, so the coarse lattice misses the polytope
        P_UV = np.array([[0.01382084, 0.01625959], [0.02757487, 0.94234471]])
        Q_UV = np.array([[0.37526381, 0.51760248], [0.0402359, 0.06689781]])
        P_WU = np.array([[0.868379, 0.131621], [0.00824034, 0.99175966]])
        P_UV, Q_UV = P_UV / P_UV.sum(), Q_UV / Q_UV.sum()
        P = joint([("U", 2), ("V", 2), ("W", 2)], P_UV[:, :, None] * P_WU[:, None, :])
        Q = joint([("U", 2), ("V", 2), ("W", 2)], Q_UV[:, :, None] * P_WU[:, None, :])
        m, _ = t_set_constraints("T3", P)
        assert min_kl_bruteforce(Q, m) == np.inf
        seeded = min_kl_bruteforce(Q, m, seeds=[P])
        assert seeded == pytest.approx(min_kl(Q, m, witness=P).value, abs=1e-3)

    def test_too_many_free_dimensions(self, rng):
        _, Q = rand_uvw(rng)
        with pytest.raises(ConfigurationError):
            min_kl_bruteforce(Q)


class TestDocumentedCases:
    def test_feasible_reference_gives_zero(self, rng):
        P, Q = rand_uvw(rng)
        res = min_kl(Q, [MarginalConstraint(marginalize(Q, ("U", "W")))])
        assert res.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(res.argmin.probs, Q.probs, atol=1e-10)

    def test_full_joint_pin(self, rng):
        P, Q = rand_uvw(rng)
        assert min_kl(Q, [MarginalConstraint(P)]).value == pytest.approx(kl_div(P, Q), abs=1e-10)

    def test_t1_with_equal_laws(self, rng):
        P, _ = rand_uvw(rng)
        assert t_set_projection("T1", P, P).value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("kind", ["T2", "T3"])
    def test_example_reference_in_relaxed_sets(self, ex1, kind):
        # Q_UV shares P's marginals and W depends on U alone, so Q_UVW lies in both sets
        rng = np.random.default_rng(8)
        for _ in range(10):
            wu = rng.dirichlet(np.ones(3), size=2)
            P = joint([("U", 2), ("V", 2), ("W", 3)], ex1.P_UV.probs[:, :, None] * wu[:, None, :])
            Q = joint([("U", 2), ("V", 2), ("W", 3)], ex1.Q_UV.probs[:, :, None] * wu[:, None, :])
            assert t_set_projection(kind, P, Q).value == pytest.approx(0.0, abs=1e-10)
