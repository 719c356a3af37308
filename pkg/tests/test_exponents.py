import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhtexp.channel import InputDist, capacity, max_pair_divergence
from dhtexp.errors import PreconditionError, StructureError, UnsupportedConfigurationError
from dhtexp.exponents import (
    HTInstance,
    HybridParams,
    SearchConfig,
    beta0,
    check_taci_structure,
    example1_report,
    f_prime,
    fig2_curve,
    jhtcc_exponent,
    jhtcc_objective,
    multiletter_k1,
    onebit_exponent,
    shtcc_exponent,
    shtcc_objective,
    taci_exponent,
    uncoded_exponent,
    uncoded_params,
    zero_capacity_exponent,
)
from dhtexp.exponents.example1 import branch2_bound_bits, uncoded_bits
from dhtexp.info import LN2, binary_entropy, mgl_bound

from conftest import bsc, random_instance

COARSE = SearchConfig(grid_step=0.25, r_grid=10, refine_rounds=0)
# a branch-two optimum of the separation search on the binary example
W_STAR = np.array([[0.6, 0.2, 0.2], [0.3, 0.425, 0.275]])
UNIFORM = InputDist.single([0.5, 0.5])


def zero_capacity_instance():
    P = np.array([[0.3, 0.2], [0.1, 0.4]])
    Q = np.array([[0.2, 0.1], [0.5, 0.2]])
    return HTInstance.from_arrays(P, Q, np.array([[0.3, 0.7], [0.3, 0.7]]))


def tai_instance(tau=1.0):
    P = 0.5 * bsc(0.1)
    Q = np.full((2, 2), 0.25)
    return HTInstance.from_arrays(P, Q, bsc(0.2), tau=tau, v_factorization=(2, 1))


class TestBaselines:
    def test_uncoded_example(self, ex1):
        assert uncoded_exponent(ex1) / LN2 == pytest.approx(0.3244, abs=1e-4)
        assert uncoded_exponent(ex1) / LN2 == pytest.approx(uncoded_bits(), abs=1e-12)

    def test_beta0_example_is_zero(self, ex1):
        # Q_UV already has P's uniform marginals, so it is its own projection
        res = beta0(ex1)
        assert res.value == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(res.argmin.probs, ex1.Q_UV.probs, atol=1e-9)

    def test_onebit_example(self, ex1):
        rep = onebit_exponent(ex1)
        assert rep.value_nats == pytest.approx(0.0, abs=1e-9)
        assert rep.terms["E_c"] == pytest.approx(0.6 * np.log(4), abs=1e-12)

    def test_onebit_tau_zero(self, ex1):
        assert onebit_exponent(ex1.with_tau(0.0)).value_nats == ex1.side_info_divergence()

    def test_zero_capacity_rejects_noisy_channel(self, ex1):
        with pytest.raises(PreconditionError, match="row 1"):
            zero_capacity_exponent(ex1)

    def test_zero_capacity_equals_onebit(self):
        inst = zero_capacity_instance()
        d_v = inst.side_info_divergence()
        assert d_v > 0.1
        assert zero_capacity_exponent(inst).value_nats == d_v
        assert onebit_exponent(inst).value_nats == d_v

    def test_k1_example(self, ex1):
        assert multiletter_k1(ex1).value_bits == pytest.approx(uncoded_bits(), abs=1e-12)

    def test_k1_needs_unit_bandwidth(self, ex1):
        with pytest.raises(PreconditionError):
            multiletter_k1(ex1.with_tau(2.0))

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_orderings(self, seed):
        inst = random_instance(np.random.default_rng(seed))
        assert multiletter_k1(inst, grid_step=0.25).value_nats >= uncoded_exponent(inst) - 1e-12
        ob = onebit_exponent(inst)
        ec, _ = max_pair_divergence(inst.W)
        assert ob.value_nats <= ec + inst.side_info_divergence() + 1e-12


class TestSHTCCObjective:
    def test_branch_two_point(self, ex1):
        t = shtcc_objective(ex1, W_STAR, UNIFORM, 0.04916959596162651)
        assert not t.rate_branch and t.E2 == np.inf and t.feasible
        # expurgated exponent in its slope -1 region and red alert, both closed form
        assert t.E_x == pytest.approx(-np.log(0.9) - t.R, abs=1e-9)
        assert t.E_m == pytest.approx(-0.5 * np.log(0.64), abs=1e-12)
        assert t.E3 == pytest.approx(t.E1 - 0.0011285, abs=1e-6)
        assert t.value / LN2 == pytest.approx(0.10628, abs=1e-5)

    def test_rate_branch_formulas(self, ex1):
        a, b = 0.03169345319234529, 0.04916959596162651
        R = 0.5 * (a + b)
        t = shtcc_objective(ex1, W_STAR, UNIFORM, R)
        t2 = shtcc_objective(ex1, W_STAR, UNIFORM, b)
        assert t.rate_branch
        assert t.E4 == pytest.approx(ex1.side_info_divergence() + R - a + t.E_m, abs=1e-12)
        assert t.E3 - t.E_x == pytest.approx(t2.E3 - t2.E_x - t2.I_VW + R - a, abs=1e-9)

    def test_infeasible_rate_flagged(self, ex1):
        assert not shtcc_objective(ex1, W_STAR, UNIFORM, 0.0).feasible
        assert not shtcc_objective(ex1, W_STAR, UNIFORM, 1.0).feasible


class TestSHTCCSearch:
    def test_coarse_search_bounds(self, ex1):
        rep = shtcc_exponent(ex1, COARSE)
        assert rep.feasible and rep.tag == "search lower bound"
        assert 0.08 <= rep.value_bits <= 0.161 + 2e-3

    def test_reported_point_reevaluates(self, ex1):
        rep = shtcc_exponent(ex1, COARSE)
        p = rep.params
        inp = InputDist(p["P_S"], p["P_X_given_S"])
        t = shtcc_objective(ex1, p["P_W_given_U"], inp, p["R_nats"])
        assert t.feasible and t.value == pytest.approx(rep.value_nats, abs=1e-12)

    def test_zero_bandwidth_infeasible(self, ex1):
        rep = shtcc_exponent(ex1.with_tau(0.0), COARSE)
        assert not rep.feasible and "no feasible" in rep.diagnostics["reason"]

    def test_zero_capacity_infeasible(self):
        rep = shtcc_exponent(zero_capacity_instance(), COARSE)
        assert not rep.feasible


class TestJHTCC:
    def test_uncoded_point(self, ex1):
        t = jhtcc_objective(ex1, uncoded_params(ex1, 2, 3))
        expected = uncoded_exponent(ex1)
        for e in (t.E1, t.E2, t.E3):
            assert e == pytest.approx(expected, abs=1e-9)
        assert t.feasible

    def test_search_at_least_uncoded(self, ex1):
        rep = jhtcc_exponent(ex1)
        assert rep.value_bits >= uncoded_bits() - 1e-9

    def test_unit_bandwidth_only(self, ex1):
        with pytest.raises(UnsupportedConfigurationError):
            jhtcc_exponent(ex1.with_tau(2.0))

    def test_param_validation(self, ex1):
        b = uncoded_params(ex1, 1, 2)
        with pytest.raises(Exception):
            HybridParams(b.P_S, b.P_W * 2, b.P_Xp, b.P_X)


class TestTACI:
    def test_tai_oracle(self):
        inst = tai_instance(0.5)
        c = capacity(inst.W)[0] / LN2
        oracle = 1 - mgl_bound(1 - 0.5 * c, 0.1)
        assert taci_exponent(inst).value_bits == pytest.approx(oracle, abs=5e-3)

    def test_rate_constraint_met(self):
        rep = taci_exponent(tai_instance(0.25))
        assert rep.terms["I_U_W_given_Z"] <= rep.terms["tau_C"] + 1e-9

    def test_structure_rejected(self, ex1):
        inst = HTInstance.from_arrays(ex1.P_UV.probs, ex1.Q_UV.probs, ex1.W, v_factorization=(2, 1))
        with pytest.raises(StructureError, match="cells"):
            check_taci_structure(inst)

    def test_needs_factorization(self, ex1):
        with pytest.raises(StructureError):
            taci_exponent(ex1)


class TestExample1:
    def test_fig2_curve(self):
        curve = fig2_curve()
        r, v = max(curve, key=lambda t: t[1])
        assert r == 0.5 and v == pytest.approx(0.161, abs=1e-3)
        assert curve[0][0] == 0.2 and len(curve) == 61

    def test_f_prime_endpoint(self):
        # f'(0.5) = E_x(0) = -0.25 log2(4 q (1 - q))
        assert f_prime(0.5)[0] == pytest.approx(-0.25 * np.log2(0.64), abs=1e-9)

    def test_branch2_bound(self):
        assert branch2_bound_bits() == pytest.approx(1 - float(binary_entropy(0.68)), abs=1e-15)

    def test_report_without_search(self):
        rep = example1_report(search=False)
        assert rep["all_pass"]
        assert "shtcc_bits" not in rep["landmarks"]


class TestReport:
    def test_to_dict_units_and_infinities(self, ex1):
        t = shtcc_objective(ex1, W_STAR, UNIFORM, 0.04916959596162651)
        from dhtexp.exponents.instance import ExponentReport
        rep = ExponentReport("shtcc", t.value, "search lower bound", terms=t.as_dict())
        d = rep.to_dict("bits")
        assert d["terms"]["E2"] == "inf"
        assert d["value"] == pytest.approx(t.value / LN2, abs=1e-12)
        assert rep.to_dict("nats")["value"] == pytest.approx(t.value, abs=1e-12)

    def test_search_config_validation(self):
        with pytest.raises(Exception):
            SearchConfig(grid_step=0.0)
        with pytest.raises(Exception):
            SearchConfig(r_grid=1)


class TestDocumentedCases:
    def test_f_prime_start_frozen(self):
        # at r = q the rate equals capacity, where E_x vanishes
        assert f_prime(0.2)[0] == pytest.approx(0.09561854227550626, abs=1e-12)
        assert f_prime(0.2)[0] == pytest.approx(branch2_bound_bits(), abs=1e-12)

    def test_shtcc_independent_w_equal_laws(self):
        inst = HTInstance.from_arrays(0.5 * bsc(0.3), 0.5 * bsc(0.3), bsc(0.1))
        t = shtcc_objective(inst, np.array([[0.4, 0.6], [0.4, 0.6]]), UNIFORM, 0.0)
        assert t.E1 == pytest.approx(0.0, abs=1e-12)

    def test_shtcc_no_difference(self):
        inst = HTInstance.from_arrays(0.5 * bsc(0.3), 0.5 * bsc(0.3), np.array([[0.5, 0.5], [0.5, 0.5]]))
        rep = shtcc_exponent(inst, COARSE)
        assert not rep.feasible or rep.value_nats == pytest.approx(0.0, abs=1e-9)

    def test_jhtcc_perturbed_uncoded(self, ex1):
        b = uncoded_params(ex1, 2, 3)
        m = np.array([[0.99, 0.01], [0.01, 0.99]])
        b = b.replace(P_Xp=np.broadcast_to(m[:, None, :], b.P_Xp.shape).copy(),
                      P_X=np.broadcast_to(m[:, None, None, :], b.P_X.shape).copy())
        assert jhtcc_objective(ex1, b).value / LN2 == pytest.approx(0.3244, abs=0.02)

    def test_jhtcc_equal_laws(self):
        inst = HTInstance.from_arrays(0.5 * bsc(0.3), 0.5 * bsc(0.3), bsc(0.1))
        assert jhtcc_exponent(inst).value_nats == pytest.approx(0.0, abs=1e-9)

    def test_uncoded_special_channels(self, ex1):
        noiseless = HTInstance.from_arrays(ex1.P_UV.probs, ex1.Q_UV.probs, np.eye(2))
        from dhtexp.info import kl_div
        assert uncoded_exponent(noiseless) == pytest.approx(kl_div(ex1.P_UV, ex1.Q_UV), abs=1e-12)
        inst = zero_capacity_instance()
        assert uncoded_exponent(inst) == pytest.approx(inst.side_info_divergence(), abs=1e-12)

    def test_zero_capacity_value(self):
        from dhtexp.info import binary_convolve
        # a U with P_V = [0.68, 0.32] and Q_V = [0.35, 0.65]
        P = np.array([[0.68, 0.0], [0.0, 0.32]])
        Q = np.array([[0.35, 0.0], [0.0, 0.65]])
        inst = HTInstance.from_arrays(P, Q, np.array([[0.5, 0.5], [0.5, 0.5]]))
        assert zero_capacity_exponent(inst).value_bits == pytest.approx(0.3244, abs=1e-4)
        assert binary_convolve(0.2, 0.8) == pytest.approx(0.68)

    def test_k1_special_cases(self):
        same = HTInstance.from_arrays(0.5 * bsc(0.3), 0.5 * bsc(0.3), bsc(0.1))
        assert multiletter_k1(same).value_nats == pytest.approx(0.0, abs=1e-12)
        inst = zero_capacity_instance()
        assert multiletter_k1(inst).value_nats == pytest.approx(inst.side_info_divergence(), abs=1e-12)

    def test_taci_zero_bandwidth(self):
        assert taci_exponent(tai_instance(0.0)).value_bits == pytest.approx(0.0, abs=1e-6)

    def test_taci_rate_unconstrained(self):
        inst = HTInstance.from_arrays(0.5 * bsc(0.1), np.full((2, 2), 0.25), np.eye(2), v_factorization=(2, 1))
        assert taci_exponent(inst).value_bits == pytest.approx(1 - float(binary_entropy(0.1)), abs=1e-9)

    def test_e4_not_below_e3_at_uniform_inputs(self, ex1):
        # with D_V = 0 and the T3 term 0 on this instance, E4 >= E3 reduces to E_m >= E_x
        rng = np.random.default_rng(4)
        for _ in range(100):
            w = rng.dirichlet(np.ones(3), size=2)
            t = shtcc_objective(ex1, w, UNIFORM, float(rng.uniform(0.0, 0.19)))
            assert t.E4 >= t.E3 - 1e-12

    def test_e4_below_e3_at_skewed_input(self, ex1):
        # constant W at zero rate: E3 = E_x(0) = -0.375 ln 0.8 exceeds E4 = E_m
        inp = InputDist.single([0.75, 0.25])
        t = shtcc_objective(ex1, np.array([[0.5, 0.5], [0.5, 0.5]]), inp, 0.0)
        assert t.feasible
        assert t.E3 == pytest.approx(-0.375 * np.log(0.8), abs=1e-9)
        assert t.E4 < t.E3

    @pytest.mark.slow
    def test_shtcc_recovers_taci(self):
        inst = tai_instance(1.0)
        assert shtcc_exponent(inst).value_bits >= taci_exponent(inst).value_bits - 2e-3

    def test_hybrid_beats_separation_on_example(self, ex1):
        assert jhtcc_exponent(ex1).value_nats >= shtcc_exponent(ex1, COARSE).value_nats - 2e-3 * LN2
