import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhtexp.errors import DimensionError, DomainError
from dhtexp.info import (
    LN2,
    binary_convolve,
    binary_entropy,
    binary_kl,
    cond_entropy,
    cond_mutual_info,
    entropy,
    inv_binary_entropy,
    kl_div,
    mgl_bound,
    mutual_info,
)
from dhtexp.prob import joint, marginalize

probs4 = st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4).map(lambda x: np.array(x) / sum(x))


def rand_joint(rng, shape, names):
    return joint(list(zip(names, shape)), rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-15)

    def test_point_mass(self):
        assert entropy([1.0, 0.0]) == 0.0

    def test_product_conditional(self, rng):
        a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))
        j = joint([("A", 3), ("B", 2)], np.outer(a, b))
        assert cond_entropy(j, "B", "A") == pytest.approx(entropy(b), abs=1e-12)

    def test_chain_rule(self, rng):
        for _ in range(20):
            j = rand_joint(rng, (3, 4), "AB")
            lhs = entropy(j.probs.ravel())
            rhs = entropy(marginalize(j, "A").probs) + cond_entropy(j, "B", "A")
            assert lhs == pytest.approx(rhs, abs=1e-10)


class TestMutualInformation:
    def test_product_is_zero(self, rng):
        j = joint([("A", 2), ("B", 3)], np.outer(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3))))
        assert mutual_info(j, "A", "B") == pytest.approx(0.0, abs=1e-15)

    def test_example_side_information(self, ex1):
        expected = (1.0 - float(binary_entropy(0.8))) * LN2
        brute = sum(
            p * np.log(p / (ex1.P_UV.probs[u].sum() * ex1.P_UV.probs[:, v].sum()))
            for (u, v), p in np.ndenumerate(ex1.P_UV.probs)
        )
        assert mutual_info(ex1.P_UV, "U", "V") == pytest.approx(expected, abs=1e-12)
        assert brute == pytest.approx(expected, abs=1e-12)

    def test_trivial_conditioning(self, rng):
        j = rand_joint(rng, (1, 3, 2), "SXY")
        assert cond_mutual_info(j, "X", "Y", "S") == pytest.approx(
            mutual_info(marginalize(j, ("X", "Y")), "X", "Y"), abs=1e-14)

    def test_nonnegative(self, rng):
        for _ in range(20):
            j = rand_joint(rng, (2, 2, 3), "ABC")
            assert cond_mutual_info(j, "A", "B", "C") >= 0.0


class TestDivergence:
    def test_self(self, rng):
        p = rng.dirichlet(np.ones(5))
        assert kl_div(p, p) == 0.0

    def test_point_vs_uniform(self):
        assert kl_div([1.0, 0.0], [0.5, 0.5]) == pytest.approx(LN2, abs=1e-15)

    def test_infinite_off_support(self):
        assert kl_div([0.5, 0.5], [1.0, 0.0]) == np.inf

    def test_zero_zero_cell(self):
        assert kl_div([1.0, 0.0], [1.0, 0.0]) == 0.0

    def test_uncoded_example_value(self, ex1):
        pvy = joint([("V", 2), ("Y", 2)], np.einsum("uv,uy->vy", ex1.P_UV.probs, ex1.W))
        qvy = joint([("V", 2), ("Y", 2)], np.einsum("uv,uy->vy", ex1.Q_UV.probs, ex1.W))
        assert kl_div(pvy, qvy) / LN2 == pytest.approx(0.3244, abs=1e-4)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            kl_div([0.5, 0.5], [0.2, 0.3, 0.5])

    @given(probs4, probs4)
    @settings(max_examples=50, deadline=None)
    def test_data_processing(self, p, q):
        pj, qj = joint([("A", 2), ("B", 2)], p.reshape(2, 2)), joint([("A", 2), ("B", 2)], q.reshape(2, 2))
        assert kl_div(marginalize(pj, "A"), marginalize(qj, "A")) <= kl_div(pj, qj) + 1e-12


class TestBinaryHelpers:
    def test_inverse_endpoints(self):
        assert inv_binary_entropy(1.0) == pytest.approx(0.5, abs=1e-12)
        assert inv_binary_entropy(0.0) == 0.0

    def test_branch2_constant(self):
        assert float(binary_entropy(0.68)) == pytest.approx(0.9044, abs=1e-4)
        assert 1 - float(binary_entropy(binary_convolve(0.2, 0.8))) == pytest.approx(0.0956, abs=1e-4)

    def test_convolution_values(self):
        assert binary_convolve(0.2, 0.8) == pytest.approx(0.68, abs=1e-15)
        assert binary_convolve(0.2, 0.25) == pytest.approx(0.35, abs=1e-15)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_convolution_symmetric_absorbing(self, a, b):
        assert binary_convolve(a, b) == pytest.approx(binary_convolve(b, a), abs=1e-15)
        assert binary_convolve(a, 0.5) == pytest.approx(0.5, abs=1e-15)
        assert 0.0 <= binary_convolve(a, b) <= 1.0

    def test_binary_kl(self):
        assert binary_kl(0.68, 0.35) == pytest.approx(0.3244, abs=1e-4)
        assert binary_kl(0.3, 0.3) == 0.0
        assert binary_kl(0.5, 0.0) == np.inf

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            binary_entropy(1.5)
        with pytest.raises(DomainError):
            inv_binary_entropy(-0.1)
        with pytest.raises(DomainError):
            binary_convolve(0.2, 1.2)

    def test_right_inverse_on_grid(self):
        for h in np.arange(0.0, 1.0001, 1e-3):
            h = min(h, 1.0)
            assert float(binary_entropy(inv_binary_entropy(h))) == pytest.approx(h, abs=1e-9)

    def test_mgl_values(self):
        for p in (0.1, 0.3, 0.8):
            assert mgl_bound(1.0, p) == pytest.approx(1.0, abs=1e-10)
            assert mgl_bound(0.0, p) == pytest.approx(float(binary_entropy(p)), abs=1e-12)
        assert mgl_bound(float(binary_entropy(0.2)), 0.8) == pytest.approx(float(binary_entropy(0.68)), abs=1e-10)

    @given(st.floats(0.01, 0.99), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=60)
    def test_mgl_monotone(self, p, h1, h2):
        lo, hi = sorted((h1, h2))
        assert mgl_bound(lo, p) <= mgl_bound(hi, p) + 1e-12
