from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhtexp.errors import DimensionError, DomainError, ValidationError
from dhtexp.prob import (
    Alphabet,
    CondDist,
    FiniteDist,
    JointDist,
    compose,
    condition,
    joint,
    marginalize,
    product,
    simplex_grid,
)

from conftest import bsc


def cond(given, target, table):
    return CondDist((Alphabet(given, len(table)),), Alphabet(target, len(table[0])), np.asarray(table))


class TestConstruction:
    def test_rejects_bad_mass(self):
        with pytest.raises(ValidationError):
            joint([("U", 2)], [0.5, 0.6])

    def test_rejects_negative_entry(self):
        with pytest.raises(ValidationError, match=r"entry \(0,\)"):
            joint([("U", 2)], [1.2, -0.2])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DimensionError):
            joint([("U", 2), ("V", 2)], [0.25] * 4)

    def test_alphabet_guard(self):
        with pytest.raises(ValidationError):
            Alphabet("U", 17)

    def test_immutable(self, ex1):
        with pytest.raises(ValueError):
            ex1.P_UV.probs[0, 0] = 0.5

    def test_cond_row_check(self):
        with pytest.raises(ValidationError):
            cond("X", "Y", [[0.5, 0.4], [0.5, 0.5]])


class TestCompose:
    def test_identity_channel_copies_u(self, ex1):
        j = compose(ex1.P_UV, cond("U", "X", np.eye(2)))
        np.testing.assert_allclose(j.marginal("X").probs, [0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(j.marginal(("U", "X")).probs, np.diag([0.5, 0.5]), atol=1e-15)

    def test_constant_map_gives_point_mass(self, ex1):
        j = compose(ex1.P_UV, cond("U", "W", [[0, 1, 0], [0, 1, 0]]))
        np.testing.assert_array_equal(j.marginal("W").probs, [0.0, 1.0, 0.0])

    def test_side_information_marginal(self):
        pu = joint([("U", 2)], [0.5, 0.5])
        j = compose(pu, cond("U", "V", bsc(0.8)))
        np.testing.assert_allclose(j.marginal("V").probs, [0.5, 0.5], atol=1e-15)

    def test_new_axis_conditionally_independent(self, rng):
        base = joint([("U", 3), ("V", 2)], rng.dirichlet(np.ones(6)).reshape(3, 2))
        c = cond("U", "W", rng.dirichlet(np.ones(4), size=3))
        j = compose(base, c)
        np.testing.assert_allclose(j.probs, base.probs[:, :, None] * c.table[:, None, :], atol=1e-15)

    def test_duplicate_axis(self, ex1):
        with pytest.raises(DimensionError):
            compose(ex1.P_UV, cond("U", "V", np.eye(2)))

    def test_missing_conditioning_axis(self, ex1):
        with pytest.raises(DimensionError):
            compose(ex1.P_UV, cond("X", "Y", np.eye(2)))


class TestMarginalize:
    def test_product_marginal(self, rng):
        p = FiniteDist(Alphabet("A", 3), rng.dirichlet(np.ones(3)))
        q = FiniteDist(Alphabet("B", 4), rng.dirichlet(np.ones(4)))
        np.testing.assert_allclose(marginalize(product(p, q), "A").probs, p.probs, atol=1e-15)

    def test_example_side_information(self, ex1):
        np.testing.assert_allclose(ex1.P_UV.marginal("V").probs, [0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(ex1.Q_UV.marginal("V").probs, [0.5, 0.5], atol=1e-15)

    def test_keep_all_is_identity(self, ex1):
        np.testing.assert_array_equal(marginalize(ex1.P_UV, ("U", "V")).probs, ex1.P_UV.probs)

    def test_unknown_axis(self, ex1):
        with pytest.raises(DimensionError):
            marginalize(ex1.P_UV, "Z")

    def test_commutes_with_reorder(self, rng):
        j = joint([("A", 2), ("B", 3), ("C", 2)], rng.dirichlet(np.ones(12)).reshape(2, 3, 2))
        a = marginalize(j.reorder(("C", "A", "B")), ("A", "C")).probs
        b = marginalize(j, ("A", "C")).probs
        np.testing.assert_allclose(a, b, atol=1e-15)


class TestCondition:
    def test_round_trip(self, rng):
        pu = joint([("U", 3)], rng.dirichlet(np.ones(3)))
        c = cond("U", "V", rng.dirichlet(np.ones(2), size=3))
        back = condition(compose(pu, c), "V", "U")
        np.testing.assert_allclose(back.table, c.table, atol=1e-12)

    def test_product_rows_equal_marginal(self, rng):
        p = FiniteDist(Alphabet("A", 3), rng.dirichlet(np.ones(3)))
        q = FiniteDist(Alphabet("B", 2), rng.dirichlet(np.ones(2)))
        c = condition(product(p, q), "B", "A")
        for row in c.table:
            np.testing.assert_allclose(row, q.probs, atol=1e-12)

    def test_zero_mass_rows_uniform_and_flagged(self):
        j = joint([("U", 2), ("V", 2)], [[0.5, 0.5], [0.0, 0.0]])
        c = condition(j, "V", "U")
        np.testing.assert_array_equal(c.table[1], [0.5, 0.5])
        assert c.degenerate[1] and not c.degenerate[0]

    def test_uncoded_view_round_trip(self, ex1):
        pvy = np.einsum("uv,uy->vy", ex1.P_UV.probs, ex1.W)
        j = joint([("V", 2), ("Y", 2)], pvy)
        c = condition(j, "Y", "V")
        recomposed = compose(j.marginal("V"), c)
        assert abs(recomposed.probs.sum() - 1.0) <= 1e-12
        np.testing.assert_allclose(recomposed.probs, pvy, atol=1e-12)


class TestSimplexGrid:
    def test_binary_half(self):
        np.testing.assert_array_equal(simplex_grid(2, 0.5), [[1, 0], [0.5, 0.5], [0, 1]])

    def test_counts(self):
        assert len(simplex_grid(3, 0.5)) == 6
        assert len(simplex_grid(2, 0.25)) == 5

    @given(st.integers(1, 4), st.sampled_from([1.0, 0.5, 0.25, 0.2, 0.1]))
    @settings(max_examples=30, deadline=None)
    def test_count_formula_and_validity(self, d, s):
        g = simplex_grid(d, s)
        m = int(round(1 / s))
        assert len(g) == comb(m + d - 1, d - 1)
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(g >= 0)

    def test_bad_step(self):
        with pytest.raises(DomainError):
            simplex_grid(2, 0.3)
        with pytest.raises(DomainError):
            simplex_grid(2, 0.0)
