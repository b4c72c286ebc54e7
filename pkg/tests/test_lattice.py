"""Subset-lattice transforms against dense and hand-computed oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andorlens.errors import ConfigurationError, DataError, ShapeError
from andorlens.lattice import (
    FAMILY_AND,
    FAMILY_OR,
    InteractionVector,
    Mask,
    ValueTable,
    adjoint_zeta,
    and_component_sums,
    enumerate_masks,
    mask_orders,
    mobius_and,
    mobius_or,
    or_component_sums,
    reconstruct_table,
    reflect,
    subset_mobius,
    subset_zeta,
    zeta_reconstruct,
)

from conftest import (
    brute_and_effects,
    brute_or_effects,
    brute_reconstruct,
    dense_and_matrix,
    dense_or_matrix,
)


def shifted_table(rng, n, scale=3.0):
    t = rng.normal(0, scale, size=1 << n)
    t[0] = 0.0
    return t


class TestMask:
    def test_enumerate_n1(self):
        masks = enumerate_masks(1)
        assert [m.bits for m in masks] == [0, 1]
        assert masks[0].members() == ()
        assert masks[1].members() == (0,)

    def test_enumerate_n2(self):
        masks = enumerate_masks(2)
        assert [m.members() for m in masks] == [(), (0,), (1,), (0, 1)]

    def test_enumerate_n10_length(self):
        assert len(enumerate_masks(10)) == 1024

    def test_position_equals_numeric_value(self):
        for i, m in enumerate(enumerate_masks(4)):
            assert m.bits == i == int(m)

    @pytest.mark.parametrize("bad_n", [0, -1, 21, 64])
    def test_out_of_range_names_limit(self, bad_n):
        with pytest.raises(ConfigurationError, match="20"):
            enumerate_masks(bad_n)

    def test_subset_and_intersection(self):
        a = Mask(0b0110, 4)
        assert a.order == 2
        assert Mask(0b1110, 4).contains(a)
        assert not a.contains(Mask(0b0001, 4))
        assert a.intersects(Mask(0b0010, 4))
        assert not a.intersects(Mask(0b1001, 4))
        assert a.complement().bits == 0b1001

    def test_orders_vector(self):
        assert mask_orders(3).tolist() == [0, 1, 1, 2, 1, 2, 2, 3]


class TestValueTable:
    def test_baseline_is_empty_mask_value(self):
        vt = ValueTable(n=2, values=[1.5, 2.0, 3.0, 4.0], variant_id="v")
        assert vt.baseline == 1.5
        assert vt.shifted()[0] == 0.0

    def test_rejects_wrong_length(self):
        with pytest.raises(ShapeError):
            ValueTable(n=2, values=[0.0, 1.0])

    def test_rejects_nan_naming_mask(self):
        with pytest.raises(DataError, match="mask 2"):
            ValueTable(n=2, values=[0.0, 1.0, float("nan"), 3.0])

    def test_json_round_trip(self, rng):
        vt = ValueTable(n=3, values=rng.normal(size=8), variant_id="orig")
        back = ValueTable.from_json_dict(vt.to_json_dict())
        assert back.variant_id == "orig"
        np.testing.assert_array_equal(back.values, vt.values)


class TestMobiusAnd:
    def test_worked_n2_example(self):
        iv = mobius_and([0.0, 1.0, 2.0, 5.0])
        assert iv.family == FAMILY_AND
        np.testing.assert_allclose(iv.effects, [0.0, 1.0, 2.0, 2.0])

    def test_single_variable(self):
        np.testing.assert_allclose(mobius_and([0.0, 4.25]).effects, [0.0, 4.25])

    def test_inverse_round_trip_n3(self, rng):
        table = shifted_table(rng, 3)
        iv = mobius_and(table)
        np.testing.assert_allclose(subset_zeta(iv.effects), table, rtol=1e-12)

    def test_matches_dense_oracle(self, rng):
        for n in (1, 2, 3, 4, 5):
            table = shifted_table(rng, n)
            np.testing.assert_allclose(
                mobius_and(table).effects, brute_and_effects(table), atol=1e-10
            )

    def test_rejects_nonzero_empty_entry(self):
        with pytest.raises(DataError, match="empty mask"):
            mobius_and([1.0, 2.0])

    def test_rejects_non_finite_naming_mask(self):
        with pytest.raises(DataError, match="mask 1"):
            mobius_and([0.0, float("inf"), 0.0, 0.0])

    def test_linearity(self, rng):
        x = shifted_table(rng, 4)
        y = shifted_table(rng, 4)
        lhs = mobius_and(2.5 * x - 1.25 * y).effects
        rhs = 2.5 * mobius_and(x).effects - 1.25 * mobius_and(y).effects
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


class TestMobiusOr:
    def test_pure_presence_or_n2(self):
        iv = mobius_or([0.0, 1.0, 1.0, 1.0])
        assert iv.family == FAMILY_OR
        np.testing.assert_allclose(iv.effects, [0.0, 0.0, 0.0, 1.0])

    def test_single_variable_degenerates_to_and(self):
        np.testing.assert_allclose(mobius_or([0.0, 3.5]).effects, [0.0, 3.5])

    def test_matches_dense_oracle(self, rng):
        for n in (1, 2, 3, 4, 5):
            table = shifted_table(rng, n)
            np.testing.assert_allclose(
                mobius_or(table).effects, brute_or_effects(table), atol=1e-10
            )

    def test_duality_with_reflected_and(self, rng):
        # strict entry-for-entry equality needs both boundary entries zero,
        # otherwise the empty-mask pinning differs between the two routes
        table = shifted_table(rng, 3)
        table[-1] = 0.0
        or_route = mobius_or(table).effects
        and_route = -mobius_and(reflect(table)).effects
        np.testing.assert_allclose(or_route, and_route, atol=1e-12)

    def test_duality_general_tables_nonempty_masks(self, rng):
        table = shifted_table(rng, 3)
        or_route = mobius_or(table).effects
        and_route = -subset_mobius(reflect(table))
        np.testing.assert_allclose(or_route[1:], and_route[1:], atol=1e-12)


class TestComponentIdentities:
    def test_and_sums_reproduce_table(self, rng):
        table = shifted_table(rng, 5)
        np.testing.assert_allclose(
            and_component_sums(mobius_and(table)), table, atol=1e-11
        )

    def test_or_sums_reproduce_table(self, rng):
        table = shifted_table(rng, 5)
        np.testing.assert_allclose(
            or_component_sums(mobius_or(table)), table, atol=1e-11
        )


class TestReconstruction:
    def test_all_zero_vectors_return_baseline(self):
        zero = np.zeros(8)
        and_iv = InteractionVector(3, FAMILY_AND, zero)
        or_iv = InteractionVector(3, FAMILY_OR, zero)
        for mask in enumerate_masks(3):
            assert zeta_reconstruct(and_iv, or_iv, -2.5, mask) == -2.5

    def test_inverts_worked_example(self):
        and_iv = mobius_and([0.0, 1.0, 2.0, 5.0])
        or_iv = InteractionVector(2, FAMILY_OR, np.zeros(4))
        assert zeta_reconstruct(and_iv, or_iv, 0.0, Mask(0b11, 2)) == pytest.approx(5.0)

    def test_theta_independence_n4(self, rng):
        raw = rng.normal(0, 2, size=16)
        u = raw - raw[0]
        for _ in range(5):
            theta = rng.normal(0, 1, size=16)
            theta[0] = 0.0
            and_iv = mobius_and(0.5 * u + theta)
            or_iv = mobius_or(0.5 * u - theta)
            rebuilt = [
                zeta_reconstruct(and_iv, or_iv, raw[0], m) for m in enumerate_masks(4)
            ]
            np.testing.assert_allclose(rebuilt, raw, atol=1e-10)

    def test_fast_table_reconstruction_matches_brute(self, rng):
        n = 4
        and_e = rng.normal(size=16)
        or_e = rng.normal(size=16)
        and_e[0] = or_e[0] = 0.0
        and_iv = InteractionVector(n, FAMILY_AND, and_e)
        or_iv = InteractionVector(n, FAMILY_OR, or_e)
        fast = reconstruct_table(and_iv, or_iv, 1.75)
        np.testing.assert_allclose(
            fast, brute_reconstruct(and_e, or_e, 1.75, n), atol=1e-11
        )
        single = [zeta_reconstruct(and_iv, or_iv, 1.75, m) for m in range(16)]
        np.testing.assert_allclose(single, fast, atol=1e-12)

    def test_mismatched_n_raises(self):
        and_iv = InteractionVector(2, FAMILY_AND, np.zeros(4))
        or_iv = InteractionVector(3, FAMILY_OR, np.zeros(8))
        with pytest.raises(ShapeError):
            zeta_reconstruct(and_iv, or_iv, 0.0, 0)


class TestAdjoint:
    def test_n1_explicit_matrix(self):
        # forward n=1 map is [[1, 0], [-1, 1]]; adjoint applies its transpose
        out = adjoint_zeta([3.0, 5.0], FAMILY_AND)
        np.testing.assert_allclose(out, [3.0 - 5.0, 5.0])

    def test_indicator_recovers_matrix_column(self):
        g = np.zeros(4)
        g[3] = 1.0
        np.testing.assert_allclose(
            adjoint_zeta(g, FAMILY_AND), dense_and_matrix(2)[3, :]
        )

    def test_matches_dense_transpose_and(self, rng):
        g = rng.normal(size=8)
        np.testing.assert_allclose(
            adjoint_zeta(g, FAMILY_AND), dense_and_matrix(3).T @ g, atol=1e-12
        )

    def test_matches_dense_transpose_or(self, rng):
        g = rng.normal(size=8)
        np.testing.assert_allclose(
            adjoint_zeta(g, FAMILY_OR), dense_or_matrix(3).T @ g, atol=1e-12
        )

    def test_adjointness_inner_products(self, rng):
        for family in (FAMILY_AND, FAMILY_OR):
            x = shifted_table(rng, 4)
            y = rng.normal(size=16)
            fwd = mobius_and(x).effects if family == FAMILY_AND else mobius_or(x).effects
            assert np.dot(fwd, y) == pytest.approx(
                np.dot(x, adjoint_zeta(y, family)), rel=1e-12, abs=1e-12
            )


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_property_inversion(n, seed):
    rng = np.random.default_rng(seed)
    table = rng.normal(0, 5, size=1 << n)
    table[0] = 0.0
    round_trip = subset_zeta(mobius_and(table).effects)
    np.testing.assert_allclose(round_trip, table, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_property_or_inversion(n, seed):
    rng = np.random.default_rng(seed)
    table = rng.normal(0, 5, size=1 << n)
    table[0] = 0.0
    np.testing.assert_allclose(
        or_component_sums(mobius_or(table)), table, rtol=1e-12, atol=1e-12
    )


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_property_theta_independent_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    raw = rng.normal(0, 3, size=1 << n)
    theta = rng.normal(0, 2, size=1 << n)
    theta[0] = 0.0
    u = raw - raw[0]
    and_iv = mobius_and(0.5 * u + theta)
    or_iv = mobius_or(0.5 * u - theta)
    np.testing.assert_allclose(
        reconstruct_table(and_iv, or_iv, raw[0]), raw, atol=1e-10
    )
