"""Unit tests for the truncated-series engine."""

import math
from fractions import Fraction

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toda_spectra import (CirclePowerTable, Leaf, ParamPoint, PowerSeries,
                          branch_power_rows, functional_residual, powers_table,
                          raney_oracle, taylor_branch, taylor_branch_x_grid)

CATALAN = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862]


# ---------------------------------------------------------------------------
# leaf / point containers


def test_leaf_gcd_and_collapse():
    leaf = Leaf((3, 6))
    assert leaf.s == 3
    assert leaf.collapsed_shifts == (1, 2)
    assert Leaf((2,)).s == 2
    assert Leaf((4, 6)).s == 2
    assert Leaf((4, 6)).collapsed_shifts == (2, 3)


@pytest.mark.parametrize("bad", [(), (1,), (0, 2), (3, 3), (6, 3)])
def test_leaf_rejects_invalid_exponents(bad):
    with pytest.raises(ValueError):
        Leaf(bad)


def test_param_point_arity_check():
    with pytest.raises(ValueError):
        ParamPoint(Leaf((2, 4)), (0.1,))


def test_param_point_is_zero():
    leaf = Leaf((2,))
    assert ParamPoint(leaf, (0.0,)).is_zero()
    assert not ParamPoint(leaf, (1e-3,)).is_zero()


# ---------------------------------------------------------------------------
# Taylor branch recursion


def test_branch_hand_coefficients_one_mode():
    # U = 1 + zeta z U^2 gives the Catalan generating function in zeta*z.
    zeta = 0.3
    u = taylor_branch(ParamPoint(Leaf((2,)), (zeta,)), 9)
    want = np.array([c * zeta**m for m, c in enumerate(CATALAN)])
    npt.assert_allclose(u.coeffs.real, want, rtol=1e-13)
    assert np.abs(u.coeffs.imag).max() == 0.0


def test_branch_hand_coefficients_two_mode():
    # {3,6}: u_1 = zeta_1, u_2 = 3 zeta_1^2 + zeta_2.
    z1, z2 = 0.07, 0.01
    u = taylor_branch(ParamPoint(Leaf((3, 6)), (z1, z2)), 2)
    npt.assert_allclose(u.coeffs.real, [1.0, z1, 3 * z1**2 + z2], rtol=1e-14)


def test_branch_zero_parameters_is_constant_one():
    u = taylor_branch(ParamPoint(Leaf((3, 6)), (0.0, 0.0)), 12)
    npt.assert_array_equal(u.coeffs, np.eye(13)[0])


def test_branch_rejects_negative_order():
    with pytest.raises(ValueError):
        taylor_branch(ParamPoint(Leaf((2,)), (0.1,)), -1)


def test_x_grid_recursion_vanishes_off_lattice():
    """In the x variable, only exponents divisible by s survive."""
    leaf = Leaf((4, 6))  # s = 2
    coeffs = taylor_branch_x_grid(ParamPoint(leaf, (0.1, 0.05)), 20)
    assert np.abs(coeffs[1::2]).max() == 0.0
    collapsed = taylor_branch(ParamPoint(leaf, (0.1, 0.05)), 10)
    npt.assert_allclose(coeffs[::2], collapsed.coeffs, rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    exps=st.lists(st.integers(2, 9), min_size=1, max_size=3, unique=True),
    seed=st.integers(0, 2**31 - 1),
)
def test_branch_satisfies_functional_equation(exps, seed):
    leaf = Leaf(tuple(sorted(exps)))
    rng = np.random.default_rng(seed)
    zeta = tuple(rng.uniform(-0.2, 0.2, len(exps)))
    u = taylor_branch(ParamPoint(leaf, zeta), 40)
    assert functional_residual(ParamPoint(leaf, zeta), u) < 1e-12


def test_functional_residual_flags_wrong_series():
    p = ParamPoint(Leaf((2,)), (0.2,))
    u = taylor_branch(p, 25)
    wrong = PowerSeries.from_coeffs(u.coeffs + 1e-3)
    assert functional_residual(p, wrong) > 1e-5


# ---------------------------------------------------------------------------
# powers and the exact one-mode coefficients


def test_raney_oracle_catalan_row():
    for m, c in enumerate(CATALAN):
        assert raney_oracle(2, 1, m) == c


def test_raney_oracle_closed_form():
    for s in (2, 3, 5):
        for p in (1, 2, 7):
            for m in (0, 1, 4, 11):
                n = s * m + p
                assert raney_oracle(s, p, m) == Fraction(
                    p * math.comb(n, m), n)


def test_raney_oracle_rejects_bad_arguments():
    for args in [(1, 1, 0), (2, 0, 0), (2, 1, -1)]:
        with pytest.raises(ValueError):
            raney_oracle(*args)


def test_powers_table_matches_oracle():
    zeta = 0.12
    tab = powers_table(taylor_branch(ParamPoint(Leaf((3,)), (zeta,)), 18), 6)
    for p in (1, 3, 6):
        got = tab[p - 1].unscaled()
        want = [float(raney_oracle(3, p, m)) * zeta**m for m in range(19)]
        npt.assert_allclose(got.real, want, rtol=1e-12)


def test_powers_table_scaling_round_trip():
    u = taylor_branch(ParamPoint(Leaf((2,)), (0.2,)), 30)
    plain = powers_table(u, 4)
    scaled = powers_table(u, 4, scale=2.0)
    for p in range(1, 5):
        npt.assert_allclose(scaled[p - 1].coeffs * 2.0**p,
                            plain[p - 1].coeffs, rtol=1e-13)
        npt.assert_allclose(scaled[p - 1].unscaled(),
                            plain[p - 1].unscaled(), rtol=1e-13)


def test_powers_table_is_multiplicative():
    u = taylor_branch(ParamPoint(Leaf((2, 6)), (0.1, 0.02)), 24)
    tab = powers_table(u, 5)
    conv = np.convolve(tab[1].coeffs, tab[2].coeffs)[:25]
    npt.assert_allclose(tab[4].coeffs, conv, rtol=1e-12)


# ---------------------------------------------------------------------------
# circle-sampled rows


def test_circle_table_agrees_with_convolution():
    p = ParamPoint(Leaf((2,)), (0.1,))
    direct = branch_power_rows(p, [1, 2, 5], 48)
    table = CirclePowerTable(p, 48)
    rows = table.rows([1, 2, 5])
    npt.assert_allclose(rows, direct, rtol=0, atol=1e-12)


def test_circle_table_power_ordering_is_stable():
    p = ParamPoint(Leaf((3, 6)), (0.05, 0.01))
    table = CirclePowerTable(p, 32)
    shuffled = table.rows([5, 1, 2])
    npt.assert_array_equal(shuffled[[1, 2, 0]], table.rows([1, 2, 5]))


def test_circle_table_alpha_scaling():
    p = ParamPoint(Leaf((2,)), (0.1,))
    rows1 = CirclePowerTable(p, 40).rows([3])
    rows2 = CirclePowerTable(p, 40, alpha=2.0).rows([3])
    npt.assert_allclose(rows2 * 2.0**3, rows1, rtol=0, atol=1e-12)


def test_branch_power_rows_deep_tail_path():
    """Large-order rows stay consistent with the recursion prefix."""
    p = ParamPoint(Leaf((2,)), (0.2,))
    deep = branch_power_rows(p, [1, 2], 3100, subcritical=True)
    shallow = branch_power_rows(p, [1, 2], 60)
    npt.assert_allclose(deep[:, :61], shallow, rtol=0, atol=1e-11)
    # decays until the coefficients sink below the sampling noise floor
    assert abs(deep[0, 120]) < abs(deep[0, 60]) < abs(deep[0, 20])
    assert np.abs(deep[:, 2000:]).max() < 1e-15


def test_branch_power_rows_requires_powers():
    with pytest.raises(ValueError):
        branch_power_rows(ParamPoint(Leaf((2,)), (0.1,)), [], 10)
