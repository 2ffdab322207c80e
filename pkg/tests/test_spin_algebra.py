import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driven_dicke.spin_algebra import (
    build_operators,
    build_sector,
    ladder_power_coefficient,
    log_ladder_power_coefficient,
    lowering_coefficients,
)

SPINS = [0.5, 1, 1.5, 5, 50]


@pytest.mark.parametrize("spin, dim", [(0.5, 2), (1, 3), (100, 201), (7.5, 16)])
def test_sector_dimension(spin, dim):
    sector = build_sector(spin)
    assert sector.dim == dim
    assert sector.qubits == dim - 1
    assert [sector.index(m) for m in sector.m_values] == list(range(dim))


@pytest.mark.parametrize("bad", [0.3, 0, -1, -0.5, 1.25, "x"])
def test_sector_rejects_invalid_spin(bad):
    with pytest.raises(ValueError):
        build_sector(bad)


def test_basis_vector_and_index():
    sector = build_sector(2)
    v = sector.basis_vector(-2)
    assert v[0] == 1 and v.sum() == 1
    assert sector.index(2) == 4
    with pytest.raises(ValueError):
        sector.index(3)


def test_spin_half_matrices():
    ops = build_operators(build_sector(0.5))
    np.testing.assert_allclose(ops.sz, np.diag([-0.5, 0.5]))
    expected = np.zeros((2, 2))
    expected[1, 0] = 1.0
    np.testing.assert_allclose(ops.s_plus, expected)


def test_spin_one_lowering_entries():
    ops = build_operators(build_sector(1))
    np.testing.assert_allclose(np.diag(ops.s_minus, 1), [np.sqrt(2), np.sqrt(2)])
    assert np.count_nonzero(ops.s_minus) == 2


@pytest.mark.parametrize("spin", SPINS)
def test_operator_invariants(spin):
    ops = build_operators(build_sector(spin))
    for mat in (ops.sx, ops.sy, ops.sz):
        np.testing.assert_allclose(mat, mat.conj().T, atol=0)
    np.testing.assert_allclose(ops.s_plus, ops.s_minus.conj().T, atol=0)
    assert np.all(np.imag(np.diag(ops.sz)) == 0)
    comm = lambda a, b: a @ b - b @ a  # noqa: E731
    np.testing.assert_allclose(comm(ops.sx, ops.sy), 1j * ops.sz, atol=1e-12)
    np.testing.assert_allclose(comm(ops.sy, ops.sz), 1j * ops.sx, atol=1e-12)
    np.testing.assert_allclose(comm(ops.sz, ops.sx), 1j * ops.sy, atol=1e-12)
    casimir = ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz
    np.testing.assert_allclose(casimir, spin * (spin + 1) * ops.identity, atol=1e-10)


@pytest.mark.parametrize("spin", [0.5, 2, 3.5])
def test_ladder_action(spin):
    sector = build_sector(spin)
    ops = build_operators(sector)
    for m in sector.m_values:
        v = sector.basis_vector(m)
        if m < spin:
            c = np.sqrt(spin * (spin + 1) - m * (m + 1))
            np.testing.assert_allclose(ops.s_plus @ v, c * sector.basis_vector(m + 1), atol=1e-14)
        if m > -spin:
            c = np.sqrt(spin * (spin + 1) - m * (m - 1))
            np.testing.assert_allclose(ops.s_minus @ v, c * sector.basis_vector(m - 1), atol=1e-14)


def test_operators_are_read_only():
    ops = build_operators(build_sector(1))
    with pytest.raises(ValueError):
        ops.sx[0, 0] = 1.0


def test_lowering_coefficients_zero_at_bottom():
    a = lowering_coefficients(build_sector(3))
    assert a[0] == 0
    np.testing.assert_allclose(a[-1], np.sqrt(6))


@pytest.mark.parametrize(
    "spin, m, n, expected",
    [(1, 1, 0, 1.0), (1, -1, 0, 1.0), (1, 1, 2, 2.0), (1, 0, 2, 0.0), (0.5, 0.5, 1, 1.0)],
)
def test_ladder_power_examples(spin, m, n, expected):
    assert ladder_power_coefficient(spin, m, n) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("spin", [0.5, 1, 1.5, 2, 3.5, 5])
def test_ladder_power_matches_dense_powers(spin):
    sector = build_sector(spin)
    ops = build_operators(sector)
    for m in sector.m_values:
        v = sector.basis_vector(m).astype(complex)
        for n in range(sector.dim + 1):
            expected = np.linalg.norm(v)
            got = ladder_power_coefficient(spin, m, n)
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)
            v = ops.s_minus @ v


def test_ladder_power_finite_at_large_spin():
    spin = 1600
    for n in range(0, 2 * spin + 1, 37):
        val = log_ladder_power_coefficient(spin, spin, n)
        assert np.isfinite(val)
    assert log_ladder_power_coefficient(spin, -spin, 1) == -np.inf


@settings(max_examples=50, deadline=None)
@given(two_s=st.integers(1, 40), data=st.data())
def test_ladder_power_recursion(two_s, data):
    spin = two_s / 2
    k = data.draw(st.integers(0, two_s))
    m = k - spin
    n = data.draw(st.integers(0, k))
    # c_{n+1}(m) = c_n(m) * a(m - n)
    if n + 1 <= k:
        a = np.sqrt(spin * (spin + 1) - (m - n) * (m - n - 1))
        lhs = ladder_power_coefficient(spin, m, n + 1)
        assert lhs == pytest.approx(ladder_power_coefficient(spin, m, n) * a, rel=1e-10)
