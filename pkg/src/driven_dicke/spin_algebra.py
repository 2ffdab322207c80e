"""Collective spin operators on the maximal-spin (Dicke) sector.

Basis convention: row/column index ``i`` holds ``|S, m>`` with ``m = i - S``,
so ``m`` ascends from ``-S`` to ``+S``.  Operators follow the usual
angular-momentum normalisation (``S_z |S,m> = m |S,m>``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "SpinSector",
    "SpinOperatorSet",
    "build_sector",
    "build_operators",
    "ladder_power_coefficient",
    "log_ladder_power_coefficient",
    "lowering_coefficients",
]


@dataclass(frozen=True)
class SpinSector:
    """Spin-``S`` sector of ``K = 2S`` qubits."""

    spin: float

    @property
    def two_s(self) -> int:
        return int(round(2 * self.spin))

    @property
    def dim(self) -> int:
        return self.two_s + 1

    @property
    def qubits(self) -> int:
        return self.two_s

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim) - self.spin

    def index(self, m: float) -> int:
        i = int(round(m + self.spin))
        if not 0 <= i < self.dim or abs(i - (m + self.spin)) > 1e-9:
            raise ValueError(f"m={m} is not a valid projection for S={self.spin}")
        return i

    def basis_vector(self, m: float) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(m)] = 1.0
        return v


def _as_half_integer(spin) -> float:
    try:
        twice = Fraction(spin).limit_denominator(1000) * 2
    except (TypeError, ValueError) as exc:
        raise ValueError(f"spin must be a number, got {spin!r}") from exc
    if twice.denominator != 1 or abs(float(twice) - 2 * float(spin)) > 1e-9:
        raise ValueError(f"spin must be a multiple of 1/2, got {spin!r}")
    if twice <= 0:
        raise ValueError(f"spin must be positive, got {spin!r}")
    return int(twice) / 2


def build_sector(spin) -> SpinSector:
    """Validate ``spin`` and return the corresponding sector.

    Raises
    ------
    ValueError
        If ``spin`` is not a positive multiple of 1/2.
    """
    return SpinSector(_as_half_integer(spin))


@dataclass(frozen=True)
class SpinOperatorSet:
    sector: SpinSector
    sx: np.ndarray = field(repr=False)
    sy: np.ndarray = field(repr=False)
    sz: np.ndarray = field(repr=False)
    s_plus: np.ndarray = field(repr=False)
    s_minus: np.ndarray = field(repr=False)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.sector.dim, dtype=complex)


def lowering_coefficients(sector: SpinSector) -> np.ndarray:
    """``a[i]`` such that ``S_- |S, m_i> = a[i] |S, m_i - 1>`` (``a[0] = 0``)."""
    s = sector.spin
    m = sector.m_values
    return np.sqrt(np.clip(s * (s + 1) - m * (m - 1), 0.0, None))


@lru_cache(maxsize=32)
def _operators(spin: float) -> SpinOperatorSet:
    sector = SpinSector(spin)
    a = lowering_coefficients(sector)
    s_minus = np.zeros((sector.dim, sector.dim), dtype=complex)
    s_minus[np.arange(sector.dim - 1), np.arange(1, sector.dim)] = a[1:]
    s_plus = s_minus.conj().T.copy()
    sz = np.diag(sector.m_values).astype(complex)
    sx = 0.5 * (s_plus + s_minus)
    sy = -0.5j * (s_plus - s_minus)
    ops = SpinOperatorSet(sector, sx, sy, sz, s_plus, s_minus)
    for mat in (ops.sx, ops.sy, ops.sz, ops.s_plus, ops.s_minus):
        mat.setflags(write=False)
    return ops


def build_operators(sector: SpinSector) -> SpinOperatorSet:
    """Dense ``S_x, S_y, S_z, S_+, S_-`` for ``sector``.

    Results are cached per spin and returned read-only, so they can be
    shared between callers.
    """
    return _operators(sector.spin)


def log_ladder_power_coefficient(spin: float, m: float, n: int) -> float:
    """Natural log of :func:`ladder_power_coefficient` (``-inf`` when zero)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if m - n < -spin - 1e-9:
        return -np.inf
    # prod_{j<n} (S+m-j)(S-m+j+1) = (S+m)!/(S+m-n)! * (S-m+n)!/(S-m)!
    a = spin + m
    b = spin - m
    return 0.5 * (gammaln(a + 1) - gammaln(a - n + 1) + gammaln(b + n + 1) - gammaln(b + 1))


def ladder_power_coefficient(spin: float, m: float, n: int) -> float:
    """Coefficient ``c_n(m)`` with ``S_-^n |S,m> = c_n(m) |S,m-n>``.

    Evaluated through log-gamma, so it stays finite for large spins as long
    as the value itself is representable.
    """
    if n == 0:
        return 1.0
    return float(np.exp(log_ladder_power_coefficient(spin, m, n)))
