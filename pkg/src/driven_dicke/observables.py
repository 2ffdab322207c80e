"""Collective-spin moments, variances and purities of a density matrix.

All moments are read off the first two off-diagonals of ``rho`` (the
operators involved are at most pentadiagonal in the Dicke basis), which
keeps a full moment set at O(dim) cost even for ``S`` in the thousands.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_algebra import lowering_coefficients
from .steady_state import DensityMatrix

def _array(x) -> np.ndarray:
    return x.data if isinstance(x, DensityMatrix) else np.asarray(x)


__all__ = ["MomentSet", "expectation", "moments", "variances", "purity"]


@dataclass(frozen=True)
class MomentSet:
    """First and second collective-spin moments of one state."""

    spin: float
    mean_x: float
    mean_y: float
    mean_z: float
    mean_xx: float
    mean_yy: float
    mean_zz: float
    mean_plus: complex
    mean_plus2: complex
    mean_anti: complex  # <S_+ S_z + S_z S_+>

    @property
    def casimir(self) -> float:
        return self.mean_xx + self.mean_yy + self.mean_zz

    @property
    def means(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_y, self.mean_z])

    @property
    def second(self) -> np.ndarray:
        return np.array([self.mean_xx, self.mean_yy, self.mean_zz])


def expectation(rho: DensityMatrix, op: np.ndarray) -> complex:
    """``Tr[op rho]``."""
    data = _array(rho)
    if op.shape != data.shape:
        raise ValueError(f"operator shape {op.shape} does not match state shape {data.shape}")
    # Tr[A B] = sum_ij A_ij B_ji
    return complex(np.sum(op * data.T))


def moments(rho: DensityMatrix) -> MomentSet:
    sector = rho.sector
    data = rho.data
    a = lowering_coefficients(sector)
    m = sector.m_values
    p = np.real(np.diag(data))
    up1 = np.diag(data, 1)  # rho[i-1, i]
    up2 = np.diag(data, 2)  # rho[i-2, i]

    mean_plus = complex(np.sum(a[1:] * up1))
    mean_plus2 = complex(np.sum(a[2:] * a[1:-1] * up2))
    mean_anti = complex(np.sum(a[1:] * (m[1:] + m[:-1]) * up1))
    mean_z = float(np.sum(m * p))
    mean_zz = float(np.sum(m * m * p))
    # S_+S_- has diagonal a[i]^2, S_-S_+ has a[i+1]^2
    pm = float(np.sum(a**2 * p))
    mp = float(np.sum(a[1:] ** 2 * p[:-1]))
    mean_xx = 0.25 * (2 * mean_plus2.real + pm + mp)
    mean_yy = 0.25 * (-2 * mean_plus2.real + pm + mp)
    return MomentSet(
        spin=sector.spin,
        mean_x=mean_plus.real,
        mean_y=mean_plus.imag,
        mean_z=mean_z,
        mean_xx=mean_xx,
        mean_yy=mean_yy,
        mean_zz=mean_zz,
        mean_plus=mean_plus,
        mean_plus2=mean_plus2,
        mean_anti=mean_anti,
    )


def variances(ms: MomentSet, normalized: bool = True) -> np.ndarray:
    """``<S_a^2> - <S_a>^2`` for ``a = x, y, z``; divided by ``S^2`` when ``normalized``."""
    var = ms.second - ms.means**2
    if normalized:
        var = var / ms.spin**2
    return var


def purity(rho) -> float:
    """``Tr[rho^2]`` of a Hermitian matrix."""
    data = _array(rho)
    return float(np.sum(np.abs(data) ** 2))
