"""Few-qubit reductions of permutation-symmetric states, negativity and squeezing.

The two-qubit state of any pair in the Dicke sector follows from the
collective moments alone.  Product basis order is (up-up, up-down, down-up,
down-down) with "up" the ``+1/2`` eigenstate of ``sigma_z / 2``.
"""
from __future__ import annotations

import numpy as np

from .observables import MomentSet, variances

__all__ = [
    "two_qubit_reduced",
    "single_qubit_reduced",
    "partial_transpose",
    "negativity",
    "spin_squeezing",
    "SqueezingUndefined",
    "pair_coefficients",
]

_AXES = {"x": 0, "y": 1, "z": 2}


class SqueezingUndefined(ValueError):
    """No mean spin in the plane orthogonal to the squeezed axis."""


def pair_coefficients(ms: MomentSet) -> dict:
    k = int(round(2 * ms.spin))
    if k < 2:
        raise ValueError(f"two-qubit reduction needs at least 2 qubits, got K={k}")
    norm = k * (k - 1)
    sz, szz = ms.mean_z, ms.mean_zz
    return {
        "v_plus": (k * k - 2 * k + 4 * szz + 4 * sz * (k - 1)) / (4 * norm),
        "v_minus": (k * k - 2 * k + 4 * szz - 4 * sz * (k - 1)) / (4 * norm),
        "x_plus": ((k - 1) * ms.mean_plus + ms.mean_anti) / (2 * norm),
        "x_minus": ((k - 1) * ms.mean_plus - ms.mean_anti) / (2 * norm),
        "w": (k * k - 4 * szz) / (4 * norm),
        "u": ms.mean_plus2 / norm,
    }


def two_qubit_reduced(ms: MomentSet) -> np.ndarray:
    """4x4 reduced state of any two qubits."""
    c = pair_coefficients(ms)
    vp, vm, w = c["v_plus"], c["v_minus"], c["w"]
    xp, xm, u = c["x_plus"], c["x_minus"], c["u"]
    return np.array(
        [
            [vp, np.conj(xp), np.conj(xp), np.conj(u)],
            [xp, w, w, np.conj(xm)],
            [xp, w, w, np.conj(xm)],
            [u, xm, xm, vm],
        ],
        dtype=complex,
    )


def single_qubit_reduced(ms: MomentSet) -> np.ndarray:
    c = pair_coefficients(ms)
    off = c["x_plus"] + c["x_minus"]
    return np.array(
        [[c["w"] + c["v_plus"], np.conj(off)], [off, c["w"] + c["v_minus"]]],
        dtype=complex,
    )


def partial_transpose(rho2: np.ndarray) -> np.ndarray:
    """Transpose on the second qubit."""
    r = rho2.reshape(2, 2, 2, 2)
    return r.transpose(0, 3, 2, 1).reshape(4, 4)


def negativity(rho2: np.ndarray) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    pt = partial_transpose(rho2)
    mu = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(np.sum(np.abs(mu) - mu) / 2)


def spin_squeezing(ms: MomentSet, axis: str = "x") -> float:
    """``2S Var(S_n1) / (<S_n2>^2 + <S_n3>^2)`` with the raw variance along ``axis``.

    Raises
    ------
    SqueezingUndefined
        If both complementary means vanish.
    """
    i = _AXES[axis]
    var = variances(ms, normalized=False)[i]
    means = ms.means
    denom = float(np.sum(np.delete(means, i) ** 2))
    # means below rounding level (relative to S) count as zero
    if denom <= (1e-12 * ms.spin) ** 2:
        raise SqueezingUndefined(f"undefined (no mean spin in the plane orthogonal to {axis})")
    return float(2 * ms.spin * var / denom)
