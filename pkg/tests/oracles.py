"""Independent brute-force references used across the test suite."""
from itertools import combinations
from math import comb

import numpy as np


def dicke_embedding(k: int) -> np.ndarray:
    """Columns are |S=k/2, m> (m ascending) as symmetric k-qubit vectors.

    Qubit basis: bit 0 = up, bit 1 = down, first qubit most significant.
    """
    dim = k + 1
    iso = np.zeros((2**k, dim))
    for n_up in range(k + 1):
        for ups in combinations(range(k), n_up):
            idx = 0
            for q in range(k):
                bit = 0 if q in ups else 1
                idx = (idx << 1) | bit
            iso[idx, n_up] = 1.0
        iso[:, n_up] /= np.sqrt(comb(k, n_up))
    return iso


def keep_first_qubits(rho: np.ndarray, k: int, keep: int) -> np.ndarray:
    r = rho.reshape(2**keep, 2 ** (k - keep), 2**keep, 2 ** (k - keep))
    return np.einsum("ajbj->ab", r)


def reduced_from_dicke(rho: np.ndarray, keep: int) -> np.ndarray:
    k = rho.shape[0] - 1
    iso = dicke_embedding(k)
    full = iso @ rho @ iso.T
    return keep_first_qubits(full, k, keep)


def expm_apply(generator: np.ndarray, vec: np.ndarray, t: float) -> np.ndarray:
    from scipy.linalg import expm

    return expm(generator * t) @ vec
