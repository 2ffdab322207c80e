"""Spin coherent states and the Husimi Q-function on a (theta, phi) grid.

Coherent-state convention: ``|z>`` with ``z = exp(i phi) tan(theta/2)`` puts
``theta = 0`` on ``|S,-S>`` and ``theta = pi`` on ``|S,+S>``.  Plots that want
the spin-down state at the top have to flip the axis themselves; exported
data is never flipped.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .spin_algebra import SpinSector
from .steady_state import DensityMatrix

__all__ = [
    "SphereGrid",
    "sphere_grid",
    "spin_coherent_state",
    "coherent_amplitudes",
    "husimi_q",
    "q_norm_check",
    "count_peaks",
    "write_q_csv",
]


@dataclass(frozen=True)
class SphereGrid:
    """Midpoint grid; ``weights[i, j] = sin(theta_i) dtheta dphi``."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.theta), len(self.phi))


def sphere_grid(n_theta: int = 100, n_phi: int = 200) -> SphereGrid:
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid sizes must be positive")
    dth = np.pi / n_theta
    dph = 2 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * dth
    phi = (np.arange(n_phi) + 0.5) * dph
    weights = np.outer(np.sin(theta) * dth, np.full(n_phi, dph))
    return SphereGrid(theta, phi, weights)


def _log_magnitudes(sector: SpinSector, theta: np.ndarray) -> np.ndarray:
    # |<S,m|z>| = sqrt(C(K,k)) sin(theta/2)^k cos(theta/2)^(K-k), k = S + m
    k_tot = sector.two_s
    k = np.arange(k_tot + 1, dtype=float)
    log_binom = gammaln(k_tot + 1) - gammaln(k + 1) - gammaln(k_tot - k + 1)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.log(np.sin(theta / 2))[:, None]
        lc = np.log(np.abs(np.cos(theta / 2)))[:, None]
        # 0 * log(0) terms are exactly 1 in the product, not nan
        term_s = np.where(k[None, :] == 0, 0.0, k[None, :] * ls)
        term_c = np.where(k[None, :] == k_tot, 0.0, (k_tot - k)[None, :] * lc)
    return 0.5 * log_binom[None, :] + term_s + term_c


def spin_coherent_state(sector: SpinSector, theta: float, phi: float) -> np.ndarray:
    """Amplitudes of ``|z>`` on ``|S,m>``, m ascending."""
    if not 0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    mag = np.exp(_log_magnitudes(sector, np.array([theta]))[0])
    k = np.arange(sector.dim)
    return mag * np.exp(1j * k * phi)


def coherent_amplitudes(sector: SpinSector, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Array ``(n_theta, n_phi, dim)`` of coherent-state amplitudes."""
    mag = np.exp(_log_magnitudes(sector, theta))
    k = np.arange(sector.dim)
    return mag[:, None, :] * np.exp(1j * np.outer(phi, k))[None, :, :]


def husimi_q(rho: DensityMatrix, grid: SphereGrid) -> np.ndarray:
    """``Q = <z| rho |z>`` on ``grid``, shape ``(n_theta, n_phi)``."""
    data = rho.data
    mag = np.exp(_log_magnitudes(rho.sector, grid.theta))
    phase = np.exp(1j * np.outer(grid.phi, np.arange(rho.dim)))
    q = np.empty(grid.shape)
    for i in range(len(grid.theta)):
        amp = mag[i][None, :] * phase
        q[i] = np.real(np.sum(amp.conj() * (amp @ data.T), axis=1))
    return q


def q_norm_check(field: np.ndarray, grid: SphereGrid, spin: float) -> float:
    """``(2S+1)/(4 pi)`` times the quadrature of ``field``; 1 for a normalised state."""
    return float((2 * spin + 1) / (4 * np.pi) * np.sum(field * grid.weights))


def count_peaks(field: np.ndarray, rel_height: float = 0.1, rtol: float = 1e-9) -> int:
    """Number of strict local maxima above ``rel_height * max``.

    Values closer than ``rtol * max`` count as equal, so rounding noise on
    a flat field does not produce spurious maxima.

    Neighbourhoods wrap in ``phi`` and continue across each pole, where the
    row beyond ``theta = 0`` (or ``pi``) is the first row shifted by half a
    turn in ``phi``.  Requires an even number of ``phi`` points.
    """
    top = field.max()
    if top <= 0:
        return 0
    n_phi = field.shape[1]
    if n_phi % 2:
        raise ValueError("count_peaks needs an even number of phi points")
    half = n_phi // 2
    padded = np.vstack([np.roll(field[:1], half, axis=1), field, np.roll(field[-1:], half, axis=1)])
    padded = np.hstack([padded[:, -1:], padded, padded[:, :1]])
    centre = padded[1:-1, 1:-1]
    atol = rtol * top
    ge_all = np.ones_like(centre, dtype=bool)
    gt_any = np.zeros_like(centre, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            ge_all &= centre >= nb - atol
            gt_any |= centre > nb + atol
    candidate = ge_all & (centre >= rel_height * top)
    # equal-valued neighbouring maxima (a peak centred between grid points) form one peak
    labels, n = ndimage.label(candidate, structure=np.ones((3, 3)))
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        if a and b:
            parent[find(a)] = find(b)

    n_theta = field.shape[0]
    for i in range(n_theta):
        for di in (-1, 0, 1):
            if 0 <= i + di < n_theta:
                union(labels[i, 0], labels[i + di, -1])
    for row in (0, n_theta - 1):
        for j in range(n_phi):
            for dj in (-1, 0, 1):
                union(labels[row, j], labels[row, (j + half + dj) % n_phi])
    roots = {find(lab) for lab in labels[candidate & gt_any]}
    return len(roots)


def write_q_csv(path, field: np.ndarray, grid: SphereGrid, header: dict | None = None) -> None:
    from .io import write_metadata_header

    meta = dict(header or {})
    meta.setdefault("convention", "theta=0 is |S,-S> (z = exp(i phi) tan(theta/2)); z-axis not flipped")
    with open(path, "w", newline="") as fh:
        write_metadata_header(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "phi", "q"])
        for i, th in enumerate(grid.theta):
            for j, ph in enumerate(grid.phi):
                w.writerow([f"{th:.10g}", f"{ph:.10g}", f"{field[i, j]:.12e}"])
