"""Closed-form steady state of the driven, collectively damped spin.

The steady state is ``rho_ss = eta eta^dagger`` with

    eta = D^{-1/2} sum_{n=0}^{2S} (S_- / g*)^n,     g = i omega S / (2 kappa) = i lambda S.

With the generator normalised as in :mod:`driven_dicke.dynamics` (decay rate
``kappa/S``) this ``g`` is the one whose ``eta eta^dagger`` lies in the kernel;
``g = i omega S / kappa`` does not, and would put the transition at
``lambda = 1/2`` instead of 1.

Every factorial and power is handled in log space; the matrix entries of
``eta`` never exceed one in magnitude, so only the intermediate logs can be
large.  This keeps ``S`` in the thousands within reach.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .spin_algebra import SpinSector, build_sector

__all__ = [
    "ModelParams",
    "DensityMatrix",
    "NumericalContractError",
    "eta_matrix",
    "log_normalization_d",
    "normalization_d",
    "steady_state_of",
    "dual_steady_state",
    "dark_state",
    "maximally_mixed",
    "write_dump",
    "read_dump",
]


class NumericalContractError(RuntimeError):
    """A computed quantity violates a stated numerical tolerance."""


@dataclass(frozen=True)
class ModelParams:
    """Drive ``omega``, collective decay ``kappa`` and total spin ``spin``."""

    omega: float
    kappa: float
    spin: float

    def __post_init__(self):
        object.__setattr__(self, "spin", build_sector(self.spin).spin)
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.omega < 0:
            raise ValueError(f"omega must be non-negative, got {self.omega}")

    @classmethod
    def from_lambda(cls, spin, lam: float, kappa: float = 1.0) -> "ModelParams":
        return cls(omega=2.0 * kappa * lam, kappa=kappa, spin=spin)

    @property
    def sector(self) -> SpinSector:
        return SpinSector(self.spin)

    @property
    def lam(self) -> float:
        return self.omega / (2.0 * self.kappa)

    @property
    def g(self) -> complex:
        return 1j * self.abs_g

    @property
    def abs_g(self) -> float:
        return self.lam * self.spin


@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray
    sector: SpinSector

    def __post_init__(self):
        d = self.sector.dim
        if self.data.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix for S={self.sector.spin}, got {self.data.shape}")

    @property
    def dim(self) -> int:
        return self.sector.dim

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check(self, herm_tol: float = 1e-10, trace_tol: float = 1e-10, psd_tol: float = 1e-9) -> "DensityMatrix":
        """Raise :class:`NumericalContractError` unless the matrix is a valid state."""
        herm = self.hermiticity_error()
        if herm > herm_tol:
            raise NumericalContractError(f"not Hermitian: max deviation {herm:.3e}")
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise NumericalContractError(f"trace {tr:.12g} differs from 1")
        lo = self.min_eigenvalue()
        if lo < -psd_tol:
            raise NumericalContractError(f"smallest eigenvalue {lo:.3e} below -{psd_tol:g}")
        return self

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(0.5 * (self.data + self.data.conj().T), self.sector)


def dark_state(sector: SpinSector, top: bool = False) -> DensityMatrix:
    """Projector on ``|S,-S>`` (or ``|S,+S>`` when ``top``)."""
    rho = np.zeros((sector.dim, sector.dim), dtype=complex)
    i = sector.dim - 1 if top else 0
    rho[i, i] = 1.0
    return DensityMatrix(rho, sector)


def maximally_mixed(sector: SpinSector) -> DensityMatrix:
    return DensityMatrix(np.eye(sector.dim, dtype=complex) / sector.dim, sector)


def _require_drive(params: ModelParams):
    if params.omega == 0:
        raise ValueError("lambda = 0: g vanishes, use the dissipative dark-state limit (steady_state_of handles it)")


def log_normalization_d(params: ModelParams) -> float:
    """Natural log of the normalisation constant ``D``.

    Each term ``(2S+m+1)! (m!)^2 / ((2S-m)! (2m+1)!) |g|^(-2m)`` is formed
    from log-gamma values and the sum is done with log-sum-exp.
    """
    _require_drive(params)
    two_s = params.sector.two_s
    m = np.arange(two_s + 1, dtype=float)
    log_terms = (
        gammaln(two_s + m + 2)
        + 2 * gammaln(m + 1)
        - gammaln(two_s - m + 1)
        - gammaln(2 * m + 2)
        - 2 * m * math.log(params.abs_g)
    )
    return float(logsumexp(log_terms))


def normalization_d(params: ModelParams) -> float:
    """``D`` itself; overflows to ``inf`` for very weak drive at large ``S``."""
    return float(np.exp(log_normalization_d(params)))


def _log_ladder_profile(two_s: int, log_abs_g: float) -> np.ndarray:
    # log c_n(m) for S_- from column c to row r = c - n equals f(c) - f(r)
    k = np.arange(two_s + 1, dtype=float)
    f = 0.5 * (gammaln(k + 1) - gammaln(two_s - k + 1))
    return f - k * log_abs_g


def _eta(params: ModelParams, raising: bool) -> np.ndarray:
    _require_drive(params)
    two_s = params.sector.two_s
    h = _log_ladder_profile(two_s, math.log(params.abs_g))
    half_log_d = 0.5 * log_normalization_d(params)
    idx = np.arange(two_s + 1)
    # n = c - r for lowering (upper triangle), r - c for raising (lower triangle)
    n = (idx[None, :] - idx[:, None]) if not raising else (idx[:, None] - idx[None, :])
    mask = n >= 0
    if raising:
        log_mag = h[:, None] - h[None, :]
    else:
        log_mag = h[None, :] - h[:, None]
    log_mag = np.where(mask, log_mag - half_log_d, -np.inf)
    # (g*)^{-n} = |g|^{-n} i^n ; the raising version has g -> -g
    phase = np.array([1, 1j, -1, -1j])[np.mod(n if not raising else -n, 4)]
    return np.where(mask, np.exp(log_mag) * phase, 0.0)


def eta_matrix(params: ModelParams) -> np.ndarray:
    """Matrix of ``eta``; entry ``<S,m-n| eta |S,m> = (g*)^-n c_n(m) / sqrt(D)``.

    With ``m`` ascending along the index this is upper triangular.
    """
    return _eta(params, raising=False)


def steady_state_of(params: ModelParams) -> DensityMatrix:
    """Unique steady state; the ``omega = 0`` limit is the dark state ``|S,-S>``."""
    if params.omega == 0:
        return dark_state(params.sector)
    eta = eta_matrix(params)
    rho = eta @ eta.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T), params.sector)


def dual_steady_state(params: ModelParams) -> DensityMatrix:
    """Steady state of the dual model (``omega -> -omega``, ``S_- <-> S_+``)."""
    if params.omega == 0:
        return dark_state(params.sector, top=True)
    eta = _eta(params, raising=True)
    rho = eta @ eta.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T), params.sector)


_DUMP_MAGIC = b"DDKRHO01"


def write_dump(path, rho: DensityMatrix, params: ModelParams) -> None:
    """Binary dump: magic, header ``(dim, S, lambda, omega, kappa)`` then
    row-major ``(re, im)`` float64 pairs, all little-endian."""
    header = np.array([rho.dim], dtype="<i8").tobytes()
    header += np.array([params.spin, params.lam, params.omega, params.kappa], dtype="<f8").tobytes()
    body = np.ascontiguousarray(rho.data, dtype="<c16").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC + header + body)


def read_dump(path) -> tuple[DensityMatrix, dict]:
    raw = open(path, "rb").read()
    if raw[:8] != _DUMP_MAGIC:
        raise ValueError(f"{path}: not a density-matrix dump")
    dim = int(np.frombuffer(raw[8:16], dtype="<i8")[0])
    spin, lam, omega, kappa = np.frombuffer(raw[16:48], dtype="<f8")
    data = np.frombuffer(raw[48:], dtype="<c16").reshape(dim, dim).copy()
    meta = {"dim": dim, "spin": float(spin), "lambda": float(lam), "omega": float(omega), "kappa": float(kappa)}
    return DensityMatrix(data, build_sector(spin)), meta
