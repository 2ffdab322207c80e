"""Mean-field (classical spin) dynamics, fixed points and their stability.

Variables are normalised by ``S``::

    d sx/dt = 2 kappa sx sz
    d sy/dt = -omega sz + 2 kappa sy sz
    d sz/dt = omega sy - 2 kappa (sx^2 + sy^2)

and on the unit sphere ``(z, phi)`` with ``sx = sqrt(1-z^2) cos phi``,
``sy = sqrt(1-z^2) sin phi``, ``sz = z``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .steady_state import ModelParams, NumericalContractError

__all__ = [
    "BlochState",
    "FixedPointReport",
    "mf_rhs",
    "canonical_rhs",
    "mf_fixed_points",
    "mf_jacobian",
    "classify",
    "mf_integrate",
    "MeanFieldTrajectory",
    "mf_relaxation_timescale",
    "linear_decay_rate",
    "random_bloch_state",
    "write_meanfield_csv",
]

STABLE, UNSTABLE, MARGINAL = "stable", "unstable", "marginal"


@dataclass(frozen=True)
class BlochState:
    sx: float
    sy: float
    sz: float

    @classmethod
    def from_canonical(cls, z: float, phi: float) -> "BlochState":
        r = math.sqrt(max(0.0, 1.0 - z * z))
        return cls(r * math.cos(phi), r * math.sin(phi), z)

    @classmethod
    def from_vector(cls, v) -> "BlochState":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @property
    def z(self) -> float:
        return self.sz

    @property
    def phi(self) -> float:
        return math.atan2(self.sy, self.sx) % (2 * math.pi)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])

    def norm_error(self) -> float:
        return abs(self.sx**2 + self.sy**2 + self.sz**2 - 1.0)


def _rhs(v: np.ndarray, omega: float, kappa: float) -> np.ndarray:
    sx, sy, sz = v
    return np.array(
        [
            2 * kappa * sx * sz,
            -omega * sz + 2 * kappa * sy * sz,
            omega * sy - 2 * kappa * (sx * sx + sy * sy),
        ]
    )


def mf_rhs(state, params: ModelParams) -> np.ndarray:
    """Time derivative of the normalised spin vector (always tangent to the sphere)."""
    v = state.vector if isinstance(state, BlochState) else np.asarray(state, dtype=float)
    return _rhs(v, params.omega, params.kappa)


def canonical_rhs(z: float, phi: float, params: ModelParams) -> np.ndarray:
    """``(dz/dt, dphi/dt)``; singular at the poles ``z = +-1``."""
    w, k = params.omega, params.kappa
    r = math.sqrt(1.0 - z * z)
    return np.array([-2 * k * (1 - z * z) + w * r * math.sin(phi), -w * z * math.cos(phi) / r])


def mf_jacobian(point, params: ModelParams, tol: float = 1e-9) -> np.ndarray:
    """Analytic Jacobian of :func:`canonical_rhs` at a fixed point.

    Raises
    ------
    ValueError
        If ``point`` is not a fixed point (residual above ``tol``) or sits on a pole.
    """
    state = point.location if isinstance(point, FixedPointReport) else point
    res = np.max(np.abs(mf_rhs(state, params)))
    if res > tol:
        raise ValueError(f"not a fixed point: |rhs| = {res:.3e}")
    z, phi = state.z, state.phi
    if abs(z) >= 1.0:
        raise ValueError("canonical coordinates are singular at the poles")
    w, k = params.omega, params.kappa
    r = math.sqrt(1.0 - z * z)
    s, c = math.sin(phi), math.cos(phi)
    return np.array(
        [
            [4 * k * z - w * z * s / r, w * r * c],
            [-w * c / r**3, w * z * s / r],
        ]
    )


def classify(eigenvalues, tol: float = 1e-9) -> str:
    re = np.real(np.asarray(eigenvalues))
    if np.all(re < -tol):
        return STABLE
    if np.any(re > tol):
        return UNSTABLE
    return MARGINAL


@dataclass(frozen=True)
class FixedPointReport:
    location: BlochState
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    stability: str
    branch: str

    def as_record(self) -> dict:
        loc = self.location
        return {
            "branch": self.branch,
            "location": {"sx": loc.sx, "sy": loc.sy, "sz": loc.sz, "z": loc.z, "phi": loc.phi},
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "stability": self.stability,
        }


def mf_fixed_points(lam: float, kappa: float = 1.0) -> list[FixedPointReport]:
    """Fixed points for coupling ``lam`` with their Jacobians and labels.

    ``lam <= 1`` gives ``(0, lam, -+sqrt(1-lam^2))``; ``lam > 1`` gives
    ``(+-sqrt(1-1/lam^2), 1/lam, 0)``.  Both pairs meet at ``(0, 1, 0)`` for
    ``lam = 1``.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    params = ModelParams(omega=2 * kappa * lam, kappa=kappa, spin=0.5)
    if lam <= 1:
        root = math.sqrt(max(0.0, 1 - lam * lam))
        points = [("lower", BlochState(0.0, lam, -root)), ("upper", BlochState(0.0, lam, root))]
    else:
        root = math.sqrt(1 - 1 / lam**2)
        points = [("plus_x", BlochState(root, 1 / lam, 0.0)), ("minus_x", BlochState(-root, 1 / lam, 0.0))]
    reports = []
    for name, loc in points:
        if abs(loc.sz) >= 1.0:
            # lam = 0: poles, where (z, phi) is singular; use the tangent-plane Jacobian
            jac = _polar_jacobian(loc, params)
        else:
            jac = mf_jacobian(loc, params)
        ev = np.linalg.eigvals(jac)
        reports.append(FixedPointReport(loc, jac, ev, classify(ev), name))
    return reports


def _polar_jacobian(loc: BlochState, params: ModelParams) -> np.ndarray:
    # in-plane (sx, sy) linearisation at sz = +-1, reached only for omega = 0
    rate = 2 * params.kappa * loc.sz
    return np.array([[rate, 0.0], [0.0, rate]])


def cartesian_jacobian(v, params: ModelParams) -> np.ndarray:
    sx, sy, sz = np.asarray(v, dtype=float)
    w, k = params.omega, params.kappa
    return np.array(
        [
            [2 * k * sz, 0.0, 2 * k * sx],
            [0.0, 2 * k * sz, -w + 2 * k * sy],
            [-4 * k * sx, w - 4 * k * sy, 0.0],
        ]
    )


def linear_decay_rate(lam: float, kappa: float = 1.0) -> float:
    """Decay rate ``2 kappa sqrt(1 - lam^2)`` of small deviations from the stable point."""
    if not 0 <= lam < 1:
        raise ValueError("a stable fixed point exists only for 0 <= lambda < 1")
    return 2 * kappa * math.sqrt(1 - lam * lam)


def mf_relaxation_timescale(lam: float, kappa: float = 1.0) -> float:
    """Linear relaxation time ``1 / (2 kappa sqrt(1 - lam^2))``.

    Diverges as ``(1 - lam)^(-1/2)`` at the critical point.
    """
    return 1.0 / linear_decay_rate(lam, kappa)


@dataclass
class MeanFieldTrajectory:
    params: ModelParams
    times: np.ndarray
    states: np.ndarray  # (n, 3) rows of (sx, sy, sz)


def mf_integrate(
    state0: BlochState,
    params: ModelParams,
    t_final: float,
    dt: float,
    record_every: int = 1,
    drift_tol: float = 1e-6,
) -> MeanFieldTrajectory:
    """Fixed-step RK4 in Cartesian variables with the spin length reset each step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    w, k = params.omega, params.kappa
    v = state0.vector.astype(float)
    v /= np.linalg.norm(v)
    n_steps = int(round(t_final / dt))
    times, states = [0.0], [v.copy()]
    for step in range(1, n_steps + 1):
        k1 = _rhs(v, w, k)
        k2 = _rhs(v + 0.5 * dt * k1, w, k)
        k3 = _rhs(v + 0.5 * dt * k2, w, k)
        k4 = _rhs(v + dt * k3, w, k)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > drift_tol:
            raise NumericalContractError(
                f"spin length drifted by {abs(norm - 1):.3e} in one step at t={step * dt:.4g}; reduce dt={dt:g}"
            )
        v /= norm
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(v.copy())
    return MeanFieldTrajectory(params, np.array(times), np.array(states))


def random_bloch_state(rng: np.random.Generator) -> BlochState:
    return BlochState.from_vector(rng.standard_normal(3))


def write_meanfield_csv(path, traj: MeanFieldTrajectory, header: dict | None = None) -> None:
    from .io import write_metadata_header

    with open(path, "w", newline="") as fh:
        write_metadata_header(fh, header or {})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "sx", "sy", "sz"])
        for t, (sx, sy, sz) in zip(traj.times, traj.states):
            w.writerow([f"{t:.10g}", f"{sx:.12e}", f"{sy:.12e}", f"{sz:.12e}"])
