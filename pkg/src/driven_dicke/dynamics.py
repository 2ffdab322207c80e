"""Lindblad generator of the model, time integration and the null-space oracle.

The generator is

    L[rho] = i omega [rho, S_x] + (kappa/S) (2 S_- rho S_+ - S_+ S_- rho - rho S_+ S_-).

``S_x`` is tridiagonal and ``S_+ S_-`` diagonal in the Dicke basis, so
:class:`Liouvillian` applies it with O(dim^2) shifted-array arithmetic.  The
dense superoperator (column stacking, ``A rho B -> (B^T kron A) vec(rho)``) is
only built for the small-spin oracle.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .spin_algebra import SpinSector, build_operators, lowering_coefficients
from .steady_state import DensityMatrix, ModelParams, NumericalContractError, steady_state_of


def _array(x) -> np.ndarray:
    return x.data if isinstance(x, DensityMatrix) else np.asarray(x)


__all__ = [
    "Liouvillian",
    "Trajectory",
    "liouvillian_apply",
    "liouvillian_dense_apply",
    "nullspace_singular_values",
    "liouvillian_superoperator",
    "evolve",
    "steady_state_nullspace",
    "relaxation_rate",
    "RelaxationFit",
    "trace_distance",
    "random_density_matrix",
    "default_dt",
    "write_trajectory_csv",
]

log = logging.getLogger(__name__)

MAX_ORACLE_SPIN = 6


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b`` (arrays or :class:`DensityMatrix`)."""
    a = _array(a)
    b = _array(b)
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


class Liouvillian:
    """Matrix-free action of the generator for one parameter point."""

    def __init__(self, params: ModelParams):
        self.params = params
        sector = params.sector
        self.sector = sector
        a = lowering_coefficients(sector)
        # S_- |i> = a[i] |i-1> ; S_+ |i> = a[i+1] |i+1>
        self._a = a
        self._n = a**2  # diagonal of S_+ S_-
        self._rate = params.kappa / params.spin
        self._omega = params.omega

    def _sx_left(self, rho: np.ndarray) -> np.ndarray:
        # (S_x rho)[i] = (a[i+1] rho[i+1] + a[i] rho[i-1]) / 2
        a = self._a
        out = np.zeros_like(rho)
        out[:-1] += a[1:, None] * rho[1:]
        out[1:] += a[1:, None] * rho[:-1]
        return 0.5 * out

    def apply(self, rho: np.ndarray) -> np.ndarray:
        a = self._a
        sx_rho = self._sx_left(rho)
        # rho S_x = (S_x rho^dagger)^dagger
        rho_sx = self._sx_left(rho.conj().T).conj().T
        out = 1j * self._omega * (rho_sx - sx_rho)
        jump = np.zeros_like(rho)
        jump[:-1, :-1] = (a[1:, None] * a[None, 1:]) * rho[1:, 1:]
        n = self._n
        out += self._rate * (2.0 * jump - n[:, None] * rho - rho * n[None, :])
        return out

    __call__ = apply


def _check_sector(params: ModelParams, rho: DensityMatrix):
    if rho.sector.dim != params.sector.dim:
        raise ValueError(f"state lives on S={rho.sector.spin}, parameters on S={params.spin}")


def liouvillian_apply(params: ModelParams, rho: DensityMatrix) -> np.ndarray:
    """``L[rho]`` as a dense array."""
    _check_sector(params, rho)
    return Liouvillian(params).apply(rho.data)


def liouvillian_dense_apply(params: ModelParams, rho: np.ndarray) -> np.ndarray:
    """Reference evaluation with dense operator products."""
    ops = build_operators(params.sector)
    sp, sm, sx = ops.s_plus, ops.s_minus, ops.sx
    n = sp @ sm
    return 1j * params.omega * (rho @ sx - sx @ rho) + (params.kappa / params.spin) * (
        2 * sm @ rho @ sp - n @ rho - rho @ n
    )


def liouvillian_superoperator(params: ModelParams) -> np.ndarray:
    """Dense ``dim^2 x dim^2`` generator acting on column-stacked ``rho``."""
    ops = build_operators(params.sector)
    d = params.sector.dim
    eye = np.eye(d)
    sp, sm, sx = ops.s_plus, ops.s_minus, ops.sx
    n = sp @ sm
    # vec(A rho B) = (B^T kron A) vec(rho)
    unitary = 1j * params.omega * (np.kron(sx.T, eye) - np.kron(eye, sx))
    rate = params.kappa / params.spin
    diss = rate * (2 * np.kron(sp.T, sm) - np.kron(eye, n) - np.kron(n.T, eye))
    return unitary + diss


def steady_state_nullspace(params: ModelParams, max_spin: float = MAX_ORACLE_SPIN, gap_tol: float = 1e-6) -> DensityMatrix:
    """Kernel of the dense superoperator, reshaped into a normalised state.

    Raises
    ------
    ValueError
        If the spin exceeds ``max_spin``.
    NumericalContractError
        If the kernel is not one-dimensional.
    """
    if params.spin > max_spin:
        d = params.sector.dim
        raise ValueError(
            f"S={params.spin} needs a {d**2}x{d**2} superoperator; the oracle is limited to S <= {max_spin}"
        )
    sup = liouvillian_superoperator(params)
    _, sv, vh = np.linalg.svd(sup)
    if len(sv) > 1 and sv[-2] < gap_tol:
        raise NumericalContractError(
            f"degenerate kernel: second-smallest singular value {sv[-2]:.3e} < {gap_tol:g}"
        )
    d = params.sector.dim
    vec = vh[-1].conj()
    rho = vec.reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    return DensityMatrix(rho, params.sector)


def nullspace_singular_values(params: ModelParams) -> np.ndarray:
    return np.linalg.svd(liouvillian_superoperator(params), compute_uv=False)


def default_dt(params: ModelParams) -> float:
    return 0.01 / max(params.omega, 2 * params.kappa * params.spin)


@dataclass
class Trajectory:
    """Times and either full states or recorded observables.

    ``states`` is empty when the trajectory only kept observables.
    """

    params: ModelParams
    times: np.ndarray
    states: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    final: DensityMatrix | None = None


def _rk4_step(lv: Liouvillian, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = lv.apply(rho)
    k2 = lv.apply(rho + 0.5 * dt * k1)
    k3 = lv.apply(rho + 0.5 * dt * k2)
    k4 = lv.apply(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(
    params: ModelParams,
    rho0: DensityMatrix,
    t_final: float,
    dt: float | None = None,
    record_every: int = 1,
    keep_states: bool = False,
    hermitize: bool = True,
    reference: DensityMatrix | None = None,
    trace_tol: float = 1e-6,
) -> Trajectory:
    """Integrate ``d rho/dt = L[rho]`` with fixed-step classic RK4.

    Every ``record_every`` steps the normalised spin means (and the trace
    distance to ``reference``, if given) are stored; full states only when
    ``keep_states``.  Aborts with :class:`NumericalContractError` when the
    trace drifts by more than ``trace_tol``.
    """
    _check_sector(params, rho0)
    if dt is None:
        dt = default_dt(params)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < dt:
        raise ValueError("t_final must be at least one step")
    n_steps = int(round(t_final / dt))
    lv = Liouvillian(params)
    ops = build_operators(params.sector)
    diag_sz = np.real(np.diag(ops.sz))
    a = lowering_coefficients(params.sector)
    spin = params.spin

    times, sx, sy, sz, dist, states = [], [], [], [], [], []

    def record(t, rho):
        times.append(t)
        # <S_+> = sum_i a[i] rho[i-1, i]
        s_plus = np.sum(a[1:] * np.diag(rho, 1))
        sx.append(s_plus.real / spin)
        sy.append(s_plus.imag / spin)
        sz.append(float(np.real(np.sum(diag_sz * np.diag(rho)))) / spin)
        if reference is not None:
            dist.append(trace_distance(rho, reference.data))
        if keep_states:
            states.append(DensityMatrix(rho.copy(), params.sector))

    rho = np.array(rho0.data, dtype=complex)
    record(0.0, rho)
    for step in range(1, n_steps + 1):
        rho = _rk4_step(lv, rho, dt)
        if hermitize:
            rho = 0.5 * (rho + rho.conj().T)
        drift = abs(np.trace(rho) - 1.0)
        # the generator preserves the trace exactly, so an unstable step shows up
        # as entries exceeding the bound |rho_ij| <= 1 or as negative populations
        blowup = np.max(np.abs(rho)) - 1.0
        negative = -np.min(np.real(np.diag(rho)))
        if not np.isfinite(drift) or max(drift, blowup, negative) > trace_tol:
            raise NumericalContractError(
                f"state left the density-matrix set at t={step * dt:.4g} (trace drift {drift:.3e}, "
                f"entry excess {blowup:.3e}, negative population {negative:.3e}); reduce dt "
                f"(currently {dt:.3g}, default for these parameters {default_dt(params):.3g})"
            )
        if step % record_every == 0 or step == n_steps:
            record(step * dt, rho)
    obs = {"sx": np.array(sx), "sy": np.array(sy), "sz": np.array(sz)}
    if reference is not None:
        obs["trace_distance_to_ss"] = np.array(dist)
    return Trajectory(params, np.array(times), states, obs, DensityMatrix(rho, params.sector))


def random_density_matrix(sector: SpinSector, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state ``G G^dagger / Tr`` with complex Gaussian ``G``."""
    d = sector.dim
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho), sector)


@dataclass(frozen=True)
class RelaxationFit:
    rate: float
    intercept: float
    residual: float
    window: tuple
    n_points: int
    monotone: bool
    ok: bool
    reason: str = ""


def relaxation_rate(
    params: ModelParams,
    rho0: DensityMatrix,
    window: tuple,
    dt: float | None = None,
    floor: float = 1e-10,
) -> RelaxationFit:
    """Decay rate of the trace distance to the steady state over ``window``.

    The rate is minus the least-squares slope of ``log(distance)`` versus
    ``t``.  ``ok`` is false when the distance is already below ``floor`` or
    is not monotone inside the window.
    """
    t0, t1 = window
    if not 0 <= t0 < t1:
        raise ValueError("window must satisfy 0 <= t0 < t1")
    ref = steady_state_of(params)
    if trace_distance(rho0, ref) < floor:
        return RelaxationFit(float("nan"), float("nan"), float("nan"), window, 0, True, False, "already converged")
    if dt is None:
        dt = default_dt(params)
    n_rec = max(1, int(round((t1 - t0) / dt / 200)))
    traj = evolve(params, rho0, t1, dt, record_every=n_rec, reference=ref)
    t = traj.times
    d = traj.observables["trace_distance_to_ss"]
    sel = (t >= t0) & (t <= t1 + 1e-12) & (d > floor)
    if sel.sum() < 3:
        return RelaxationFit(float("nan"), float("nan"), float("nan"), window, int(sel.sum()), True, False,
                             "fewer than 3 points above the distance floor")
    tt, ld = t[sel], np.log(d[sel])
    slope, intercept = np.polyfit(tt, ld, 1)
    resid = float(np.sqrt(np.mean((ld - (slope * tt + intercept)) ** 2)))
    monotone = bool(np.all(np.diff(d[sel]) <= 0))
    reason = "" if monotone else "distance not monotone in window"
    return RelaxationFit(float(-slope), float(intercept), resid, window, int(sel.sum()), monotone, monotone, reason)


def write_trajectory_csv(path, traj: Trajectory, header: dict | None = None) -> None:
    """CSV with ``t, Sx, Sy, Sz`` (normalised by S) and ``trace_distance_to_ss``."""
    from .io import write_metadata_header

    obs = traj.observables
    dist = obs.get("trace_distance_to_ss")
    with open(path, "w", newline="") as fh:
        write_metadata_header(fh, header or {})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "Sx", "Sy", "Sz", "trace_distance_to_ss"])
        for i, t in enumerate(traj.times):
            w.writerow([f"{t:.10g}", f"{obs['sx'][i]:.12e}", f"{obs['sy'][i]:.12e}", f"{obs['sz'][i]:.12e}",
                        "" if dist is None else f"{dist[i]:.12e}"])
