"""Parameter sweeps over ``(S, lambda)`` cells and the sweep CSV format."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .correlations import (
    SqueezingUndefined,
    negativity,
    single_qubit_reduced,
    spin_squeezing,
    two_qubit_reduced,
)
from .io import write_metadata_header
from .mean_field import mf_fixed_points
from .observables import moments, purity, variances
from .spin_algebra import build_sector
from .steady_state import ModelParams, steady_state_of

__all__ = ["RunConfig", "lambda_grid", "compute_cell", "run_sweep", "write_sweep_csv", "COLUMNS", "TASKS", "meta_path"]

TASKS = ("observables", "correlations", "qfunction", "meanfield", "dynamics", "scaling")

OBSERVABLE_COLUMNS = ["sx", "sy", "sz", "var_x", "var_y", "var_z", "purity_full"]
CORRELATION_COLUMNS = [
    "purity_qubit",
    "negativity",
    "negativity_normalized",
    "squeezing_x",
    "squeezing_y",
    "squeezing_z",
    "purity_2qubit",
]
QFUNCTION_COLUMNS = ["q_peaks", "q_norm"]
MEANFIELD_COLUMNS = ["mf_sx", "mf_sy", "mf_sz", "mf_stability"]
DYNAMICS_COLUMNS = ["relax_rate", "relax_residual"]
COLUMNS = {
    "observables": OBSERVABLE_COLUMNS,
    "correlations": CORRELATION_COLUMNS,
    "qfunction": QFUNCTION_COLUMNS,
    "meanfield": MEANFIELD_COLUMNS,
    "dynamics": DYNAMICS_COLUMNS,
}


@dataclass
class RunConfig:
    spins: list = field(default_factory=lambda: [50.0])
    lambda_min: float = 0.05
    lambda_max: float = 2.0
    lambda_steps: int = 80
    spacing: str = "linear"
    lambda_values: list | None = None
    kappa: float = 1.0
    tasks: list = field(default_factory=lambda: ["observables", "correlations"])
    out: str = "sweep.csv"
    workers: int = 1
    q_grid: tuple = (100, 200)
    dynamics_max_spin: float = 50.0
    tolerances: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        self.spins = [build_sector(s).spin for s in self.spins]
        if not self.spins:
            raise ValueError("at least one spin is required")
        if len(set(self.spins)) != len(self.spins):
            raise ValueError("duplicate spin values")
        unknown = set(self.tasks) - set(TASKS)
        if unknown:
            raise ValueError(f"unknown tasks {sorted(unknown)}; choose from {TASKS}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        lambda_grid(self)
        return self

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if "q_grid" in raw:
            raw["q_grid"] = tuple(raw["q_grid"])
        return cls(**raw)

    def columns(self) -> list[str]:
        cols = ["S", "lambda"]
        for task in ("observables", "correlations", "qfunction", "meanfield", "dynamics"):
            if task in self.tasks:
                cols += COLUMNS[task]
        return cols

    def metadata(self) -> dict:
        meta = asdict(self)
        for key in ("out", "workers"):
            meta.pop(key)
        meta["spins"] = sorted(self.spins)
        meta["tasks"] = [t for t in TASKS if t in self.tasks]
        meta["q_grid"] = list(self.q_grid)
        meta["lambda_grid"] = [float(x) for x in lambda_grid(self)]
        meta["conventions"] = {
            "units": "kappa sets the time unit; omega = 2 kappa lambda",
            "normalization": "sx, sy, sz divided by S; var_* divided by S^2",
            "negativity_normalized": "negativity / max over this lambda grid at fixed S",
            "spin_operators": "S_z |S,m> = m |S,m>, S_a = sum_i sigma_a^(i) / 2",
        }
        meta["version"] = __version__
        return meta


def lambda_grid(config: RunConfig) -> np.ndarray:
    if config.lambda_values is not None:
        grid = np.array(sorted(float(x) for x in config.lambda_values))
    elif config.spacing == "linear":
        grid = np.linspace(config.lambda_min, config.lambda_max, config.lambda_steps)
    elif config.spacing == "log":
        if config.lambda_min <= 0:
            raise ValueError("log spacing needs lambda_min > 0")
        grid = np.geomspace(config.lambda_min, config.lambda_max, config.lambda_steps)
    else:
        raise ValueError(f"spacing must be 'linear' or 'log', got {config.spacing!r}")
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("lambda must be non-negative")
    return grid


def _squeeze(ms, axis):
    try:
        return spin_squeezing(ms, axis)
    except SqueezingUndefined:
        return math.nan


def compute_cell(spin: float, lam: float, kappa: float = 1.0, tasks=("observables", "correlations"),
                 q_grid=(100, 200), dynamics_max_spin: float = 50.0) -> dict:
    """All requested quantities for one ``(S, lambda)`` point."""
    params = ModelParams.from_lambda(spin, lam, kappa)
    rho = steady_state_of(params)
    ms = moments(rho)
    row = {"S": params.spin, "lambda": float(lam)}
    if "observables" in tasks:
        var = variances(ms)
        row.update(
            sx=ms.mean_x / spin, sy=ms.mean_y / spin, sz=ms.mean_z / spin,
            var_x=var[0], var_y=var[1], var_z=var[2], purity_full=purity(rho),
        )
    if "correlations" in tasks:
        if params.sector.qubits >= 2:
            rho2 = two_qubit_reduced(ms)
            row.update(
                purity_qubit=purity(single_qubit_reduced(ms)),
                negativity=negativity(rho2),
                squeezing_x=_squeeze(ms, "x"),
                squeezing_y=_squeeze(ms, "y"),
                squeezing_z=_squeeze(ms, "z"),
                purity_2qubit=purity(rho2),
            )
        else:
            row.update({c: math.nan for c in CORRELATION_COLUMNS})
    if "qfunction" in tasks:
        from .phase_space import count_peaks, husimi_q, q_norm_check, sphere_grid

        grid = sphere_grid(*q_grid)
        q = husimi_q(rho, grid)
        row.update(q_peaks=count_peaks(q), q_norm=q_norm_check(q, grid, spin))
    if "meanfield" in tasks:
        fp = mf_fixed_points(lam, kappa)[0]
        row.update(mf_sx=fp.location.sx, mf_sy=fp.location.sy, mf_sz=fp.location.sz, mf_stability=fp.stability)
    if "dynamics" in tasks:
        row.update(relax_rate=math.nan, relax_residual=math.nan)
        if lam < 1 and spin <= dynamics_max_spin:
            from .dynamics import relaxation_rate
            from .steady_state import dark_state

            t = 1.0 / (2 * kappa * math.sqrt(1 - lam))
            fit = relaxation_rate(params, dark_state(params.sector, top=True), (2 * t, 6 * t),
                                  dt=0.05 / (2 * kappa * spin))
            row.update(relax_rate=fit.rate, relax_residual=fit.residual)
    return row


def _cell_job(args):
    spin, lam, kappa, tasks, q_grid, dyn_max = args
    return compute_cell(spin, lam, kappa, tasks, q_grid, dyn_max)


def run_sweep(config: RunConfig) -> list[dict]:
    """Rows ordered by ``S`` then ``lambda``, independent of worker scheduling."""
    config.validate()
    grid = lambda_grid(config)
    jobs = [
        (s, float(lam), config.kappa, tuple(config.tasks), tuple(config.q_grid), config.dynamics_max_spin)
        for s in sorted(config.spins)
        for lam in grid
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_cell_job, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        rows = [_cell_job(j) for j in jobs]
    rows.sort(key=lambda r: (r["S"], r["lambda"]))
    if "correlations" in config.tasks:
        for s in config.spins:
            sel = [r for r in rows if r["S"] == s]
            top = max((r["negativity"] for r in sel if not math.isnan(r["negativity"])), default=0.0)
            for r in sel:
                r["negativity_normalized"] = r["negativity"] / top if top > 0 else 0.0
    return rows


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.12e}"


def write_sweep_csv(path, rows: list[dict], config: RunConfig) -> None:
    cols = config.columns()
    meta = config.metadata()
    with open(path, "w", newline="") as fh:
        write_metadata_header(fh, {"config": meta})
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) if c not in ("S", "lambda") else repr(float(r[c])) for c in cols) + "\n")
    meta["columns"] = cols
    with open(meta_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def meta_path(path) -> str:
    """Sidecar JSON path written next to a sweep CSV."""
    path = str(path)
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".meta.json"
