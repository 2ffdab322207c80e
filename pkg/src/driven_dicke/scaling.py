"""Critical exponents and thermodynamic extrapolation from sweep tables.

The critical coupling is fixed at ``lambda_c = 1``.  Local exponents are
log-log slopes against the distance ``eps = |lambda - 1|``; at each distance
they are extrapolated to ``S -> inf`` with a linear fit in ``S^-p`` (``p = 1``
by default), and the resulting curve is extrapolated linearly to ``eps -> 0``
over a fit window.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LAMBDA_C",
    "DEFAULT_WINDOW",
    "SweepTable",
    "LocalSlopes",
    "LinearFit",
    "ExponentEstimate",
    "local_exponent",
    "size_scaling_exponent",
    "table_size_scaling",
    "extrapolate_thermodynamic",
    "critical_exponent",
    "peak_location",
    "write_exponent_report",
]

LAMBDA_C = 1.0
DEFAULT_WINDOW = (0.05, 0.3)


class SweepTable:
    """Records ``(S, lambda, name) -> value`` plus free-form metadata."""

    def __init__(self, records=(), metadata: dict | None = None):
        self._data: dict[tuple[float, float, str], float] = {}
        self.metadata = dict(metadata or {})
        for s, lam, name, value in records:
            self.add(s, lam, name, value)

    def add(self, spin, lam, name, value):
        key = (float(spin), float(lam), str(name))
        if key in self._data:
            raise ValueError(f"duplicate record for S={spin}, lambda={lam}, {name}")
        self._data[key] = float(value)

    def __len__(self):
        return len(self._data)

    def __iter__(self):
        for (s, lam, name), v in sorted(self._data.items()):
            yield s, lam, name, v

    @property
    def spins(self) -> list[float]:
        return sorted({k[0] for k in self._data})

    @property
    def names(self) -> list[str]:
        return sorted({k[2] for k in self._data})

    def series(self, name: str, spin: float) -> tuple[np.ndarray, np.ndarray]:
        """``(lambdas, values)`` for one observable at one spin, sorted by lambda."""
        pts = sorted((lam, v) for (s, lam, n), v in self._data.items() if n == name and s == float(spin))
        if not pts:
            raise KeyError(f"no records for {name} at S={spin}")
        lam, val = zip(*pts)
        return np.array(lam), np.array(val)

    def value(self, name: str, spin: float, lam: float) -> float:
        return self._data[(float(spin), float(lam), name)]

    def at_lambda(self, name: str, lam: float, tol: float = 1e-12) -> dict[float, float]:
        out = {}
        for (s, l, n), v in self._data.items():
            if n == name and abs(l - lam) <= tol:
                out[s] = v
        return out

    @classmethod
    def from_rows(cls, rows, names=None, metadata=None) -> "SweepTable":
        table = cls(metadata=metadata)
        for row in rows:
            for key, value in row.items():
                if key in ("S", "lambda") or (names is not None and key not in names):
                    continue
                if value is None or value == "" or (isinstance(value, float) and np.isnan(value)):
                    continue
                table.add(row["S"], row["lambda"], key, value)
        return table

    @classmethod
    def from_csv(cls, path, names=None) -> "SweepTable":
        from .io import read_metadata_header

        meta = read_metadata_header(path)
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        rows = []
        for rec in csv.DictReader(lines):
            row = {}
            for k, v in rec.items():
                try:
                    row[k] = float(v)
                except (TypeError, ValueError):
                    row[k] = None
            rows.append(row)
        return cls.from_rows(rows, names=names, metadata=meta)


@dataclass(frozen=True)
class LocalSlopes:
    spin: float
    side: str
    eps: np.ndarray
    lam: np.ndarray
    slope: np.ndarray
    excluded: np.ndarray  # lambdas dropped because the value vanished or changed sign


def _side_mask(lam: np.ndarray, side: str) -> np.ndarray:
    if side == "below":
        return lam < LAMBDA_C
    if side == "above":
        return lam > LAMBDA_C
    raise ValueError(f"side must be 'below' or 'above', got {side!r}")


def local_exponent(table: SweepTable, name: str, spin: float, side: str) -> LocalSlopes:
    """``d log|value| / d log|lambda - 1|`` by centred differences on the grid.

    Points whose value is zero or has the minority sign are excluded (and
    returned in ``excluded``).
    """
    lam, val = table.series(name, spin)
    m = _side_mask(lam, side)
    lam, val = lam[m], val[m]
    sign = np.sign(np.sum(np.sign(val))) or 1.0
    keep = np.sign(val) == sign
    excluded = lam[~keep]
    lam, val = lam[keep], val[keep]
    if len(lam) < 4:
        raise ValueError(f"need at least 4 usable points {side} lambda_c for {name} at S={spin}, got {len(lam)}")
    eps = np.abs(lam - LAMBDA_C)
    order = np.argsort(eps)
    eps, lam, val = eps[order], lam[order], val[order]
    slope = np.gradient(np.log(np.abs(val)), np.log(eps))
    return LocalSlopes(float(spin), side, eps, lam, slope, excluded)


@dataclass(frozen=True)
class LinearFit:
    """Least-squares line; ``residual`` is the root-mean-square misfit."""

    slope: float
    intercept: float
    residual: float
    n: int


def _linfit(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points for a linear fit")
    a = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(np.sqrt(np.mean((a @ coef - y) ** 2)))
    return LinearFit(float(coef[1]), float(coef[0]), resid, len(x))


def size_scaling_exponent(values_by_spin: dict) -> LinearFit:
    """Slope of ``log(value)`` against ``log(S)``.

    Raises
    ------
    ValueError
        With fewer than three spins or any non-positive value.
    """
    spins = sorted(values_by_spin)
    if len(spins) < 3:
        raise ValueError("size scaling needs at least 3 distinct spins")
    vals = np.array([values_by_spin[s] for s in spins], dtype=float)
    if np.any(vals <= 0):
        bad = [s for s, v in zip(spins, vals) if v <= 0]
        raise ValueError(f"non-positive values at S={bad}; cannot take logarithms")
    return _linfit(np.log(spins), np.log(vals))


def table_size_scaling(table: SweepTable, name: str, lam: float) -> LinearFit:
    return size_scaling_exponent(table.at_lambda(name, lam))


def extrapolate_thermodynamic(values_by_spin: dict, power: float = 1.0) -> LinearFit:
    """Fit ``value = a + b S^-power``; ``intercept`` is the ``S -> inf`` estimate."""
    spins = sorted(values_by_spin)
    if len(spins) < 3:
        raise ValueError("thermodynamic extrapolation needs at least 3 spins")
    x = np.array(spins, dtype=float) ** (-power)
    return _linfit(x, [values_by_spin[s] for s in spins])


@dataclass
class ExponentEstimate:
    name: str
    side: str
    value: float
    window: tuple
    residual: float
    spins: list
    eps: np.ndarray = field(repr=False)
    extrapolated_slope: np.ndarray = field(repr=False)
    extrapolation_residual: np.ndarray = field(repr=False)
    local_slopes: dict = field(repr=False, default_factory=dict)
    power: float = 1.0

    def as_record(self) -> dict:
        return {
            "observable": self.name,
            "side": self.side,
            "window": list(self.window),
            "estimate": self.value,
            "residual": self.residual,
            "max_extrapolation_residual": float(np.max(self.extrapolation_residual)) if len(self.eps) else None,
            "S": list(self.spins),
            "extrapolation_power": self.power,
        }


def critical_exponent(
    table: SweepTable,
    name: str,
    side: str,
    window: tuple = DEFAULT_WINDOW,
    spins=None,
    power: float = 1.0,
) -> ExponentEstimate:
    """Exponent at ``lambda_c`` from local slopes, extrapolated in ``S`` then in ``eps``.

    Only distances present for every spin are used.  ``residual`` is the rms
    misfit of the final linear fit in ``eps``.
    """
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    if side == "below" and hi >= LAMBDA_C:
        raise ValueError("window must stay inside (0, lambda_c) below the critical point")
    spins = sorted(spins if spins is not None else table.spins)
    curves = {s: local_exponent(table, name, s, side) for s in spins}
    common = None
    for c in curves.values():
        e = set(np.round(c.eps, 12))
        common = e if common is None else common & e
    eps = np.array(sorted(e for e in common if lo - 1e-12 <= e <= hi + 1e-12))
    if len(eps) < 2:
        raise ValueError(f"fewer than two common grid points in window {window}")
    ext, ext_res = [], []
    for e in eps:
        by_s = {}
        for s, c in curves.items():
            i = int(np.argmin(np.abs(c.eps - e)))
            by_s[s] = c.slope[i]
        fit = extrapolate_thermodynamic(by_s, power)
        ext.append(fit.intercept)
        ext_res.append(fit.residual)
    ext = np.array(ext)
    final = _linfit(eps, ext)
    return ExponentEstimate(
        name=name,
        side=side,
        value=final.intercept,
        window=(lo, hi),
        residual=final.residual,
        spins=spins,
        eps=eps,
        extrapolated_slope=ext,
        extrapolation_residual=np.array(ext_res),
        local_slopes=curves,
        power=power,
    )


def peak_location(table: SweepTable, name: str, spin: float) -> tuple[float, float]:
    """``(lambda, value)`` of the largest value on the grid."""
    lam, val = table.series(name, spin)
    i = int(np.argmax(val))
    return float(lam[i]), float(val[i])


def write_exponent_report(path, estimates) -> None:
    records = [e.as_record() if hasattr(e, "as_record") else e for e in estimates]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
