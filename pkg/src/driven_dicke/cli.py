"""Command-line entry point: sweeps, single-point runs, oracle checks and exponent fits.

Exit codes: 0 success, 1 usage or input error, 2 numerical-contract violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .steady_state import ModelParams, NumericalContractError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
ORACLE_TOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("-S", "--spin", action="append", type=float, help="total spin S (repeatable)")
    g.add_argument("--lambda", dest="lam", action="append", type=float, help="single coupling value (repeatable)")
    g.add_argument("--lambda-min", type=float)
    g.add_argument("--lambda-max", type=float)
    g.add_argument("--lambda-steps", type=int)
    g.add_argument("--spacing", choices=["linear", "log"])
    g.add_argument("--kappa", type=float, help="decay rate; sets the time unit (default 1)")
    g.add_argument("--out", help="output path")
    g.add_argument("--workers", type=int)
    g.add_argument("--config", help="JSON run configuration; command-line flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="driven-dicke", description="Driven collective spin with collective decay.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="steady-state observables over an (S, lambda) grid")
    _common(s)
    s.add_argument("--tasks", help="comma-separated subset of observables,correlations,qfunction,meanfield,dynamics")
    s.add_argument("--q-grid", type=int, nargs=2, metavar=("N_THETA", "N_PHI"))

    s = sub.add_parser("steady", help="steady state at one (S, lambda) point")
    _common(s)
    s.add_argument("--dual", action="store_true", help="also report the rotated partner state")

    s = sub.add_parser("oracle", help="closed form versus Liouvillian null space (S <= 6)")
    _common(s)

    s = sub.add_parser("meanfield", help="mean-field fixed points and optional trajectory")
    _common(s)
    s.add_argument("--trajectory", help="write an integrated trajectory CSV here")
    s.add_argument("--t-final", type=float, default=100.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--initial", type=float, nargs=3, metavar=("SX", "SY", "SZ"))
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("qfunction", help="Husimi Q-function on a (theta, phi) grid")
    _common(s)
    s.add_argument("--n-theta", type=int, default=100)
    s.add_argument("--n-phi", type=int, default=200)
    s.add_argument("--state", choices=["steady", "mixed"], default="steady",
                   help="'mixed' uses the maximally mixed state (flat-field check)")

    s = sub.add_parser("dynamics", help="master-equation evolution toward the steady state")
    _common(s)
    s.add_argument("--t-final", type=float, default=10.0)
    s.add_argument("--dt", type=float)
    s.add_argument("--initial", choices=["up", "down", "mixed", "random"], default="up")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record-every", type=int, default=10)
    s.add_argument("--fit-window", type=float, nargs=2, metavar=("T0", "T1"))

    s = sub.add_parser("scaling", help="critical and size-scaling exponents from a sweep CSV")
    _common(s)
    s.add_argument("input", help="sweep CSV")
    s.add_argument("--observable", required=True, help="column name, e.g. sz or var_x")
    s.add_argument("--side", choices=["below", "above", "size", "peak"], required=True)
    s.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--power", type=float, default=1.0, help="extrapolation variable is S^-power")
    return p


def _load_config(args):
    from .sweep import RunConfig

    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.spin:
        cfg.spins = list(args.spin)
    for flag, attr in (("lambda_min", "lambda_min"), ("lambda_max", "lambda_max"),
                       ("lambda_steps", "lambda_steps"), ("spacing", "spacing"),
                       ("kappa", "kappa"), ("out", "out"), ("workers", "workers")):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    if args.lam:
        cfg.lambda_values = list(args.lam)
    elif any(getattr(args, f) is not None for f in ("lambda_min", "lambda_max", "lambda_steps", "spacing")):
        cfg.lambda_values = None
    return cfg


def _single(values, what):
    if values is None or len(values) != 1:
        raise UsageError(f"exactly one {what} value is required")
    return values[0]


def _lambdas(args, cfg):
    from .sweep import lambda_grid

    return [float(x) for x in lambda_grid(cfg)] if not args.lam else sorted(args.lam)


def _check_writable(path):
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise UsageError(f"cannot write output {path}: directory missing or not writable")


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        _check_writable(out)
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args, cfg) -> int:
    from .sweep import run_sweep, write_sweep_csv

    if args.tasks:
        cfg.tasks = [t.strip() for t in args.tasks.split(",") if t.strip()]
    if args.q_grid:
        cfg.q_grid = tuple(args.q_grid)
    cfg.validate()
    _check_writable(cfg.out)
    rows = run_sweep(cfg)
    write_sweep_csv(cfg.out, rows, cfg)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK


def cmd_steady(args, cfg) -> int:
    from .correlations import negativity, two_qubit_reduced
    from .observables import moments, purity, variances
    from .steady_state import dual_steady_state, steady_state_of, write_dump

    spin = _single(cfg.spins, "--spin")
    lam = _single(args.lam, "--lambda")
    params = ModelParams.from_lambda(spin, lam, cfg.kappa)
    rho = steady_state_of(params).check()
    ms = moments(rho)
    report = {
        "S": params.spin,
        "lambda": lam,
        "kappa": params.kappa,
        "means": [m / spin for m in ms.means],
        "variances": [float(v) for v in variances(ms)],
        "purity": purity(rho),
        "trace": float(rho.trace().real),
        "min_eigenvalue": rho.min_eigenvalue(),
    }
    if params.sector.qubits >= 2:
        report["negativity"] = negativity(two_qubit_reduced(ms))
    if args.dual:
        dual = dual_steady_state(params).check()
        report["dual_means"] = [m / spin for m in moments(dual).means]
    if args.out:
        _check_writable(args.out)
        write_dump(args.out, rho, params)
        report["dump"] = args.out
    _emit(report, None)
    return EXIT_OK


def cmd_oracle(args, cfg) -> int:
    from .dynamics import MAX_ORACLE_SPIN, liouvillian_apply, steady_state_nullspace
    from .steady_state import steady_state_of

    records, worst = [], 0.0
    for spin in cfg.spins:
        params0 = ModelParams.from_lambda(spin, 0.0, cfg.kappa)
        if params0.spin > MAX_ORACLE_SPIN:
            d = params0.sector.dim
            raise UsageError(
                f"S={params0.spin} would need a {d * d}x{d * d} dense superoperator; "
                f"the oracle accepts S <= {MAX_ORACLE_SPIN}"
            )
        for lam in _lambdas(args, cfg):
            params = ModelParams.from_lambda(spin, lam, cfg.kappa)
            closed = steady_state_of(params)
            kernel = steady_state_nullspace(params)
            dist = float(np.linalg.norm(closed.data - kernel.data))
            resid = float(np.linalg.norm(liouvillian_apply(params, closed)))
            worst = max(worst, dist, resid)
            records.append({"S": params.spin, "lambda": lam, "frobenius_distance": dist, "residual": resid})
            print(f"S={params.spin:g} lambda={lam:g} distance={dist:.3e} residual={resid:.3e}")
    if args.out:
        _emit(records, args.out)
    if worst > ORACLE_TOL:
        print(f"oracle mismatch: {worst:.3e} exceeds {ORACLE_TOL:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_meanfield(args, cfg) -> int:
    from .mean_field import BlochState, mf_fixed_points, mf_integrate, random_bloch_state, write_meanfield_csv

    lam = _single(args.lam, "--lambda")
    points = mf_fixed_points(lam, cfg.kappa)
    payload = {"lambda": lam, "kappa": cfg.kappa, "fixed_points": [p.as_record() for p in points]}
    if args.trajectory:
        _check_writable(args.trajectory)
        params = ModelParams(omega=2 * cfg.kappa * lam, kappa=cfg.kappa, spin=0.5)
        if args.initial:
            start = BlochState.from_vector(args.initial)
        else:
            start = random_bloch_state(np.random.default_rng(args.seed))
        traj = mf_integrate(start, params, args.t_final, args.dt, record_every=max(1, int(0.01 / args.dt)))
        write_meanfield_csv(args.trajectory, traj, {"lambda": lam, "kappa": cfg.kappa, "dt": args.dt,
                                                    "initial": list(start.vector), "units": "time in 1/kappa"})
        payload["trajectory"] = args.trajectory
    _emit(payload, args.out)
    return EXIT_OK


def cmd_qfunction(args, cfg) -> int:
    from .phase_space import count_peaks, husimi_q, q_norm_check, sphere_grid, write_q_csv
    from .steady_state import maximally_mixed, steady_state_of

    spin = _single(cfg.spins, "--spin")
    lam = _single(args.lam, "--lambda")
    params = ModelParams.from_lambda(spin, lam, cfg.kappa)
    rho = steady_state_of(params) if args.state == "steady" else maximally_mixed(params.sector)
    grid = sphere_grid(args.n_theta, args.n_phi)
    q = husimi_q(rho, grid)
    out = cfg.out if args.out else f"q_S{params.spin:g}_lambda{lam:g}.csv"
    _check_writable(out)
    norm = q_norm_check(q, grid, spin)
    peaks = count_peaks(q)
    write_q_csv(out, q, grid, {"S": params.spin, "lambda": lam, "kappa": params.kappa, "state": args.state,
                               "grid": [args.n_theta, args.n_phi], "normalization": norm,
                               "measure": "(2S+1)/(4 pi) sin(theta) dtheta dphi"})
    print(f"wrote {out}: peaks={peaks} normalization={norm:.6f}")
    return EXIT_OK


def cmd_dynamics(args, cfg) -> int:
    from .dynamics import evolve, random_density_matrix, relaxation_rate, write_trajectory_csv
    from .steady_state import dark_state, maximally_mixed, steady_state_of

    spin = _single(cfg.spins, "--spin")
    lam = _single(args.lam, "--lambda")
    params = ModelParams.from_lambda(spin, lam, cfg.kappa)
    sector = params.sector
    rho0 = {
        "up": lambda: dark_state(sector, top=True),
        "down": lambda: dark_state(sector),
        "mixed": lambda: maximally_mixed(sector),
        "random": lambda: random_density_matrix(sector, np.random.default_rng(args.seed)),
    }[args.initial]()
    out = cfg.out if args.out else f"dynamics_S{params.spin:g}_lambda{lam:g}.csv"
    _check_writable(out)
    traj = evolve(params, rho0, args.t_final, args.dt, record_every=args.record_every,
                  reference=steady_state_of(params))
    meta = {"S": params.spin, "lambda": lam, "kappa": params.kappa, "initial": args.initial, "seed": args.seed,
            "dt": args.dt, "t_final": args.t_final, "units": "time in 1/kappa"}
    write_trajectory_csv(out, traj, meta)
    msg = f"wrote {out}: final trace distance {traj.observables['trace_distance_to_ss'][-1]:.3e}"
    if args.fit_window:
        fit = relaxation_rate(params, rho0, tuple(args.fit_window), args.dt)
        msg += f"; relaxation rate {fit.rate:.6g} ({fit.reason or 'ok'})"
    print(msg)
    return EXIT_OK


def cmd_scaling(args, cfg) -> int:
    from .scaling import DEFAULT_WINDOW, SweepTable, critical_exponent, peak_location, size_scaling_exponent

    if not os.path.exists(args.input):
        raise UsageError(f"input {args.input} not found")
    table = SweepTable.from_csv(args.input)
    if args.observable not in table.names:
        raise UsageError(f"column {args.observable!r} not in {args.input}; available: {table.names}")
    spins = cfg.spins if args.spin else None
    if args.side in ("below", "above"):
        est = critical_exponent(table, args.observable, args.side, tuple(args.window or DEFAULT_WINDOW),
                                spins=spins, power=args.power)
        payload = est.as_record()
    elif args.side == "size":
        lam = _single(args.lam, "--lambda")
        fit = size_scaling_exponent({s: table.value(args.observable, s, lam) for s in spins or table.spins})
        payload = {"observable": args.observable, "lambda": lam, "slope": fit.slope,
                   "intercept": fit.intercept, "residual": fit.residual, "n": fit.n}
    else:
        use = spins or table.spins
        peaks = {s: peak_location(table, args.observable, s) for s in use}
        fit = size_scaling_exponent({s: v for s, (_, v) in peaks.items()}) if len(use) >= 3 else None
        payload = {"observable": args.observable,
                   "peaks": [{"S": s, "lambda": l, "value": v} for s, (l, v) in peaks.items()],
                   "peak_value_slope": None if fit is None else fit.slope}
    _emit(payload, args.out)
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "steady": cmd_steady,
    "oracle": cmd_oracle,
    "meanfield": cmd_meanfield,
    "qfunction": cmd_qfunction,
    "dynamics": cmd_dynamics,
    "scaling": cmd_scaling,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if cfg.kappa <= 0:
            raise UsageError("kappa must be positive")
        return COMMANDS[args.command](args, cfg)
    except NumericalContractError as exc:
        print(f"numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
