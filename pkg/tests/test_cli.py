import json
import math

import numpy as np
import pytest

from driven_dicke.cli import main
from driven_dicke.io import read_metadata_header
from driven_dicke.scaling import SweepTable
from driven_dicke.steady_state import read_dump
from driven_dicke.sweep import COLUMNS, RunConfig, compute_cell, lambda_grid, meta_path, run_sweep

BASE_COLUMNS = ["S", "lambda", "sx", "sy", "sz", "var_x", "var_y", "var_z", "purity_full", "purity_qubit",
                "negativity", "negativity_normalized", "squeezing_x", "squeezing_y", "squeezing_z"]


def body(path):
    return [line for line in open(path) if not line.startswith("#")]


def test_lambda_grid_variants():
    assert np.allclose(lambda_grid(RunConfig(lambda_min=0.1, lambda_max=1, lambda_steps=10)), np.linspace(0.1, 1, 10))
    g = lambda_grid(RunConfig(lambda_min=0.1, lambda_max=10, lambda_steps=3, spacing="log"))
    assert np.allclose(g, [0.1, 1, 10])
    assert list(lambda_grid(RunConfig(lambda_values=[0.9, 0.3]))) == [0.3, 0.9]
    for bad in (RunConfig(lambda_steps=0), RunConfig(lambda_values=[0.5, 0.5]), RunConfig(spacing="cubic"),
                RunConfig(lambda_min=0, spacing="log"), RunConfig(lambda_values=[-1, 1])):
        with pytest.raises(ValueError):
            lambda_grid(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(spins=[0.3]).validate()
    with pytest.raises(ValueError):
        RunConfig(tasks=["plots"]).validate()
    with pytest.raises(ValueError):
        RunConfig(spins=[2, 2.0]).validate()
    assert RunConfig(spins=[1, 2.5]).validate().spins == [1.0, 2.5]


def test_compute_cell_columns():
    row = compute_cell(10, 0.5, tasks=("observables", "correlations", "meanfield", "qfunction"), q_grid=(20, 40))
    for task in ("observables", "correlations", "meanfield", "qfunction"):
        # the normalised negativity needs the whole lambda grid and is filled in by run_sweep
        assert set(COLUMNS[task]) - {"negativity_normalized"} <= set(row)
    assert row["sz"] == pytest.approx(-0.865, abs=0.01)
    assert row["mf_stability"] == "stable"
    assert row["q_peaks"] == 1


def test_compute_cell_spin_half_has_no_pair_quantities():
    row = compute_cell(0.5, 0.5)
    assert math.isnan(row["negativity"]) and math.isnan(row["purity_qubit"])


def test_sweep_csv_schema(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "-S", "5", "-S", "10", "--lambda-min", "0.2", "--lambda-max", "1.8",
                 "--lambda-steps", "9", "--out", str(out)]) == 0
    lines = body(out)
    header = lines[0].strip().split(",")
    assert header[: len(BASE_COLUMNS)] == BASE_COLUMNS
    assert "purity_2qubit" in header
    rows = [dict(zip(header, ln.strip().split(","))) for ln in lines[1:]]
    assert len(rows) == 18
    keys = [(float(r["S"]), float(r["lambda"])) for r in rows]
    assert keys == sorted(keys)
    for s in (5.0, 10.0):
        norm = [float(r["negativity_normalized"]) for r in rows if float(r["S"]) == s]
        assert max(norm) == 1.0 and min(norm) >= 0
    meta = read_metadata_header(out)
    assert meta["config"]["spins"] == [5.0, 10.0] and "version" in meta["config"]
    assert "workers" not in meta["config"]
    side = json.loads(open(meta_path(out)).read())
    assert side["columns"] == header
    table = SweepTable.from_csv(out)
    assert table.spins == [5.0, 10.0]


def test_sweep_undefined_squeezing_written_as_nan(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "-S", "3", "--lambda", "0", "--lambda", "0.5", "--out", str(out)]) == 0
    header, first = body(out)[0].strip().split(","), body(out)[1].strip().split(",")
    assert first[header.index("squeezing_z")] == "nan"


def test_sweep_deterministic_across_workers(tmp_path):
    args = ["sweep", "--lambda-min", "0.3", "--lambda-max", "1.7", "--lambda-steps", "12",
            "--tasks", "observables,correlations,meanfield"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-S", "4", "-S", "12", "--workers", "1", "--out", str(a)]) == 0
    assert main(args + ["-S", "12", "-S", "4", "--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spins": [3], "lambda_values": [0.4, 0.8], "tasks": ["observables"]}))
    out = tmp_path / "c.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(body(out)) == 3
    assert main(["sweep", "--config", str(cfg), "-S", "2", "-S", "4", "--out", str(out)]) == 0
    assert len(body(out)) == 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["sweep", "--config", str(bad), "--out", str(out)]) == 1


def test_sweep_errors(tmp_path):
    assert main(["sweep", "--lambda-steps", "0", "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["sweep", "-S", "0.3", "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["sweep", "-S", "2", "--lambda", "0.5", "--out", str(tmp_path / "missing" / "x.csv")]) == 1


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--lambda-steps", "many"])
    assert exc.value.code == 1


def test_oracle_command(capsys):
    assert main(["oracle", "-S", "1", "--lambda", "0.8"]) == 0
    assert "distance" in capsys.readouterr().out
    assert main(["oracle", "-S", "0.5", "--lambda", "0"]) == 0
    assert main(["oracle", "-S", "10", "--lambda", "0.5"]) == 1
    assert "superoperator" in capsys.readouterr().err


def test_oracle_reports_mismatch(monkeypatch):
    import driven_dicke.steady_state as ss

    original = ss.steady_state_of

    def perturbed(params):
        rho = original(params)
        return ss.DensityMatrix(0.9 * rho.data + 0.1 * np.eye(rho.dim) / rho.dim, rho.sector)

    monkeypatch.setattr(ss, "steady_state_of", perturbed)
    assert main(["oracle", "-S", "1", "--lambda", "0.8"]) == 2


def test_meanfield_command(tmp_path, capsys):
    assert main(["meanfield", "--lambda", "0.6"]) == 0
    rep = json.loads(capsys.readouterr().out)
    stable = [p for p in rep["fixed_points"] if p["stability"] == "stable"]
    assert len(stable) == 1
    loc = stable[0]["location"]
    assert (loc["sx"], loc["sy"], loc["sz"]) == pytest.approx((0, 0.6, -0.8))
    out, traj = tmp_path / "fp.json", tmp_path / "mf.csv"
    assert main(["meanfield", "--lambda", "1.25", "--out", str(out), "--trajectory", str(traj),
                 "--t-final", "1", "--dt", "0.01"]) == 0
    rep = json.loads(out.read_text())
    assert {p["stability"] for p in rep["fixed_points"]} == {"marginal"}
    assert sorted(p["location"]["sx"] for p in rep["fixed_points"]) == pytest.approx([-0.6, 0.6])
    assert main(["meanfield", "--lambda", "1.0", "--out", str(out)]) == 0
    for p in json.loads(out.read_text())["fixed_points"]:
        assert (p["location"]["sx"], p["location"]["sy"], p["location"]["sz"]) == pytest.approx((0, 1, 0))
    assert main(["meanfield", "--lambda", "0.5", "--trajectory", str(traj), "--dt", "2.0", "--t-final", "4"]) == 2


def test_steady_command(tmp_path, capsys):
    dump = tmp_path / "rho.bin"
    assert main(["steady", "-S", "2", "--lambda", "0.5", "--dual", "--out", str(dump)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["dual_means"][2] == pytest.approx(-rep["means"][2])
    rho, meta = read_dump(dump)
    assert meta["spin"] == 2.0 and rho.dim == 5
    assert main(["steady", "-S", "2", "-S", "3", "--lambda", "0.5"]) == 1


def test_qfunction_command(tmp_path, capsys):
    out = tmp_path / "q.csv"
    assert main(["qfunction", "-S", "10", "--lambda", "0.05", "--n-theta", "20", "--n-phi", "40",
                 "--out", str(out)]) == 0
    assert "peaks=1" in capsys.readouterr().out
    meta = read_metadata_header(out)
    assert meta["S"] == 10.0 and meta["grid"] == [20, 40] and "convention" in meta
    assert main(["qfunction", "-S", "4", "--lambda", "0.5", "--state", "mixed", "--n-theta", "10",
                 "--n-phi", "20", "--out", str(out)]) == 0
    assert "peaks=0" in capsys.readouterr().out
    q = [float(line.split(",")[2]) for line in body(out)[1:]]
    assert np.allclose(q, 1 / 9)


def test_dynamics_command(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert main(["dynamics", "-S", "3", "--lambda", "0.5", "--t-final", "2", "--initial", "random",
                 "--fit-window", "0.5", "2", "--out", str(out)]) == 0
    assert "relaxation rate" in capsys.readouterr().out
    assert body(out)[0].strip() == "t,Sx,Sy,Sz,trace_distance_to_ss"
    assert main(["dynamics", "-S", "5", "--lambda", "0.5", "--t-final", "1", "--dt", "0.5",
                 "--out", str(out)]) == 2


def test_scaling_command(tmp_path, capsys):
    sweep = tmp_path / "s.csv"
    lams = [str(1 - e) for e in (0.3, 0.25, 0.2, 0.15, 0.1, 0.07, 0.05)]
    args = ["sweep", "-S", "20", "-S", "40", "-S", "80", "--tasks", "observables,correlations", "--out", str(sweep)]
    for lam in lams + ["1.05", "1.1", "1.2", "1.3"]:
        args += ["--lambda", lam]
    assert main(args) == 0
    capsys.readouterr()
    rep = tmp_path / "r.json"
    assert main(["scaling", str(sweep), "--observable", "sz", "--side", "below", "--out", str(rep)]) == 0
    est = json.loads(rep.read_text())
    assert est["observable"] == "sz" and est["window"] == [0.05, 0.3] and "residual" in est
    assert main(["scaling", str(sweep), "--observable", "var_x", "--side", "size", "--lambda", "0.7"]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(-1, abs=0.2)
    assert main(["scaling", str(sweep), "--observable", "negativity", "--side", "peak"]) == 0
    assert main(["scaling", str(sweep), "--observable", "nope", "--side", "below"]) == 1
    assert main(["scaling", str(tmp_path / "none.csv"), "--observable", "sz", "--side", "below"]) == 1


def test_scaling_command_planted(tmp_path, capsys):
    path = tmp_path / "p.csv"
    lines = ["S,lambda,v"]
    for s in (10, 20, 40):
        for e in np.geomspace(0.02, 0.5, 20):
            lines.append(f"{s},{float(1 - e)!r},{float(e ** 0.5)!r}")
    path.write_text("\n".join(lines) + "\n")
    assert main(["scaling", str(path), "--observable", "v", "--side", "below"]) == 0
    assert json.loads(capsys.readouterr().out)["estimate"] == pytest.approx(0.5, abs=1e-10)


def test_run_sweep_direct():
    rows = run_sweep(RunConfig(spins=[2], lambda_values=[0.5, 1.5], tasks=["observables"]))
    assert [r["lambda"] for r in rows] == [0.5, 1.5]
