import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from blochforge import cli, io
from blochforge.seqlang import corpus_dir

GOLDEN = Path(__file__).parent / "golden"
COMMANDS = ["simulate", "rabi", "ramsey", "echo", "t1", "floquet-evolve", "floquet-phase", "ep-threshold", "fit"]
HEADER = "t,re_c0,im_c0,re_c1,im_c1,bloch_x,bloch_y,bloch_z,power"


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("COLUMNS", "100")
    return tmp_path


def run(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def last_row(path):
    cols = io.read_trajectory_csv(path)
    return {k: v[-1] for k, v in cols.items()}


# ---------------------------------------------------------------- examples


def test_ep_threshold_example(capsys):
    code, out, _ = run(capsys, "ep-threshold", "--kappa", "8.5", "--period", "0.06", "--alpha", "0.5")
    assert code == 0
    assert out.startswith("dgamma_star=0.2")
    value = float(out.split()[0].split("=")[1])
    assert abs(value - 0.27) <= 0.01
    assert out.count("\n") == 1 and "elapsed=" in out and "out=" in out


def test_ep_threshold_static_and_json(capsys, in_tmp):
    code, out, _ = run(capsys, "ep-threshold", "--alpha", "0", "--out", "ep.json")
    assert code == 0 and out.startswith("dgamma_star=8.5 ")
    data = json.loads((in_tmp / "ep.json").read_text())
    assert data["dgamma_star"] == 8.5 and data["meta"]["command"] == "ep-threshold"


def test_ep_threshold_not_found(capsys):
    code, out, _ = run(capsys, "ep-threshold", "--period", "0.03")
    assert code == 0 and out.startswith("dgamma_star=none")


def test_echo_example(capsys, in_tmp):
    code, out, _ = run(capsys, "echo", "--kappa", "10", "--delta", "10", "--tau", "0.03",
                       "--final-angle", "90deg", "--out", "traj.csv")
    assert code == 0
    text = (in_tmp / "traj.csv").read_text()
    assert text.splitlines()[0] == HEADER
    row = last_row(in_tmp / "traj.csv")
    assert (row["re_c0"] ** 2 + row["im_c0"] ** 2) / row["power"] == pytest.approx(1, abs=1e-9)
    assert row["t"] == pytest.approx(0.11)
    assert "traj.csv" in out and "t_total=0.11" in out


def test_echo_three_half_pi_and_multi_tau(capsys, in_tmp):
    code, out, _ = run(capsys, "echo", "--final-angle", "270deg", "--out", "e.csv")
    assert code == 0
    cols = io.read_trajectory_csv(in_tmp / "e.csv")
    assert list(cols)[0] == "tau"
    assert sorted(set(cols["tau"])) == [0.01, 0.03, 0.04]
    for tau in (0.01, 0.03, 0.04):
        last = np.nonzero(cols["tau"] == tau)[0][-1]
        assert cols["re_c0"][last] ** 2 + cols["im_c0"][last] ** 2 < 1e-9


def test_echo_angle_needs_unit(capsys, in_tmp):
    code, _, err = run(capsys, "echo", "--final-angle", "90", "--out", "x.csv")
    assert code == 2 and "deg or rad" in err
    assert not (in_tmp / "x.csv").exists()
    assert cli.parse_angle("1.5rad") == 1.5
    assert cli.parse_angle("90deg") == pytest.approx(math.pi / 2)


def test_simulate_missing_file(capsys, in_tmp):
    code, out, err = run(capsys, "simulate", "missing.seq")
    assert code == 2 and out == ""
    assert "missing.seq" in err
    assert list(in_tmp.iterdir()) == []


def test_simulate_shipped_echo(capsys, in_tmp):
    code, out, _ = run(capsys, "simulate", str(corpus_dir() / "echo.seq"), "--out", "echo.csv", "--svg", "echo.svg")
    assert code == 0
    assert last_row(in_tmp / "echo.csv")["bloch_z"] == pytest.approx(1, abs=1e-9)
    svg = (in_tmp / "echo.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2 and svg.count("<circle") == 2


def test_simulate_lone_half_pi(capsys, in_tmp):
    (in_tmp / "lone.seq").write_text("seq lone {\n  pulse x 90deg kappa=10\n}\n")
    code, _, _ = run(capsys, "simulate", "lone.seq")
    assert code == 0
    row = last_row(in_tmp / "lone.csv")
    np.testing.assert_allclose([row["bloch_x"], row["bloch_y"], row["bloch_z"]], [0, -1, 0], atol=1e-9)


def test_simulate_initial_state_and_name(capsys, in_tmp):
    code, _, _ = run(capsys, "simulate", str(corpus_dir() / "multi.seq"), "--name", "first",
                     "--initial", "180,0", "--out", "m.csv", "--format", "json")
    assert code == 0
    data = json.loads((in_tmp / "m.csv").read_text())
    assert data["trajectory"]["bloch_z"][0] == pytest.approx(-1)
    assert data["meta"]["command"] == "simulate"
    code, _, err = run(capsys, "simulate", str(corpus_dir() / "multi.seq"))
    assert code == 2 and "several sequences" in err


@pytest.mark.parametrize("src,fragment", [
    ("seq s {\n  wait 0 delta=1\n}\n", "zero total duration"),
    ("seq s {\n  wait 0.03 Δ\n}\n", "line 2, column 13"),
    ("seq s {\n  pulse x 90 kappa=10\n}\n", "line 2, column 14"),
    ("seq s { }", "empty body"),
])
def test_simulate_bad_programs_exit_2(capsys, in_tmp, src, fragment):
    (in_tmp / "bad.seq").write_text(src, encoding="utf-8")
    code, out, err = run(capsys, "simulate", "bad.seq")
    assert code == 2 and out == ""
    assert fragment in err
    assert not (in_tmp / "bad.csv").exists()


def test_corpus_malformed_cases_exit_2(capsys, in_tmp):
    from test_seqlang import MALFORMED

    for k, (src, _, line, col) in enumerate(MALFORMED):
        (in_tmp / f"m{k}.seq").write_text(src, encoding="utf-8")
        code, _, err = run(capsys, "simulate", f"m{k}.seq")
        assert code == 2, src
        assert f"line {line}, column {col}" in err, src


# ---------------------------------------------------------------- grids


def test_one_by_one_grid_is_three_lines(capsys, in_tmp):
    code, _, _ = run(capsys, "rabi", "--delta-min", "0", "--delta-max", "0", "--t-max", "0", "--out", "g.csv")
    assert code == 0
    lines = (in_tmp / "g.csv").read_text().splitlines()
    assert lines == ["delta_hz,t_s", ",0.0", "0.0,1.0"]


def test_ramsey_default_grid(capsys, in_tmp):
    code, out, _ = run(capsys, "ramsey")
    assert code == 0 and "ramsey.csv" in out
    rn, rows, cn, cols, vals = io.read_grid_csv(in_tmp / "ramsey.csv")
    assert (rn, cn) == ("delta_hz", "tau_s")
    assert vals.shape == (21, 61)
    np.testing.assert_allclose(vals[10], (1 - np.cos(2 * np.pi * 10 * cols)) / 2, atol=1e-10)


def test_rabi_default_grid_json(capsys, in_tmp):
    code, _, _ = run(capsys, "rabi", "--format", "json")
    assert code == 0
    data = json.loads((in_tmp / "rabi.json").read_text())
    assert set(data) == {"row_axis", "col_axis", "values", "meta"}
    assert len(data["row_axis"]["values"]) == 21 and len(data["col_axis"]["values"]) == 61
    assert data["row_axis"]["values"][0] == -20.0 and data["col_axis"]["values"][-1] == pytest.approx(0.3)
    meta = data["meta"]
    assert meta["command"] == "rabi" and meta["parameters"]["kappa"] == 10.0
    assert "seed" in meta and meta["version"] == "0.1.0"


def test_floquet_phase_default_grid(capsys, in_tmp):
    code, _, _ = run(capsys, "floquet-phase", "--kappa", "8.5")
    assert code == 0
    rn, dg, cn, T, vals = io.read_grid_csv(in_tmp / "floquet-phase.csv")
    assert vals.shape == (200, 200) and (rn, cn) == ("dgamma_hz", "period_s")
    j = np.argmin(np.abs(T - 0.06))
    assert vals[np.argmin(np.abs(dg - 0.4)), j] > 0
    assert vals[np.argmin(np.abs(dg - 0.1)), j] == 0
    assert np.all(vals >= 0)


def test_unwritable_path_exit_1(capsys, in_tmp):
    code, out, err = run(capsys, "rabi", "--out", str(in_tmp / "no" / "such" / "dir.csv"))
    assert code == 1 and out == "" and err


# ---------------------------------------------------------------- other commands


def test_t1_and_fit(capsys, in_tmp):
    code, out, _ = run(capsys, "t1", "--t1", "0.32", "--out", "t1.csv")
    assert code == 0
    fitted = float(out.split("fitted_t1=[")[1].split("]")[0])
    assert fitted == pytest.approx(0.32, rel=1e-3)
    code, out, _ = run(capsys, "fit", "t1.csv", "--x-column", "t", "--y-column", "power")
    assert code == 0
    data = json.loads((in_tmp / "fit.json").read_text())
    assert data["params"]["tconst"] == pytest.approx(0.32, rel=1e-3)
    code, _, err = run(capsys, "fit", "t1.csv", "--x-column", "nope")
    assert code == 2 and "nope" in err


def test_t1_reciprocal(capsys):
    code, out, _ = run(capsys, "t1", "--t1", "0.53", "--t1-convention", "reciprocal")
    assert code == 0
    fitted = float(out.split("fitted_t1=[")[1].split("]")[0])
    assert fitted == pytest.approx(1 / (4 * math.pi / 0.53), rel=1e-3)


def test_floquet_evolve(capsys, in_tmp):
    code, out, _ = run(capsys, "floquet-evolve", "--sample-dt", "1e-3")
    assert code == 0
    fields = dict(kv.split("=") for kv in out.split()[1:])
    assert float(fields["lambda_max_sq"]) == pytest.approx(1.076**2, abs=2e-3)
    assert float(fields["t_total"].rstrip("s")) == pytest.approx(1.2)


def test_fit_missing_input(capsys):
    code, _, err = run(capsys, "fit", "nothing.csv")
    assert code == 2 and "nothing.csv" in err


# ---------------------------------------------------------------- config


def test_config_file_and_override(capsys, in_tmp):
    (in_tmp / "cfg.json").write_text(json.dumps({"kappa": 5, "delta-max": 4, "out": "c.csv"}))
    code, _, _ = run(capsys, "rabi", "--config", "cfg.json", "--delta-max", "2")
    assert code == 0
    _, rows, _, _, _ = io.read_grid_csv(in_tmp / "c.csv")
    assert rows[-1] == 2.0
    data_a = (in_tmp / "c.csv").read_text()
    code, _, _ = run(capsys, "rabi", "--kappa", "5", "--delta-max", "2", "--out", "d.csv")
    assert (in_tmp / "d.csv").read_text() == data_a


@pytest.mark.parametrize("content,fragment", [
    ('{"bogus": 1}', "unknown config key"),
    ("[1, 2]", "JSON object"),
    ("{nope", "not valid JSON"),
])
def test_config_errors(capsys, in_tmp, content, fragment):
    (in_tmp / "cfg.json").write_text(content)
    code, _, err = run(capsys, "rabi", "--config", "cfg.json")
    assert code == 2 and fragment in err
    assert not (in_tmp / "rabi.csv").exists()


def test_config_missing(capsys):
    code, _, err = run(capsys, "rabi", "--config", "absent.json")
    assert code == 2 and "absent.json" in err


# ---------------------------------------------------------------- usage


@pytest.mark.parametrize("argv", [[], ["bogus"], ["rabi", "--kappa"], ["rabi", "--kappa", "x"], ["rabi", "--nope"]])
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err


@pytest.mark.parametrize("argv", [
    ["rabi", "--kappa", "0"],
    ["rabi", "--t-step", "0"],
    ["ramsey", "--noise", "lorentzian", "--ensemble", "0"],
    ["floquet-evolve", "--alpha", "1.5"],
    ["floquet-evolve", "--periods", "0"],
    ["floquet-phase", "--period-min", "0"],
    ["t1", "--t1", "-1"],
    ["simulate", "x.seq", "--initial", "up"],
])
def test_validation_errors(capsys, in_tmp, argv):
    if argv[0] == "simulate":
        (in_tmp / "x.seq").write_text("seq s { wait 1 }")
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err
    assert {p.name for p in in_tmp.iterdir()} <= {"x.seq"}


# ---------------------------------------------------------------- reproducibility and atomicity


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_byte_identical_reruns(capsys, in_tmp, fmt):
    argv = ["ramsey", "--noise", "lorentzian", "--ensemble", "300", "--seed", "7", "--format", fmt,
            "--delta-max", "3", "--tau-max", "0.1"]
    run(capsys, *argv, "--out", f"a.{fmt}")
    run(capsys, *argv, "--out", f"b.{fmt}")
    assert (in_tmp / f"a.{fmt}").read_bytes() == (in_tmp / f"b.{fmt}").read_bytes()
    run(capsys, *argv[:-6], "--seed", "8", "--format", fmt, "--delta-max", "3", "--tau-max", "0.1", "--out", f"c.{fmt}")
    assert (in_tmp / f"a.{fmt}").read_bytes() != (in_tmp / f"c.{fmt}").read_bytes()


def test_interrupted_write_leaves_target_intact(in_tmp):
    target = in_tmp / "out.csv"
    target.write_text("old\n")
    with pytest.raises(KeyboardInterrupt):
        with io.atomic_open(target) as fh:
            fh.write("partial")
            raise KeyboardInterrupt
    assert target.read_text() == "old\n"
    assert [p.name for p in in_tmp.iterdir()] == ["out.csv"]


def test_interrupted_run_leaves_no_file(capsys, in_tmp, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(io, "grid_csv", boom)
    code, _, err = run(capsys, "rabi", "--out", "r.csv")
    assert code == 1 and "disk on fire" in err
    assert list(in_tmp.iterdir()) == []


def test_full_precision_numbers(capsys, in_tmp):
    run(capsys, "rabi", "--delta-min", "3", "--delta-max", "3", "--t-max", "0.01", "--out", "p.csv")
    _, _, _, _, vals = io.read_grid_csv(in_tmp / "p.csv")
    from blochforge.propagator import rabi_population

    ref = rabi_population(3, 10, np.array([0.0, 0.005, 0.01]))
    np.testing.assert_allclose(vals[0], ref, rtol=0, atol=1e-15)
    text = (in_tmp / "p.csv").read_text().splitlines()[2]
    for cell in text.split(",")[1:]:
        assert float(repr(float(cell))) == float(cell)


# ---------------------------------------------------------------- help goldens


def help_text(command):
    env = dict(os.environ, COLUMNS="100")
    out = subprocess.run([sys.executable, "-m", "blochforge", command, "--help"], env=env,
                         capture_output=True, text=True, check=True)
    return out.stdout


@pytest.mark.parametrize("command", COMMANDS)
def test_help_golden(command):
    text = help_text(command)
    path = GOLDEN / f"help_{command}.txt"
    if os.environ.get("BLOCHFORGE_REGEN_GOLDEN"):
        path.write_text(text)
    assert text == path.read_text()


@pytest.mark.parametrize("command", COMMANDS)
def test_help_lists_units(command):
    parser = cli.build_parser()
    sub = cli._subparsers(parser)[command]
    for action in sub._actions:
        if action.dest in ("help",):
            continue
        assert "[" in (action.help or ""), f"{command} {action.option_strings or action.dest}"


def test_header_goldens(capsys, in_tmp):
    (in_tmp / "one.seq").write_text("seq s { wait 0.001 }")
    run(capsys, "simulate", "one.seq")
    assert (in_tmp / "one.csv").read_text().splitlines()[0] == HEADER
    run(capsys, "t1", "--t1", "0.2")
    assert (in_tmp / "t1.csv").read_text().splitlines()[0] == "gamma1_hz,t,power"
    for cmd, header in (("rabi", "delta_hz,t_s"), ("ramsey", "delta_hz,tau_s"), ("floquet-phase", "dgamma_hz,period_s")):
        run(capsys, cmd, "--out", "h.csv")
        assert (in_tmp / "h.csv").read_text().splitlines()[0] == header


def test_module_entry_point(in_tmp):
    out = subprocess.run([sys.executable, "-m", "blochforge", "ep-threshold"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("dgamma_star=")
    out = subprocess.run([sys.executable, "-m", "blochforge", "simulate", "nope.seq"], capture_output=True, text=True)
    assert out.returncode == 2 and "nope.seq" in out.stderr
