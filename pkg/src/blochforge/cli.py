"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error (nothing written),
1 runtime failure. Each run prints one summary line to stdout.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, floquet, io, protocols, seqlang
from ._accel import configure_threads
from .dyncore import parse_initial_state
from .fitting import fit_damped_cosine, fit_exponential
from .propagator import DEFAULT_SAMPLE_DT, evolve


class UsageError(Exception):
    pass


def parse_angle(text: str) -> float:
    text = str(text).strip()
    for unit, scale in (("deg", math.pi / 180.0), ("rad", 1.0)):
        if text.endswith(unit):
            try:
                return float(text[: -len(unit)]) * scale
            except ValueError:
                break
    raise argparse.ArgumentTypeError(f"angle needs a deg or rad suffix, got {text!r}")


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise UsageError("axis step must be > 0")
    if hi < lo:
        raise UsageError("axis maximum must be >= minimum")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _out(args, default_stem: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(f"{default_stem}.{args.format}")


def _check_writable(path: Path):
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory {str(parent)!r} does not exist")


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    if not args.sequence:
        raise UsageError("simulate needs a sequence file")
    path = Path(args.sequence)
    if not path.is_file():
        raise UsageError(f"sequence file {str(path)!r} not found")
    psi0 = parse_initial_state(args.initial)
    schedule = seqlang.load(path, args.name)
    out = _out(args, path.stem)
    _check_writable(out)
    traj = evolve(schedule, psi0, args.sample_dt)
    _write_trajectory(out, args.format, traj, _meta(args, "simulate"))
    if args.svg:
        io.atomic_write_text(args.svg, io.bloch_svg(traj))
    x, y, z = traj.bloch[-1]
    return f"simulate: t_total={schedule.duration!r}s final_bloch=({x:.9f},{y:.9f},{z:.9f})", out


def _write_trajectory(out, fmt_name, traj, meta):
    if fmt_name == "csv":
        io.atomic_write_text(out, io.trajectory_csv(traj))
    else:
        io.atomic_write_text(out, io.dumps_json({"trajectory": io.trajectory_dict(traj), "meta": meta}))


def cmd_rabi(args):
    deltas = _axis(args.delta_min, args.delta_max, args.delta_step)
    times = _axis(0.0, args.t_max, args.t_step)
    out = _out(args, "rabi")
    _check_writable(out)
    result = protocols.rabi_scan(args.kappa, deltas, times)
    io.emit_grid(result, out, args.format, _meta(args, "rabi"))
    return f"rabi: grid={deltas.size}x{times.size} t_total={float(times[-1])!r}s", out


def cmd_ramsey(args):
    deltas = _axis(args.delta_min, args.delta_max, args.delta_step)
    taus = _axis(0.0, args.tau_max, args.tau_step)
    if args.noise == "none":
        noise = protocols.NoiseModel()
    else:
        noise = protocols.NoiseModel.lorentzian(args.t2star, args.ensemble, args.seed)
    out = _out(args, "ramsey")
    _check_writable(out)
    result = protocols.ramsey_scan(args.kappa, deltas, taus, noise)
    io.emit_grid(result, out, args.format, _meta(args, "ramsey"))
    summary = f"ramsey: grid={deltas.size}x{taus.size} t_total={float(taus[-1])!r}s"
    if args.fit_delta is not None:
        row = int(np.argmin(np.abs(deltas - args.fit_delta)))
        fit = fit_damped_cosine(taus, result.values[row])
        summary += f" t2star={fit['t2star']!r} freq={fit['freq']!r}"
    return summary, out


def cmd_echo(args):
    out = _out(args, "echo")
    _check_writable(out)
    taus = list(args.tau)
    chunks = []
    finals = []
    total = 0.0
    for tau in taus:
        schedule, p0 = protocols.spin_echo(args.kappa, args.delta, tau, args.final_angle)
        traj = evolve(schedule, parse_initial_state("0"), args.sample_dt)
        finals.append(p0)
        total = max(total, schedule.duration)
        chunks.append((tau, traj))
    if args.format == "csv":
        if len(chunks) == 1:
            text = io.trajectory_csv(chunks[0][1])
        else:
            parts = [io.trajectory_csv(traj, {"tau": tau}) for tau, traj in chunks]
            text = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
        io.atomic_write_text(out, text)
    else:
        io.atomic_write_text(out, io.dumps_json({
            "trajectories": [{"tau": tau, **io.trajectory_dict(traj)} for tau, traj in chunks],
            "meta": _meta(args, "echo"),
        }))
    finals_txt = ",".join(f"{p:.12f}" for p in finals)
    return f"echo: final_P0=[{finals_txt}] t_total={total!r}s", out


def cmd_t1(args):
    if args.gamma1 is not None:
        gammas = [args.gamma1]
    else:
        gammas = [protocols.gamma_from_t1(t1, args.t1_convention) for t1 in args.t1]
    duration = args.duration
    if duration is None:
        duration = 3.0 * max(protocols.t1_from_gamma(g) for g in gammas)
    if not duration > 0:
        raise UsageError("duration must be > 0")
    out = _out(args, "t1")
    _check_writable(out)
    rows = []
    fits = []
    for k, g in enumerate(gammas):
        t, power = protocols.t1_experiment(g, duration, args.sample_dt)
        if args.noise_level > 0:
            power = protocols.add_noise(power, args.noise_level, args.seed + k)
        fit = fit_exponential(t, power)
        fits.append({"gamma1_hz": g, "t1_model_s": protocols.t1_from_gamma(g), "fit": fit.to_dict()})
        rows.append((g, t, power))
    if args.format == "csv":
        lines = ["gamma1_hz,t,power"]
        for g, t, power in rows:
            lines += [f"{io.fmt(g)},{io.fmt(a)},{io.fmt(b)}" for a, b in zip(t, power)]
        io.atomic_write_text(out, "\n".join(lines) + "\n")
    else:
        io.atomic_write_text(out, io.dumps_json({
            "decays": [{"gamma1_hz": g, "t": t, "power": p} for g, t, p in rows],
            "fits": fits,
            "meta": _meta(args, "t1"),
        }))
    fitted = ",".join(repr(f["fit"]["params"]["tconst"]) for f in fits)
    return f"t1: fitted_t1=[{fitted}] t_total={duration!r}s", out


def cmd_floquet_evolve(args):
    p = floquet.FloquetParams(args.kappa, args.dgamma, args.period, args.gamma, args.alpha)
    psi0 = parse_initial_state(args.initial)
    out = _out(args, "floquet-evolve")
    _check_writable(out)
    traj = floquet.floquet_evolve(p, args.periods, psi0, args.sample_dt)
    _write_trajectory(out, args.format, traj, _meta(args, "floquet-evolve"))
    strobe = floquet.stroboscopic_powers(traj, p.period)
    growth = float(strobe[-1] / strobe[-2])
    q = floquet.quasi_energies(floquet.monodromy(p), p.period)
    lam2 = math.exp(2 * q.max_imag * p.period)
    return (
        f"floquet-evolve: growth_per_period={growth!r} lambda_max_sq={lam2!r} "
        f"t_total={float(traj.t[-1])!r}s"
    ), out


def cmd_floquet_phase(args):
    if args.dgamma_points < 1 or args.period_points < 1:
        raise UsageError("grid needs at least one point per axis")
    dg = np.linspace(args.dgamma_min, args.dgamma_max, args.dgamma_points)
    T = np.linspace(args.period_min, args.period_max, args.period_points)
    out = _out(args, "floquet-phase")
    _check_writable(out)
    grid = floquet.phase_diagram(args.kappa, dg, T, args.alpha if 0 < args.alpha < 1 else None)
    io.emit_grid(grid, out, args.format, _meta(args, "floquet-phase"))
    frac = float(np.mean(grid.values > 0))
    return f"floquet-phase: grid={dg.size}x{T.size} unstable_fraction={frac!r}", out


def cmd_ep_threshold(args):
    alpha = args.alpha if 0 < args.alpha < 1 else None
    star = floquet.ep_threshold(args.kappa, args.period, alpha)
    out = Path(args.out) if args.out else None
    if out is not None:
        _check_writable(out)
        io.atomic_write_text(out, io.dumps_json({
            "dgamma_star": star,
            "found": star is not None,
            "meta": _meta(args, "ep-threshold"),
        }))
    shown = "none" if star is None else repr(star)
    mode = "static" if alpha is None else "floquet"
    return f"dgamma_star={shown} mode={mode} kappa={args.kappa!r} period={args.period!r}", out


def cmd_fit(args):
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file {str(path)!r} not found")
    cols = io.read_trajectory_csv(path)
    names = list(cols)
    xname = args.x_column or names[0]
    yname = args.y_column or names[1]
    for name in (xname, yname):
        if name not in cols:
            raise UsageError(f"column {name!r} not in {path} (have {', '.join(names)})")
    if args.model == "exponential":
        fit = fit_exponential(cols[xname], cols[yname])
    else:
        fit = fit_damped_cosine(cols[xname], cols[yname])
    out = _out(args, "fit")
    _check_writable(out)
    io.atomic_write_text(out, io.dumps_json(dict(fit.to_dict(), meta=_meta(args, "fit"))))
    shown = " ".join(f"{k}={v!r}" for k, v in fit.params.items())
    return f"fit: {shown} converged={fit.converged}", out


def _meta(args, command):
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "config", "out", "format", "command") and v is not None
    }
    return {"command": command, "parameters": params, "seed": getattr(args, "seed", None), "version": __version__}


# ---------------------------------------------------------------- parser


def _common(p, default_format="csv", seed=False, sample_dt=False, out_default="<command>.<format>"):
    p.add_argument("--out", metavar="PATH", help=f"output file [path] (default: {out_default})")
    p.add_argument("--format", choices=("csv", "json"), default=default_format,
                   help="output format [csv|json] (default: %(default)s)")
    p.add_argument("--config", metavar="FILE",
                   help="JSON object of long-flag names to values [path]; flags override it")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="RNG seed [integer] (default: %(default)s)")
    if sample_dt:
        p.add_argument("--sample-dt", type=float, default=DEFAULT_SAMPLE_DT,
                       help="trajectory sampling step [s] (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blochforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("simulate", help="evolve a pulse-sequence file")
    p.add_argument("sequence", nargs="?", help="pulse-sequence source file [path]")
    p.add_argument("--name", help="sequence to run when the file defines several [identifier]")
    p.add_argument("--initial", default="0", help="initial state: 0, 1 or theta,phi [deg] (default: %(default)s)")
    p.add_argument("--svg", metavar="PATH", help="also write a Bloch projection SVG [path]")
    _common(p, sample_dt=True, out_default="<sequence file stem>.<format>")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rabi", help="Rabi population scan over detuning and time")
    p.add_argument("--kappa", type=float, default=10.0, help="coupling [Hz] (default: %(default)s)")
    p.add_argument("--delta-min", type=float, default=-20.0, help="lowest detuning [Hz] (default: %(default)s)")
    p.add_argument("--delta-max", type=float, default=20.0, help="highest detuning [Hz] (default: %(default)s)")
    p.add_argument("--delta-step", type=float, default=2.0, help="detuning step [Hz] (default: %(default)s)")
    p.add_argument("--t-max", type=float, default=0.3, help="longest evolution time [s] (default: %(default)s)")
    p.add_argument("--t-step", type=float, default=0.005, help="time step [s] (default: %(default)s)")
    _common(p)
    p.set_defaults(func=cmd_rabi)

    p = sub.add_parser("ramsey", help="Ramsey fringe scan over detuning and free-precession time")
    p.add_argument("--kappa", type=float, default=10.0, help="pulse coupling [Hz] (default: %(default)s)")
    p.add_argument("--delta-min", type=float, default=0.0, help="lowest detuning [Hz] (default: %(default)s)")
    p.add_argument("--delta-max", type=float, default=20.0, help="highest detuning [Hz] (default: %(default)s)")
    p.add_argument("--delta-step", type=float, default=1.0, help="detuning step [Hz] (default: %(default)s)")
    p.add_argument("--tau-max", type=float, default=0.3, help="longest free precession [s] (default: %(default)s)")
    p.add_argument("--tau-step", type=float, default=0.005, help="free-precession step [s] (default: %(default)s)")
    p.add_argument("--noise", choices=("none", "lorentzian"), default="none",
                   help="detuning noise model [none|lorentzian] (default: %(default)s)")
    p.add_argument("--t2star", type=float, default=0.19,
                   help="dephasing time setting the Lorentzian width [s] (default: %(default)s)")
    p.add_argument("--ensemble", type=int, default=4000, help="ensemble size [members] (default: %(default)s)")
    p.add_argument("--fit-delta", type=float, help="fit the damped fringe of this detuning row [Hz]")
    _common(p, seed=True)
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("echo", help="spin-echo trajectories")
    p.add_argument("--kappa", type=float, default=10.0, help="pulse coupling [Hz] (default: %(default)s)")
    p.add_argument("--delta", type=float, default=10.0, help="free-precession detuning [Hz] (default: %(default)s)")
    p.add_argument("--tau", type=float, nargs="+", default=[0.01, 0.03, 0.04],
                   help="free-precession time(s) [s] (default: 0.01 0.03 0.04)")
    p.add_argument("--final-angle", type=parse_angle, default=math.pi / 2,
                   help="closing pulse angle [deg|rad suffix] (default: 90deg)")
    _common(p, sample_dt=True)
    p.set_defaults(func=cmd_echo)

    p = sub.add_parser("t1", help="pi pulse then free decay, with exponential fit")
    p.add_argument("--t1", type=float, nargs="+", default=[0.53, 0.32, 0.22, 0.17],
                   help="target relaxation time(s) [s] (default: 0.53 0.32 0.22 0.17)")
    p.add_argument("--gamma1", type=float, help="loss rate, overrides --t1 [Hz]")
    p.add_argument("--t1-convention", choices=("power-e-fold", "reciprocal"), default="power-e-fold",
                   help="T1 to loss-rate mapping [power-e-fold: 1/(4 pi T1) | reciprocal: 1/T1] "
                        "(default: %(default)s)")
    p.add_argument("--duration", type=float, help="decay window [s] (default: 3x the longest T1)")
    p.add_argument("--noise-level", type=float, default=0.0,
                   help="additive Gaussian noise std on power [fraction of initial power] (default: %(default)s)")
    p.add_argument("--sample-dt", type=float, default=1e-3, help="decay sampling step [s] (default: %(default)s)")
    _common(p, seed=True)
    p.set_defaults(func=cmd_t1)

    p = sub.add_parser("floquet-evolve", help="evolve under periodically swapped gain/loss")
    p.add_argument("--kappa", type=float, default=8.5, help="coupling [Hz] (default: %(default)s)")
    p.add_argument("--dgamma", type=float, default=0.4, help="loss half-difference [Hz] (default: %(default)s)")
    p.add_argument("--gamma", type=float, default=0.0, help="mean loss [Hz] (default: %(default)s)")
    p.add_argument("--period", type=float, default=0.06, help="modulation period [s] (default: %(default)s)")
    p.add_argument("--alpha", type=float, default=0.5, help="duty cycle of the first half [0..1] (default: %(default)s)")
    p.add_argument("--periods", type=int, default=20, help="number of periods [count] (default: %(default)s)")
    p.add_argument("--initial", default="0", help="initial state: 0, 1 or theta,phi [deg] (default: %(default)s)")
    _common(p, sample_dt=True)
    p.set_defaults(func=cmd_floquet_evolve)

    p = sub.add_parser("floquet-phase", help="max |Im quasi-energy| over a (dgamma, period) grid")
    p.add_argument("--kappa", type=float, default=8.5, help="coupling [Hz] (default: %(default)s)")
    p.add_argument("--dgamma-min", type=float, default=0.0, help="lowest dgamma [Hz] (default: %(default)s)")
    p.add_argument("--dgamma-max", type=float, default=1.0, help="highest dgamma [Hz] (default: %(default)s)")
    p.add_argument("--dgamma-points", type=int, default=200, help="dgamma grid size [count] (default: %(default)s)")
    p.add_argument("--period-min", type=float, default=0.01, help="shortest period [s] (default: %(default)s)")
    p.add_argument("--period-max", type=float, default=0.12, help="longest period [s] (default: %(default)s)")
    p.add_argument("--period-points", type=int, default=200, help="period grid size [count] (default: %(default)s)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="duty cycle; 0 or 1 selects the unmodulated system [0..1] (default: %(default)s)")
    _common(p)
    p.set_defaults(func=cmd_floquet_phase)

    p = sub.add_parser("ep-threshold", help="smallest dgamma at which quasi-energies coalesce")
    p.add_argument("--kappa", type=float, default=8.5, help="coupling [Hz] (default: %(default)s)")
    p.add_argument("--period", type=float, default=0.06, help="modulation period [s] (default: %(default)s)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="duty cycle; 0 or 1 selects the unmodulated system [0..1] (default: %(default)s)")
    _common(p, default_format="json", out_default="no file, summary line only")
    p.set_defaults(func=cmd_ep_threshold)

    p = sub.add_parser("fit", help="fit a decay model to two CSV columns")
    p.add_argument("input", help="CSV file with a header row [path]")
    p.add_argument("--model", choices=("exponential", "damped-cosine"), default="exponential",
                   help="model [exponential: A exp(-t/tconst) | damped-cosine: "
                        "offset - A exp(-t/t2star) cos(2 pi f t)] (default: %(default)s)")
    p.add_argument("--x-column", help="abscissa column [name] (default: first column)")
    p.add_argument("--y-column", help="ordinate column [name] (default: second column)")
    _common(p, default_format="json")
    p.set_defaults(func=cmd_fit)
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _apply_config(parser, argv):
    """Load ``--config`` into the chosen subcommand's defaults."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in _subparsers(parser)), None)
    if known.config is None or command is None:
        return
    cfg_path = Path(known.config)
    if not cfg_path.is_file():
        raise UsageError(f"config file {str(cfg_path)!r} not found")
    try:
        cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {str(cfg_path)!r} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub = _subparsers(parser)[command]
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in dests or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for {command}")
        action = dests[dest]
        if action.type is not None and value is not None:
            value = [action.type(v) for v in value] if isinstance(value, list) else action.type(value)
        defaults[dest] = value
    sub.set_defaults(**defaults)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    configure_threads()
    parser = build_parser()
    start = time.perf_counter()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"blochforge: error: {exc}", file=sys.stderr)
        return 2
    try:
        summary, out = args.func(args)
    except (UsageError, seqlang.SeqError, ValueError) as exc:
        print(f"blochforge {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"blochforge {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - start
    print(f"{summary} elapsed={elapsed:.3f}s out={out if out else '-'}")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
