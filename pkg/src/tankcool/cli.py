"""Command-line front end.

Every subcommand reads a scenario configuration (a file path or the name of
a bundled configuration such as ``arkr_at``), writes CSV files with a
``#`` metadata header into the output directory, and records a
``manifest.json`` describing the run.

Exit codes: 0 success, 2 usage or missing input, 3 invalid configuration
or parameters, 4 integration failure, 5 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .model import TWO_PI, ConfigError, ValidationError, bundled_config, hz, load_scenario

OUT_ENV = "TANKCOOL_OUT"
EXIT_USAGE, EXIT_VALIDATION, EXIT_INTEGRATION, EXIT_FIT = 2, 3, 4, 5


class UsageError(Exception):
    pass


# -- helpers ---------------------------------------------------------------


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` -> evenly spaced values (inclusive)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--grid expects start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--grid expects start:stop:count, got {text!r}") from None
    if count < 1:
        raise UsageError("--grid count must be >= 1")
    return np.linspace(start, stop, count)


def _read_config(ref: str) -> tuple[str, bytes]:
    path = Path(ref)
    if path.is_file():
        raw = path.read_bytes()
        return raw.decode("utf-8"), raw
    try:
        text = bundled_config(ref)
    except (FileNotFoundError, ModuleNotFoundError, OSError):
        raise UsageError(f"config {ref!r} not found (neither a file nor a bundled name)") from None
    return text, text.encode("utf-8")


class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, args, raw_config: bytes, seed):
        self.args = args
        self.out = Path(args.out or os.environ.get(OUT_ENV) or "tankcool_out")
        self.out.mkdir(parents=True, exist_ok=True)
        self.digest = hashlib.sha256(raw_config).hexdigest()
        self.seed = seed
        self.outputs: list[str] = []

    def header(self, units: str) -> dict:
        return {
            "subcommand": self.args.command,
            "tool_version": __version__,
            "config_sha256": self.digest,
            "seed": self.seed,
            "units": units,
        }

    def write_csv(self, name: str, columns, rows, units: str, extra: dict | None = None) -> Path:
        path = self.out / name
        meta = self.header(units)
        meta.update(extra or {})
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for k, v in meta.items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.outputs.append(str(path))
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.outputs.append(str(path))
        return path

    def finish(self) -> None:
        manifest = {
            "subcommand": self.args.command,
            "config_digest": self.digest,
            "seed": self.seed,
            "tool_version": __version__,
            "outputs": self.outputs,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _load(args):
    text, raw = _read_config(args.config)
    scenario, params = load_scenario(text)
    if getattr(args, "seed", None) is not None:
        params = replace(params, rng_seed=args.seed)
    if getattr(args, "ensemble", None) is not None:
        params = replace(params, ensemble_size=args.ensemble)
    return scenario, params, raw


def _grids(args, n: int, defaults):
    given = [parse_grid(g) for g in (args.grid or [])]
    if len(given) > n:
        raise UsageError(f"{args.command} takes at most {n} --grid option(s)")
    return given + list(defaults[len(given):])


def _trajectory_rows(traj):
    return zip(traj.times, traj.energy1, traj.energy2, traj.temperature1, traj.temperature2)


TRAJ_COLS = ["t_s", "E1_J", "E2_J", "T1_K", "T2_K"]


# -- subcommands -----------------------------------------------------------


def cmd_impedance(args):
    from .resonator import effective_circuit, impedance

    scenario, params, raw = _load(args)
    tank = scenario.resonator
    if tank is None:
        raise ValidationError("resonator", "the impedance subcommand needs a [resonator] section")
    fw = hz(tank.fwhm)
    (grid,) = _grids(args, 1, [np.linspace(-20 * fw, 20 * fw, 401)])
    run = Run(args, raw, params.rng_seed)
    rows = []
    for df in grid:
        z = impedance(tank, tank.resonance_frequency + TWO_PI * df)
        if abs(TWO_PI * df) > tank.fwhm:
            ec = effective_circuit(tank, TWO_PI * df)
            r_eff, c_eff = ec.effective_resistance, ec.effective_capacitance
        else:
            r_eff, c_eff = math.nan, math.nan
        rows.append((df, z.real, z.imag, r_eff, c_eff))
    run.write_csv(
        "impedance.csv", ["df_Hz", "ReZ_ohm", "ImZ_ohm", "R_eff_ohm", "C_eff_F"], rows,
        "Hz from resonance; ohm; farad (nan inside the resonance width)",
        {"f_R_Hz": hz(tank.resonance_frequency), "Q": tank.quality_factor},
    )
    run.finish()
    print(f"f_R = {hz(tank.resonance_frequency):.6g} Hz  Q = {tank.quality_factor:.6g}  rows = {len(rows)}")


def cmd_coupling(args):
    from .coupling import coupling_summary

    scenario, params, raw = _load(args)
    s = coupling_summary(scenario)
    items = [
        ("rabi_frequency_Hz", hz(s.rabi_frequency)),
        ("exchange_time_s", s.exchange_time),
        ("coupling_capacitance_F", s.coupling_capacitance),
        ("ion1_frequency_Hz", hz(s.shifted_frequencies[0])),
        ("ion2_frequency_Hz", hz(s.shifted_frequencies[1])),
        ("mode_u_Hz", hz(s.mode_frequencies[0])),
        ("mode_v_Hz", hz(s.mode_frequencies[1])),
        ("modified_rabi_Hz", hz(s.modified_rabi)),
        ("C12_per_s2", s.coupling_constants[0]),
        ("C21_per_s2", s.coupling_constants[1]),
        ("alpha", s.mode_coefficients[0]),
        ("beta", s.mode_coefficients[1]),
    ]
    if scenario.resonator is not None:
        items.append(("effective_resistance_ohm", scenario.effective_resistance))
    for k, v in items:
        print(f"{k:26s} {v:.6g}")
    run = Run(args, raw, params.rng_seed)
    run.write_csv("coupling.csv", ["quantity", "value"], items, "see quantity suffix")
    run.finish()


def cmd_exchange(args):
    from .dynamics import simulate_exchange

    scenario, params, raw = _load(args)
    gl = None if args.gamma_l is None else TWO_PI * args.gamma_l
    noise = {"on": True, "off": False, "auto": None}[args.noise]
    traj = simulate_exchange(scenario, params, gamma_l=gl, noise=noise, record_every=args.every)
    run = Run(args, raw, params.rng_seed)
    run.write_csv("exchange.csv", TRAJ_COLS, _trajectory_rows(traj), "s; J; K",
                  {"ensemble": params.ensemble_size, "gamma_L_Hz": hz(traj.meta["gamma_l"])})
    run.finish()
    print(f"samples = {len(traj)}  final T1 = {traj.temperature1[-1]:.6g} K")


def cmd_cool_continuous(args):
    from .dynamics import simulate_exchange

    scenario, params, raw = _load(args)
    if args.gamma_l is None:
        raise UsageError("cool-continuous needs --gamma-l")
    traj = simulate_exchange(scenario, params, gamma_l=TWO_PI * args.gamma_l, noise=True, record_every=args.every)
    run = Run(args, raw, params.rng_seed)
    run.write_csv("cool_continuous.csv", TRAJ_COLS, _trajectory_rows(traj), "s; J; K",
                  {"ensemble": params.ensemble_size, "gamma_L_Hz": args.gamma_l})
    run.finish()
    print(f"samples = {len(traj)}  final T1 = {traj.temperature1[-1]:.6g} K")


def cmd_cool_intermittent(args):
    from .analytics import intermittent_theory
    from .dynamics import simulate_intermittent_cooling

    scenario, params, raw = _load(args)
    tau_c = args.tau_c or params.coupling_time or intermittent_theory(scenario).optimal_coupling_time
    n = args.cycles if args.cycles is not None else (
        params.n_cycles if params.n_cycles is not None else int(math.ceil(params.duration / tau_c))
    )
    traj = simulate_intermittent_cooling(scenario, tau_c, n, params, correlation=args.correlation)
    run = Run(args, raw, params.rng_seed)
    run.write_csv("cool_intermittent.csv", TRAJ_COLS, _trajectory_rows(traj), "s; J; K",
                  {"ensemble": params.ensemble_size, "tau_c_s": tau_c, "cycles": n})
    run.finish()
    print(f"cycles = {n}  tau_c = {tau_c:.6g} s  final T1 = {traj.temperature1[-1]:.6g} K")


def cmd_cool_analytics(args):
    from .analytics import detuning_scan

    scenario, params, raw = _load(args)
    default = np.linspace(1000.0, 10000.0, 10) if args.axis == "resonator" else np.linspace(-1.0, 1.0, 11)
    (grid,) = _grids(args, 1, [default])
    kw = {}
    if args.method == "continuous":
        if args.gamma_l is None:
            raise UsageError("continuous method needs --gamma-l")
        kw = {"gamma_l": TWO_PI * args.gamma_l, "params": params}
    rows = detuning_scan(scenario, TWO_PI * grid, args.method, axis=args.axis, tau_c=args.tau_c, **kw)
    run = Run(args, raw, params.rng_seed)
    run.write_csv(
        "cool_analytics.csv", ["dnu_Hz", "Teq_K", "tau_eff_s", "tau_c_opt_s", "method"],
        [(hz(r.value), r.equilibrium_temperature, r.effective_time_constant, r.coupling_time, r.method) for r in rows],
        "Hz; K; s; s", {"axis": args.axis},
    )
    run.finish()
    for r in rows:
        print(f"{hz(r.value):12.6g} Hz  T_eq = {r.equilibrium_temperature:.6g} K  tau_eff = {r.effective_time_constant:.6g} s")


def cmd_spectrum(args):
    from .spectrum import add_noise, avoided_crossing_map, write_grid_csv

    scenario, params, raw = _load(args)
    if scenario.resonator is None:
        raise ValidationError("resonator", "the spectrum subcommand needs a [resonator] section")
    fw = hz(scenario.resonator_detuning)
    sweep, freq = _grids(args, 2, [np.linspace(-3.0, 3.0, 61), np.linspace(fw - 3.0, fw + 3.0, 301)])
    grid = avoided_crossing_map(scenario, sweep, freq, ceff_scale=args.ceff_scale)
    if args.noise:
        grid = add_noise(grid, args.noise, params.rng_seed)
    run = Run(args, raw, params.rng_seed)
    path = run.out / "spectrum.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_grid_csv(grid, fh, run.header("dnu_Hz and f_Hz in Hz (f from omega_R); power in dB, arbitrary offset"))
    run.outputs.append(str(path))
    run.finish()
    print(f"grid {grid.sweep_axis.size} x {grid.frequency_axis.size} written to {path}")


def cmd_fit(args):
    from .spectrum import fit_avoided_crossing, read_grid_csv

    scenario, params, raw = _load(args)
    if not args.input:
        raise UsageError("fit needs --in GRID.csv")
    try:
        with open(args.input, encoding="utf-8") as fh:
            grid = read_grid_csv(fh)
    except FileNotFoundError:
        raise UsageError(f"input grid {args.input!r} not found") from None
    res = fit_avoided_crossing(grid, scenario, ceff_model=args.ceff_model)
    record = res.as_dict()
    record["rabi_frequency_Hz"] = hz(res.rabi_frequency)
    record["fixed"] = "tank Q and R_p held at configured values"
    for k in ("effective_capacitance", "capacitance_uncertainty", "rabi_frequency_Hz", "ion2_frequency",
              "sweep_calibration", "residual_norm", "converged"):
        print(f"{k:24s} {record[k]}")
    run = Run(args, raw, params.rng_seed)
    run.write_json("fit.json", record)
    run.finish()


def cmd_sweep(args):
    from .coupling import coupling_summary
    from .dynamics import cooling_time_map

    scenario, params, raw = _load(args)
    om = hz(coupling_summary(scenario).rabi_frequency)
    gam, dnu = _grids(args, 2, [om * np.geomspace(0.25, 4.0, 9), om * np.linspace(-2.0, 2.0, 5)])
    cmap = cooling_time_map(scenario, TWO_PI * gam, TWO_PI * dnu, params)
    rows = []
    for i, g in enumerate(gam):
        for j, d in enumerate(dnu):
            rows.append((g, d, cmap.tau_cool[i, j], int(cmap.converged[i, j])))
    run = Run(args, raw, params.rng_seed)
    run.write_csv("sweep.csv", ["gamma_L_Hz", "dnu_Hz", "tau_cool_s", "converged"], rows,
                  "gamma_L as gamma_L/2pi in Hz; Hz; s (inf when not converged)")
    run.finish()
    k = np.unravel_index(np.argmin(cmap.tau_cool), cmap.tau_cool.shape)
    print(f"min tau_cool = {cmap.tau_cool[k]:.6g} s at gamma_L = {gam[k[0]]:.6g} Hz, dnu = {dnu[k[1]]:.6g} Hz")


COMMANDS = {
    "impedance": (cmd_impedance, "tank impedance and effective R/C versus detuning"),
    "coupling": (cmd_coupling, "closed-form coupling summary"),
    "exchange": (cmd_exchange, "energy exchange trajectory"),
    "cool-continuous": (cmd_cool_continuous, "continuous laser cooling of ion 2 with Johnson noise"),
    "cool-intermittent": (cmd_cool_intermittent, "intermittent cooling Monte Carlo"),
    "cool-analytics": (cmd_cool_analytics, "closed-form T_eq and tau_eff scan"),
    "spectrum": (cmd_spectrum, "synthesize an avoided-crossing spectrum map"),
    "fit": (cmd_fit, "fit C_eff to a spectrum map"),
    "sweep": (cmd_sweep, "tau_cool over laser damping and ion mismatch"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tankcool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tankcool {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="configuration file or bundled name")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./tankcool_out)")
        p.add_argument("--seed", type=int, help="override the configured RNG seed")
        p.add_argument("--grid", action="append", metavar="START:STOP:COUNT", help="axis grid; repeat per axis")
        p.add_argument("--ensemble", type=int, help="override the ensemble size")
        if name in ("exchange", "cool-continuous", "cool-analytics"):
            p.add_argument("--gamma-l", type=float, help="laser damping gamma_L/2pi in Hz")
        if name in ("exchange", "cool-continuous"):
            p.add_argument("--every", type=int, default=1, help="record every N steps")
        if name == "exchange":
            p.add_argument("--noise", choices=("auto", "on", "off"), default="auto")
        if name in ("cool-intermittent", "cool-analytics"):
            p.add_argument("--tau-c", type=float, help="coupling time per cycle in s (default: optimum)")
        if name == "cool-intermittent":
            p.add_argument("--cycles", type=int)
            p.add_argument("--correlation", choices=("common", "independent"), default="common")
        if name == "cool-analytics":
            p.add_argument("--method", choices=("intermittent", "continuous"), default="intermittent")
            p.add_argument("--axis", choices=("resonator", "mismatch"), default="resonator")
        if name == "spectrum":
            p.add_argument("--noise", type=float, default=0.0, help="noise sigma as a fraction of dip depth")
            p.add_argument("--ceff-scale", type=float, default=1.0)
        if name == "fit":
            p.add_argument("--in", dest="input", help="spectrum CSV written by the spectrum subcommand")
            p.add_argument("--ceff-model", choices=("linear", "exact"), default="linear")
    return parser


def main(argv=None) -> int:
    from .dynamics import IntegrationError, StepSizeError
    from .spectrum import FitError

    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command][0](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (ConfigError, ValidationError, StepSizeError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
