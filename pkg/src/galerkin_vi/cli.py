"""Command-line driver for the numerical experiments.

Configuration is resolved in three layers: a named preset shipped with the
package, an optional JSON config file, then explicit flags.  Series go to CSV,
summaries to JSON.  Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .core import (IntegrationFailure, SpecError, integrate, make_spec, parse_spec)
from .models import (PhasePoint, SingularityError, angular_momentum, default_start, get_model,
                     rk4_integrate)
from .solver import NonConvergence, SolverSettings

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
COMMANDS = ("integrate", "converge", "stability", "conserve", "benchmark")


class ConfigError(ValueError):
    """Invalid command-line arguments or configuration."""


@dataclass
class RunConfig:
    command: str
    model: str = "harmonic"
    model_params: dict = field(default_factory=dict)
    specs: list = field(default_factory=list)
    h: Optional[float] = None
    steps: Optional[int] = None
    horizon: Optional[float] = None
    step_sizes: list = field(default_factory=lambda: list(analysis.PAPER_STEP_SIZES))
    start: Optional[dict] = None
    out: Optional[str] = None
    format: str = "csv"
    tol: Optional[float] = None
    allow_s_gt_r: bool = False
    # converge
    mode: Optional[str] = None
    floor: float = analysis.NOISE_FLOOR
    ceiling: Optional[float] = None
    trim_saturated: bool = False
    refine: int = 0
    # stability
    grid: dict = field(default_factory=lambda: {"start": 0.01, "stop": 10.0, "num": 1000})
    # conserve
    rk4_h: Optional[float] = None
    # benchmark
    repeats: int = 5

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"description"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})


def list_presets() -> list:
    root = resources.files("galerkin_vi") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("galerkin_vi") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return json.loads(path.read_text())


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="galerkin-vi", description="Galerkin variational integrators")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", help="harmonic or kepler")
        p.add_argument("--spec", action="append", dest="specs",
                       help="integrator, e.g. s3r4lobatto or P3N4Q6Lob (repeatable)")
        p.add_argument("--h", type=float, help="step size")
        p.add_argument("--steps", type=int, help="number of macro steps")
        p.add_argument("--horizon", type=float, help="final time")
        p.add_argument("--preset", help="named experiment preset")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path (a base name for multi-file commands)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--tol", type=float, help="Newton residual tolerance")
        p.add_argument("--allow-s-gt-r", action="store_true", default=None)
        if name == "stability":
            p.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
        if name == "conserve":
            p.add_argument("--rk4-h", type=float, help="also run the RK4 comparator")
        if name == "benchmark":
            p.add_argument("--repeats", type=int)
    return parser


def resolve_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    data = {"command": args.command}
    if args.preset:
        preset = load_preset(args.preset)
        if preset.get("command", args.command) != args.command:
            raise ConfigError(f"preset {args.preset!r} is for the {preset['command']!r} command")
        data.update(preset)
    if args.config:
        data.update(_load_json(args.config))
    data["command"] = args.command
    for key in ("model", "specs", "h", "steps", "horizon", "out", "format", "tol",
                "allow_s_gt_r", "rk4_h", "repeats"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "grid", None):
        start, stop, num = args.grid
        data["grid"] = {"start": start, "stop": stop, "num": int(num)}
    config = RunConfig.from_dict(data)
    validate(config)
    return config


def _spec_entries(config: RunConfig) -> list:
    """``(spec_text, h)`` pairs; entries may carry their own step size."""
    out = []
    for item in config.specs:
        if isinstance(item, dict):
            out.append((item["spec"], item.get("h", config.h)))
        else:
            out.append((item, config.h))
    return out


def build_specs(config: RunConfig) -> list:
    settings = SolverSettings() if config.tol is None else SolverSettings(residual_tol=config.tol)
    specs = []
    for text, h in _spec_entries(config):
        s, r, kind = parse_spec(str(text))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = make_spec(s, r, kind, settings=settings, allow_s_gt_r=config.allow_s_gt_r)
        specs.append((spec, h))
    return specs


def validate(config: RunConfig) -> None:
    if config.command not in COMMANDS:
        raise ConfigError(f"unknown command {config.command!r}")
    if config.format not in ("csv", "json"):
        raise ConfigError(f"unknown format {config.format!r}")
    if config.tol is not None and not config.tol > 0:
        raise ConfigError("--tol must be positive")
    if config.command != "stability":
        try:
            get_model(config.model, **config.model_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    if not config.specs:
        raise ConfigError("at least one --spec is required")
    build_specs(config)  # raises SpecError on invalid (s, r)
    if config.h is not None and config.h <= 0:
        raise ConfigError("--h must be positive")
    if config.steps is not None and config.steps < 1:
        raise ConfigError("--steps must be at least 1")
    if config.command == "integrate":
        if len(config.specs) != 1:
            raise ConfigError("integrate takes exactly one --spec")
        if any(h is None for _, h in _spec_entries(config)):
            raise ConfigError("integrate needs --h")
        if config.steps is None and config.horizon is None:
            raise ConfigError("integrate needs --steps or --horizon")
    if config.command == "converge" and len(config.step_sizes) < 2:
        raise ConfigError("converge needs at least two step sizes")
    if config.command == "benchmark" and config.repeats < 1:
        raise ConfigError("--repeats must be at least 1")


# -- output helpers ----------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _base(out: str) -> Path:
    path = Path(out)
    return path.with_suffix("") if path.suffix in (".csv", ".json") else path


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit(config: RunConfig, text: str, suffix: str, stdout) -> None:
    if config.out is None:
        stdout.write(text)
    else:
        _write(_base(config.out).with_suffix(suffix), text)


def _start(config: RunConfig, system) -> PhasePoint:
    if config.start:
        return PhasePoint(config.start["q"], config.start["p"])
    return default_start(system)


def _steps(config: RunConfig, h: float) -> int:
    if config.steps is not None:
        return config.steps
    return analysis.steps_for(config.horizon, h)


# -- commands ----------------------------------------------------------------

def trajectory_rows(traj):
    n = traj.system.dim
    header = ["t"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)] + ["energy"]
    if n == 2:
        header.append("angular_momentum")
    header.append("newton_iterations")
    iters = [0] + traj.iterations
    rows = []
    for t, pt, it in zip(traj.times, traj.phase_points, iters):
        row = [repr(float(t))] + [repr(float(v)) for v in pt.q] + [repr(float(v)) for v in pt.p]
        row.append(repr(float(traj.system.energy(pt.q, pt.p))))
        if n == 2:
            row.append(repr(angular_momentum(pt)))
        row.append(it)
        rows.append(row)
    return header, rows


def cmd_integrate(config: RunConfig, stdout) -> int:
    system = get_model(config.model, **config.model_params)
    start = _start(config, system)
    (spec, h), = build_specs(config)
    traj = integrate(spec, system, start, h, _steps(config, h))
    header, rows = trajectory_rows(traj)
    if config.format == "json":
        text = json.dumps({"spec": spec.name, "h": h,
                           "rows": [dict(zip(header, map(_num, r))) for r in rows]}, indent=1)
        _emit(config, text + "\n", ".json", stdout)
    else:
        _emit(config, _csv_text(header, rows), ".csv", stdout)
    return EXIT_OK


def _num(v):
    return v if isinstance(v, int) else float(v)


def converge_settings(config: RunConfig, system) -> dict:
    """Sweep options; Kepler defaults to return errors after five periods."""
    kepler = system.name == "kepler"
    mode = config.mode or ("return" if kepler else "exact")
    horizon = config.horizon or (25.0 if kepler else 10.0)
    return {"mode": mode, "horizon": horizon, "floor": config.floor, "ceiling": config.ceiling,
            "trim_saturated": config.trim_saturated, "refine": config.refine}


def cmd_converge(config: RunConfig, stdout) -> int:
    system = get_model(config.model, **config.model_params)
    start = _start(config, system)
    opts = converge_settings(config, system)
    reports = []
    for spec, _ in build_specs(config):
        reports.append(analysis.convergence_sweep(spec, system, start, config.step_sizes, **opts))
    summary = {"model": config.model, **opts, "reports": [r.to_dict() for r in reports]}
    rows = []
    for r in reports:
        for h, eq, ep in zip(r.step_sizes, r.errors_q, r.errors_p):
            rows.append([r.spec, repr(h), "" if eq is None else repr(eq), "" if ep is None else repr(ep)])
    table = _csv_text(["spec", "h", "err_q", "err_p"], rows)
    if config.out is None:
        stdout.write(json.dumps(summary, indent=1) + "\n")
    else:
        base = _base(config.out)
        _write(base.with_suffix(".json"), json.dumps(summary, indent=1) + "\n")
        _write(base.with_suffix(".csv"), table)
    return EXIT_OK


def cmd_stability(config: RunConfig, stdout) -> int:
    g = config.grid
    grid = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
    results = [analysis.stability_scan(spec, grid) for spec, _ in build_specs(config)]
    rows = [[res.spec, repr(x), repr(m)] for res in results
            for x, m in zip(res.h_omega, res.max_modulus)]
    summary = {"grid": g, "results": [res.to_dict() for res in results]}
    if config.out is None:
        stdout.write(json.dumps(summary, indent=1) + "\n")
    else:
        base = _base(config.out)
        _write(base.with_suffix(".csv"), _csv_text(["spec", "h_omega", "max_modulus"], rows))
        _write(base.with_suffix(".json"), json.dumps(summary, indent=1) + "\n")
    return EXIT_OK


def _series_rows(points, system, h):
    energy = analysis.conservation_series(points, "energy", system)
    momentum = (analysis.conservation_series(points, "angular_momentum")
                if points[0].dim == 2 else None)
    rows = []
    for k in range(len(points)):
        row = [repr(k * h), repr(float(energy[k]))]
        if momentum is not None:
            row.append(repr(float(momentum[k])))
        rows.append(row)
    header = ["t", "energy_error"] + (["angular_momentum_error"] if momentum is not None else [])
    return header, rows, energy, momentum


def cmd_conserve(config: RunConfig, stdout) -> int:
    system = get_model(config.model, **config.model_params)
    start = _start(config, system)
    horizon = config.horizon or (25.0 if system.name == "kepler" else 100.0)
    runs = []
    for spec, h in build_specs(config):
        h = h if h is not None else 0.5
        traj = integrate(spec, system, start, h, _steps(config, h))
        runs.append((spec.name, h, traj.phase_points))
    if config.rk4_h is not None:
        h = config.rk4_h
        runs.append(("RK4", h, rk4_integrate(system, start, h, _steps(config, h))))
    summary = []
    base = _base(config.out) if config.out else None
    for name, h, points in runs:
        header, rows, energy, momentum = _series_rows(points, system, h)
        summary.append({
            "integrator": name, "h": h, "steps": len(points) - 1,
            "max_energy_error": float(energy.max()),
            "energy_drift_ratio": analysis.drift_ratio(energy),
            "max_angular_momentum_error": None if momentum is None else float(momentum.max()),
        })
        if base is not None:
            _write(base.parent / f"{base.name}_{name}.csv", _csv_text(header, rows))
    text = json.dumps({"model": config.model, "horizon": horizon, "runs": summary}, indent=1) + "\n"
    if base is None:
        stdout.write(text)
    else:
        _write(base.with_suffix(".json"), text)
    return EXIT_OK


def cmd_benchmark(config: RunConfig, stdout) -> int:
    system = get_model(config.model, **config.model_params)
    if system.exact is None:
        raise ConfigError("benchmark needs a model with an exact solution (harmonic)")
    start = _start(config, system)
    specs = [spec for spec, _ in build_specs(config)]
    rows = analysis.benchmark(specs, system, start, config.step_sizes, config.horizon or 10.0,
                              config.repeats)
    front = {(r.spec, r.h) for r in analysis.pareto_front(rows)}
    table = _csv_text(["spec", "order", "h", "wall_time", "err_q", "err_p", "pareto"],
                      [[r.spec, r.order, repr(r.h), repr(r.wall_time), repr(r.err_q),
                        repr(r.err_p), int((r.spec, r.h) in front)] for r in rows])
    _emit(config, table, ".csv", stdout)
    return EXIT_OK


HANDLERS = {"integrate": cmd_integrate, "converge": cmd_converge, "stability": cmd_stability,
            "conserve": cmd_conserve, "benchmark": cmd_benchmark}


def _error(kind: str, message: str, stderr, **extra) -> None:
    stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        config = resolve_config(sys.argv[1:] if argv is None else argv)
        return HANDLERS[config.command](config, stdout)
    except IntegrationFailure as exc:
        _error("non_convergence", str(exc), stderr, step=exc.step_index,
               residual=exc.report.final_residual, iterations=exc.report.iterations)
        return EXIT_NUMERICAL
    except (NonConvergence, SingularityError, np.linalg.LinAlgError) as exc:
        _error("numerical_failure", str(exc), stderr)
        return EXIT_NUMERICAL
    except (ConfigError, SpecError, ValueError, KeyError, TypeError) as exc:
        _error("validation", str(exc), stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
