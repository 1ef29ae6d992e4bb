"""Command line: ``ouevol list`` and ``ouevol run --experiment NAME --field NAME``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration error.
Configuration files are INI (one section per concern) or the equivalent JSON
object::

    [run]
    experiment = decay
    field = scalar_periodic
    seed = 0
    tol_scale = 1.0

    [field]
    b = 1.5

    [tolerances]
    ode_tol = 1e-10
    quad_order = 40
    entrance_tol = 1e-13

    [oracle]
    n_paths = 100000
    dt = 0.001

    [spectrum]
    degree = 3

Command-line flags override the file.  ``[field]`` keys other than ``name`` are
passed to the field factory; ``name = fourier`` builds a Fourier-series field.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import BUILTINS, DomainError, UsageError, builtin, fourier_field
from .io import write_csv
from .measures import set_default_entrance_tol
from .propagator import set_default_ode_tol
from .suites import CRITERIA, SUITES, Settings

__all__ = ["main", "list_experiments", "load_config", "run", "ConfigError"]

EXPERIMENTS = sorted(SUITES) + ["all"]

SCHEMA = {
    "run": {"experiment": str, "field": str, "out_dir": str, "seed": int, "tol_scale": float},
    "tolerances": {"ode_tol": float, "quad_order": int, "entrance_tol": float},
    "oracle": {"n_paths": int, "dt": float},
    "spectrum": {"degree": int},
}


class ConfigError(Exception):
    """Malformed or invalid configuration (exit code 2)."""


def list_experiments() -> str:
    lines = []
    for name in sorted(SUITES):
        _, desc, anchor = SUITES[name]
        crit = [str(k) for k, v in sorted(CRITERIA.items()) if v == name]
        label = "criterion" if len(crit) == 1 else "criteria"
        tag = f" ({label} {', '.join(crit)})" if crit else ""
        lines.append(f"{name:10s} {desc}{tag} [anchor: {anchor}]")
    lines.append(f"{'all':10s} every suite above, in this order")
    return "\n".join(lines)


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _read_file(path: Path) -> dict:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: expected an object of sections")
        return data
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    return {sec: {k: _parse_value(v) for k, v in parser[sec].items()}
            for sec in parser.sections()}


def _typed(section: str, key: str, value, kind):
    where = f"{section}.{key}"
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if kind is int:
        if value != int(value):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Merge a config file with flag overrides; returns ``{"run": ..., "field": ..., "settings": Settings}``."""
    raw = _read_file(Path(path)) if path else {}
    out = {"run": {}, "field": {}}
    values = {}
    for section, entries in raw.items():
        if section == "field":
            out["field"] = dict(entries)
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}")
        for key, value in entries.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            values[(section, key)] = _typed(section, key, value, SCHEMA[section][key])
    for key, value in (overrides or {}).items():
        if value is not None:
            values[("run", key)] = value
    run_cfg = {k: v for (sec, k), v in values.items() if sec == "run"}
    for key in ("tol_scale",):
        if key in run_cfg and not run_cfg[key] > 0:
            raise ConfigError(f"run.{key} must be positive")
    if run_cfg.get("seed", 0) < 0:
        raise ConfigError("run.seed must be nonnegative")
    st = Settings()
    mapping = {("tolerances", "ode_tol"): "ode_tol", ("tolerances", "quad_order"): "quad_order",
               ("tolerances", "entrance_tol"): "entrance_tol", ("oracle", "n_paths"): "n_paths",
               ("oracle", "dt"): "dt", ("spectrum", "degree"): "galerkin_degree",
               ("run", "seed"): "seed", ("run", "tol_scale"): "tol_scale"}
    for (sec, key), attr in mapping.items():
        if (sec, key) in values:
            v = values[(sec, key)]
            if attr in ("ode_tol", "entrance_tol", "dt", "tol_scale") and not v > 0:
                raise ConfigError(f"{sec}.{key} must be positive, got {v}")
            if attr == "quad_order" and v < 1:
                raise ConfigError(f"{sec}.{key} must be >= 1, got {v}")
            if attr == "n_paths" and v < 2:
                raise ConfigError(f"{sec}.{key} must be >= 2, got {v}")
            if attr == "galerkin_degree" and not 0 <= v <= 8:
                raise ConfigError(f"{sec}.{key} must lie in [0, 8], got {v}")
            st = replace(st, **{attr: v})
    out["run"] = run_cfg
    out["settings"] = st
    return out


def build_field(run_cfg: dict, field_cfg: dict):
    params = dict(field_cfg)
    # --field (or [run] field) takes precedence over [field] name
    name = run_cfg.get("field") or params.get("name")
    params.pop("name", None)
    if name is None:
        raise ConfigError("no field given (use --field or [field] name)")
    try:
        if name == "fourier":
            return fourier_field(**params)
        return builtin(name, **params)
    except TypeError as exc:
        raise ConfigError(f"field {name!r}: {exc}") from None
    except UsageError as exc:
        raise ConfigError(str(exc)) from None


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # repr of a float round-trips exactly; non-finite values become strings
        return x if math.isfinite(x) else str(x)
    return x


def run(experiment: str, field, settings: Settings, out_dir, config_echo: dict) -> dict:
    """Run one suite (or all) and write ``report.json`` plus CSV curves."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; known: {', '.join(EXPERIMENTS)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted(SUITES) if experiment == "all" else [experiment]
    old_tol = set_default_ode_tol(settings.ode_tol)
    old_ent = set_default_entrance_tol(settings.entrance_tol)
    suites = []
    try:
        for name in names:
            res = SUITES[name][0](field, settings)
            files = []
            for stem, (header, rows) in res.curves.items():
                fname = f"{name}_{stem}.csv"
                write_csv(out_dir / fname, header, rows)
                files.append(fname)
            suites.append({"experiment": name, "passed": res.passed,
                           "failed": res.failed(),
                           "checks": [c.to_dict() for c in res.checks],
                           "data": res.data, "curves": files})
    finally:
        set_default_ode_tol(old_tol)
        set_default_entrance_tol(old_ent)
    report = {
        "version": __version__,
        "experiment": experiment,
        "field": {"name": field.name, "dim": field.dim, "period": field.period,
                  "params": field.params},
        "config": config_echo,
        "passed": all(s["passed"] for s in suites),
        "failed": [f"{s['experiment']}.{c}" for s in suites for c in s["failed"]],
        "suites": suites,
    }
    report = _jsonable(report)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ouevol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")
    sub.add_parser("list", help="list registered experiments")
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--experiment", choices=EXPERIMENTS)
    r.add_argument("--field", help=f"builtin field: {', '.join(sorted(BUILTINS))}")
    r.add_argument("--config", help="INI or JSON configuration file")
    r.add_argument("--out-dir", dest="out_dir")
    r.add_argument("--seed", type=int)
    r.add_argument("--tol-scale", dest="tol_scale", type=float)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "-h"):
        argv = ["run"] + argv
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in (None, "list"):
        print(list_experiments())
        return 0
    try:
        cfg = load_config(args.config, {"experiment": args.experiment, "field": args.field,
                                        "out_dir": args.out_dir, "seed": args.seed,
                                        "tol_scale": args.tol_scale})
        run_cfg = cfg["run"]
        experiment = run_cfg.get("experiment")
        if experiment is None:
            raise ConfigError("no experiment given (use --experiment or [run] experiment)")
        field = build_field(run_cfg, cfg["field"])
        echo = {"run": {k: v for k, v in sorted(run_cfg.items()) if k != "out_dir"},
                "field": cfg["field"], "settings": asdict(cfg["settings"])}
        report = run(experiment, field, cfg["settings"], run_cfg.get("out_dir", "."), echo)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    for suite in report["suites"]:
        for c in suite["checks"]:
            status = "PASS" if c["passed"] else "FAIL"
            print(f"{status} {suite['experiment']}.{c['name']} value={c['value']} "
                  f"threshold={c['threshold']}")
    if not report["passed"]:
        print("failed checks: " + ", ".join(report["failed"]), file=sys.stderr)
        return 1
    return 0
