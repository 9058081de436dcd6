"""Command-line front end: ``run --config``, ``catalog list`` and ``catalog describe``.

Exit codes: 0 success, 2 invalid configuration or unknown name, 3 numerical
failure (mesh alignment, missing ellipticity).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import scipy

from . import __version__
from .errors import (CapabilityError, DelayLabError, InvalidArgumentError, NotFoundError,
                     NumericalError)
from .estimator import caratheodory_rate_experiment, delay_continuity_experiment, fit_rate
from .estimator.errors import ErrorEstimate
from .malliavin import norm_moment, weak_bound_report
from .model import CATALOG, InitialSegment, TestFunction, catalog_problem, describe

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
KINDS = ("strong_rate", "weak_rate", "delay_continuity", "malliavin_check", "bound_check")
NEEDS_TEST_FUNCTION = ("weak_rate", "delay_continuity", "bound_check")
MALLIAVIN_K = 64
BOUND_K = 32

TEST_FUNCTIONS = {
    "indicator": "g(x) = 1{x <= K}; bounded by 1, not continuous",
    "sign": "g(x) = sign(x - K); bounded by 1, not continuous",
    "sine": "g(x) = sin(x - K); bounded by 1, Lipschitz",
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "experiment"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
                "tau": {"type": "number", "minimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "phi": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["constant", "holder"]},
                        "x0": {"type": "number"},
                        "c": {"type": "number"},
                        "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "levels", "paths", "seed"],
            "properties": {
                "kind": {"enum": list(KINDS)},
                "levels": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "paths": {"type": "integer", "minimum": 1},
                "fine_steps": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "test_function": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": list(TEST_FUNCTIONS)},
                        "K": {"type": "number"},
                    },
                },
            },
        },
        "output": {"type": "string"},
    },
}


class ConfigError(InvalidArgumentError):
    pass


@dataclass(frozen=True)
class Row:
    level: float
    error: float
    stderr: float
    paths: int
    censored: bool


def validate_config(config) -> dict:
    """Schema check; the message names the offending field."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config field {e.json_path}: {e.message}")
    exp = config["experiment"]
    if exp["kind"] in NEEDS_TEST_FUNCTION and "test_function" not in exp:
        raise ConfigError(f"config field $.experiment.test_function: required for kind {exp['kind']!r}")
    return config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return validate_config(config)


def build_problem(section: dict):
    phi = section.get("phi", {"kind": "constant"})
    x0 = float(phi.get("x0", 0.0))
    if phi["kind"] == "constant":
        segment = InitialSegment.constant(x0)
    else:
        for key in ("c", "beta"):
            if key not in phi:
                raise ConfigError(f"config field $.problem.phi.{key}: required for holder phi")
        segment = InitialSegment.holder(x0, float(phi["c"]), float(phi["beta"]))
    return catalog_problem(section["name"], section.get("params"), tau=float(section.get("tau", 0.0)),
                           T=float(section.get("T", 1.0)), phi=segment)


def _rows(estimates: list[ErrorEstimate]) -> list[Row]:
    return [Row(float(e.level), e.value, e.stderr, e.paths, e.censored) for e in estimates]


def _censored(value: float, stderr: float) -> bool:
    return not (value > 0) or value < 2.0 * stderr


def execute(config: dict) -> tuple[list[Row], dict]:
    """Run the configured experiment; returns table rows and summary extras."""
    exp = config["experiment"]
    kind = exp["kind"]
    problem = build_problem(config["problem"])
    steps = int(exp.get("fine_steps", 4096))
    paths, seed = int(exp["paths"]), int(exp["seed"])
    levels = exp["levels"]
    g = None
    if "test_function" in exp:
        tf = exp["test_function"]
        g = TestFunction.from_kind(tf["kind"], float(tf.get("K", 0.0)))
    extra: dict = {}

    if kind in ("strong_rate", "weak_rate"):
        bad = [x for x in levels if x != int(x) or x < 1]
        if bad:
            raise ConfigError(f"config field $.experiment.levels: n must be positive integers, got {bad}")
        res = caratheodory_rate_experiment(problem, [int(x) for x in levels], paths, steps, seed,
                                           g=g if kind == "weak_rate" else None)
        rows, fit = _rows(res.rows), res.fit
    elif kind == "delay_continuity":
        res = delay_continuity_experiment(problem, levels, paths, g, steps, seed)
        rows, fit = _rows(res.rows), res.fit
    elif kind == "malliavin_check":
        rows = []
        for t in levels:
            est = norm_moment(problem, float(t), 1.0, paths, MALLIAVIN_K, seed, steps)
            rows.append(Row(float(t), est.value, est.stderr, est.paths,
                            _censored(est.value, est.stderr)))
        keep = [r for r in rows if not r.censored]
        fit = fit_rate([r.level for r in keep], [r.error for r in keep]) if len(keep) >= 3 else None
        extra["quantity"] = "E||DX(t)||^2 per level t"
        extra["K"] = MALLIAVIN_K
    else:
        rows, reports = [], []
        for gap in levels:
            other = problem.with_tau(problem.tau + float(gap))
            rep = weak_bound_report(problem, other, g, problem.T, paths, BOUND_K, seed, steps)
            rows.append(Row(float(gap), rep.lhs, rep.lhs_stderr, rep.paths,
                            _censored(rep.lhs, rep.lhs_stderr)))
            reports.append({"gap": float(gap), **_jsonable(rep.to_dict())})
        fit = None
        extra["reports"] = reports
        extra["K"] = BOUND_K
    return rows, {"fit": None if fit is None else _jsonable(fit.__dict__), **extra}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_table(rows: list[Row], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "error", "stderr", "paths", "censored"])
        for r in rows:
            w.writerow([fmt(r.level), fmt(r.error), fmt(r.stderr), r.paths,
                        "true" if r.censored else "false"])


def versions() -> dict:
    return {"delaylab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(config_path, out: Optional[str] = None) -> Path:
    config = load_config(config_path)
    target = out if out is not None else config.get("output")
    if target is None:
        raise ConfigError("config field $.output: no output directory (set it or pass --out)")
    rows, extra = execute(config)
    outdir = Path(target)
    outdir.mkdir(parents=True, exist_ok=True)
    write_table(rows, outdir / "table.csv")
    summary = {
        "config": config,
        "experiment": config["experiment"]["kind"],
        "seed": config["experiment"]["seed"],
        "rows": [r.__dict__ for r in rows],
        "versions": versions(),
        **extra,
    }
    (outdir / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return outdir


def catalog_listing() -> str:
    lines = ["problems:"]
    for name, entry in CATALOG.items():
        lines.append(f"  {name:<18} {entry.summary}")
    lines.append("test functions (parameter K: location):")
    for name, doc in TEST_FUNCTIONS.items():
        lines.append(f"  {name:<18} {doc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaylab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (overrides config 'output')")
    p_cat = sub.add_parser("catalog", help="inspect the problem catalog")
    cat_sub = p_cat.add_subparsers(dest="action", required=True)
    cat_sub.add_parser("list")
    p_desc = cat_sub.add_parser("describe")
    p_desc.add_argument("name")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "catalog":
            if args.action == "list":
                print(catalog_listing())
            elif args.name in TEST_FUNCTIONS:
                print(f"{args.name}: {TEST_FUNCTIONS[args.name]}")
            else:
                print(describe(args.name))
            return EXIT_OK
        outdir = run(args.config, args.out)
        print(f"wrote {outdir / 'table.csv'} and {outdir / 'summary.json'}")
        return EXIT_OK
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, NotFoundError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DelayLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
