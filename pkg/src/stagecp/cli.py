"""Command-line experiment runner.

Subcommands:
  generate   synthesize a scenario and write it as a raw-triplet CSV
  run        execute methods over a scenario or ingested CSV
  sweep      repeat a run across values of one hyperparameter
  report     render SVG figures from an existing results CSV

Options may also come from a flat key = value config file (--config);
explicit flags override file values. Exit codes: 0 success, 2 bad
configuration, 3 I/O failure, 4 the stage-aware method abstained on
every step (a retraining signal scripts can detect).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError, InvalidSpec, IoError, ParseError, SchemaError, StagecpError
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    StepRow,
    run_experiment,
    sweep as run_sweep,
)
from .io import (
    ingest_csv,
    read_results_csv,
    write_triplets_csv,
    PrecomputedDataset,
)
from .report import PLOT_KINDS, emit_report, render_plots
from .synth import SCENARIOS, ScenarioSpec, default_length, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ABSTAINED = 4

_CONFIG_FLOATS = (
    "alpha",
    "delta",
    "tau",
    "gamma",
    "eta",
    "c",
    "d",
    "conf_ratio",
    "noise_scale",
    "input_scale",
    "shift_rate",
)
_CONFIG_INTS = (
    "k",
    "repetitions",
    "seed",
    "n_train",
    "n_conf",
    "n_cal",
    "n_test",
    "length",
    "shift_start",
    "metrics_window",
    "grid_steps",
)
_CONFIG_STRS = (
    "scenario",
    "input_path",
    "input_schema",
    "protocol",
    "policy",
    "outdir",
    "fwer",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    for name in _CONFIG_FLOATS:
        parser.add_argument(f"--{name.replace('_', '-')}", type=float, default=None)
    for name in _CONFIG_INTS:
        parser.add_argument(f"--{name.replace('_', '-')}", type=int, default=None)
    for name in _CONFIG_STRS:
        if name == "scenario":
            parser.add_argument("--scenario", choices=SCENARIOS, default=None)
        else:
            parser.add_argument(f"--{name.replace('_', '-')}", default=None)
    parser.add_argument(
        "--methods", default=None, help="comma-separated method list"
    )
    parser.add_argument("--input", dest="input_path_alias", default=None)


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            values = tomllib.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    for key in values:
        if key not in _CONFIG_FLOATS + _CONFIG_INTS + _CONFIG_STRS + ("methods",):
            raise ConfigError(f"unknown config key: {key}")
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge config-file values with CLI overrides into ExperimentConfig."""
    values: dict = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for name in _CONFIG_FLOATS + _CONFIG_INTS + _CONFIG_STRS:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            values[name] = cli_value
    if getattr(args, "input_path_alias", None) is not None:
        values["input_path"] = args.input_path_alias
    methods = getattr(args, "methods", None)
    if methods is not None:
        values["methods"] = methods
    if isinstance(values.get("methods"), str):
        values["methods"] = tuple(
            m.strip() for m in values["methods"].split(",") if m.strip()
        )
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        config = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return config.validate()


def _parse_plots(arg: Optional[str]) -> tuple[str, ...]:
    if not arg:
        return ()
    if arg == "all":
        return PLOT_KINDS
    kinds = tuple(k.strip() for k in arg.split(",") if k.strip())
    for kind in kinds:
        if kind not in PLOT_KINDS:
            raise ConfigError(
                f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}"
            )
    return kinds


def cmd_generate(args: argparse.Namespace) -> int:
    config = build_config(args)
    length = args.length or default_length(config.scenario, config.n_train)
    spec = ScenarioSpec(
        scenario=config.scenario,
        length=length,
        train_length=config.n_train,
        noise_scale=config.noise_scale,
        input_scale=config.input_scale,
        shift_rate=config.shift_rate,
        shift_start=config.shift_start,
        seed=config.seed,
    )
    points = generate(spec)
    write_triplets_csv(args.out, points)
    print(f"wrote {len(points)} points to {args.out}")
    return EXIT_OK


def _execute(config: ExperimentConfig) -> ExperimentResult:
    if config.input_path is not None:
        ingested = ingest_csv(config.input_path, config.input_schema)
        if isinstance(ingested, PrecomputedDataset):
            return run_experiment(
                config, data=ingested.points, pipeline=ingested.pipeline
            )
        return run_experiment(config, data=ingested)
    return run_experiment(config)


def _print_summary(result: ExperimentResult) -> None:
    print(
        f"{'method':<12} {'coverage':>9} {'cov(alg)':>9} {'width':>10} "
        f"{'abstained':>10}"
    )
    for method in result.config.resolved_methods_raw():
        m = result.summary.methods[method]
        width = "NA" if math.isnan(m.width_mean) else f"{m.width_mean:.4f}"
        cov = (
            "NA"
            if m.all_abstained and result.config.policy == "reporting"
            else f"{m.coverage_reporting:.4f}"
        )
        print(
            f"{method:<12} {cov:>9} {m.coverage_algorithmic:>9.4f} "
            f"{width:>10} {m.abstained_steps:>6}/{m.total_steps}"
        )
    for baseline, (gain, std) in result.summary.improvements.items():
        print(f"max sliding-coverage gain vs {baseline}: {gain:.4f} +- {std:.4f}")


def cmd_run(args: argparse.Namespace) -> int:
    config = build_config(args)
    result = _execute(config)
    files = emit_report(result, config.outdir, _parse_plots(args.plots))
    _print_summary(result)
    print(f"wrote {len(files)} files under {config.outdir}")
    if result.summary.any_sr_fully_abstained():
        print("abstained on every step: retraining signal", file=sys.stderr)
        return EXIT_ABSTAINED
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values: {args.values!r}") from exc
    results = run_sweep(config, args.param, values)
    outdir = Path(config.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {outdir}: {exc}") from exc
    rows = []
    for value, result in results:
        tag = f"{args.param}_{value:g}"
        emit_report(result, outdir / tag, ())
        for method in result.config.resolved_methods_raw():
            rows.append((value, result.summary.methods[method]))
    sweep_path = outdir / "sweep.csv"
    _write_sweep_csv(sweep_path, args.param, rows)
    print(f"swept {args.param} over {values}; table at {sweep_path}")
    return EXIT_OK


def _write_sweep_csv(path: Path, param: str, rows) -> None:
    import csv

    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                (
                    param,
                    "method",
                    "coverage_reporting",
                    "coverage_algorithmic",
                    "width_mean",
                    "abstained_steps",
                    "total_steps",
                )
            )
            for value, m in rows:
                writer.writerow(
                    [
                        repr(float(value)),
                        m.method,
                        "" if math.isnan(m.coverage_reporting) else repr(m.coverage_reporting),
                        "" if math.isnan(m.coverage_algorithmic) else repr(m.coverage_algorithmic),
                        "" if math.isnan(m.width_mean) else repr(m.width_mean),
                        str(m.abstained_steps),
                        str(m.total_steps),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def cmd_report(args: argparse.Namespace) -> int:
    config = build_config(args)
    results = read_results_csv(args.results)
    rows = [
        StepRow(
            t=r.t,
            method=r.method,
            lo=r.lo,
            hi=r.hi,
            covered_reporting=r.covered and not r.abstained,
            covered_algorithmic=r.covered or r.abstained,
            width=r.width,
            a=r.a,
            b=r.b,
            c=r.c,
            d=r.d,
            alpha_t=r.alpha_t,
            abstained=r.abstained,
        )
        for r in results
    ]
    kinds = _parse_plots(args.plots) or ("width", "coverage")
    outdir = Path(config.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {outdir}: {exc}") from exc
    paths = render_plots(outdir, rows, config, kinds)
    print(f"rendered {len(paths)} figures under {outdir}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagecp",
        description="stage-wise conformal prediction experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic scenario to CSV")
    _add_config_flags(gen)
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run methods over a scenario or CSV")
    _add_config_flags(run)
    run.add_argument("--plots", default=None, help="comma list or 'all'")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="sweep one hyperparameter")
    _add_config_flags(sw)
    sw.add_argument("--param", required=True, help="tau|delta|gamma|eta|k")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="render figures from a results CSV")
    _add_config_flags(rep)
    rep.add_argument("--results", required=True, help="results CSV path")
    rep.add_argument("--plots", default=None, help="comma list or 'all'")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidSpec, SchemaError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StagecpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
