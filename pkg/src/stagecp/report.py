"""Result emission: canonical CSVs plus optional SVG figures.

Each repetition gets its own results CSV (the pinned schema carries no
repetition column); the window component means used by the ratio figures
go to a companion components CSV. Figures are rendered from the first
repetition's records.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, IoError
from .experiments import ExperimentConfig, ExperimentResult, StepRow, sliding_coverage
from .io import (
    write_components_csv,
    write_results_csv,
    write_summary_csv,
)
from .plots import render_line_svg

PLOT_KINDS = ("width", "coverage", "scaling", "levels", "components", "ratio")


def _by_method(rows: Sequence[StepRow]) -> dict[str, list[StepRow]]:
    grouped: dict[str, list[StepRow]] = {}
    for row in rows:
        grouped.setdefault(row.method, []).append(row)
    return grouped


def _plot_series(kind: str, rows: Sequence[StepRow], config: ExperimentConfig):
    grouped = _by_method(rows)
    if kind == "width":
        return "interval width over time", "width", {
            m: ([r.t for r in rs], [r.width for r in rs]) for m, rs in grouped.items()
        }
    if kind == "coverage":
        window = config.metrics_window
        policy = config.abstention_policy
        return f"coverage over trailing {window}-step window", "coverage", {
            m: (
                [r.t for r in rs],
                list(sliding_coverage(rs, window, policy)),
            )
            for m, rs in grouped.items()
        }
    sr_rows = [
        rs for m, rs in grouped.items() if any(not math.isnan(r.a) for r in rs)
    ]
    rows_sr = sr_rows[0] if sr_rows else []
    ts = [r.t for r in rows_sr]
    if kind == "scaling":
        return "scaling coefficients", "value", {
            "a": (ts, [r.a for r in rows_sr]),
            "b": (ts, [r.b for r in rows_sr]),
        }
    if kind == "levels":
        return "quantile and target levels", "level", {
            "c": (ts, [r.c for r in rows_sr]),
            "d": (ts, [r.d for r in rows_sr]),
            "alpha_t": (ts, [r.alpha_t for r in rows_sr]),
        }
    if kind == "components":
        return "window component means", "mean score", {
            "dR1": (ts, [r.mean_dr1 for r in rows_sr]),
            "R2": (ts, [r.mean_r2 for r in rows_sr]),
        }
    if kind == "ratio":
        def ratio(num, den):
            return [n / d if d else math.nan for n, d in zip(num, den)]

        mean_r = [r.mean_r for r in rows_sr]
        return "full residual over components", "ratio", {
            "R/dR1": (ts, ratio(mean_r, [r.mean_dr1 for r in rows_sr])),
            "R/R2": (ts, ratio(mean_r, [r.mean_r2 for r in rows_sr])),
        }
    raise ConfigError(f"unknown plot kind: {kind}")


def render_plots(
    outdir: Path,
    rows: Sequence[StepRow],
    config: ExperimentConfig,
    kinds: Sequence[str],
) -> list[Path]:
    paths = []
    for kind in kinds:
        title, y_label, series = _plot_series(kind, rows, config)
        series = {
            k: v
            for k, v in series.items()
            if any(math.isfinite(y) for y in v[1])
        }
        if not series:
            continue
        paths.append(
            render_line_svg(outdir / f"{kind}.svg", title, series, "t", y_label)
        )
    return paths


def emit_report(
    result: ExperimentResult,
    outdir: str | Path,
    plot_kinds: Sequence[str] = (),
) -> list[Path]:
    """Write all output files for a finished run; returns their paths.

    Re-running with the same result overwrites deterministically.
    """
    if not result.per_rep_rows or not any(result.per_rep_rows):
        raise IoError("no records to report")
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {outdir}: {exc}") from exc
    policy = result.config.abstention_policy
    written: list[Path] = []
    for rep, rows in enumerate(result.per_rep_rows):
        path = outdir / f"results_rep{rep:03d}.csv"
        write_results_csv(path, rows, policy)
        written.append(path)
    first = result.per_rep_rows[0]
    if any(not math.isnan(r.mean_dr1) for r in first):
        comp_path = outdir / "components.csv"
        write_components_csv(comp_path, first)
        written.append(comp_path)
    summary_path = outdir / "summary.csv"
    write_summary_csv(
        summary_path,
        [result.summary.methods[m] for m in result.config.resolved_methods_raw()],
    )
    written.append(summary_path)
    written.extend(render_plots(outdir, first, result.config, plot_kinds))
    return written
