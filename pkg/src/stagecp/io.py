"""CSV schemas: raw triplets, precomputed stage predictions, and results.

Schemas (column order is fixed):

  raw triplets   t, w_0..w_{p-1}, x_0..x_{q-1}, y
  precomputed    t, y, mu2_x, mu2_xhat
  results        t, method, lo, hi, covered, width, a, b, c, d, alpha_t,
                 abstained

Floats are written with shortest round-trip repr, missing values as empty
fields, infinities as inf/-inf, booleans as true/false. Output is fully
deterministic: identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import TripletPoint
from .errors import IoError, ParseError, SchemaError
from .experiments import MethodMetrics, StepRow
from .intervals import AbstentionPolicy
from .predictors import IdentityModel, PrecomputedModel, TwoStagePipeline

RESULTS_COLUMNS = (
    "t",
    "method",
    "lo",
    "hi",
    "covered",
    "width",
    "a",
    "b",
    "c",
    "d",
    "alpha_t",
    "abstained",
)

COMPONENT_COLUMNS = ("t", "method", "mean_dr1", "mean_r2", "mean_r")

PRECOMPUTED_COLUMNS = ("t", "y", "mu2_x", "mu2_xhat")


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_float(text: str, line: int) -> float:
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line)


def _parse_bool(text: str, line: int) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ParseError(f"not a boolean: {text!r}", line)


def write_triplets_csv(path: str | Path, points: Sequence[TripletPoint]) -> None:
    """Raw-triplet export; w and x dimensions come from the first point."""
    if not points:
        raise IoError("no points to write")
    p_dim = len(points[0].w)
    q_dim = len(points[0].x)
    header = (
        ["t"]
        + [f"w_{i}" for i in range(p_dim)]
        + [f"x_{i}" for i in range(q_dim)]
        + ["y"]
    )
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, pt in enumerate(points):
                t = pt.t if pt.t is not None else i
                row = (
                    [str(t)]
                    + [_fmt(v) for v in pt.w]
                    + [_fmt(v) for v in pt.x]
                    + [_fmt(pt.y)]
                )
                writer.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


_W_COL = re.compile(r"^w_(\d+)$")
_X_COL = re.compile(r"^x_(\d+)$")


def read_triplets_csv(path: str | Path) -> list[TripletPoint]:
    """Ingest the raw-triplet schema into points, preserving order."""
    rows = _read_rows(path)
    header, data = rows[0], rows[1:]
    w_cols = sorted(
        ((int(m.group(1)), i) for i, h in enumerate(header) if (m := _W_COL.match(h))),
    )
    x_cols = sorted(
        ((int(m.group(1)), i) for i, h in enumerate(header) if (m := _X_COL.match(h))),
    )
    for required in ("t", "y"):
        if required not in header:
            raise SchemaError(required)
    if not w_cols:
        raise SchemaError("w_0")
    if not x_cols:
        raise SchemaError("x_0")
    t_idx = header.index("t")
    y_idx = header.index("y")
    points = []
    for line_no, row in enumerate(data, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line_no
            )
        try:
            t = int(row[t_idx])
        except ValueError:
            raise ParseError(f"not an integer index: {row[t_idx]!r}", line_no)
        w = np.array([_parse_float(row[i], line_no) for _, i in w_cols])
        x = np.array([_parse_float(row[i], line_no) for _, i in x_cols])
        y = _parse_float(row[y_idx], line_no)
        points.append(TripletPoint(w=w, x=x, y=y, t=t))
    return points


@dataclass(frozen=True)
class PrecomputedDataset:
    """Ingested stage predictions wrapped as a pipeline.

    Points carry the time index as w and the stored downstream-from-true-x
    prediction as x; the pipeline routes the stored end-to-end prediction
    through an identity downstream stage, so residual decomposition works
    without refitting anything.
    """

    points: tuple[TripletPoint, ...]
    pipeline: TwoStagePipeline


def read_precomputed_csv(path: str | Path) -> PrecomputedDataset:
    rows = _read_rows(path)
    header, data = rows[0], rows[1:]
    for col in PRECOMPUTED_COLUMNS:
        if col not in header:
            raise SchemaError(col)
    idx = {col: header.index(col) for col in PRECOMPUTED_COLUMNS}
    points = []
    table: dict[int, float] = {}
    for line_no, row in enumerate(data, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line_no
            )
        try:
            t = int(row[idx["t"]])
        except ValueError:
            raise ParseError(f"not an integer index: {row[idx['t']]!r}", line_no)
        y = _parse_float(row[idx["y"]], line_no)
        mu2_x = _parse_float(row[idx["mu2_x"]], line_no)
        mu2_xhat = _parse_float(row[idx["mu2_xhat"]], line_no)
        points.append(
            TripletPoint(w=np.array([float(t)]), x=np.array([mu2_x]), y=y, t=t)
        )
        table[t] = mu2_xhat
    pipeline = TwoStagePipeline(
        mu1_hat=PrecomputedModel(table=table), mu2_hat=IdentityModel()
    )
    return PrecomputedDataset(points=tuple(points), pipeline=pipeline)


def ingest_csv(path: str | Path, schema: str = "raw"):
    """Dispatch on schema: 'raw' gives points, 'precomputed' a dataset
    bundling points with their lookup pipeline."""
    if schema == "raw":
        return read_triplets_csv(path)
    if schema == "precomputed":
        return read_precomputed_csv(path)
    raise SchemaError(schema)


def _read_rows(path: str | Path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError("empty file", 1)
    return rows


def write_results_csv(
    path: str | Path,
    rows: Sequence[StepRow],
    policy: AbstentionPolicy = AbstentionPolicy.REPORTING,
) -> None:
    """Per-step results under the configured abstention policy."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULTS_COLUMNS)
            for r in rows:
                writer.writerow(
                    [
                        str(r.t),
                        r.method,
                        _fmt(r.lo),
                        _fmt(r.hi),
                        _fmt_bool(r.covered(policy)),
                        _fmt(r.width),
                        _fmt(r.a),
                        _fmt(r.b),
                        _fmt(r.c),
                        _fmt(r.d),
                        _fmt(r.alpha_t),
                        _fmt_bool(r.abstained),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class ResultRow:
    """One results-CSV line, as read back."""

    t: int
    method: str
    lo: float
    hi: float
    covered: bool
    width: float
    a: float
    b: float
    c: float
    d: float
    alpha_t: float
    abstained: bool


def read_results_csv(path: str | Path) -> list[ResultRow]:
    rows = _read_rows(path)
    header, data = rows[0], rows[1:]
    for col in RESULTS_COLUMNS:
        if col not in header:
            raise SchemaError(col)
    idx = {col: header.index(col) for col in RESULTS_COLUMNS}
    out = []
    for line_no, row in enumerate(data, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line_no
            )
        try:
            t = int(row[idx["t"]])
        except ValueError:
            raise ParseError(f"not an integer index: {row[idx['t']]!r}", line_no)
        out.append(
            ResultRow(
                t=t,
                method=row[idx["method"]],
                lo=_parse_float(row[idx["lo"]], line_no),
                hi=_parse_float(row[idx["hi"]], line_no),
                covered=_parse_bool(row[idx["covered"]], line_no),
                width=_parse_float(row[idx["width"]], line_no),
                a=_parse_float(row[idx["a"]], line_no),
                b=_parse_float(row[idx["b"]], line_no),
                c=_parse_float(row[idx["c"]], line_no),
                d=_parse_float(row[idx["d"]], line_no),
                alpha_t=_parse_float(row[idx["alpha_t"]], line_no),
                abstained=_parse_bool(row[idx["abstained"]], line_no),
            )
        )
    return out


def write_components_csv(path: str | Path, rows: Sequence[StepRow]) -> None:
    """Window component means for the stage-aware methods (ratio plots)."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COMPONENT_COLUMNS)
            for r in rows:
                if math.isnan(r.mean_dr1):
                    continue
                writer.writerow(
                    [
                        str(r.t),
                        r.method,
                        _fmt(r.mean_dr1),
                        _fmt(r.mean_r2),
                        _fmt(r.mean_r),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_summary_csv(
    path: str | Path, metrics: Iterable[MethodMetrics]
) -> None:
    header = (
        "method",
        "coverage_reporting",
        "coverage_reporting_std",
        "coverage_algorithmic",
        "coverage_algorithmic_std",
        "width_mean",
        "width_std",
        "abstained_steps",
        "total_steps",
    )
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for m in metrics:
                writer.writerow(
                    [
                        m.method,
                        _fmt(m.coverage_reporting),
                        _fmt(m.coverage_reporting_std),
                        _fmt(m.coverage_algorithmic),
                        _fmt(m.coverage_algorithmic_std),
                        _fmt(m.width_mean),
                        _fmt(m.width_std),
                        str(m.abstained_steps),
                        str(m.total_steps),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
