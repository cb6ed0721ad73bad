"""File formats: CSV ingestion/emission and the JSON model document.

CSV is comma-delimited UTF-8 with '.' decimals; a single header row is
auto-detected (any non-numeric cell in the first row).  Numbers are written
with up to 17 significant digits so that load(save(x)) is bit-exact.  All
writes go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import DataError
from .model import FittedModel, SignalDecomposition, Standardizer
from .simulate import StudyResult
from .tuning import CvReport

MODEL_SCHEMA_VERSION = 1


def fmt(value: float) -> str:
    """17-significant-digit decimal form; round-trips any float64."""
    return "%.17g" % value


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path: str) -> tuple[np.ndarray, list[str] | None]:
    """Numeric matrix plus the optional header row.

    A header is assumed when any cell of the first row fails to parse as a
    number.  Raises DataError naming the 1-based line and column of the
    first offending cell, or the line of a ragged row.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [(i + 1, line.split(",")) for i, line in enumerate(lines) if line.strip()]
    if not rows:
        raise DataError(f"{path}: no data rows")

    def parse_row(lineno, cells):
        out = np.empty(len(cells))
        for c, cell in enumerate(cells):
            try:
                out[c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}, column {c + 1}: "
                    f"cannot parse {cell.strip()!r} as a number"
                ) from None
        return out

    def is_numeric(cells):
        try:
            [float(c) for c in cells]
            return True
        except ValueError:
            return False

    if is_numeric(rows[0][1]):
        header = None
        data_rows = rows
    else:
        header = [c.strip() for c in rows[0][1]]
        data_rows = rows[1:]
        if not data_rows:
            raise DataError(f"{path}: header only, no data rows")
    ncol = len(header) if header is not None else len(data_rows[0][1])
    parsed = []
    for lineno, cells in data_rows:
        if len(cells) != ncol:
            raise DataError(
                f"{path}: line {lineno}: expected {ncol} columns, got {len(cells)}"
            )
        parsed.append(parse_row(lineno, cells))
    return np.vstack(parsed), header


def write_csv(path: str, array, header: list[str] | None = None) -> None:
    array = np.atleast_2d(np.asarray(array, dtype=np.float64))
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in array:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_model(model: FittedModel, path: str) -> None:
    """Write the versioned JSON model document."""
    std = model.standardizer
    dec = model.decomposition
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "p": std.p,
        "q": int(std.y_mean.shape[0]),
        "K": dec.k,
        "k_opt": model.k_opt,
        "tau": model.tau,
        "lambda": model.lam,
        "A": dec.a.tolist(),
        "W": dec.w.tolist(),
        "mu": dec.mu.tolist(),
        "x_mean": std.x_mean.tolist(),
        "x_scale": std.x_scale.tolist(),
        "dropped": sorted(std.dropped),
        "y_mean": std.y_mean.tolist(),
    }
    atomic_write_text(path, json.dumps(doc, indent=1))


def load_model(path: str) -> FittedModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise DataError(
            f"{path}: unsupported schema_version {version!r} "
            f"(expected {MODEL_SCHEMA_VERSION})"
        )
    try:
        std = Standardizer(
            x_mean=np.asarray(doc["x_mean"], dtype=np.float64),
            x_scale=np.asarray(doc["x_scale"], dtype=np.float64),
            y_mean=np.asarray(doc["y_mean"], dtype=np.float64),
            dropped=frozenset(int(i) for i in doc["dropped"]),
        )
        k = int(doc["K"])
        p_kept = std.p - len(std.dropped)
        a = np.asarray(doc["A"], dtype=np.float64).reshape(p_kept, k)
        w = np.asarray(doc["W"], dtype=np.float64).reshape(len(doc["y_mean"]), k)
        dec = SignalDecomposition(
            k=k,
            a=a,
            w=w,
            mu=np.asarray(doc["mu"], dtype=np.float64),
            t=None,
        )
        return FittedModel(
            standardizer=std,
            decomposition=dec,
            tau=float(doc["tau"]),
            lam=float(doc["lambda"]),
            k_opt=int(doc["k_opt"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed model document: {exc}") from exc


def write_cv_report(report: CvReport, path: str) -> None:
    """Long-format CSV of the cross-validation grid.

    One row per (pair, component count) with the mean error, the per-fold
    errors, and a ``chosen`` flag on the winning cell.
    """
    n_folds = report.fold_errors.shape[1]
    header = ["pair", "tau", "lambda", "k", "e_mean"] + [
        f"e_fold{l}" for l in range(n_folds)
    ] + ["chosen"]
    lines = [",".join(header)]
    for i, pair in enumerate(report.pairs):
        for j in range(report.k_caps[i]):
            cells = [
                str(i),
                fmt(pair.tau),
                fmt(pair.lam),
                str(j + 1),
                fmt(report.errors[i, j]),
            ]
            cells += [fmt(report.fold_errors[i, l, j]) for l in range(n_folds)]
            chosen = i == report.chosen_pair and j + 1 == report.chosen_k
            cells.append("1" if chosen else "0")
            lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_study_csv(result: StudyResult, path: str) -> None:
    """Replicate rows plus aggregate rows flagged agg=true."""
    header = ["rep", "mspe", "k_opt", "tau", "lambda", "se", "sp", "n_selected", "agg"]
    lines = [",".join(header)]

    def cell(v):
        return "" if v is None else fmt(float(v))

    for row in result.rows:
        lines.append(
            ",".join(
                [
                    str(row.rep),
                    fmt(row.mspe),
                    str(row.k_opt),
                    fmt(row.tau),
                    fmt(row.lam),
                    cell(row.se),
                    cell(row.sp),
                    str(row.n_selected),
                    "false",
                ]
            )
        )
    agg = result.aggregates()
    for stat, pick in (("mean", 0), ("sd", 1)):
        lines.append(
            ",".join(
                [
                    stat,
                    fmt(agg["mspe"][pick]),
                    fmt(agg["k_opt"][pick]),
                    "",
                    "",
                    fmt(agg["se"][pick]),
                    fmt(agg["sp"][pick]),
                    fmt(agg["n_selected"][pick]),
                    "true",
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_curve_csv(err_sig, err_svd, path: str) -> None:
    header = ["k", "err_sier", "err_svd"]
    lines = [",".join(header)]
    for k, (a, b) in enumerate(zip(err_sig, err_svd), start=1):
        lines.append(f"{k},{fmt(a)},{fmt(b)}")
    atomic_write_text(path, "\n".join(lines) + "\n")
