#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
CSV persistence for snapshots, experiment results, bounds and pseudospectra
Every data file is accompanied by a key=value metadata sidecar
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, TextIO, Union

import numpy as np
import pandas as pd

from . import __version__
from .exceptions import ConfigurationError, StorageError
from .models import (BoundResult, DoaEstimate, EstimatorDiagnostics, ExperimentResult,
                     Pseudospectrum, SnapshotSet)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
RESULT_COLUMNS = ["sweep_param", "estimator", "mse_index", "runs", "outliers", "sscrb_index"]
RESULT_EXTRA_COLUMNS = ["std_error", "successes", "failures", "mean_iterations", "mean_alpha",
                        "pd_repairs", "fallbacks", "efficiency_ratio"]
BOUND_COLUMNS = ["sweep_param", "scalar_factor", "index", "trace", "condition_number", "error"]


def metadata_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _write_frame(frame: pd.DataFrame, path: PathLike):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(frame)} rows to {path}")


def write_metadata(path: PathLike, metadata: Mapping[str, Any]) -> Path:
    """Sidecar `<file>.meta` with one key=value per line plus the package version"""
    sidecar = metadata_path(path)
    lines = [f"{key}={'' if value is None else value}" for key, value in metadata.items()]
    lines.append(f"version={__version__}")
    try:
        sidecar.parent.mkdir(parents=True, exist_ok=True)
        sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot write {sidecar}: {e}") from e
    return sidecar


def read_metadata(path: PathLike) -> Dict[str, str]:
    sidecar = metadata_path(path)
    try:
        text = sidecar.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"Cannot read {sidecar}: {e}") from e
    metadata = {}
    for line in text.splitlines():
        if line.strip() and "=" in line:
            key, value = line.split("=", 1)
            metadata[key.strip()] = value.strip()
    return metadata


def snapshot_columns(n: int) -> List[str]:
    columns = ["l"]
    for i in range(1, n + 1):
        columns += [f"re_{i}", f"im_{i}"]
    return columns


def write_snapshots(snapshots: SnapshotSet, path: PathLike,
                    extra_metadata: Optional[Mapping[str, Any]] = None):
    """CSV `l, re_1, im_1, ..., re_N, im_N` (l counts from 1) plus sidecar"""
    data = snapshots.data
    table = np.empty((snapshots.n_snapshots, 2 * snapshots.n_sensors))
    table[:, 0::2] = data.real
    table[:, 1::2] = data.imag
    frame = pd.DataFrame(table, columns=snapshot_columns(snapshots.n_sensors)[1:])
    frame.insert(0, "l", np.arange(1, snapshots.n_snapshots + 1))
    _write_frame(frame, path)

    metadata = snapshots.metadata()
    if extra_metadata:
        metadata.update(extra_metadata)
    write_metadata(path, metadata)


def read_snapshots(path: PathLike) -> SnapshotSet:
    """Parse a snapshot CSV; malformed content raises ConfigurationError"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Snapshot file not found: {path}")
    try:
        frame = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"Malformed snapshot file {path}: {e}") from e

    columns = [str(c).strip() for c in frame.columns]
    n = (len(columns) - 1) // 2
    if n < 1 or columns != snapshot_columns(n):
        raise ConfigurationError(
            f"Malformed snapshot file {path}: header must be l, re_1, im_1, ..., re_N, im_N"
        )
    if frame.empty:
        raise ConfigurationError(f"Malformed snapshot file {path}: no snapshot rows")
    try:
        values = frame.iloc[:, 1:].to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Malformed snapshot file {path}: non-numeric entry ({e})") from e
    if not np.all(np.isfinite(values)):
        raise ConfigurationError(f"Malformed snapshot file {path}: missing or non-finite entries")

    data = values[:, 0::2] + 1j * values[:, 1::2]
    logger.info(f"Read {data.shape[0]} snapshots (N={n}) from {path}")
    return SnapshotSet(data)


def estimate_row(name: str, estimate: Optional[DoaEstimate], k: int,
                 diagnostics: Optional[EstimatorDiagnostics] = None,
                 failure: Optional[str] = None) -> Dict[str, Any]:
    """`estimator, nu_1..nu_K, diagnostics`; failed estimators keep empty frequencies"""
    row: Dict[str, Any] = {"estimator": name}
    if estimate is not None:
        row.update({f"nu_{i + 1}": float(v) for i, v in enumerate(estimate.frequencies)})
    else:
        row.update({f"nu_{i + 1}": float("nan") for i in range(k)})
    row["peaks_found"] = estimate.peaks_found if estimate is not None else 0
    row["fallback"] = estimate.fallback if estimate is not None else False
    if diagnostics is not None:
        row.update({
            "iterations": diagnostics.iterations,
            "residual": diagnostics.residual,
            "alpha": diagnostics.alpha,
            "pd_repaired": diagnostics.pd_repaired,
        })
    row["failure"] = failure or ""
    return row


def write_estimates(rows: Iterable[Dict[str, Any]], stream: TextIO):
    frame = pd.DataFrame(list(rows))
    frame.to_csv(stream, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")


def result_frame(result: ExperimentResult) -> pd.DataFrame:
    frame = pd.DataFrame(result.rows())
    for column in RESULT_COLUMNS + RESULT_EXTRA_COLUMNS:
        if column not in frame.columns:
            frame[column] = np.nan
    return frame[RESULT_COLUMNS + RESULT_EXTRA_COLUMNS]


def write_result(result: ExperimentResult, path: PathLike):
    """Result CSV (estimator rows then an sscrb row per sweep point) plus config echo"""
    _write_frame(result_frame(result), path)
    metadata = result.config.to_dict()
    metadata["points_completed"] = len(result.points)
    write_metadata(path, metadata)


def read_result(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e


def bound_row(sweep_value: Optional[float], bound: Optional[BoundResult],
              error: Optional[str] = None) -> Dict[str, Any]:
    if bound is None:
        return {"sweep_param": sweep_value, "scalar_factor": np.nan, "index": np.nan,
                "trace": np.nan, "condition_number": np.nan, "error": error or "failed"}
    row = bound.to_dict()
    row["sweep_param"] = sweep_value
    row["error"] = ""
    return row


def write_bounds(rows: Iterable[Dict[str, Any]], path: PathLike,
                 metadata: Optional[Mapping[str, Any]] = None):
    frame = pd.DataFrame(list(rows), columns=BOUND_COLUMNS)
    _write_frame(frame, path)
    write_metadata(path, metadata or {})


def write_pseudospectrum(spectrum: Pseudospectrum, path: PathLike,
                         metadata: Optional[Mapping[str, Any]] = None):
    """Pseudospectrum dump `nu, P_M`"""
    frame = pd.DataFrame({"nu": spectrum.grid, "P_M": spectrum.values})
    _write_frame(frame, path)
    write_metadata(path, metadata or {"G": spectrum.size})
