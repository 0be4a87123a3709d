"""Edge-list and long-panel CSV ingestion and export."""

from __future__ import annotations

import re
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from sil import config
from sil.errors import PanelFormatError
from sil.model.types import Network, PanelData

EDGE_COLUMNS = ("from", "to", "weight")
_X_COLUMN = re.compile(r"^x(\d+)$")
_Z_COLUMN = re.compile(r"^z(\d+)$")


def _ordered_labels(values: Sequence) -> list[str]:
    unique = pd.unique(pd.Series(list(values), dtype=str))
    numeric = pd.to_numeric(pd.Series(unique), errors="coerce")
    if numeric.notna().all():
        order = np.argsort(numeric.to_numpy(), kind="stable")
        return [str(unique[i]) for i in order]
    return sorted(str(v) for v in unique)


def _read_csv(path: str | Path) -> pd.DataFrame:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"no such file: {file_path}")
    try:
        return pd.read_csv(file_path, dtype=str, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise PanelFormatError(f"{file_path}: {exc}") from exc


def read_edge_list(
    path: str | Path,
    *,
    labels: Sequence[str] | None = None,
    nonneg: bool = False,
    row_normalized: bool = False,
) -> Network:
    """Build a Network from a ``from,to,weight`` CSV; absent pairs are zero.

    Without ``labels`` the node set is every label that appears, ordered
    numerically when all labels are integers (so 0-based indices round-trip).
    """
    frame = _read_csv(path)
    frame.columns = [c.strip().lower() for c in frame.columns]
    missing = [c for c in EDGE_COLUMNS if c not in frame.columns]
    if missing:
        raise PanelFormatError(f"edge list is missing columns {missing}; header must be from,to,weight")
    frame = frame[list(EDGE_COLUMNS)]
    if frame.isna().any().any():
        bad = int(frame.isna().any(axis=1).to_numpy().argmax()) + 2
        raise PanelFormatError(f"edge list has an empty field on line {bad}")
    weights = pd.to_numeric(frame["weight"], errors="coerce")
    if weights.isna().any():
        bad = int(weights.isna().to_numpy().argmax()) + 2
        raise PanelFormatError(f"edge list weight is not numeric on line {bad}")
    duplicated = frame.duplicated(subset=["from", "to"])
    if duplicated.any():
        bad = int(duplicated.to_numpy().argmax()) + 2
        raise PanelFormatError(f"duplicate edge on line {bad}")

    node_labels = list(labels) if labels is not None else _ordered_labels(list(frame["from"]) + list(frame["to"]))
    index = {str(label): i for i, label in enumerate(node_labels)}
    unknown = sorted(set(frame["from"]).union(frame["to"]) - set(index))
    if unknown:
        raise PanelFormatError(f"edge list references unknown nodes {unknown[:5]}")

    n = len(node_labels)
    matrix = np.zeros((n, n))
    rows = frame["from"].map(index).to_numpy()
    cols = frame["to"].map(index).to_numpy()
    # edge j -> i is stored as W[i, j]: "from" influences "to"
    matrix[cols, rows] = weights.to_numpy(dtype=float)
    if np.any(np.diag(matrix) != 0.0):
        raise PanelFormatError("edge list contains a self-loop with non-zero weight")
    return Network(matrix, labels=tuple(node_labels), nonneg=nonneg, row_normalized=row_normalized)


def write_edge_list(network: Network, path: str | Path, tol: float = config.ZERO_TOL) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    assert network.labels is not None
    targets, sources = np.nonzero(np.abs(network.weights) > tol)
    frame = pd.DataFrame(
        {
            "from": [network.labels[j] for j in sources],
            "to": [network.labels[i] for i in targets],
            "weight": [repr(float(network.weights[i, j])) for i, j in zip(targets, sources)],
        },
        columns=list(EDGE_COLUMNS),
    )
    frame.to_csv(file_path, index=False, lineterminator="\n")
    return file_path


def _indexed_columns(columns: Sequence[str], pattern: re.Pattern) -> list[str]:
    found = sorted((int(m.group(1)), c) for c in columns if (m := pattern.match(c)))
    expected = list(range(1, len(found) + 1))
    if [i for i, _ in found] != expected:
        raise PanelFormatError(f"columns {[c for _, c in found]} must be numbered consecutively from 1")
    return [c for _, c in found]


def read_panel(path: str | Path) -> PanelData:
    """Parse a long panel ``unit,time,y,x1..xK[,z1..zL]`` into a balanced PanelData."""
    frame = _read_csv(path)
    frame.columns = [c.strip().lower() for c in frame.columns]
    for required in ("unit", "time", "y"):
        if required not in frame.columns:
            raise PanelFormatError(f"panel is missing column '{required}'")
    x_cols = _indexed_columns(frame.columns, _X_COLUMN)
    z_cols = _indexed_columns(frame.columns, _Z_COLUMN)
    if not x_cols:
        raise PanelFormatError("panel needs at least one covariate column x1")

    duplicated = frame.duplicated(subset=["unit", "time"])
    if duplicated.any():
        bad = int(duplicated.to_numpy().argmax()) + 2
        raise PanelFormatError(f"duplicate (unit, time) row on line {bad}")
    values = frame[["y", *x_cols, *z_cols]].apply(pd.to_numeric, errors="coerce")
    if values.isna().any().any():
        bad = int(values.isna().any(axis=1).to_numpy().argmax()) + 2
        raise PanelFormatError(f"missing or non-numeric value on line {bad}")
    frame = pd.concat([frame[["unit", "time"]], values], axis=1)

    units = _ordered_labels(frame["unit"])
    times = _ordered_labels(frame["time"])
    if len(frame) != len(units) * len(times):
        raise PanelFormatError(
            f"panel is unbalanced: {len(frame)} rows for {len(units)} units x {len(times)} periods"
        )
    frame = frame.set_index(["time", "unit"])

    def _cube(columns: list[str]) -> np.ndarray:
        layers = [frame[c].unstack("unit").reindex(index=times, columns=units).to_numpy(dtype=float) for c in columns]
        return np.stack(layers, axis=2)

    y = frame["y"].unstack("unit").reindex(index=times, columns=units).to_numpy(dtype=float)
    return PanelData(
        y=y,
        x=_cube(x_cols),
        z=_cube(z_cols) if z_cols else None,
        unit_labels=tuple(units),
        time_labels=tuple(times),
    )


def panel_frame(panel: PanelData) -> pd.DataFrame:
    assert panel.unit_labels is not None and panel.time_labels is not None
    records: dict[str, list] = {
        "unit": [u for _ in panel.time_labels for u in panel.unit_labels],
        "time": [t for t in panel.time_labels for _ in panel.unit_labels],
        "y": panel.y.reshape(-1).tolist(),
    }
    for k in range(panel.k):
        records[f"x{k + 1}"] = panel.x[:, :, k].reshape(-1).tolist()
    if panel.z is not None:
        for l in range(panel.z.shape[2]):
            records[f"z{l + 1}"] = panel.z[:, :, l].reshape(-1).tolist()
    return pd.DataFrame(records)


def write_panel(panel: PanelData, path: str | Path) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    frame = panel_frame(panel)
    frame.to_csv(file_path, index=False, lineterminator="\n", float_format="%.17g")
    return file_path
