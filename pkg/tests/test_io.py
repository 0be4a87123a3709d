from __future__ import annotations

from pathlib import Path

import numpy as np

from sil.data import read_edge_list, read_panel, write_edge_list, write_panel
from sil.errors import PanelFormatError
from sil.model import Network, ShockConfig, StructuralParams, simulate_panel


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_edge_list_direction_and_round_trip(tmp_path: Path) -> None:
    source = _write(tmp_path / "edges.csv", "from,to,weight\n0,1,0.7\n2,1,0.3\n1,0,1.0\n")

    net = read_edge_list(source, nonneg=True)

    assert net.labels == ("0", "1", "2")
    assert net.weights[1, 0] == 0.7 and net.weights[1, 2] == 0.3 and net.weights[0, 1] == 1.0
    copy = read_edge_list(write_edge_list(net, tmp_path / "copy.csv"))
    assert np.array_equal(copy.weights, net.weights)


def test_edge_list_numeric_labels_sort_numerically(tmp_path: Path) -> None:
    source = _write(tmp_path / "edges.csv", "from,to,weight\n10,2,1\n2,10,1\n")
    assert read_edge_list(source).labels == ("2", "10")


def test_edge_list_rejects_duplicates_with_line(tmp_path: Path) -> None:
    source = _write(tmp_path / "edges.csv", "from,to,weight\n0,1,1\n0,1,2\n")
    try:
        read_edge_list(source)
    except PanelFormatError as exc:
        assert "line 3" in str(exc)
    else:
        raise AssertionError("Expected PanelFormatError")


def test_edge_list_rejects_self_loop_and_bad_weight(tmp_path: Path) -> None:
    for body in ("from,to,weight\n0,0,1\n1,0,1\n", "from,to,weight\n0,1,abc\n"):
        try:
            read_edge_list(_write(tmp_path / "bad.csv", body))
        except PanelFormatError:
            pass
        else:
            raise AssertionError(f"Expected PanelFormatError for {body!r}")


def test_missing_file_raises_file_not_found(tmp_path: Path) -> None:
    try:
        read_edge_list(tmp_path / "nope.csv")
    except FileNotFoundError:
        pass
    else:
        raise AssertionError("Expected FileNotFoundError")


def test_panel_round_trip_is_exact(tmp_path: Path) -> None:
    w = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
    params = StructuralParams(Network(w), 0.3, (0.5,), (0.4,))
    panel = simulate_panel(params, ShockConfig(seed=3), 6)

    loaded = read_panel(write_panel(panel, tmp_path / "panel.csv"))

    assert loaded.unit_labels == panel.unit_labels
    assert np.array_equal(loaded.y, panel.y)
    assert np.array_equal(loaded.x, panel.x)


def test_panel_rejects_unbalanced_and_missing_values(tmp_path: Path) -> None:
    unbalanced = "unit,time,y,x1\n0,0,1,1\n1,0,1,1\n0,1,1,1\n"
    missing = "unit,time,y,x1\n0,0,1,1\n1,0,,1\n"
    for body in (unbalanced, missing):
        try:
            read_panel(_write(tmp_path / "panel.csv", body))
        except PanelFormatError:
            pass
        else:
            raise AssertionError(f"Expected PanelFormatError for {body!r}")


def test_panel_requires_consecutive_covariates(tmp_path: Path) -> None:
    body = "unit,time,y,x2\n0,0,1,1\n1,0,1,1\n"
    try:
        read_panel(_write(tmp_path / "panel.csv", body))
    except PanelFormatError as exc:
        assert "consecutively" in str(exc)
    else:
        raise AssertionError("Expected PanelFormatError")
