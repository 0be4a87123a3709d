from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from sil import schemas
from sil.cli import EXIT_INPUT, EXIT_OK, file_digest, main
from sil.log_store import CsvLogStore

PENTAGON = "from,to,weight\n" + "".join(
    f"{(i + 1) % 5},{i},0.5\n{(i - 1) % 5},{i},0.5\n" for i in range(5)
)


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def _simulate_config(tmp_path: Path, **overrides) -> Path:
    payload = {
        "network": {"kind": "erdos_renyi", "n": 5},
        "theta": {"rho": 0.3, "beta": 0.4, "gamma": 0.5},
        "t": 10,
        "seed": 1,
    }
    payload.update(overrides)
    return _write_json(tmp_path / "simulate.json", payload)


def _run(tmp_path: Path, *argv: str) -> int:
    return main([*argv, "--log-dir", str(tmp_path / "logs")])


def test_simulate_writes_outputs_and_is_reproducible(tmp_path: Path) -> None:
    config = _simulate_config(tmp_path)

    assert _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "a")) == EXIT_OK
    assert _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "b")) == EXIT_OK

    panel = pd.read_csv(tmp_path / "a" / "panel.csv")
    assert len(panel) == 50
    assert list(panel.columns[:3]) == ["unit", "time", "y"]
    for name in ("panel.csv", "truth.json", "network.csv"):
        assert file_digest(tmp_path / "a" / name) == file_digest(tmp_path / "b" / name)

    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 1
    assert manifest["config_digest"] == file_digest(config)
    assert sorted(manifest["outputs"]) == ["network.csv", "panel.csv", "truth.json"]


def test_seed_flag_overrides_config(tmp_path: Path) -> None:
    config = _simulate_config(tmp_path)
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "a"))
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "b"), "--seed", "2")
    assert file_digest(tmp_path / "a" / "panel.csv") != file_digest(tmp_path / "b" / "panel.csv")


def test_unstable_rho_exits_with_input_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _simulate_config(tmp_path, theta={"rho": 1.5, "beta": 0.4, "gamma": 0.5})

    code = _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "out"))

    assert code == EXIT_INPUT
    assert "A2" in capsys.readouterr().err
    assert not (tmp_path / "out" / "manifest.json").exists()
    runs = CsvLogStore(tmp_path / "logs").read_csv("runs")
    assert runs["status"].tolist() == ["fail"]
    assert runs["exit_code"].tolist() == [EXIT_INPUT]


def test_missing_and_malformed_configs_exit_with_input_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert _run(tmp_path, "simulate", str(tmp_path / "nope.json")) == EXIT_INPUT

    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "t": 10,\n  "seed": ,\n}\n', encoding="utf-8")
    assert _run(tmp_path, "simulate", str(broken)) == EXIT_INPUT
    assert "line 3" in capsys.readouterr().err

    typo = _simulate_config(tmp_path, tt=10)
    assert _run(tmp_path, "simulate", str(typo)) == EXIT_INPUT
    assert "field 'tt'" in capsys.readouterr().err


def test_stats_command(tmp_path: Path) -> None:
    network = tmp_path / "pentagon.csv"
    network.write_text(PENTAGON, encoding="utf-8")

    assert _run(tmp_path, "stats", str(network), "--out-dir", str(tmp_path / "out")) == EXIT_OK

    stats = json.loads((tmp_path / "out" / "stats.json").read_text(encoding="utf-8"))
    assert stats["edge_count"] == 10
    assert stats["density"] == 0.5
    assert stats["reciprocated_edge_count"] == 10
    assert stats["strong_edge_count"] == 10
    assert pd.read_csv(tmp_path / "out" / "stats.csv")["network"].tolist() == ["pentagon"]


def test_check_flags_constant_diagonal(tmp_path: Path) -> None:
    (tmp_path / "pentagon.csv").write_text(PENTAGON, encoding="utf-8")
    config = _write_json(
        tmp_path / "check.json",
        {"network": {"kind": "from_file", "path": "pentagon.csv"}, "theta": {"rho": 0.5, "beta": 1.0, "gamma": 0.5}},
    )

    assert _run(tmp_path, "check", str(config), "--out-dir", str(tmp_path / "out")) == EXIT_OK

    report = json.loads((tmp_path / "out" / "assumptions.json").read_text(encoding="utf-8"))
    assert report["assumptions"]["A5"]["holds"] is False
    assert report["assumptions"]["A2"]["holds"] is True
    assert report["reduced_form"]["available"] is True


def test_check_edge_list_with_flags(tmp_path: Path) -> None:
    network = tmp_path / "pentagon.csv"
    network.write_text(PENTAGON, encoding="utf-8")

    code = _run(tmp_path, "check", str(network), "--rho", "1.2", "--out-dir", str(tmp_path / "out"))

    assert code == EXIT_OK
    report = json.loads((tmp_path / "out" / "assumptions.json").read_text(encoding="utf-8"))
    assert report["assumptions"]["A2"]["holds"] is False
    assert report["reduced_form"]["available"] is False
    assert "A2" in report["reduced_form"]["reason"]


def test_rowsum_test_on_simulated_panel(tmp_path: Path) -> None:
    config = _simulate_config(tmp_path, t=40)
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "sim"))

    code = _run(tmp_path, "rowsum-test", str(tmp_path / "sim" / "panel.csv"), "--out-dir", str(tmp_path / "out"))

    assert code == EXIT_OK
    wald = json.loads((tmp_path / "out" / "wald.json").read_text(encoding="utf-8"))
    assert wald["dof"] == 4
    assert 0.0 <= wald["p_value"] <= 1.0


def test_estimate_on_simulated_panel(tmp_path: Path) -> None:
    config = _simulate_config(tmp_path, network={"kind": "erdos_renyi", "n": 4}, t=20)
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "sim"))
    settings = _write_json(tmp_path / "estimate.json", {"gmm": {"particle_count": 8, "swarm_iterations": 10}, "seed": 3})

    code = _run(
        tmp_path,
        "estimate",
        str(tmp_path / "sim" / "panel.csv"),
        str(settings),
        "--grid",
        "0:0:0",
        "--out-dir",
        str(tmp_path / "out"),
    )

    assert code == EXIT_OK
    result = json.loads((tmp_path / "out" / "estimate.json").read_text(encoding="utf-8"))
    assert result["chosen_penalty"] == [0.0, 0.0, 0.0]
    assert (tmp_path / "out" / "network_hat.csv").exists()
    assert (tmp_path / "out" / "convergence.jsonl").read_text(encoding="utf-8").strip()


def test_counterfactual_command(tmp_path: Path) -> None:
    (tmp_path / "a.csv").write_text("from,to,weight\n0,1,0.5\n1,2,0.5\n2,0,0.5\n", encoding="utf-8")
    (tmp_path / "b.csv").write_text("from,to,weight\n0,2,0.5\n2,1,0.5\n1,0,0.5\n", encoding="utf-8")
    config = _write_json(
        tmp_path / "cf.json",
        {"network_a": "a.csv", "network_b": "b.csv", "origin_unit": "0", "shock_size": 0.1, "rho": 0.3},
    )

    assert _run(tmp_path, "counterfactual", str(config), "--out-dir", str(tmp_path / "out")) == EXIT_OK

    frame = pd.read_csv(tmp_path / "out" / "upsilon.csv", keep_default_na=False)
    assert frame["unit"].astype(str).tolist() == ["0", "1", "2"]
    assert frame["defined"].tolist() == [True, True, True]
    # under a, unit 1 hears from 0 directly; under b only through 2
    assert float(frame["upsilon"][1]) > 0.0


def test_campaign_command_resumes_from_store(tmp_path: Path) -> None:
    config = _write_json(
        tmp_path / "campaign.json",
        {
            "network": {"kind": "erdos_renyi", "n": 4},
            "t_grid": [12],
            "replications": 2,
            "calibration_runs": 1,
            "estimator": "ols",
            "seed": 5,
        },
    )
    out = tmp_path / "out"

    assert _run(tmp_path, "campaign", str(config), "--out-dir", str(out)) == EXIT_OK
    first = (out / "report.json").read_bytes()
    assert _run(tmp_path, "campaign", str(config), "--out-dir", str(out)) == EXIT_OK

    assert (out / "report.json").read_bytes() == first
    assert (out / "state" / "records.sqlite").exists()
    assert len((out / "records.jsonl").read_text(encoding="utf-8").splitlines()) == 2
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert set(manifest["extra"]["wall_clock_s_by_t"]) == {"12"}
    events = CsvLogStore(tmp_path / "logs").read_csv("events")
    assert (events["stage"] == "campaign.replication").sum() == 2


def test_estimate_outputs_match_result_schema(tmp_path: Path) -> None:
    config = _simulate_config(tmp_path, network={"kind": "erdos_renyi", "n": 4}, t=20)
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "sim"))
    settings = _write_json(tmp_path / "estimate.json", {"gmm": {"particle_count": 8, "swarm_iterations": 10}, "seed": 3})

    code = _run(
        tmp_path,
        "estimate",
        str(tmp_path / "sim" / "panel.csv"),
        str(settings),
        "--grid",
        "0:0:0,0.05:0.05:0",
        "--out-dir",
        str(tmp_path / "out"),
    )

    assert code == EXIT_OK
    for name, kind in (("estimate.json", "estimate"), ("manifest.json", "manifest")):
        document = json.loads((tmp_path / "out" / name).read_text(encoding="utf-8"))
        assert schemas.schema_errors(document, schemas.RESULTS, kind) == [], name
    truth = json.loads((tmp_path / "sim" / "truth.json").read_text(encoding="utf-8"))
    assert schemas.schema_errors(truth, schemas.RESULTS, "truth") == []


def test_config_rejected_by_schema_names_the_field(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _simulate_config(tmp_path, network={"kind": "erdos_renyi", "n": 4}, t=20)
    _run(tmp_path, "simulate", str(config), "--out-dir", str(tmp_path / "sim"))
    capsys.readouterr()
    # the hand parser accepts any list of strings here
    settings = _write_json(tmp_path / "estimate.json", {"gmm": {"transforms": ["demean_time", "detrend"]}})

    code = _run(tmp_path, "estimate", str(tmp_path / "sim" / "panel.csv"), str(settings), "--out-dir", str(tmp_path / "out"))

    assert code == EXIT_INPUT
    assert "field 'gmm.transforms[1]'" in capsys.readouterr().err
    assert not (tmp_path / "out" / "estimate.json").exists()
