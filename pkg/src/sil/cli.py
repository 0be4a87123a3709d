"""Command-line entry point: ``sil <command> ...``.

Every command writes its artifacts plus one ``manifest.json`` into
``--out-dir``. Timestamps and wall-clock figures live only in the manifest,
so everything else in the directory is a pure function of the inputs,
flags and seed. Configs and JSON artifacts are checked against the schemas
shipped in ``sil/schemas``. Exit codes: 0 success, 2 input or config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from sil import __version__, config, schemas
from sil.counterfactual import ShockScenario, compare_networks
from sil.data.io import read_edge_list, read_panel, write_edge_list, write_panel
from sil.errors import ConfigError, InputError, NumericalError
from sil.estimation import estimate
from sil.estimation.types import PenaltyConfig, parse_grid
from sil.harness.campaign import CampaignConfig, run_campaign
from sil.identification import rowsum_wald_test, sign_of_network_effect
from sil.identification.eigen import eigen_analysis
from sil.log_store import CsvLogStore, RunLogger, utc_now_iso
from sil.model.core import check_assumptions, reduced_form, simulate_panel
from sil.model.types import Network, StructuralParams
from sil.netstats import compute_stats, stats_frame
from sil.runconfig import (
    NetworkSpec,
    ThetaSpec,
    check_keys,
    integer,
    load_json,
    number,
    numbers,
    parse_gmm,
    parse_penalty,
    parse_shock,
    section,
    string,
    validate_config,
)
from sil.storage import CampaignStore

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


@dataclass
class CommandOutcome:
    outputs: list[Path]
    metrics: dict = field(default_factory=dict)
    config_path: Path | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str | None
    seed: int | None
    version: str
    started_at: str
    finished_at: str
    wall_clock_s: float
    outputs: tuple[str, ...]
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "wall_clock_s": self.wall_clock_s,
            "outputs": list(self.outputs),
            "extra": self.extra,
        }


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def to_jsonable(value: Any) -> Any:
    """Plain JSON types: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Path, payload: dict, kind: str | None = None) -> Path:
    """Write ``payload`` as canonical JSON, checked against the ``kind`` result schema first."""
    body = dict(payload)
    body.setdefault("schema_version", config.SCHEMA_VERSION)
    document = to_jsonable(body)
    if kind is not None:
        schemas.validate_document(document, schemas.RESULTS, kind)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def write_jsonl(path: Path, rows: Sequence[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(to_jsonable(row), sort_keys=True) + "\n")
    return path


def _seed(args: argparse.Namespace, payload: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    return integer(payload, "seed", default=0, minimum=0)


def _split_seed(seed: int) -> tuple[int, int]:
    network_seed, shock_seed = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    return int(network_seed), int(shock_seed)


# ── commands ────────────────────────────────────────────────────────────────
def cmd_simulate(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    config_path = Path(args.config)
    payload = load_json(config_path)
    check_keys(payload, ("network", "theta", "shock", "t", "seed"))
    seed = _seed(args, payload)
    network_seed, shock_seed = _split_seed(seed)
    spec = NetworkSpec.from_dict(section(payload, "network", required=True))
    theta = ThetaSpec.from_dict(section(payload, "theta"))
    shock = parse_shock(section(payload, "shock"), seed=shock_seed)
    t_periods = integer(payload, "t", minimum=1)
    validate_config(payload, "simulate")

    with log.stage("simulate.network", "Built true network", meta=spec.to_dict()):
        network = spec.build(network_seed, config_path.parent)
    params = theta.params(network)
    params.validate()
    with log.stage("simulate.panel", "Simulated panel", meta={"t": t_periods, "n": network.n}):
        panel = simulate_panel(params, shock, t_periods).replace(unit_labels=network.labels)

    out = Path(args.out_dir)
    truth = {"theta": params.to_dict(), "shock": shock.to_dict(), "t": t_periods, "seed": seed}
    outputs = [
        write_panel(panel, out / "panel.csv"),
        write_json(out / "truth.json", truth, "truth"),
        write_edge_list(network, out / "network.csv"),
    ]
    return CommandOutcome(outputs, {"n": network.n, "t": t_periods}, config_path, seed)


def cmd_estimate(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    payload: dict = {}
    config_path = Path(args.config) if args.config else None
    if config_path is not None:
        payload = load_json(config_path)
        check_keys(payload, ("penalty", "gmm", "seed"))
    seed = _seed(args, payload)
    penalty = parse_penalty(section(payload, "penalty"))
    if args.grid:
        try:
            grid = parse_grid(args.grid)
        except InputError as exc:
            raise ConfigError(str(exc), field="--grid") from exc
        penalty = PenaltyConfig(adaptive_exponent=penalty.adaptive_exponent, grid=grid)
    gmm = parse_gmm(section(payload, "gmm"), seed=seed, threads=args.threads)
    validate_config(payload, "estimate")

    panel = read_panel(args.panel)
    with log.stage("estimate.grid", "Penalty grid evaluated", meta={"grid_points": len(penalty.grid), "n": panel.n, "t": panel.t}):
        result = estimate(panel, penalty, gmm)

    out = Path(args.out_dir)
    outputs = [
        write_json(out / "estimate.json", result.to_dict(), "estimate"),
        write_edge_list(result.theta_hat.network, out / "network_hat.csv"),
        write_jsonl(out / "convergence.jsonl", result.convergence_log),
    ]
    metrics = {"bic": result.bic_value, "objective": result.objective_value, "penalty": list(result.chosen_penalty)}
    return CommandOutcome(outputs, metrics, config_path, seed)


def cmd_campaign(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    config_path = Path(args.config)
    payload = load_json(config_path)
    if args.seed is not None:
        payload = {**payload, "seed": int(args.seed)}
    cfg = CampaignConfig.from_dict(payload)
    out = Path(args.out_dir)
    store_path = Path(args.store) if args.store else out / "state" / "records.sqlite"

    def _on_record(record: dict) -> None:
        level = "INFO" if record["status"] == "ok" else "WARN"
        log.event(level, "campaign.replication", record["status"], meta={k: record[k] for k in ("cell", "t", "rep", "phase", "error")})

    with CampaignStore(store_path) as store:
        with log.stage("campaign.run", "Campaign finished", meta={"campaign_id": cfg.campaign_id}):
            report = run_campaign(cfg, store=store, threads=args.threads, base_dir=config_path.parent, on_record=_on_record)
        records_path = store.export_jsonl(cfg.campaign_id, out / "records.jsonl")

    outputs = [write_json(out / "report.json", report.to_dict(), "campaign_report"), records_path]
    frame_path = out / "report.csv"
    report.to_frame().to_csv(frame_path, index=False, float_format="%.17g", lineterminator="\n")
    outputs.append(frame_path)
    extra = {"wall_clock_s_by_t": {str(t): report.wall_clock[c] for c, t in enumerate(cfg.t_grid)}, "store": str(store_path)}
    metrics = {"campaign_id": cfg.campaign_id, "mad_w_monotone": report.mad_w_monotone()}
    return CommandOutcome(outputs, metrics, config_path, cfg.seed, extra)


def cmd_stats(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    network = read_edge_list(args.network)
    stats = compute_stats(network, strong_threshold=args.strong_threshold)
    out = Path(args.out_dir)
    csv_path = out / "stats.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    stats_frame([stats], [Path(args.network).stem]).to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
    outputs = [write_json(out / "stats.json", stats.to_dict(), "stats"), csv_path]
    return CommandOutcome(outputs, {"density": stats.density, "edges": stats.edge_count}, None, args.seed)


def _scenario(payload: dict, base_dir: Path) -> ShockScenario:
    check_keys(payload, ("network_a", "network_b", "origin_unit", "shock_size", "rho", "baseline_outcomes"))
    net_a = read_edge_list(base_dir / string(payload, "network_a"))
    net_b = read_edge_list(base_dir / string(payload, "network_b"))
    labels = tuple(sorted(set(net_a.labels or ()) | set(net_b.labels or ()), key=lambda s: (not s.isdigit(), int(s) if s.isdigit() else 0, s)))
    net_a = _align(net_a, labels)
    net_b = _align(net_b, labels)
    raw_baseline = payload.get("baseline_outcomes", "ones")
    if raw_baseline == "ones":
        baseline = np.ones(len(labels))
    else:
        baseline = np.asarray(numbers(payload, "baseline_outcomes"), dtype=float)
    origin = payload.get("origin_unit")
    if isinstance(origin, bool) or not isinstance(origin, (str, int)):
        raise ConfigError("must be a unit label", field="origin_unit")
    validate_config(payload, "counterfactual")
    return ShockScenario(
        origin_unit=str(origin),
        shock_size=number(payload, "shock_size", default=0.10),
        networks=(net_a, net_b),
        rho=number(payload, "rho"),
        baseline_outcomes=baseline,
    )


def _align(net: Network, labels: tuple[str, ...]) -> Network:
    """Embed ``net`` into the node set ``labels``; absent nodes are isolated."""
    index = {label: i for i, label in enumerate(labels)}
    weights = np.zeros((len(labels), len(labels)))
    pos = [index[label] for label in net.labels or ()]
    weights[np.ix_(pos, pos)] = net.weights
    return Network(weights, labels=labels, nonneg=net.nonneg)


def cmd_counterfactual(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    config_path = Path(args.config)
    scenario = _scenario(load_json(config_path), config_path.parent)
    comparison = compare_networks(scenario)
    path = comparison.write_csv(Path(args.out_dir) / "upsilon.csv")
    undefined = int((~comparison.defined).sum())
    if undefined:
        log.event("WARN", "counterfactual.undefined", f"{undefined} units have undefined upsilon")
    return CommandOutcome([path], {"undefined": undefined}, config_path, args.seed)


def cmd_check(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    target = Path(args.target)
    config_path = None
    if target.suffix.lower() == ".json":
        config_path = target
        payload = load_json(target)
        check_keys(payload, ("network", "theta", "seed"))
        seed = _seed(args, payload)
        network = NetworkSpec.from_dict(section(payload, "network", required=True)).build(_split_seed(seed)[0], target.parent)
        params = ThetaSpec.from_dict(section(payload, "theta")).params(network)
        validate_config(payload, "check")
    else:
        seed = args.seed
        network = read_edge_list(target)
        params = StructuralParams(network, args.rho, (args.gamma,), (args.beta,))
    report = check_assumptions(params)
    body = report.to_dict()
    if not report["A2"].holds:
        # I - rho W may still be invertible, but Pi no longer describes an equilibrium
        body["reduced_form"] = {"available": False, "reason": f"A2 violated: {report['A2'].detail}"}
    elif network.support().any():
        try:
            pi = reduced_form(params)
            body["reduced_form"] = {
                "available": True,
                "eigen": eigen_analysis(pi, params).to_dict(),
                "sign": sign_of_network_effect(pi).to_dict(),
            }
        except InputError as exc:
            body["reduced_form"] = {"available": False, "reason": str(exc)}
    path = write_json(Path(args.out_dir) / "assumptions.json", body, "assumptions")
    return CommandOutcome([path], {"all_hold": report.all_hold}, config_path, seed)


def cmd_rowsum_test(args: argparse.Namespace, log: RunLogger) -> CommandOutcome:
    panel = read_panel(args.panel)
    transforms = tuple(args.transforms.split(",")) if args.transforms else ("demean_time",)
    report = rowsum_wald_test(panel, transforms=transforms)
    path = write_json(Path(args.out_dir) / "wald.json", report.to_dict(), "wald")
    return CommandOutcome([path], {"statistic": report.statistic, "p_value": report.p_value}, None, args.seed)


COMMANDS: dict[str, Callable[[argparse.Namespace, RunLogger], CommandOutcome]] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "campaign": cmd_campaign,
    "stats": cmd_stats,
    "counterfactual": cmd_counterfactual,
    "check": cmd_check,
    "rowsum-test": cmd_rowsum_test,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default="out", help="directory for outputs and manifest.json")
    common.add_argument("--threads", type=int, default=1, help="worker threads (wall time only)")
    common.add_argument("--log-dir", default=None, help="CSV run-log directory (default: $SIL_LOG_DIR)")

    parser = argparse.ArgumentParser(prog="sil", description="Recover social interaction networks from panel data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="simulate a panel from a true structure")
    simulate.add_argument("config")

    est = sub.add_parser("estimate", parents=[common], help="estimate the network from a panel CSV")
    est.add_argument("panel")
    est.add_argument("config", nargs="?", default=None)
    est.add_argument("--grid", default=None, help="penalty grid 'p1:p1s:p2,...'")

    campaign = sub.add_parser("campaign", parents=[common], help="run a Monte Carlo campaign")
    campaign.add_argument("config")
    campaign.add_argument("--store", default=None, help="SQLite record store (enables resume)")

    stats = sub.add_parser("stats", parents=[common], help="summary statistics of an edge list")
    stats.add_argument("network")
    stats.add_argument("--strong-threshold", type=float, default=config.STRONG_THRESHOLD)

    counterfactual = sub.add_parser("counterfactual", parents=[common], help="compare shock propagation across two networks")
    counterfactual.add_argument("config")

    check = sub.add_parser("check", parents=[common], help="check identification assumptions")
    check.add_argument("target", help="edge-list CSV or JSON config with network and theta")
    check.add_argument("--rho", type=float, default=config.RHO_0)
    check.add_argument("--beta", type=float, default=config.BETA_0)
    check.add_argument("--gamma", type=float, default=config.GAMMA_0)

    rowsum = sub.add_parser("rowsum-test", parents=[common], help="Wald test of equal row sums")
    rowsum.add_argument("panel")
    rowsum.add_argument("--transforms", default=None, help="comma-separated panel transforms")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    store = CsvLogStore(args.log_dir)
    params = {k: v for k, v in vars(args).items() if k != "log_dir"}
    log = RunLogger(store, args.command, params)
    started_at = utc_now_iso()
    started = time.perf_counter()
    log.event("INFO", "run.started", f"{args.command} started", meta=params)
    try:
        outcome = COMMANDS[args.command](args, log)
    except (InputError, FileNotFoundError) as exc:
        return _fail(log, exc, EXIT_INPUT)
    except NumericalError as exc:
        return _fail(log, exc, EXIT_NUMERICAL)

    out = Path(args.out_dir)
    manifest = RunManifest(
        command=args.command,
        config_digest=file_digest(outcome.config_path) if outcome.config_path is not None else None,
        seed=outcome.seed,
        version=__version__,
        started_at=started_at,
        finished_at=utc_now_iso(),
        wall_clock_s=time.perf_counter() - started,
        outputs=tuple(sorted(str(p.relative_to(out)) if p.is_relative_to(out) else str(p) for p in outcome.outputs)),
        extra=outcome.extra,
    )
    write_json(out / "manifest.json", manifest.to_dict(), "manifest")
    log.finish("ok", EXIT_OK, outcome.metrics)
    return EXIT_OK


def _fail(log: RunLogger, exc: BaseException, code: int) -> int:
    log.error(exc)
    log.finish("fail", code)
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
