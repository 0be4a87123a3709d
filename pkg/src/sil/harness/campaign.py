"""Monte Carlo campaign driver: calibrate the penalty, freeze it, aggregate recovery."""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from sil import config
from sil.errors import ConfigError, ConvergenceError, InputError, NumericalError
from sil.estimation import estimate, estimate_adaptive_lasso_reduced_form, estimate_ols_reduced_form
from sil.estimation.types import GmmConfig, PenaltyConfig, Triple
from sil.identification.inversion import fit_structural
from sil.model.core import reduced_form, simulate_panel
from sil.model.types import Network, PanelData, ShockConfig, StructuralParams
from sil.netstats import METRIC_FIELDS, compare
from sil.runconfig import (
    NetworkSpec,
    ThetaSpec,
    check_keys,
    integer,
    parse_gmm,
    parse_penalty,
    parse_shock,
    section,
    string,
    validate_config,
)
from sil.storage import CampaignStore

ESTIMATORS = ("enet", "ols", "adaptive_lasso")
REFERENCE_TRANSFORMS = ("demean_time",)
_CONFIG_FIELDS = (
    "network",
    "t_grid",
    "replications",
    "calibration_runs",
    "theta",
    "shock",
    "penalty",
    "gmm",
    "estimator",
    "seed",
)


@dataclass(frozen=True)
class CampaignConfig:
    network: NetworkSpec
    t_grid: tuple[int, ...] = config.T_GRID
    replications: int = config.REPLICATIONS
    calibration_runs: int = config.CALIBRATION_RUNS
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    shock: ShockConfig = field(default_factory=ShockConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    estimator: str = "enet"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.t_grid:
            raise ConfigError("must contain at least one T", field="t_grid")
        if any(t < 3 for t in self.t_grid):
            raise ConfigError("every T must be >= 3", field="t_grid")
        if not 1 <= self.calibration_runs <= self.replications:
            raise ConfigError("need replications >= calibration_runs >= 1", field="calibration_runs")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"must be one of {list(ESTIMATORS)}", field="estimator")
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))

    @classmethod
    def from_dict(cls, payload: dict) -> "CampaignConfig":
        check_keys(payload, _CONFIG_FIELDS)
        seed = integer(payload, "seed", default=0, minimum=0)
        raw_grid = payload.get("t_grid", list(config.T_GRID))
        if not isinstance(raw_grid, list) or not all(isinstance(t, int) and not isinstance(t, bool) for t in raw_grid):
            raise ConfigError("must be a list of integers", field="t_grid")
        cfg = cls(
            network=NetworkSpec.from_dict(section(payload, "network", required=True)),
            t_grid=tuple(raw_grid),
            replications=integer(payload, "replications", default=config.REPLICATIONS, minimum=1),
            calibration_runs=integer(payload, "calibration_runs", default=config.CALIBRATION_RUNS, minimum=1),
            theta=ThetaSpec.from_dict(section(payload, "theta")),
            shock=parse_shock(section(payload, "shock")),
            penalty=parse_penalty(section(payload, "penalty")),
            gmm=parse_gmm(section(payload, "gmm")),
            estimator=string(payload, "estimator", default="enet", choices=ESTIMATORS),
            seed=seed,
        )
        validate_config(payload, "campaign")
        return cfg

    def to_dict(self) -> dict:
        shock = self.shock.to_dict()
        shock.pop("seed")
        gmm = self.gmm.to_dict()
        gmm.pop("seed")
        return {
            "network": self.network.to_dict(),
            "t_grid": list(self.t_grid),
            "replications": self.replications,
            "calibration_runs": self.calibration_runs,
            "theta": self.theta.to_dict(),
            "shock": shock,
            "penalty": self.penalty.to_dict(),
            "gmm": gmm,
            "estimator": self.estimator,
            "seed": self.seed,
        }

    @property
    def campaign_id(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CellReport:
    cell: int
    t: int
    n_ok: int
    n_failed: int
    frozen_penalty: Triple | None
    mean: dict[str, float]
    sd: dict[str, float]
    edges_kept: int
    edges_added: int
    edges_removed: int

    def to_dict(self) -> dict:
        return {
            "cell": self.cell,
            "t": self.t,
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "frozen_penalty": None if self.frozen_penalty is None else list(self.frozen_penalty),
            "mean": {k: _json_float(v) for k, v in self.mean.items()},
            "sd": {k: _json_float(v) for k, v in self.sd.items()},
            "edge_frequency": {"kept": self.edges_kept, "added": self.edges_added, "removed": self.edges_removed},
        }


@dataclass(frozen=True)
class CampaignReport:
    campaign_id: str
    network: str
    estimator: str
    cells: tuple[CellReport, ...]
    wall_clock: dict[int, float] = field(default_factory=dict, compare=False)

    def metric_path(self, metric: str) -> list[float]:
        return [cell.mean[metric] for cell in sorted(self.cells, key=lambda c: c.t)]

    def mad_w_monotone(self, allowed_inversions: int = 1) -> bool:
        """Mean mad_w does not rise with T, up to ``allowed_inversions`` upticks."""
        path = [v for v in self.metric_path("mad_w") if not math.isnan(v)]
        upticks = sum(1 for a, b in zip(path, path[1:]) if b > a)
        return upticks <= allowed_inversions

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for cell in self.cells:
            row: dict[str, Any] = {"network": self.network, "t": cell.t, "n_ok": cell.n_ok, "n_failed": cell.n_failed}
            for name in METRIC_FIELDS:
                row[f"mean_{name}"] = cell.mean[name]
                row[f"sd_{name}"] = cell.sd[name]
            row["edges_kept"] = cell.edges_kept
            row["edges_added"] = cell.edges_added
            row["edges_removed"] = cell.edges_removed
            row["frozen_penalty"] = "" if cell.frozen_penalty is None else ":".join(f"{p:g}" for p in cell.frozen_penalty)
            rows.append(row)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "campaign_id": self.campaign_id,
            "network": self.network,
            "estimator": self.estimator,
            "cells": [cell.to_dict() for cell in self.cells],
            "mad_w_monotone": self.mad_w_monotone(),
        }


def _json_float(value: float) -> float | None:
    return None if math.isnan(value) else value


def replication_seeds(seed: int, cell: int, rep: int) -> tuple[int, int]:
    """Independent (shock, estimator) seeds for one replication."""
    state = np.random.SeedSequence(seed, spawn_key=(cell, rep)).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def snap_median(triples: list[Triple], grid: tuple[Triple, ...]) -> Triple:
    """Coordinatewise median of the selected triples, moved to the nearest grid point."""
    median = np.median(np.asarray(triples, dtype=float), axis=0)
    return min(grid, key=lambda g: (float(np.sum((np.asarray(g) - median) ** 2)), g))


def _links(w: np.ndarray) -> list[int]:
    support = np.abs(w) > config.ZERO_TOL
    np.fill_diagonal(support, False)
    return [int(i) for i in np.flatnonzero(support)]


def edge_frequency(records: list[dict], w_true: Network, threshold: float = config.EDGE_FREQUENCY_THRESHOLD) -> tuple[int, int, int]:
    """(kept, added, removed) counts from how often each link shows up in the estimates."""
    n = w_true.n
    ok = [r for r in records if r["status"] == "ok"]
    counts = np.zeros(n * n)
    for record in ok:
        counts[record["links"]] += 1
    share = counts.reshape(n, n) / max(len(ok), 1)
    truth = w_true.support()
    off = ~np.eye(n, dtype=bool)
    frequent = share >= threshold
    return (
        int(np.count_nonzero(truth & frequent)),
        int(np.count_nonzero(~truth & frequent & off)),
        int(np.count_nonzero(truth & ~frequent)),
    )


def aggregate(records: list[dict], w_true: Network, cell: int, t: int, frozen: Triple | None) -> CellReport:
    """Recompute a cell summary from persisted replication records (sd with ddof=0)."""
    ok = [r for r in records if r["status"] == "ok"]
    mean: dict[str, float] = {}
    sd: dict[str, float] = {}
    for name in METRIC_FIELDS:
        values = np.array([math.nan if r["metrics"][name] is None else r["metrics"][name] for r in ok], dtype=float)
        if values.size == 0 or np.all(np.isnan(values)):
            mean[name] = sd[name] = math.nan
        else:
            mean[name] = float(np.nanmean(values))
            sd[name] = float(np.nanstd(values))
    kept, added, removed = edge_frequency(records, w_true)
    return CellReport(
        cell=cell,
        t=t,
        n_ok=len(ok),
        n_failed=len(records) - len(ok),
        frozen_penalty=frozen,
        mean=mean,
        sd=sd,
        edges_kept=kept,
        edges_added=added,
        edges_removed=removed,
    )


class _Replicator:
    """Simulates and estimates one replication; pure given its seeds."""

    def __init__(self, cfg: CampaignConfig, theta_true: StructuralParams):
        self.cfg = cfg
        self.theta_true = theta_true
        self.pi_true = reduced_form(theta_true)

    def _fit(self, panel: PanelData, penalty: PenaltyConfig, est_seed: int) -> tuple[StructuralParams, Any, Any, Triple | None]:
        if self.cfg.estimator == "enet":
            gmm = self.cfg.gmm.with_seed(est_seed)
            result = estimate(panel, penalty, gmm)
            scalars = result.post_2sls if result.post_2sls is not None else result.theta_hat
            pi_hat = reduced_form(result.theta_hat)
            return result.theta_hat, pi_hat, scalars, result.chosen_penalty
        if self.cfg.estimator == "ols":
            pi_hat = estimate_ols_reduced_form(panel, transforms=REFERENCE_TRANSFORMS, covariance=False).pi_hat
        else:
            pi_hat = estimate_adaptive_lasso_reduced_form(panel, transforms=REFERENCE_TRANSFORMS)
        fit = fit_structural(pi_hat, normalize="all", nonneg=True, seed=est_seed, prune_tol=config.PRUNE_TOL)
        if fit.params is None:
            raise ConvergenceError("no structural fit to the reduced-form estimate")
        return fit.params, pi_hat, fit.params, None

    def run(self, cell: int, t: int, rep: int, phase: str, penalty: PenaltyConfig) -> dict:
        shock_seed, est_seed = replication_seeds(self.cfg.seed, cell, rep)
        record: dict[str, Any] = {
            "campaign_id": self.cfg.campaign_id,
            "cell": cell,
            "t": t,
            "rep": rep,
            "phase": phase,
            "status": "ok",
            "penalty": None,
            "metrics": None,
            "links": [],
            "error": None,
        }
        try:
            panel = simulate_panel(self.theta_true, self.cfg.shock.with_seed(shock_seed), t)
            theta_hat, pi_hat, scalars, chosen = self._fit(panel, penalty, est_seed)
            metrics = compare(self.theta_true.network, theta_hat.network, self.pi_true, pi_hat, self.theta_true, scalars)
        except (NumericalError, InputError, np.linalg.LinAlgError, FloatingPointError) as exc:
            record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            return record
        record["penalty"] = None if chosen is None else list(chosen)
        record["metrics"] = {k: _json_float(v) for k, v in metrics.to_dict().items()}
        record["links"] = _links(theta_hat.network.weights)
        return record


def build_true_params(cfg: CampaignConfig, base_dir: Path | None = None) -> StructuralParams:
    """The campaign's single true structure, drawn from the campaign seed."""
    network = cfg.network.build(cfg.seed, base_dir)
    params = cfg.theta.params(network)
    params.validate()
    return params


def run_campaign(
    cfg: CampaignConfig,
    *,
    store: CampaignStore | None = None,
    threads: int = 1,
    base_dir: Path | None = None,
    on_record: Callable[[dict], None] | None = None,
) -> CampaignReport:
    """Run every (T, replication) cell, resuming from whatever ``store`` already holds.

    Per cell the first ``calibration_runs`` replications select the penalty
    over the full grid; the coordinatewise median of those choices, snapped
    to the grid, is frozen for the remaining replications. Records are
    written in replication order regardless of ``threads``.
    """
    store = store or CampaignStore()
    theta_true = build_true_params(cfg, base_dir)
    replicator = _Replicator(cfg, theta_true)
    campaign_id = cfg.campaign_id
    cells: list[CellReport] = []
    wall_clock: dict[int, float] = {}

    def _phase(cell: int, t: int, reps: list[int], phase: str, penalty: PenaltyConfig) -> None:
        done = {r["rep"] for r in store.load_records(campaign_id, cell)}
        todo = [rep for rep in reps if rep not in done]
        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
            for record in executor.map(lambda rep: replicator.run(cell, t, rep, phase, penalty), todo):
                store.save_record(record)
                if on_record is not None:
                    on_record(record)

    for cell, t in enumerate(cfg.t_grid):
        started = time.perf_counter()
        calibration = list(range(cfg.calibration_runs))
        _phase(cell, t, calibration, "calibration", cfg.penalty)

        frozen: Triple | None = None
        if cfg.estimator == "enet":
            if store.has_frozen_penalty(campaign_id, cell):
                stored = store.load_frozen_penalty(campaign_id, cell)
                frozen = None if stored is None else tuple(stored)  # type: ignore[assignment]
            else:
                chosen = [tuple(r["penalty"]) for r in store.load_records(campaign_id, cell) if r["status"] == "ok"]
                frozen = snap_median(chosen, cfg.penalty.grid) if chosen else None
                store.save_frozen_penalty(campaign_id, cell, t, None if frozen is None else list(frozen))

        later_penalty = cfg.penalty if frozen is None else cfg.penalty.frozen(frozen)
        _phase(cell, t, list(range(cfg.calibration_runs, cfg.replications)), "frozen", later_penalty)

        records = store.load_records(campaign_id, cell)
        cells.append(aggregate(records, theta_true.network, cell, t, frozen))
        wall_clock[cell] = time.perf_counter() - started

    return CampaignReport(
        campaign_id=campaign_id,
        network=cfg.network.name,
        estimator=cfg.estimator,
        cells=tuple(cells),
        wall_clock=wall_clock,
    )


def report_from_store(cfg: CampaignConfig, store: CampaignStore, base_dir: Path | None = None) -> CampaignReport:
    """Rebuild the aggregate report from persisted records alone."""
    theta_true = build_true_params(cfg, base_dir)
    cells = []
    for cell, t in enumerate(cfg.t_grid):
        stored = store.load_frozen_penalty(cfg.campaign_id, cell)
        frozen = None if stored is None else tuple(stored)
        cells.append(aggregate(store.load_records(cfg.campaign_id, cell), theta_true.network, cell, t, frozen))  # type: ignore[arg-type]
    return CampaignReport(cfg.campaign_id, cfg.network.name, cfg.estimator, tuple(cells))
