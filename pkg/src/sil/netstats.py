"""Network summaries and recovery metrics for true and estimated networks."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Any

import networkx as nx
import numpy as np
import pandas as pd

from sil import config
from sil.errors import InputError
from sil.identification.eigen import eigen_analysis
from sil.model.types import Network, ReducedForm

TOP_NODES = 3


@dataclass(frozen=True)
class NetworkStats:
    n: int
    edge_count: int
    strong_edge_count: int
    weak_edge_count: int
    reciprocated_edge_count: int
    density: float
    clustering_coefficient: float
    component_count: int
    max_component_size: int
    diag_w2_sd: float
    in_degree_mean: float
    in_degree_sd: float
    out_degree_mean: float
    out_degree_sd: float
    top_out_degree_nodes: tuple[str, ...]
    top_eigencentrality_nodes: tuple[str, ...]

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["top_out_degree_nodes"] = list(self.top_out_degree_nodes)
        payload["top_eigencentrality_nodes"] = list(self.top_eigencentrality_nodes)
        payload["schema_version"] = config.SCHEMA_VERSION
        return payload


@dataclass(frozen=True)
class RecoveryMetrics:
    zero_recovery_rate: float
    nonzero_recovery_rate: float
    strong_edge_recovery_rate: float
    mad_w: float
    mad_pi: float
    bias_rho: float
    bias_gamma: float
    bias_beta: float

    def to_dict(self) -> dict:
        return asdict(self)


METRIC_FIELDS = tuple(RecoveryMetrics.__dataclass_fields__)


def _undirected_support(support: np.ndarray) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(support.shape[0]))
    rows, cols = np.nonzero(support | support.T)
    graph.add_edges_from((int(i), int(j)) for i, j in zip(rows, cols) if i < j)
    return graph


def _top(scores: np.ndarray, labels: Sequence[str]) -> tuple[str, ...]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return tuple(labels[i] for i in order[:TOP_NODES])


def compute_stats(net: Network, strong_threshold: float = config.STRONG_THRESHOLD) -> NetworkStats:
    """Counts, components and clustering on the binarized support; diag(W^2) on weights.

    A link j -> i is ``W[i, j] != 0``: row counts are in-degrees and column
    counts out-degrees. Components and clustering ignore direction.
    """
    w = net.weights
    n = net.n
    assert net.labels is not None
    support = net.support()
    magnitude = np.abs(w)
    edge_count = int(support.sum())
    strong = int(np.count_nonzero(support & (magnitude > strong_threshold)))
    reciprocated = int(np.count_nonzero(support & support.T))
    graph = _undirected_support(support)
    components = list(nx.connected_components(graph))
    in_degree = support.sum(axis=1).astype(float)
    out_degree = support.sum(axis=0).astype(float)

    top_central: tuple[str, ...] = ()
    if edge_count:
        analysis = eigen_analysis(ReducedForm.single(w))
        if analysis.eigencentrality is not None:
            top_central = _top(analysis.eigencentrality, net.labels)

    return NetworkStats(
        n=n,
        edge_count=edge_count,
        strong_edge_count=strong,
        weak_edge_count=edge_count - strong,
        reciprocated_edge_count=reciprocated,
        density=edge_count / (n * (n - 1)) if n > 1 else 0.0,
        clustering_coefficient=float(nx.transitivity(graph)) if edge_count else 0.0,
        component_count=len(components),
        max_component_size=max((len(c) for c in components), default=0),
        diag_w2_sd=float(np.std(np.einsum("ij,ji->i", w, w))),
        in_degree_mean=float(in_degree.mean()),
        in_degree_sd=float(in_degree.std()),
        out_degree_mean=float(out_degree.mean()),
        out_degree_sd=float(out_degree.std()),
        top_out_degree_nodes=_top(out_degree, net.labels) if edge_count else (),
        top_eigencentrality_nodes=top_central,
    )


def stats_frame(stats: Sequence[NetworkStats], names: Sequence[str] | None = None) -> pd.DataFrame:
    """Fixed-column table, one row per network."""
    rows = []
    for idx, item in enumerate(stats):
        row = item.to_dict()
        row.pop("schema_version")
        row["top_out_degree_nodes"] = ";".join(item.top_out_degree_nodes)
        row["top_eigencentrality_nodes"] = ";".join(item.top_eigencentrality_nodes)
        row = {"network": names[idx] if names else str(idx), **row}
        rows.append(row)
    return pd.DataFrame(rows)


def _matrix(value: Any) -> np.ndarray | None:
    if value is None:
        return None
    if isinstance(value, ReducedForm):
        return value.first
    if isinstance(value, Network):
        return value.weights
    return np.asarray(value, dtype=float)


def _first(value: Any, name: str) -> float:
    attr = getattr(value, name, None)
    if attr is None:
        return math.nan
    return float(np.atleast_1d(attr)[0])


def _rate(hits: np.ndarray, base: np.ndarray) -> float:
    total = int(base.sum())
    return 1.0 if total == 0 else float(np.count_nonzero(hits & base) / total)


def compare(
    w_true: Network,
    w_hat: Network,
    pi_true: Any = None,
    pi_hat: Any = None,
    theta_true: Any = None,
    theta_hat: Any = None,
    *,
    tol: float = config.ZERO_TOL,
    strong_threshold: float = config.STRONG_THRESHOLD,
) -> RecoveryMetrics:
    """Zero/nonzero recovery, mean absolute deviations and parameter biases.

    Rates with an empty reference set are 1.0. Biases read ``rho``, ``gamma``
    and ``beta`` from any object carrying them and are NaN otherwise.
    """
    if w_true.n != w_hat.n:
        raise InputError(f"network sizes differ: {w_true.n} vs {w_hat.n}")
    n = w_true.n
    off = ~np.eye(n, dtype=bool)
    truth = w_true.weights
    estimate_ = w_hat.weights
    true_zero = (np.abs(truth) <= tol) & off
    true_link = (np.abs(truth) > tol) & off
    hat_zero = np.abs(estimate_) <= tol
    strong = (np.abs(truth) > strong_threshold) & off

    mad_pi = math.nan
    pi_a, pi_b = _matrix(pi_true), _matrix(pi_hat)
    if pi_a is not None and pi_b is not None:
        if pi_a.shape != pi_b.shape or pi_a.shape != (n, n):
            raise InputError(f"reduced-form shapes differ: {pi_a.shape} vs {pi_b.shape}")
        mad_pi = float(np.mean(np.abs(pi_b - pi_a)[off])) if n > 1 else 0.0

    return RecoveryMetrics(
        zero_recovery_rate=_rate(hat_zero, true_zero),
        nonzero_recovery_rate=_rate(~hat_zero, true_link),
        strong_edge_recovery_rate=_rate(~hat_zero, strong),
        mad_w=float(np.mean(np.abs(estimate_ - truth)[off])) if n > 1 else 0.0,
        mad_pi=mad_pi,
        bias_rho=_first(theta_hat, "rho") - _first(theta_true, "rho"),
        bias_gamma=_first(theta_hat, "gamma") - _first(theta_true, "gamma"),
        bias_beta=_first(theta_hat, "beta") - _first(theta_true, "beta"),
    )
