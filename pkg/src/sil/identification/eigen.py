"""Eigen-structure of the reduced form: centrality and the sign of ``rho beta + gamma``."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from sil import config
from sil.errors import EmptyNetworkError
from sil.model.types import ReducedForm, StructuralParams

REAL_TOL = 1e-9
NONNEG_TOL = 1e-8


@dataclass(frozen=True)
class EigenAnalysis:
    """Eigendecomposition of the first projection matrix.

    ``eigenvectors`` are right eigenvectors of Pi_1 (columns). Centrality uses
    the left eigenvectors: column j of Pi_1' measures how far j's covariate
    reaches, which is the influence of j. On a reducible network the left
    Perron vector lives on closed classes only, so centrality switches to a
    damped Perron vector (``centrality_method == "damped"``).
    """

    eigenvalues_pi: np.ndarray
    eigenvectors: np.ndarray
    left_eigenvectors: np.ndarray
    dominant_index: int | None
    eigencentrality: np.ndarray | None
    eigenvalues_w: np.ndarray | None = None
    condition: float = 1.0
    reliable: bool = True
    informative: bool = True
    strong_components: int = 1
    centrality_method: str = "perron"

    @property
    def reducible(self) -> bool:
        return self.strong_components > 1

    def to_dict(self) -> dict:
        def _pairs(values: np.ndarray | None) -> list | None:
            if values is None:
                return None
            return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex)]

        return {
            "schema_version": config.SCHEMA_VERSION,
            "eigenvalues_pi": _pairs(self.eigenvalues_pi),
            "eigenvalues_w": _pairs(self.eigenvalues_w),
            "dominant_index": self.dominant_index,
            "eigencentrality": None if self.eigencentrality is None else self.eigencentrality.tolist(),
            "condition": self.condition,
            "reliable": self.reliable,
            "informative": self.informative,
            "reducible": self.reducible,
            "strong_components": self.strong_components,
            "centrality_method": self.centrality_method,
        }


@dataclass(frozen=True)
class SignReport:
    offdiagonal_sign: int
    eigen_sign: int | None
    agree: bool
    offdiagonal_sum: float

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "offdiagonal_sign": self.offdiagonal_sign,
            "eigen_sign": self.eigen_sign,
            "agree": self.agree,
            "offdiagonal_sum": self.offdiagonal_sum,
        }


def _is_real(value: complex) -> bool:
    return abs(value.imag) <= REAL_TOL * max(1.0, abs(value))


def _nonneg_direction(vector: np.ndarray) -> np.ndarray | None:
    """Sign-normalized real vector when it is entrywise nonnegative, else None."""
    if np.max(np.abs(vector.imag)) > REAL_TOL * max(1.0, np.max(np.abs(vector))):
        return None
    real = vector.real
    scale = np.max(np.abs(real))
    if scale == 0.0:
        return None
    if real[np.argmax(np.abs(real))] < 0:
        real = -real
    if np.min(real) < -NONNEG_TOL * scale:
        return None
    return np.clip(real, 0.0, None)


def _nonneg_candidates(values: np.ndarray, vectors: np.ndarray) -> list[tuple[int, np.ndarray]]:
    found = []
    for idx, value in enumerate(values):
        if not _is_real(value):
            continue
        direction = _nonneg_direction(vectors[:, idx])
        if direction is not None:
            found.append((idx, direction))
    return found


def _spread(values: np.ndarray) -> float:
    return float(np.max(np.abs(values - values[0]))) if values.size else 0.0


def influence_graph(matrix: np.ndarray, tol: float = config.ZERO_TOL) -> nx.DiGraph:
    """Edge i -> j weighted |M_ij| whenever i responds to j off the diagonal."""
    n = matrix.shape[0]
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    rows, cols = np.nonzero((np.abs(matrix) > tol) & ~np.eye(n, dtype=bool))
    graph.add_weighted_edges_from((int(i), int(j), float(abs(matrix[i, j]))) for i, j in zip(rows, cols))
    return graph


def damped_centrality(graph: nx.DiGraph, damping: float = config.CENTRALITY_DAMPING) -> np.ndarray:
    """PageRank-style Perron vector: rank flows from each node to the nodes it responds to."""
    scores = nx.pagerank(graph, alpha=damping, weight="weight", tol=config.CENTRALITY_TOL, max_iter=10_000)
    vector = np.array([scores[i] for i in range(graph.number_of_nodes())])
    return vector / vector.sum()


def eigen_analysis(pi: ReducedForm, theta: StructuralParams | None = None) -> EigenAnalysis:
    """Decompose Pi_1 and pick the Perron direction as eigencentrality.

    The dominant eigenvector is the nonnegative one whose real eigenvalue has
    the largest modulus; ties go to the smallest index. A spectrum with a
    single distinct value (Pi = cI) carries no centrality and is flagged.
    When the off-diagonal support splits into several strongly connected
    components the damped vector is reported instead. Passing ``theta``
    attaches the matching eigenvalues of W.
    """
    matrix = pi.first
    graph = influence_graph(matrix)
    strong_components = nx.number_strongly_connected_components(graph)
    values, vectors = np.linalg.eig(matrix)
    left_values, left_vectors = np.linalg.eig(matrix.T)
    try:
        condition = float(np.linalg.cond(vectors))
    except np.linalg.LinAlgError:
        condition = float("inf")
    reliable = bool(np.isfinite(condition) and condition <= config.COND_MAX)

    scale = max(1.0, float(np.max(np.abs(values))))
    informative = _spread(values) > REAL_TOL * scale
    dominant_index: int | None = None
    centrality: np.ndarray | None = None
    if informative:
        candidates = _nonneg_candidates(left_values, left_vectors)
        if candidates:
            best_modulus = max(abs(left_values[idx].real) for idx, _ in candidates)
            for idx, direction in candidates:
                if abs(left_values[idx].real) >= best_modulus - REAL_TOL * scale:
                    dominant_index = idx
                    centrality = direction / direction.sum()
                    break
    method = "perron"
    if informative and strong_components > 1 and graph.number_of_edges():
        centrality = damped_centrality(graph)
        method = "damped"

    eigenvalues_w = None
    if theta is not None:
        w = theta.network.weights
        norms = np.einsum("ij,ij->j", vectors.conj(), vectors)
        eigenvalues_w = np.einsum("ij,ij->j", vectors.conj(), w @ vectors) / norms

    return EigenAnalysis(
        eigenvalues_pi=values,
        eigenvectors=vectors,
        left_eigenvectors=left_vectors,
        dominant_index=dominant_index,
        eigencentrality=centrality,
        eigenvalues_w=eigenvalues_w,
        condition=condition,
        reliable=reliable,
        informative=bool(informative),
        strong_components=int(strong_components),
        centrality_method=method,
    )


def sign_of_network_effect(pi: ReducedForm, tol: float = config.ZERO_TOL) -> SignReport:
    """Infer sign(rho beta + gamma) from the off-diagonals and from the Perron eigenvalue."""
    matrix = pi.first
    off = matrix[~np.eye(matrix.shape[0], dtype=bool)]
    if off.size == 0 or np.max(np.abs(off)) <= tol:
        raise EmptyNetworkError("empty network; sign of rho*beta + gamma is undefined")
    total = float(off.sum())
    offdiagonal_sign = 1 if total > 0 else -1

    values, vectors = np.linalg.eig(matrix.T)
    real_values = np.array([v.real for v in values if _is_real(v)])
    eigen_sign: int | None = None
    if real_values.size:
        scale = max(1.0, float(np.max(np.abs(real_values))))
        top, bottom = real_values.max(), real_values.min()
        # reducible networks carry several nonnegative directions; the widest support wins
        best_support = 0
        for idx, direction in _nonneg_candidates(values, vectors):
            value = values[idx].real
            support = int(np.count_nonzero(direction > NONNEG_TOL * direction.max()))
            if support <= best_support:
                continue
            if abs(value - top) <= REAL_TOL * scale:
                eigen_sign, best_support = 1, support
            elif abs(value - bottom) <= REAL_TOL * scale:
                eigen_sign, best_support = -1, support

    return SignReport(
        offdiagonal_sign=offdiagonal_sign,
        eigen_sign=eigen_sign,
        agree=eigen_sign == offdiagonal_sign,
        offdiagonal_sum=total,
    )
