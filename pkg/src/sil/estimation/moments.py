"""GMM moments ``g = (1/T) sum_t [x_1t e_t' ... x_Nt e_t']'`` and their objective.

Moments are stacked covariate by covariate; within covariate k, entry
``a*N + b`` is the cross moment of ``x_{a,k}`` with residual ``e_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sil import config
from sil.errors import InputError
from sil.estimation.types import GmmConfig, PenaltyConfig
from sil.model.core import apply_transforms, max_abs_row_sum
from sil.model.types import PanelData, StructuralParams


@dataclass(frozen=True)
class ObjectiveGradient:
    rho: float
    beta: np.ndarray
    gamma: np.ndarray
    w: np.ndarray


def _project_cols(matrix: np.ndarray) -> np.ndarray:
    """``matrix @ (I - H)``."""
    return matrix - matrix.mean(axis=-1, keepdims=True)


def _project_rows(matrix: np.ndarray) -> np.ndarray:
    """``(I - H) @ matrix``."""
    return matrix - matrix.mean(axis=-2, keepdims=True)


class MomentSystem:
    """Sufficient statistics of a transformed panel for repeated moment evaluation.

    ``sy[k]`` is ``(1/T) sum_t s_kt y_t'`` and ``sx[k][l]`` is
    ``(1/T) sum_t s_kt x_lt'`` where ``s`` are the moment sources.
    """

    def __init__(self, panel: PanelData, gmm: GmmConfig | None = None):
        gmm = gmm or GmmConfig()
        transformed = apply_transforms(panel, gmm.transforms)
        if gmm.moment_source == "instruments":
            if transformed.z is None:
                raise InputError("moment_source 'instruments' needs instruments z in the panel")
            sources = transformed.z
        else:
            sources = transformed.x
        t = transformed.t
        self.n = transformed.n
        self.k = transformed.k
        self.t = t
        self.sources = sources.shape[2]
        self.projected = "global_difference" in gmm.transforms
        self.sy = np.einsum("tak,tb->kab", sources, transformed.y) / t
        self.sx = np.einsum("tak,tbl->klab", sources, transformed.x) / t
        self.size = self.sources * self.n * self.n
        weights = gmm.weight_matrix
        if weights is not None and weights.shape != (self.size, self.size):
            raise InputError(f"weight_matrix must be {self.size} x {self.size}, got {weights.shape}")
        self.weights = weights

    # ── single evaluation ───────────────────────────────────────────────────
    def _operator(self, rho: float, w: np.ndarray) -> np.ndarray | None:
        if abs(rho) * max_abs_row_sum(w) >= 1.0:
            return None
        operator = np.eye(self.n) - rho * w
        if np.linalg.cond(operator) > config.COND_MAX:
            return None
        return operator

    def _residual_blocks(self, pis: list[np.ndarray]) -> np.ndarray:
        transposed = [_project_cols(pi.T) if self.projected else pi.T for pi in pis]
        blocks = self.sy.copy()
        for l, pi_t in enumerate(transposed):
            blocks -= self.sx[:, l] @ pi_t
        return blocks

    def _solve(self, rho: float, beta, gamma, w: np.ndarray, exogenous: list[np.ndarray] | None):
        operator = self._operator(rho, w)
        if operator is None:
            return None, None
        pis = []
        for l in range(self.k):
            w_l = w if exogenous is None else exogenous[l]
            pis.append(np.linalg.solve(operator, beta[l] * np.eye(self.n) + gamma[l] * w_l))
        return operator, pis

    def moments(self, rho: float, beta, gamma, w: np.ndarray, exogenous: list[np.ndarray] | None = None) -> np.ndarray | None:
        _, pis = self._solve(rho, beta, gamma, w, exogenous)
        if pis is None:
            return None
        return self._residual_blocks(pis).reshape(-1)

    def quadratic(self, g: np.ndarray) -> float:
        if self.weights is None:
            return float(g @ g)
        return float(g @ (self.weights @ g))

    def value(self, rho: float, beta, gamma, w: np.ndarray, exogenous: list[np.ndarray] | None = None) -> float:
        g = self.moments(rho, beta, gamma, w, exogenous)
        return config.SENTINEL_OBJECTIVE if g is None else self.quadratic(g)

    def value_and_gradient(
        self,
        rho: float,
        beta,
        gamma,
        w: np.ndarray,
        exogenous: list[np.ndarray] | None = None,
    ) -> tuple[float, ObjectiveGradient]:
        """Objective ``g'Mg`` and its analytic gradient in (rho, beta, gamma, W)."""
        operator, pis = self._solve(rho, beta, gamma, w, exogenous)
        if pis is None:
            zero = ObjectiveGradient(0.0, np.zeros(self.k), np.zeros(self.k), np.zeros_like(w))
            return config.SENTINEL_OBJECTIVE, zero
        g = self._residual_blocks(pis).reshape(-1)
        weighted = g if self.weights is None else self.weights @ g
        value = float(g @ weighted)
        residual = weighted.reshape(self.sources, self.n, self.n)

        grad_rho = 0.0
        grad_beta = np.zeros(self.k)
        grad_gamma = np.zeros(self.k)
        grad_w = np.zeros_like(w)
        for l, pi_l in enumerate(pis):
            outer = -2.0 * np.einsum("kba,kbc->ac", residual, self.sx[:, l])
            if self.projected:
                outer = _project_rows(outer)
            h = np.linalg.solve(operator.T, outer)
            w_l = w if exogenous is None else exogenous[l]
            grad_beta[l] = np.trace(h)
            grad_gamma[l] = float(np.sum(h * w_l))
            grad_rho += float(np.sum(h * (w @ pi_l)))
            grad_w += rho * h @ pi_l.T
            if exogenous is None:
                grad_w += gamma[l] * h
        return value, ObjectiveGradient(grad_rho, grad_beta, grad_gamma, grad_w)

    # ── batched evaluation over particles ───────────────────────────────────
    def batch_values(self, rho: np.ndarray, beta: np.ndarray, gamma: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``g'Mg`` for P particles sharing the endogenous network across covariates."""
        count = rho.shape[0]
        values = np.full(count, config.SENTINEL_OBJECTIVE)
        stable = np.abs(rho) * np.abs(w).sum(axis=2).max(axis=1) < 1.0
        if not np.any(stable):
            return values
        rho_s, beta_s, gamma_s, w_s = rho[stable], beta[stable], gamma[stable], w[stable]
        eye = np.eye(self.n)
        operator = eye - rho_s[:, None, None] * w_s
        blocks = np.broadcast_to(self.sy, (rho_s.shape[0], *self.sy.shape)).copy()
        for l in range(self.k):
            rhs = beta_s[:, l, None, None] * eye + gamma_s[:, l, None, None] * w_s
            pi_t = np.swapaxes(np.linalg.solve(operator, rhs), 1, 2)
            if self.projected:
                pi_t = _project_cols(pi_t)
            blocks -= np.einsum("kab,pbc->pkac", self.sx[:, l], pi_t)
        g = blocks.reshape(rho_s.shape[0], -1)
        if self.weights is None:
            values[stable] = np.einsum("pi,pi->p", g, g)
        else:
            values[stable] = np.einsum("pi,ij,pj->p", g, self.weights, g)
        return values


def _sentinel_vector(size: int) -> np.ndarray:
    # g'g equals the sentinel objective under the identity weight
    return np.full(size, np.sqrt(config.SENTINEL_OBJECTIVE / size))


def _exogenous(theta: StructuralParams) -> list[np.ndarray] | None:
    if theta.exogenous_networks is None:
        return None
    return [net.weights for net in theta.exogenous_networks]


def gmm_moments(theta: StructuralParams, panel: PanelData, gmm: GmmConfig | None = None) -> np.ndarray:
    """Stacked 1/T cross moments of sources and structural residuals.

    When ``theta`` breaks A2 a constant sentinel vector is returned whose
    squared norm is the sentinel objective.
    """
    system = MomentSystem(panel, gmm)
    if theta.n != system.n or theta.k != system.k:
        raise InputError(f"theta is {theta.n} nodes x {theta.k} covariates, panel is {system.n} x {system.k}")
    g = system.moments(theta.rho, theta.beta, theta.gamma, theta.network.weights, _exogenous(theta))
    return _sentinel_vector(system.size) if g is None else g


def penalty_value(w: np.ndarray, p1: float, p2: float, l1_weights: np.ndarray | None = None) -> float:
    off = ~np.eye(w.shape[0], dtype=bool)
    absolute = np.abs(w[off])
    weights = 1.0 if l1_weights is None else l1_weights[off]
    return float(p1 * np.sum(weights * absolute) + p2 * np.sum(absolute**2))


def objective_stage1(
    theta: StructuralParams,
    panel: PanelData,
    penalty: PenaltyConfig,
    gmm: GmmConfig | None = None,
) -> float:
    """``g'Mg + p1 sum|W_ij| + p2 sum W_ij^2`` over off-diagonal entries."""
    system = MomentSystem(panel, gmm)
    value = system.value(theta.rho, theta.beta, theta.gamma, theta.network.weights, _exogenous(theta))
    return value + penalty_value(theta.network.weights, penalty.p1, penalty.p2)
