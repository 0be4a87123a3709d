"""Particle initialization and the particle swarm search over supports."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import Lasso

from sil import config
from sil.errors import ScreeningWarning
from sil.estimation.moments import MomentSystem
from sil.estimation.parameterization import pivot_columns
from sil.estimation.types import GmmConfig, PenaltyConfig
from sil.model.core import apply_transforms
from sil.model.types import Network, PanelData, StructuralParams

RHO_TILDE_MAX = math.sqrt(0.99)


def pooled_beta(panel: PanelData) -> np.ndarray:
    """Pooled OLS of y on x across units and periods."""
    design = panel.x.reshape(-1, panel.k)
    coef, *_ = np.linalg.lstsq(design, panel.y.reshape(-1), rcond=None)
    return coef


def screening_gradient(system: MomentSystem, beta_hat: np.ndarray) -> np.ndarray:
    """``-d(g'Mg)/dW`` at ``W = 0``, ``rho = .5``, ``gamma = 0``, off-diagonal only."""
    zero = np.zeros((system.n, system.n))
    _, grad = system.value_and_gradient(config.SCREEN_RHO, beta_hat, np.zeros(system.k), zero)
    descent = -grad.w
    np.fill_diagonal(descent, 0.0)
    return descent


def _row_normalize(weights: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Rescale rows to sum to 1; empty rows take one link at the fallback argmax."""
    weights = np.clip(weights, 0.0, None)
    np.fill_diagonal(weights, 0.0)
    for i in range(weights.shape[0]):
        if weights[i].sum() <= 0.0:
            row = fallback[i].copy()
            row[i] = -np.inf
            weights[i, int(np.argmax(row))] = 1.0
    return weights / weights.sum(axis=1, keepdims=True)


def _lasso_rows(target: np.ndarray, regressors: np.ndarray, alpha: float) -> np.ndarray:
    """Row i: non-negative lasso of unit i's series on the other units' series."""
    n = target.shape[1]
    weights = np.zeros((n, n))
    for i in range(n):
        others = np.delete(np.arange(n), i)
        model = Lasso(alpha=alpha, positive=True, fit_intercept=False, max_iter=10_000)
        model.fit(regressors[:, others], target[:, i])
        weights[i, others] = model.coef_
    return weights


def _top_share_mask(descent: np.ndarray, share: float) -> np.ndarray:
    n = descent.shape[0]
    off = ~np.eye(n, dtype=bool)
    count = math.ceil(share * n * (n - 1))
    flat = np.where(off, descent, -np.inf).ravel()
    order = np.argsort(-flat, kind="stable")[:count]
    mask = np.zeros(n * n, dtype=bool)
    mask[order] = True
    return mask.reshape(n, n)


def deterministic_networks(panel: PanelData, penalty: PenaltyConfig, gmm: GmmConfig) -> tuple[list[np.ndarray], np.ndarray]:
    """The six screened networks and the pooled beta used alongside them."""
    transformed = apply_transforms(panel, gmm.transforms)
    system = MomentSystem(panel, gmm)
    beta_hat = pooled_beta(transformed)
    descent = screening_gradient(system, beta_hat)
    n = system.n

    screened = descent > penalty.p1
    if not np.any(screened):
        warnings.warn(
            f"gradient screen at p1={penalty.p1} removed every link; falling back to uniform weights",
            ScreeningWarning,
            stacklevel=3,
        )
        uniform = np.ones((n, n))
        np.fill_diagonal(uniform, 0.0)
        uniform /= n - 1
        first = second = uniform
    else:
        first = _row_normalize(screened.astype(float), descent)
        second = _row_normalize(np.where(screened, descent, 0.0), descent)
    third = _row_normalize((descent > 0).astype(float), descent)
    fourth = _row_normalize(_top_share_mask(descent, config.TOP_SHARE).astype(float), descent)

    alpha = max(penalty.p1, config.LASSO_ALPHA_FLOOR)
    fifth = _row_normalize(_lasso_rows(transformed.y, transformed.y, alpha), descent)
    sixth = _row_normalize(_lasso_rows(transformed.y, transformed.x[:, :, 0], alpha), descent)
    return [first, second, third, fourth, fifth, sixth], beta_hat


def _random_network(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw of ``sqrt(W)`` over every off-diagonal entry, squared and row-normalized."""
    weights = rng.uniform(0.0, 1.0, size=(n, n)) ** 2
    np.fill_diagonal(weights, 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


def particle_swarm_init(
    panel: PanelData,
    penalty: PenaltyConfig,
    gmm: GmmConfig,
    rng: np.random.Generator | None = None,
) -> tuple[StructuralParams, ...]:
    """Six screened particles followed by random row-normalized draws."""
    rng = rng if rng is not None else np.random.default_rng(gmm.seed)
    networks, beta_hat = deterministic_networks(panel, penalty, gmm)
    k = panel.k
    particles = [
        StructuralParams(Network(w, nonneg=True, row_normalized=True), config.SCREEN_RHO, np.zeros(k), beta_hat)
        for w in networks
    ]
    for _ in range(gmm.particle_count - len(particles)):
        w = _random_network(panel.n, rng)
        rho = rng.uniform(0.0, 0.95)
        beta = beta_hat + rng.normal(0.0, 0.5, size=k)
        gamma = rng.uniform(-1.0, 1.0, size=k)
        particles.append(StructuralParams(Network(w, nonneg=True, row_normalized=True), rho, gamma, beta))
    return tuple(particles)


@dataclass(frozen=True)
class SwarmOutcome:
    rho: float
    beta: np.ndarray
    gamma: np.ndarray
    w: np.ndarray
    support: np.ndarray
    value: float
    iterations: int
    history: tuple[float, ...]


class ParticleSwarm:
    """Global-best swarm over every off-diagonal entry of ``W``.

    Positions hold ``sqrt(rho)`` and ``sqrt(W)``; a particle's network is its
    squared weights rescaled to unit row sums. Screened particles start with
    zeros outside their support but may move off them like any coordinate.
    The elastic net charges every entry except each row's pivot.
    """

    def __init__(
        self,
        system: MomentSystem,
        p1: float,
        p2: float,
        *,
        inertia: float = config.SWARM_INERTIA,
        cognitive: float = config.SWARM_COGNITIVE,
        social: float = config.SWARM_SOCIAL,
    ):
        self.system = system
        self.p1 = p1
        self.p2 = p2
        self.inertia = inertia
        self.cognitive = cognitive
        self.social = social

    def _networks(self, w_tilde: np.ndarray, masks: np.ndarray) -> np.ndarray:
        raw = masks * w_tilde**2
        sums = raw.sum(axis=2, keepdims=True)
        return np.divide(raw, sums, out=np.zeros_like(raw), where=sums > 0)

    def _evaluate(self, rho_t, beta, gamma, w_tilde, masks, penalized) -> np.ndarray:
        w = self._networks(w_tilde, masks)
        values = self.system.batch_values(rho_t**2, beta, gamma, w)
        values = values + self.p1 * np.sum(w * penalized, axis=(1, 2)) + self.p2 * np.sum(w**2 * penalized, axis=(1, 2))
        return values

    def run(self, particles: tuple[StructuralParams, ...], rng: np.random.Generator, iterations: int) -> SwarmOutcome:
        count = len(particles)
        rho_t = np.array([math.sqrt(min(max(p.rho, 0.0), 0.99)) for p in particles])
        beta = np.array([p.beta for p in particles])
        gamma = np.array([p.gamma for p in particles])
        weights = np.array([p.network.weights for p in particles])
        n = weights.shape[1]
        off = ~np.eye(n, dtype=bool)
        masks = np.broadcast_to(off, weights.shape).copy()
        w_tilde = np.sqrt(np.clip(weights, 0.0, None)) * masks
        pivots = pivot_columns(off)
        penalized = off.copy()
        penalized[np.arange(n), pivots] = False
        penalized = np.broadcast_to(penalized, weights.shape)

        vel_rho = 0.1 * rng.standard_normal(count)
        vel_beta = 0.1 * rng.standard_normal(beta.shape)
        vel_gamma = 0.1 * rng.standard_normal(gamma.shape)
        vel_w = 0.1 * rng.standard_normal(w_tilde.shape) * masks

        values = self._evaluate(rho_t, beta, gamma, w_tilde, masks, penalized)
        best_pos = [rho_t.copy(), beta.copy(), gamma.copy(), w_tilde.copy()]
        best_val = values.copy()
        leader = int(np.argmin(best_val))
        history = [float(best_val[leader])]
        stall = 0
        done = 0
        for _ in range(iterations):
            done += 1
            positions = (rho_t, beta, gamma, w_tilde)
            velocities = [vel_rho, vel_beta, vel_gamma, vel_w]
            for slot, (pos, vel) in enumerate(zip(positions, velocities)):
                r1 = rng.random(pos.shape)
                r2 = rng.random(pos.shape)
                vel *= self.inertia
                vel += self.cognitive * r1 * (best_pos[slot] - pos)
                vel += self.social * r2 * (best_pos[slot][leader] - pos)
                pos += vel
            vel_w *= masks
            w_tilde *= masks
            np.clip(rho_t, 0.0, RHO_TILDE_MAX, out=rho_t)

            values = self._evaluate(rho_t, beta, gamma, w_tilde, masks, penalized)
            improved = values < best_val
            best_val = np.where(improved, values, best_val)
            for slot, pos in enumerate((rho_t, beta, gamma, w_tilde)):
                best_pos[slot][improved] = pos[improved]
            new_leader = int(np.argmin(best_val))
            if history[-1] - best_val[new_leader] > config.SWARM_STALL_TOL:
                stall = 0
            else:
                stall += 1
            leader = new_leader
            history.append(float(best_val[leader]))
            if stall >= config.SWARM_STALL_ITERATIONS:
                break

        w_best = self._networks(best_pos[3][leader : leader + 1], masks[leader : leader + 1])[0]
        return SwarmOutcome(
            rho=float(best_pos[0][leader] ** 2),
            beta=best_pos[1][leader].copy(),
            gamma=best_pos[2][leader].copy(),
            w=w_best,
            support=w_best > config.ZERO_TOL,
            value=float(best_val[leader]),
            iterations=done,
            history=tuple(history),
        )
