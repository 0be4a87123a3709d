"""Two-stage Adaptive Elastic Net GMM with BIC penalty selection."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import optimize

from sil import config
from sil.errors import ConvergenceError, GridPointWarning, InputError, InsufficientDataError, NumericalError
from sil.estimation.iv import post_2sls
from sil.estimation.moments import MomentSystem
from sil.estimation.parameterization import RowSumParameterization
from sil.estimation.swarm import ParticleSwarm, particle_swarm_init
from sil.estimation.types import EstimationResult, GmmConfig, GridPointResult, PenaltyConfig, Triple
from sil.model.types import Network, PanelData, StructuralParams

MAX_PRUNE_PASSES = 5
QUASI_NEWTON_FTOL = 1e-16
_RECOVERABLE = (NumericalError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class _Point:
    rho: float
    beta: np.ndarray
    gamma: np.ndarray
    w: np.ndarray


def bic(gmm_value: float, nonzero: int, t_periods: int) -> float:
    return math.log(max(gmm_value, config.BIC_FLOOR)) + nonzero * math.log(t_periods) / t_periods


def nonzero_links(w: np.ndarray, tol: float = config.ZERO_TOL) -> int:
    off = ~np.eye(w.shape[0], dtype=bool)
    return int(np.count_nonzero(np.abs(w[off]) > tol))


def seed_links(w: np.ndarray, floor: float = config.REFINE_SEED_WEIGHT) -> np.ndarray:
    """Lift off-diagonal entries to ``floor`` and restore unit row sums.

    In squared coordinates a zero entry has zero gradient, so refinement
    could never switch it on.
    """
    off = ~np.eye(w.shape[0], dtype=bool)
    lifted = np.where(off, np.maximum(np.clip(w, 0.0, None), floor), 0.0)
    return lifted / lifted.sum(axis=1, keepdims=True)


class _Objective:
    """Penalized objective in squared, row-sum-substituted coordinates."""

    def __init__(self, system: MomentSystem, param: RowSumParameterization, p1: float, p2: float, l1_weights):
        self.system = system
        self.param = param
        self.p1 = p1
        self.p2 = p2
        self.l1_weights = l1_weights

    def value_and_gradient(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        rho, beta, gamma, w = self.param.decode(z)
        value, grad = self.system.value_and_gradient(rho, beta, gamma, w)
        if value >= config.SENTINEL_OBJECTIVE:
            return value, np.zeros_like(z)
        pen, pen_grad = self.param.free_penalty(w, self.p1, self.p2, self.l1_weights)
        feas, feas_grad = self.param.feasibility(w)
        grad_w = grad.w + pen_grad + feas_grad
        return value + pen + feas, self.param.chain(z, grad.rho, grad.beta, grad.gamma, grad_w)

    def __call__(self, z: np.ndarray) -> float:
        return self.value_and_gradient(z)[0]


class _Fitter:
    def __init__(self, panel: PanelData, gmm: GmmConfig, system: MomentSystem):
        self.panel = panel
        self.gmm = gmm
        self.system = system
        self.t = panel.t

    # ── local refinement ────────────────────────────────────────────────────
    def refine(self, objective: _Objective, z0: np.ndarray, log: list[dict], tag: dict) -> tuple[np.ndarray, float]:
        best_z = z0
        best_f = objective(z0)
        log.append({**tag, "phase": "start", "objective": best_f})

        if 0 < objective.param.size <= config.SIMPLEX_MAX_DIM:
            trail: list[float] = []
            result = optimize.minimize(
                objective,
                best_z,
                method="Nelder-Mead",
                callback=lambda xk: trail.append(objective(xk)),
                options={"maxiter": config.SIMPLEX_MAX_ITER, "xatol": self.gmm.parameter_tolerance, "fatol": 1e-14},
            )
            log.extend({**tag, "phase": "simplex", "objective": f} for f in trail)
            if result.fun < best_f:
                # rho = z0**2, so the sign is free; fold it into the quasi-Newton bounds
                best_z, best_f = result.x.copy(), float(result.fun)
                best_z[0] = abs(best_z[0])

        trail = []
        result = optimize.minimize(
            objective.value_and_gradient,
            best_z,
            method="L-BFGS-B",
            jac=True,
            bounds=objective.param.rho_bounds(),
            callback=lambda xk: trail.append(objective(xk)),
            options={
                "maxiter": self.gmm.max_iterations,
                "gtol": self.gmm.gradient_tolerance,
                "ftol": QUASI_NEWTON_FTOL,
            },
        )
        log.extend({**tag, "phase": "quasi_newton", "objective": f} for f in trail)
        if result.fun < best_f:
            best_z, best_f = result.x, float(result.fun)
        log.append({**tag, "phase": "accepted", "objective": best_f})
        return best_z, best_f

    def fit_support(
        self,
        support: np.ndarray,
        start: _Point,
        p1: float,
        p2: float,
        l1_weights: np.ndarray | None,
        log: list[dict],
        tag: dict,
        *,
        prune: bool = True,
    ) -> _Point:
        """Refine on ``support``; with ``prune``, drop links below the tolerance and refit until stable."""
        support = support.copy()
        np.fill_diagonal(support, False)
        point = start
        for pass_no in range(MAX_PRUNE_PASSES):
            param = RowSumParameterization(
                support, self.system.k, normalize=self.gmm.normalize, normalized_row=self.gmm.normalized_row
            )
            objective = _Objective(self.system, param, p1, p2, l1_weights)
            z0 = param.encode(point.rho, point.beta, point.gamma, point.w)
            z, _ = self.refine(objective, z0, log, {**tag, "pass": pass_no})
            point = _Point(*param.decode(z))
            if not prune:
                w = np.clip(point.w, 0.0, None)
                np.fill_diagonal(w, 0.0)
                return _Point(point.rho, point.beta, point.gamma, w)
            small = support & (point.w < config.PRUNE_TOL)
            if not np.any(small):
                break
            support &= ~small
            point.w = np.where(support, point.w, 0.0)
            log.append({**tag, "pass": pass_no, "phase": "prune", "removed": int(small.sum())})
        return _Point(point.rho, point.beta, point.gamma, self._clean(point.w))

    def _clean(self, w: np.ndarray) -> np.ndarray:
        w = np.where(w < config.PRUNE_TOL, 0.0, w)
        np.fill_diagonal(w, 0.0)
        if self.gmm.normalize == "all":
            sums = w.sum(axis=1, keepdims=True)
            w = np.divide(w, sums, out=np.zeros_like(w), where=sums > 0)
        else:
            row = self.gmm.normalized_row
            total = w[row].sum()
            if total > 0:
                w[row] = w[row] / total
        return w

    def scale(self, point: _Point, p2: float) -> _Point:
        """Multiply free W coordinates by ``1 + p2/T``; a row whose pivot would turn negative stays as is."""
        factor = 1.0 + p2 / self.t
        if p2 == 0.0:
            return point
        support = np.abs(point.w) > config.ZERO_TOL
        param = RowSumParameterization(support, self.system.k, normalize=self.gmm.normalize, normalized_row=self.gmm.normalized_row)
        w = point.w.copy()
        for i in range(w.shape[0]):
            free = param.free[i]
            pivot = param.pivots[i]
            if pivot < 0:
                w[i, free] *= factor
                continue
            scaled = w[i, free] * factor
            remainder = 1.0 - scaled.sum()
            if remainder < 0.0:
                continue
            w[i, free] = scaled
            w[i, pivot] = remainder
        return _Point(point.rho, point.beta, point.gamma, w)

    # ── stages ──────────────────────────────────────────────────────────────
    def stage1(self, p1: float, p2: float, index: int, penalty: PenaltyConfig) -> tuple[_Point, list[dict]]:
        log: list[dict] = []
        tag = {"stage": 1, "p1": p1, "p2": p2}
        rng = np.random.default_rng(np.random.SeedSequence(self.gmm.seed, spawn_key=(index,)))
        particles = particle_swarm_init(self.panel, penalty.at((p1, 0.0, p2)), self.gmm, rng)
        outcome = ParticleSwarm(self.system, p1, p2).run(particles, rng, self.gmm.swarm_iterations)
        log.append({**tag, "phase": "swarm", "objective": outcome.value, "iterations": outcome.iterations})
        start = _Point(outcome.rho, outcome.beta, outcome.gamma, seed_links(outcome.w))
        full = ~np.eye(self.system.n, dtype=bool)
        point = self.fit_support(full, start, p1, p2, None, log, tag, prune=False)
        return point, log

    def stage2(self, stage1: _Point, triple: Triple, exponent: float) -> tuple[_Point, _Point, list[dict]]:
        p1, p1_star, p2 = triple
        log: list[dict] = []
        tag = {"stage": 2, "p1": p1, "p1_star": p1_star, "p2": p2}
        start = self.scale(stage1, p2)
        # entries that vanished in stage 1 carry an infinite adaptive weight
        support = start.w >= config.PRUNE_TOL
        np.fill_diagonal(support, False)
        start = _Point(start.rho, start.beta, start.gamma, self._clean(np.where(support, start.w, 0.0)))
        l1_weights = np.zeros_like(start.w)
        l1_weights[support] = np.abs(start.w[support]) ** (-exponent)
        point = self.fit_support(support, start, p1_star, p2, l1_weights, log, tag)
        return start, self.scale(point, p2), log

    def to_params(self, point: _Point) -> StructuralParams:
        network = Network(point.w, labels=self.panel.unit_labels, nonneg=True, row_normalized=self.gmm.normalize == "all")
        return StructuralParams(network, point.rho, tuple(point.gamma), tuple(point.beta))


def estimate(
    panel: PanelData,
    penalty: PenaltyConfig | None = None,
    gmm: GmmConfig | None = None,
) -> EstimationResult:
    """Select (p1, p1*, p2) by BIC over the grid and return the chosen estimate.

    Stage-1 fits depend only on (p1, p2) and are shared across p1*. Grid
    points run on ``gmm.threads`` workers; the result does not depend on
    scheduling because every point has its own seed and ties go to the
    lexicographically smallest triple.
    """
    penalty = penalty or PenaltyConfig()
    gmm = gmm or GmmConfig()
    if panel.t < 3:
        raise InsufficientDataError(f"estimation needs T >= 3, got {panel.t}")
    if gmm.normalize == "one" and not 0 <= gmm.normalized_row < panel.n:
        raise InputError(f"normalized_row {gmm.normalized_row} is outside 0..{panel.n - 1}")
    system = MomentSystem(panel, gmm)
    fitter = _Fitter(panel, gmm, system)

    grid = sorted(set(penalty.grid))
    pairs = sorted({(p1, p2) for p1, _, p2 in grid})

    def _run_stage1(item: tuple[int, tuple[float, float]]):
        index, (p1, p2) = item
        try:
            return fitter.stage1(p1, p2, index, penalty)
        except _RECOVERABLE as exc:
            return None, [{"stage": 1, "p1": p1, "p2": p2, "phase": "failed", "error": repr(exc)}]

    with ThreadPoolExecutor(max_workers=gmm.threads) as executor:
        stage1_runs = dict(zip(pairs, executor.map(_run_stage1, enumerate(pairs))))

    def _run_point(triple: Triple):
        p1, _, p2 = triple
        stage1, _ = stage1_runs[(p1, p2)]
        if stage1 is None:
            return None, []
        try:
            scaled1, point, log = fitter.stage2(stage1, triple, penalty.adaptive_exponent)
            gmm_value = system.value(point.rho, point.beta, point.gamma, point.w)
            if gmm_value >= config.SENTINEL_OBJECTIVE:
                raise NumericalError("estimate violates the stability condition")
            count = nonzero_links(point.w)
            result = GridPointResult(
                triple=triple,
                theta=fitter.to_params(point),
                stage1_theta=fitter.to_params(scaled1),
                gmm_value=gmm_value,
                bic=bic(gmm_value, count, panel.t),
                nonzero_count=count,
            )
            return result, log
        except _RECOVERABLE as exc:
            return None, log + [{"stage": 2, "penalty": list(triple), "phase": "failed", "error": repr(exc)}]

    with ThreadPoolExecutor(max_workers=gmm.threads) as executor:
        outcomes = list(executor.map(_run_point, grid))

    convergence_log: list[dict[str, Any]] = []
    for pair in pairs:
        convergence_log.extend(stage1_runs[pair][1])
    results: list[GridPointResult] = []
    failed: list[Triple] = []
    for triple, (result, log) in zip(grid, outcomes):
        convergence_log.extend(log)
        if result is None:
            failed.append(triple)
        else:
            results.append(result)
    for triple in failed:
        warnings.warn(f"grid point {triple} failed and was skipped", GridPointWarning, stacklevel=2)
    if not results:
        raise ConvergenceError("every penalty grid point failed", logs=convergence_log)

    chosen = min(results, key=lambda r: (r.bic, r.triple))
    two_sls = None
    if chosen.nonzero_count:
        try:
            two_sls = post_2sls(panel, chosen.theta.network, transforms=gmm.transforms)
        except (NumericalError, InputError) as exc:
            convergence_log.append({"stage": "post_2sls", "phase": "failed", "error": repr(exc)})

    return EstimationResult(
        theta_hat=chosen.theta,
        chosen_penalty=chosen.triple,
        bic_value=chosen.bic,
        objective_value=chosen.gmm_value,
        stage1_theta=chosen.stage1_theta,
        post_2sls=two_sls,
        zero_pattern=np.abs(chosen.theta.network.weights) <= config.ZERO_TOL,
        convergence_log=tuple(convergence_log),
        grid_summary=tuple(r.summary() for r in sorted(results, key=lambda r: r.triple)),
        failed_points=tuple(failed),
    )
