"""Structural algebra: forward map, panel simulation and within transforms."""

from __future__ import annotations

import math
import warnings

import networkx as nx
import numpy as np
from scipy import linalg

from sil import config
from sil.errors import AssumptionViolation, DegenerateCovarianceWarning, InputError, InsufficientDataError
from sil.model.types import AssumptionCheck, AssumptionReport, Network, PanelData, ReducedForm, ShockConfig, StructuralParams


def spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def max_abs_row_sum(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix).sum(axis=1))) if matrix.size else 0.0


def social_operator(network: Network, rho: float) -> np.ndarray:
    """Return ``I - rho W`` after the condition-number guard."""
    n = network.n
    operator = np.eye(n) - rho * network.weights
    cond = np.linalg.cond(operator)
    if not np.isfinite(cond) or cond > config.COND_MAX:
        radius = spectral_radius(rho * network.weights)
        raise AssumptionViolation(
            "A2",
            f"I - rho W is not invertible (condition number {cond:.3e}, spectral radius of rho W {radius:.6f})",
            diagnostic=radius,
        )
    return operator


def reduced_form(params: StructuralParams) -> ReducedForm:
    """Map structural parameters to one projection matrix per covariate."""
    n = params.n
    lu = linalg.lu_factor(social_operator(params.network, params.rho))
    matrices = []
    for k in range(params.k):
        w_k = params.exogenous_network(k).weights
        rhs = params.beta[k] * np.eye(n) + params.gamma[k] * w_k
        matrices.append(linalg.lu_solve(lu, rhs))
    return ReducedForm(tuple(matrices))


def neumann_order(contraction: float, tol: float = config.NEUMANN_TOL) -> int:
    """Smallest M with ``q**(M+1) / (1 - q) <= tol`` for the contraction ``q``."""
    if contraction <= 0.0:
        return 1
    if contraction >= 1.0:
        raise AssumptionViolation("A2", f"Neumann series diverges (norm of rho W = {contraction:.6f})", diagnostic=contraction)
    order = math.ceil(math.log(tol * (1.0 - contraction)) / math.log(contraction)) - 1
    return int(min(max(order, 1), config.NEUMANN_MAX_TERMS))


def neumann_reduced_form(
    params: StructuralParams,
    *,
    terms: int | None = None,
    tol: float = config.NEUMANN_TOL,
) -> ReducedForm:
    """Truncated series ``beta I + (rho beta + gamma) sum_m rho^(m-1) W^m``.

    Only defined when every covariate shares the endogenous network. The order
    is picked from the geometric tail bound unless ``terms`` is given.
    """
    if params.exogenous_networks is not None and any(
        not np.array_equal(net.weights, params.network.weights) for net in params.exogenous_networks
    ):
        raise InputError("Neumann form requires the exogenous networks to equal the endogenous network")
    w = params.network.weights
    n = params.n
    order = terms if terms is not None else neumann_order(abs(params.rho) * max_abs_row_sum(w), tol)
    series = np.zeros((n, n))
    power = np.eye(n)
    for m in range(1, order + 1):
        power = power @ w
        series += params.rho ** (m - 1) * power
    matrices = tuple(
        beta * np.eye(n) + (params.rho * beta + gamma) * series for beta, gamma in zip(params.beta, params.gamma)
    )
    return ReducedForm(matrices)


def reachability(network: Network, tol: float = config.ZERO_TOL) -> np.ndarray:
    """``reach[i, j]`` is True when a directed path of length >= 1 leads from j to i."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(network.n))
    rows, cols = np.nonzero(network.support(tol))
    graph.add_edges_from(zip(cols.tolist(), rows.tolist()))
    reach = np.zeros((network.n, network.n), dtype=bool)
    for source in range(network.n):
        for target in nx.descendants(graph, source):
            reach[target, source] = True
        # a cycle back to the source also counts as a path
        if any(graph.has_edge(pred, source) for pred in nx.descendants(graph, source)):
            reach[source, source] = True
    return reach


def _noise_factor(n: int, q: float) -> np.ndarray:
    cov = (1.0 - q) * np.eye(n) + q * np.ones((n, n))
    if q >= 1.0:
        warnings.warn(
            f"disturbance correlation q=1 is singular; adding {config.Q1_JITTER:g} to the diagonal",
            DegenerateCovarianceWarning,
            stacklevel=3,
        )
        cov = cov + config.Q1_JITTER * np.eye(n)
    return linalg.cholesky(cov, lower=True)


def simulate_panel(params: StructuralParams, shocks: ShockConfig, t_periods: int) -> PanelData:
    """Draw a panel from ``y_t = (I - rho W)^-1 (x_t beta + W x_t gamma + alpha_t + alpha* + eps_t)``.

    Every stochastic component is drawn even when disabled so that toggling
    one flag leaves the other streams untouched.
    """
    if int(t_periods) < 1:
        raise InputError(f"t_periods must be >= 1, got {t_periods}")
    t_periods = int(t_periods)
    n, k = params.n, params.k
    rng = np.random.default_rng(shocks.seed)

    alpha_t = rng.normal(1.0, 1.0, size=t_periods)
    alpha_i = rng.normal(1.0, 1.0, size=n)
    x_raw = rng.standard_normal((t_periods, n, k))
    eps_raw = rng.standard_normal((t_periods, n))

    alpha_t = alpha_t * shocks.time_scale if shocks.time_effects else np.zeros(t_periods)
    alpha_i = alpha_i * shocks.unit_scale if shocks.unit_effects else np.zeros(n)
    load_t, load_i = shocks.covariate_shock_loading
    x = shocks.covariate_scale * x_raw + load_t * alpha_t[:, None, None] + load_i * alpha_i[None, :, None]

    q = float(shocks.noise_cross_correlation)
    if shocks.noise_scale > 0.0:
        eps = shocks.noise_scale * eps_raw @ _noise_factor(n, q).T
    else:
        eps = np.zeros((t_periods, n))

    rhs = alpha_t[:, None] + alpha_i[None, :] + eps
    for j in range(k):
        w_k = params.exogenous_network(j).weights
        rhs = rhs + params.beta[j] * x[:, :, j] + params.gamma[j] * x[:, :, j] @ w_k.T
    lu = linalg.lu_factor(social_operator(params.network, params.rho))
    y = linalg.lu_solve(lu, rhs.T).T
    return PanelData(y=y, x=x)


def demean_time(panel: PanelData) -> PanelData:
    """Subtract each unit's time average (individual fixed effects)."""
    if panel.t < 2:
        raise InsufficientDataError(f"insufficient periods for within transform: T={panel.t}")
    z = None if panel.z is None else panel.z - panel.z.mean(axis=0, keepdims=True)
    return panel.replace(
        y=panel.y - panel.y.mean(axis=0, keepdims=True),
        x=panel.x - panel.x.mean(axis=0, keepdims=True),
        z=z,
    )


def global_difference(panel: PanelData) -> PanelData:
    """Apply ``I - H`` to every period, removing common shocks."""
    z = None if panel.z is None else panel.z - panel.z.mean(axis=1, keepdims=True)
    return panel.replace(
        y=panel.y - panel.y.mean(axis=1, keepdims=True),
        x=panel.x - panel.x.mean(axis=1, keepdims=True),
        z=z,
    )


TRANSFORMS = {"demean_time": demean_time, "global_difference": global_difference}


def apply_transforms(panel: PanelData, names: tuple[str, ...] | list[str]) -> PanelData:
    for name in names:
        try:
            panel = TRANSFORMS[name](panel)
        except KeyError:
            raise InputError(f"unknown transform '{name}'; expected one of {sorted(TRANSFORMS)}") from None
    return panel


def check_assumptions(params: StructuralParams) -> AssumptionReport:
    """Evaluate A1-A5 (plus full row normalization) with one diagnostic each."""
    w = params.network.weights
    rho = params.rho
    diag_abs = float(np.max(np.abs(np.diag(w))))
    row_abs = max_abs_row_sum(rho * w)
    a3 = abs(rho * params.beta[0] + params.gamma[0])
    row_sums = w.sum(axis=1)
    a4 = float(np.min(np.abs(row_sums - 1.0)))
    active = np.any(np.abs(w) > config.ZERO_TOL, axis=1)
    a4_full = float(np.max(np.abs(row_sums[active] - 1.0))) if np.any(active) else math.inf
    diag_w2 = np.einsum("ij,ji->i", w, w)
    a5 = float(np.std(diag_w2))

    checks = (
        AssumptionCheck("A1", diag_abs <= config.ZERO_TOL, diag_abs, "max |diag(W)|"),
        AssumptionCheck("A2", abs(rho) < 1.0 and row_abs < 1.0, row_abs, f"max row sum |rho W| with |rho|={abs(rho):.6g}"),
        AssumptionCheck("A3", a3 > config.ZERO_TOL, a3, "|rho beta_1 + gamma_1|"),
        AssumptionCheck("A4", a4 <= config.ROW_SUM_TOL, a4, "min over rows of |row sum - 1|"),
        AssumptionCheck("A5", a5 > config.ZERO_TOL, a5, "sd of diag(W^2)"),
        AssumptionCheck("A4'", a4_full <= config.ROW_SUM_TOL, a4_full, "max |row sum - 1| over non-isolated rows"),
    )
    extra = {"abs_rho": abs(rho), "spectral_radius": spectral_radius(rho * w)}
    return AssumptionReport(checks=checks, extra=extra)
