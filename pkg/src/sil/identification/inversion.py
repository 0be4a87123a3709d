"""Recover structural parameters from a reduced form.

For fixed scalars (rho, beta, gamma) the network implied by Pi is
``W = (Pi - beta I)(rho Pi + gamma I)^-1``, so inversion reduces to a
three-dimensional root search: pick the scalars that give W a zero diagonal
and the required row normalization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from sil import config
from sil.errors import ConvergenceError, InputError
from sil.model.core import check_assumptions, max_abs_row_sum, reduced_form
from sil.model.types import AssumptionReport, Network, ReducedForm, StructuralParams

PENALTY_SCALE = 1e3
BARRIER_MARGIN = 1e-8
FAILED_RESIDUAL = 1e6
HEURISTIC_RHOS = (0.1, 0.3, 0.5, 0.7)


@dataclass(frozen=True)
class InversionResult:
    params: StructuralParams | None
    residual: float
    converged: bool
    flags: tuple[str, ...] = ()
    assumptions: AssumptionReport | None = None
    start_index: int | None = None
    starts_tried: int = 0
    solver_cost: float = float("nan")
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "params": None if self.params is None else self.params.to_dict(),
            "residual": self.residual,
            "converged": self.converged,
            "flags": list(self.flags),
            "assumptions": None if self.assumptions is None else self.assumptions.to_dict(),
            "start_index": self.start_index,
            "starts_tried": self.starts_tried,
            "solver_cost": self.solver_cost,
        }


def implied_network(pi: np.ndarray, rho: float, beta: float, gamma: float) -> np.ndarray | None:
    """``(Pi - beta I)(rho Pi + gamma I)^-1`` or None when the right factor is singular."""
    n = pi.shape[0]
    right = rho * pi + gamma * np.eye(n)
    if not np.all(np.isfinite(right)) or np.linalg.cond(right) > config.COND_MAX:
        return None
    try:
        return np.linalg.solve(right.T, (pi - beta * np.eye(n)).T).T
    except np.linalg.LinAlgError:
        return None


class _Residuals:
    def __init__(self, pi: np.ndarray, normalized_rows: np.ndarray, nonneg: bool):
        self.pi = pi
        self.n = pi.shape[0]
        self.rows = normalized_rows
        self.nonneg = nonneg
        self.size = self.n + len(normalized_rows) + (self.n * self.n if nonneg else 0) + 2

    def __call__(self, scalars: np.ndarray) -> np.ndarray:
        rho, beta, gamma = (float(v) for v in scalars)
        w = implied_network(self.pi, rho, beta, gamma)
        if w is None:
            return np.full(self.size, FAILED_RESIDUAL)
        parts = [np.diag(w), w[self.rows].sum(axis=1) - 1.0]
        if self.nonneg:
            off = w.copy()
            np.fill_diagonal(off, 0.0)
            parts.append(np.minimum(off, 0.0).ravel())
        off_w = w - np.diag(np.diag(w))
        sign_gap = max(0.0, BARRIER_MARGIN - (rho * beta + gamma))
        stability_gap = max(0.0, abs(rho) * max_abs_row_sum(off_w) - (1.0 - BARRIER_MARGIN), abs(rho) - (1.0 - BARRIER_MARGIN))
        parts.append(np.array([PENALTY_SCALE * sign_gap, PENALTY_SCALE * stability_gap]))
        return np.concatenate(parts)


def _starts(pi: np.ndarray, normalized_rows: np.ndarray, random_starts: int, seed: int) -> list[np.ndarray]:
    """Row-sum-law heuristics first, then random admissible draws."""
    beta0 = float(np.mean(np.diag(pi)))
    level = float(np.mean(pi[normalized_rows].sum(axis=1)))
    starts = [np.array([rho, beta0, level * (1.0 - rho) - beta0]) for rho in HEURISTIC_RHOS]
    rng = np.random.default_rng(seed)
    for _ in range(random_starts):
        starts.append(np.array([rng.uniform(-0.95, 0.95), beta0 + rng.normal(0.0, 0.5), rng.uniform(-1.0, 1.0)]))
    return starts


def _solve_start(residuals: _Residuals, start: np.ndarray) -> tuple[float, np.ndarray]:
    try:
        solution = optimize.least_squares(
            residuals,
            start,
            method="lm" if residuals.size >= 3 else "trf",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=4000,
        )
    except (ValueError, np.linalg.LinAlgError):
        return float("inf"), start
    return float(solution.cost), solution.x


def _normalized_rows(n: int, normalize: str, normalized_row: int) -> np.ndarray:
    if normalize == "all":
        return np.arange(n)
    if normalize != "one":
        raise InputError(f"normalize must be 'one' or 'all', got {normalize!r}")
    if not 0 <= normalized_row < n:
        raise InputError(f"normalized_row {normalized_row} is outside 0..{n - 1}")
    return np.array([normalized_row])


def _scalar_pi_result(pi: ReducedForm, labels: tuple[str, ...] | None) -> InversionResult:
    diag = np.diag(pi.first)
    beta = float(diag.mean())
    flags = ["empty_network", "A3_degenerate", "A5_degenerate"]
    if np.max(np.abs(diag - beta)) > config.ZERO_TOL:
        flags.append("heterogeneous_diagonal")
    params = StructuralParams(Network.empty(pi.n, labels), 0.0, (0.0,), (beta,))
    residual = float(np.max(np.abs(reduced_form(params).first - pi.first)))
    return InversionResult(
        params=params,
        residual=residual,
        converged=residual <= config.INVERSION_RESIDUAL_TOL,
        flags=tuple(flags),
        assumptions=check_assumptions(params),
    )


def fit_structural(
    pi: ReducedForm,
    normalized_row: int = 0,
    *,
    normalize: str = "one",
    nonneg: bool = False,
    random_starts: int = config.INVERSION_RANDOM_STARTS,
    seed: int = 0,
    threads: int = 1,
    prune_tol: float = config.ZERO_TOL,
    labels: tuple[str, ...] | None = None,
) -> InversionResult:
    """Best least-squares structural fit to ``pi`` without demanding exactness.

    Starts are evaluated in parallel but reduced in order: lowest residual
    wins, ties go to the lowest start index.
    """
    matrix = pi.first
    n = pi.n
    off = matrix[~np.eye(n, dtype=bool)]
    if off.size == 0 or np.max(np.abs(off)) <= config.ZERO_TOL:
        return _scalar_pi_result(pi, labels)

    rows = _normalized_rows(n, normalize, normalized_row)
    residuals = _Residuals(matrix, rows, nonneg)
    starts = _starts(matrix, rows, random_starts, seed)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as executor:
        outcomes = list(executor.map(lambda start: _solve_start(residuals, start), starts))
    best_index = min(range(len(outcomes)), key=lambda i: (outcomes[i][0], i))
    cost, scalars = outcomes[best_index]
    rho, beta, gamma = (float(v) for v in scalars)
    w = implied_network(matrix, rho, beta, gamma) if np.isfinite(cost) else None
    if w is None:
        return InversionResult(None, float("inf"), False, ("no_solution",), None, None, len(starts), cost)

    np.fill_diagonal(w, 0.0)
    w[np.abs(w) <= prune_tol] = 0.0
    if nonneg:
        w = np.clip(w, 0.0, None)
    params = StructuralParams(Network(w, labels=labels, nonneg=nonneg), rho, (gamma,), (beta,))
    report = check_assumptions(params)
    try:
        residual = float(np.max(np.abs(reduced_form(params).first - matrix)))
    except InputError:
        residual = float("inf")
    flags = tuple(check.name for check in report.checks if not check.holds and check.name != "A4'")
    return InversionResult(
        params=params,
        residual=residual,
        converged=residual <= config.INVERSION_RESIDUAL_TOL,
        flags=flags,
        assumptions=report,
        start_index=best_index,
        starts_tried=len(starts),
        solver_cost=cost,
    )


def invert_exact(
    pi: ReducedForm,
    normalized_row: int = 0,
    *,
    nonneg: bool = False,
    random_starts: int = config.INVERSION_RANDOM_STARTS,
    seed: int = 0,
    threads: int = 1,
    labels: tuple[str, ...] | None = None,
) -> InversionResult:
    """Recover theta in the positive-sign set from an exactly known Pi.

    Raises ConvergenceError when no start reproduces Pi; a reproducing theta
    that breaks an assumption comes back with ``flags`` set.
    """
    if pi.n > config.INVERSION_MAX_N:
        raise InputError(f"exact inversion supports N <= {config.INVERSION_MAX_N}, got {pi.n}")
    result = fit_structural(
        pi,
        normalized_row,
        normalize="one",
        nonneg=nonneg,
        random_starts=random_starts,
        seed=seed,
        threads=threads,
        labels=labels,
    )
    if not result.converged:
        raise ConvergenceError("exact inversion did not reproduce the reduced form", best_residual=result.residual)
    return result


def nonuniqueness_witness() -> tuple[StructuralParams, StructuralParams]:
    """Two 5-node pentagon structures with the same reduced form.

    Both have a constant diag(W^2) and the second uses rho = 1.5, so each
    breaks the conditions that make Pi pin down theta.
    """
    ring = np.zeros((5, 5))
    skip = np.zeros((5, 5))
    for i in range(5):
        ring[i, (i + 1) % 5] = ring[i, (i - 1) % 5] = 0.5
        skip[i, (i + 2) % 5] = skip[i, (i - 2) % 5] = 0.5
    theta_0 = StructuralParams(Network(ring, nonneg=True, row_normalized=True), 0.5, (0.5,), (1.0,))
    theta_1 = StructuralParams(Network(skip, nonneg=True, row_normalized=True), 1.5, (-2.5,), (1.0,))
    return theta_0, theta_1
