"""Squared, row-sum-substituted coordinates for the refinement stage.

The optimizer works on ``z = (rho~, beta, gamma, w~)`` with ``rho = rho~^2``
and ``W_ij = w~_ij^2`` on the free support. In every normalized row one
pivot entry ``j*`` (the support entry nearest the diagonal) is not a
coordinate: it is set to ``1 - sum`` of the other entries in the row.
"""

from __future__ import annotations

import numpy as np

from sil import config
from sil.errors import InputError


def pivot_columns(support: np.ndarray) -> np.ndarray:
    """Per row, the support column closest to the diagonal (ties: smaller column); -1 if empty."""
    n = support.shape[0]
    pivots = np.full(n, -1)
    for i in range(n):
        cols = np.flatnonzero(support[i])
        if cols.size:
            distance = np.abs(cols - i)
            pivots[i] = cols[np.argmin(distance)]  # argmin keeps the first, i.e. smaller column
    return pivots


class RowSumParameterization:
    def __init__(self, support: np.ndarray, k: int, *, normalize: str = "all", normalized_row: int = 0):
        support = np.array(support, dtype=bool)
        np.fill_diagonal(support, False)
        self.n = support.shape[0]
        self.k = k
        self.support = support
        pivots = pivot_columns(support)
        if normalize == "one":
            keep = np.full(self.n, -1)
            keep[normalized_row] = pivots[normalized_row]
            pivots = keep
        elif normalize != "all":
            raise InputError(f"normalize must be 'all' or 'one', got {normalize!r}")
        self.pivots = pivots
        self.pivot_rows = np.flatnonzero(pivots >= 0)
        free = support.copy()
        free[self.pivot_rows, pivots[self.pivot_rows]] = False
        self.free = free
        self.free_rows, self.free_cols = np.nonzero(free)
        self.size = 1 + 2 * k + self.free_rows.size

    @property
    def free_count(self) -> int:
        return int(self.free_rows.size)

    def decode(self, z: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        k = self.k
        rho = float(z[0] ** 2)
        beta = np.asarray(z[1 : 1 + k], dtype=float)
        gamma = np.asarray(z[1 + k : 1 + 2 * k], dtype=float)
        w = np.zeros((self.n, self.n))
        w[self.free_rows, self.free_cols] = z[1 + 2 * k :] ** 2
        rows = self.pivot_rows
        w[rows, self.pivots[rows]] = 1.0 - w[rows].sum(axis=1)
        return rho, beta, gamma, w

    def encode(self, rho: float, beta, gamma, w: np.ndarray) -> np.ndarray:
        free_values = np.sqrt(np.clip(w[self.free_rows, self.free_cols], 0.0, None))
        return np.concatenate(
            [[np.sqrt(max(rho, 0.0))], np.asarray(beta, dtype=float), np.asarray(gamma, dtype=float), free_values]
        )

    def chain(self, z: np.ndarray, grad_rho: float, grad_beta, grad_gamma, grad_w: np.ndarray) -> np.ndarray:
        """Pull a gradient in (rho, beta, gamma, W) back to ``z``."""
        k = self.k
        effective = grad_w.copy()
        rows = self.pivot_rows
        pivot_grad = np.zeros(self.n)
        pivot_grad[rows] = grad_w[rows, self.pivots[rows]]
        effective = effective - pivot_grad[:, None]  # d W_ij* / d W_ij = -1 within a normalized row
        free_grad = effective[self.free_rows, self.free_cols] * 2.0 * z[1 + 2 * k :]
        return np.concatenate([[2.0 * z[0] * grad_rho], grad_beta, grad_gamma, free_grad])

    def feasibility(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        """Quadratic penalty on negative pivot entries and its gradient in W."""
        grad = np.zeros_like(w)
        rows = self.pivot_rows
        shortfall = np.minimum(w[rows, self.pivots[rows]], 0.0)
        grad[rows, self.pivots[rows]] = 2.0 * config.FEASIBILITY_WEIGHT * shortfall
        return float(config.FEASIBILITY_WEIGHT * np.sum(shortfall**2)), grad

    def free_penalty(self, w: np.ndarray, p1: float, p2: float, l1_weights: np.ndarray | None) -> tuple[float, np.ndarray]:
        """Elastic-net term on the free coordinates (W >= 0 there) and its gradient in W."""
        values = w[self.free_rows, self.free_cols]
        weights = np.ones_like(values) if l1_weights is None else l1_weights[self.free_rows, self.free_cols]
        grad = np.zeros_like(w)
        grad[self.free_rows, self.free_cols] = p1 * weights + 2.0 * p2 * values
        return float(p1 * np.sum(weights * values) + p2 * np.sum(values**2)), grad

    def rho_bounds(self) -> list[tuple[float | None, float | None]]:
        bounds: list[tuple[float | None, float | None]] = [(0.0, float(np.sqrt(0.999)))]
        bounds += [(None, None)] * (2 * self.k + self.free_count)
        return bounds
