"""Post-selection 2SLS with peers-of-peers instruments."""

from __future__ import annotations

import numpy as np

from sil.errors import EmptyNetworkError, RankDeficiencyError
from sil.estimation.types import TwoSlsResult
from sil.model.core import demean_time
from sil.model.types import Network, PanelData


def _lag(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Apply W to each period: ``(T, N, ...)`` -> ``(T, N, ...)``."""
    return np.einsum("ij,tj...->ti...", w, values)


def _check_instrument_rank(blocks: list[tuple[str, np.ndarray]]) -> np.ndarray:
    columns: list[np.ndarray] = []
    for name, block in blocks:
        candidate = np.column_stack([*columns, block]) if columns else block
        if np.linalg.matrix_rank(candidate) < candidate.shape[1]:
            raise RankDeficiencyError(name, "instrument matrix is rank-deficient")
        columns = [candidate]
    return columns[0]


def post_2sls(
    panel: PanelData,
    w_hat: Network,
    *,
    transforms: tuple[str, ...] = ("demean_time", "global_difference"),
) -> TwoSlsResult:
    """2SLS of y on (Wy, x, Wx) instrumented by (x, Wx, W^2 x), HC0 covariance.

    Spatial lags are built on time-demeaned data and the cross-sectional
    difference, if requested, is applied afterwards. The covariance does not
    account for W being estimated.
    """
    w = w_hat.weights
    if not np.any(np.abs(w) > 0.0):
        raise EmptyNetworkError("post-estimation 2SLS needs a network with at least one link")
    data = demean_time(panel) if "demean_time" in transforms else panel
    y, x = data.y, data.x
    wy = _lag(y, w)
    wx = _lag(x, w)
    w2x = _lag(wx, w)

    series = [y, wy, x, wx, w2x]
    if "global_difference" in transforms:
        series = [s - s.mean(axis=1, keepdims=True) for s in series]
    y, wy, x, wx, w2x = series

    k = panel.k
    n_obs = y.size
    target = y.reshape(-1)
    regressors = np.column_stack([wy.reshape(-1), x.reshape(n_obs, k), wx.reshape(n_obs, k)])
    instruments = _check_instrument_rank(
        [("x", x.reshape(n_obs, k)), ("Wx", wx.reshape(n_obs, k)), ("W2x", w2x.reshape(n_obs, k))]
    )

    first_stage, *_ = np.linalg.lstsq(instruments, regressors, rcond=None)
    fitted = instruments @ first_stage
    cross = fitted.T @ regressors
    if np.linalg.matrix_rank(cross) < cross.shape[0]:
        raise RankDeficiencyError("Wy", "projected regressors are rank-deficient")
    coef = np.linalg.solve(cross, fitted.T @ target)
    residuals = target - regressors @ coef
    bread = np.linalg.inv(fitted.T @ fitted)
    meat = (fitted * residuals[:, None] ** 2).T @ fitted
    cov = bread @ meat @ bread
    return TwoSlsResult(
        rho=float(coef[0]),
        beta=tuple(float(v) for v in coef[1 : 1 + k]),
        gamma=tuple(float(v) for v in coef[1 + k :]),
        cov=cov,
        n_obs=int(n_obs),
    )
