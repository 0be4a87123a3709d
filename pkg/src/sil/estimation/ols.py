"""Equation-by-equation reduced-form estimators (OLS and adaptive lasso)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LassoLarsIC

from sil import config
from sil.errors import InsufficientDataError, RankDeficiencyError, ShortPanelWarning
from sil.model.core import apply_transforms
from sil.model.types import PanelData, ReducedForm

DEFAULT_TRANSFORMS = ("demean_time",)


@dataclass(frozen=True)
class OlsReducedForm:
    """``coef`` stacks each equation's coefficients by rows: entry ``i*N*K + k*N + j`` is ``Pi_k[i, j]``."""

    pi_hat: ReducedForm
    coef: np.ndarray
    cov: np.ndarray | None
    t_periods: int

    @property
    def n(self) -> int:
        return self.pi_hat.n

    @property
    def k(self) -> int:
        return len(self.pi_hat.pi)


def _design(panel: PanelData) -> np.ndarray:
    # column k*N + j holds x_{j,k}
    return np.concatenate([panel.x[:, :, k] for k in range(panel.k)], axis=1)


def _check_design(panel: PanelData, design: np.ndarray) -> None:
    columns = design.shape[1]
    needed = columns + config.OLS_MIN_EXTRA_PERIODS
    if panel.t < needed:
        raise InsufficientDataError(f"OLS reduced form needs T >= {needed} periods, got {panel.t}")
    if panel.t < config.OLS_COMFORT_FACTOR * columns:
        warnings.warn(
            f"T={panel.t} is below {config.OLS_COMFORT_FACTOR} x {columns}; OLS reduced form will be noisy",
            ShortPanelWarning,
            stacklevel=3,
        )
    if np.linalg.matrix_rank(design) < columns:
        raise RankDeficiencyError("covariates", "covariate design rank-deficient")


def _unstack(coef_rows: np.ndarray, n: int, k: int) -> ReducedForm:
    return ReducedForm(tuple(coef_rows[:, k_ * n : (k_ + 1) * n] for k_ in range(k)))


def estimate_ols_reduced_form(
    panel: PanelData,
    *,
    transforms: tuple[str, ...] = DEFAULT_TRANSFORMS,
    covariance: bool = True,
) -> OlsReducedForm:
    """OLS of each unit's outcome on every unit's covariates, with sandwich covariance."""
    panel = apply_transforms(panel, transforms)
    design = _design(panel)
    _check_design(panel, design)
    n, k = panel.n, panel.k

    xtx = design.T @ design
    coef_rows = np.linalg.solve(xtx, design.T @ panel.y).T  # N x NK
    coef = coef_rows.reshape(-1)
    cov = None
    if covariance:
        residuals = panel.y - design @ coef_rows.T
        xtx_inv = np.linalg.inv(xtx)
        scores = np.einsum("ti,tc->tic", residuals, design).reshape(panel.t, -1)
        meat = scores.T @ scores
        bread = np.kron(np.eye(n), xtx_inv)
        cov = bread @ meat @ bread
    return OlsReducedForm(pi_hat=_unstack(coef_rows, n, k), coef=coef, cov=cov, t_periods=panel.t)


def estimate_adaptive_lasso_reduced_form(
    panel: PanelData,
    *,
    transforms: tuple[str, ...] = DEFAULT_TRANSFORMS,
    exponent: float = 1.0,
) -> ReducedForm:
    """Adaptive lasso on each reduced-form equation.

    Columns are rescaled by ``|pi_ols|^exponent`` so that a plain lasso on the
    rescaled design penalizes ``|pi| / |pi_ols|^exponent``; the penalty level
    is chosen per equation by BIC along the LARS path.
    """
    ols = estimate_ols_reduced_form(panel, transforms=transforms, covariance=False)
    panel = apply_transforms(panel, transforms)
    design = _design(panel)
    n, k = panel.n, panel.k
    ols_rows = ols.coef.reshape(n, n * k)
    coef_rows = np.zeros_like(ols_rows)
    for i in range(n):
        scale = np.abs(ols_rows[i]) ** exponent
        model = LassoLarsIC(criterion="bic", fit_intercept=False)
        model.fit(design * scale, panel.y[:, i])
        coef_rows[i] = model.coef_ * scale
    return _unstack(coef_rows, n, k)
