"""Wald test that every row of the network sums to the same constant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from sil import config
from sil.errors import InputError, RankDeficiencyError
from sil.estimation.ols import DEFAULT_TRANSFORMS, OlsReducedForm, estimate_ols_reduced_form
from sil.model.types import PanelData


@dataclass(frozen=True)
class WaldReport:
    statistic: float
    dof: int
    p_value: float
    row_sums: np.ndarray

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value < level

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "row_sums": self.row_sums.tolist(),
        }


def restriction_matrix(n: int, k: int = 1) -> np.ndarray:
    """Contrast of each row sum of Pi_1 against the last row's sum.

    With ``k == 1`` this is ``[I_{N-1} (x) i', -i_{N-1} (x) i']`` acting on
    Pi stacked by rows.
    """
    width = n * k
    restriction = np.zeros((n - 1, n * width))
    for i in range(n - 1):
        restriction[i, i * width : i * width + n] = 1.0
        restriction[i, (n - 1) * width : (n - 1) * width + n] = -1.0
    return restriction


def rowsum_wald_statistic(ols: OlsReducedForm) -> WaldReport:
    if ols.cov is None:
        raise InputError("Wald test needs the OLS covariance")
    n, k = ols.n, ols.k
    restriction = restriction_matrix(n, k)
    contrast = restriction @ ols.coef
    middle = restriction @ ols.cov @ restriction.T
    try:
        solved = np.linalg.solve(middle, contrast)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("restriction covariance", "covariate design rank-deficient") from exc
    statistic = max(float(contrast @ solved), 0.0)
    dof = n - 1
    return WaldReport(
        statistic=statistic,
        dof=dof,
        p_value=float(stats.chi2.sf(statistic, dof)),
        row_sums=ols.pi_hat.first.sum(axis=1),
    )


def rowsum_wald_test(panel: PanelData, *, transforms: tuple[str, ...] = DEFAULT_TRANSFORMS) -> WaldReport:
    """Chi-square(N-1) test of constant row sums of the first reduced-form matrix."""
    return rowsum_wald_statistic(estimate_ols_reduced_form(panel, transforms=transforms))
