"""Adaptive Elastic Net GMM estimation of the interaction network."""

from sil.estimation.enet import estimate
from sil.estimation.iv import post_2sls
from sil.estimation.moments import MomentSystem, gmm_moments, objective_stage1
from sil.estimation.ols import estimate_adaptive_lasso_reduced_form, estimate_ols_reduced_form
from sil.estimation.swarm import particle_swarm_init
from sil.estimation.types import EstimationResult, GmmConfig, PenaltyConfig, TwoSlsResult

__all__ = [
    "EstimationResult",
    "GmmConfig",
    "MomentSystem",
    "PenaltyConfig",
    "TwoSlsResult",
    "estimate",
    "estimate_adaptive_lasso_reduced_form",
    "estimate_ols_reduced_form",
    "gmm_moments",
    "objective_stage1",
    "particle_swarm_init",
    "post_2sls",
]
