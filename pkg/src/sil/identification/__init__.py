"""Identification checks and exact recovery of structural parameters."""

from sil.identification.eigen import EigenAnalysis, SignReport, eigen_analysis, sign_of_network_effect
from sil.identification.inversion import InversionResult, fit_structural, invert_exact, nonuniqueness_witness
from sil.identification.multivariate import CovariateEffects, recover_covariate_effects
from sil.identification.wald import WaldReport, rowsum_wald_test

__all__ = [
    "CovariateEffects",
    "EigenAnalysis",
    "InversionResult",
    "SignReport",
    "WaldReport",
    "eigen_analysis",
    "fit_structural",
    "invert_exact",
    "nonuniqueness_witness",
    "recover_covariate_effects",
    "rowsum_wald_test",
    "sign_of_network_effect",
]
