"""Structural model containers and algebra."""

from sil.model.core import (
    check_assumptions,
    demean_time,
    global_difference,
    neumann_reduced_form,
    reachability,
    reduced_form,
    simulate_panel,
)
from sil.model.types import AssumptionReport, Network, PanelData, ReducedForm, ShockConfig, StructuralParams

__all__ = [
    "AssumptionReport",
    "Network",
    "PanelData",
    "ReducedForm",
    "ShockConfig",
    "StructuralParams",
    "check_assumptions",
    "demean_time",
    "global_difference",
    "neumann_reduced_form",
    "reachability",
    "reduced_form",
    "simulate_panel",
]
