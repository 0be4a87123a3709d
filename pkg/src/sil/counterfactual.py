"""Equilibrium propagation of a unit shock and comparison across network hypotheses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg

from sil.errors import AssumptionViolation, InputError, UnknownUnitError
from sil.model.core import max_abs_row_sum
from sil.model.types import Network


def propagate(net: Network, rho: float, shock: np.ndarray) -> np.ndarray:
    """Full equilibrium response ``(I - rho W)^-1 shock``, feedback included."""
    shock = np.asarray(shock, dtype=float)
    if shock.shape != (net.n,):
        raise InputError(f"shock must have shape ({net.n},), got {shock.shape}")
    contraction = abs(rho) * max_abs_row_sum(net.weights)
    if contraction >= 1.0:
        raise AssumptionViolation("A2", f"|rho| * max row sum = {contraction:.6g} >= 1", diagnostic=contraction)
    operator = np.eye(net.n) - rho * net.weights
    return linalg.solve(operator, shock)


@dataclass(frozen=True)
class ShockScenario:
    """A proportional shock at one unit, evaluated under two candidate networks.

    ``baseline_outcomes`` are the pre-shock levels; use sample values to hold
    covariates and fixed effects at their observed state, or a unit vector
    to read the response as a relative change.
    """

    origin_unit: str
    shock_size: float
    networks: tuple[Network, Network]
    rho: float
    baseline_outcomes: np.ndarray

    def __post_init__(self) -> None:
        net_a, net_b = self.networks
        if net_a.n != net_b.n:
            raise InputError(f"hypotheses differ in size: {net_a.n} vs {net_b.n}")
        if tuple(net_a.labels or ()) != tuple(net_b.labels or ()):
            raise InputError("hypotheses must share unit labels")
        baseline = np.asarray(self.baseline_outcomes, dtype=float)
        if baseline.shape != (net_a.n,):
            raise InputError(f"baseline_outcomes must have shape ({net_a.n},), got {baseline.shape}")
        if not np.all(np.isfinite(baseline)):
            raise InputError("baseline_outcomes must be finite")
        baseline.setflags(write=False)
        object.__setattr__(self, "baseline_outcomes", baseline)
        object.__setattr__(self, "origin_unit", str(self.origin_unit))
        for name, net in zip("AB", self.networks):
            contraction = abs(self.rho) * max_abs_row_sum(net.weights)
            if contraction >= 1.0:
                raise AssumptionViolation("A2", f"hypothesis {name}: |rho| * max row sum = {contraction:.6g} >= 1", diagnostic=contraction)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.networks[0].labels or ())

    def shock_vector(self) -> np.ndarray:
        try:
            origin = self.labels.index(self.origin_unit)
        except ValueError:
            raise UnknownUnitError(f"origin unit '{self.origin_unit}' is not in the network") from None
        shock = np.zeros(len(self.labels))
        shock[origin] = self.shock_size * self.baseline_outcomes[origin]
        return shock

    def swapped(self) -> "ShockScenario":
        return ShockScenario(self.origin_unit, self.shock_size, self.networks[::-1], self.rho, self.baseline_outcomes)


@dataclass(frozen=True)
class Comparison:
    labels: tuple[str, ...]
    upsilon: np.ndarray
    defined: np.ndarray
    reasons: tuple[str, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "unit": list(self.labels),
                "upsilon": self.upsilon,
                "defined": self.defined.astype(bool),
                "reason": list(self.reasons),
            }
        )

    def write_csv(self, path: str | Path) -> Path:
        file_path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(file_path, index=False, float_format="%.17g", lineterminator="\n")
        return file_path


def compare_networks(scenario: ShockScenario) -> Comparison:
    """``log`` post-shock level under hypothesis A minus the same under B, per unit.

    A unit whose post-shock level is not strictly positive under either
    hypothesis is reported undefined with a reason instead of a value.
    """
    shock = scenario.shock_vector()
    net_a, net_b = scenario.networks
    baseline = scenario.baseline_outcomes
    post_a = baseline + propagate(net_a, scenario.rho, shock)
    post_b = baseline + propagate(net_b, scenario.rho, shock)

    upsilon = np.full(baseline.shape, math.nan)
    defined = (post_a > 0) & (post_b > 0)
    upsilon[defined] = np.log(post_a[defined]) - np.log(post_b[defined])
    reasons = []
    for a, b in zip(post_a, post_b):
        if a > 0 and b > 0:
            reasons.append("")
        elif a <= 0 and b <= 0:
            reasons.append("non-positive outcome under both hypotheses")
        else:
            reasons.append(f"non-positive outcome under hypothesis {'A' if a <= 0 else 'B'}")
    return Comparison(scenario.labels, upsilon, defined, tuple(reasons))
