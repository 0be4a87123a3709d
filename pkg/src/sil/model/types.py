"""Immutable containers for networks, structural parameters and panels."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from sil import config
from sil.errors import InputError


def _frozen_array(values: Any, *, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InputError(f"{name} contains missing or non-finite values")
    array.setflags(write=False)
    return array


def _labels(values: Sequence[Any] | None, size: int, name: str) -> tuple[str, ...]:
    if values is None:
        return tuple(str(i) for i in range(size))
    labels = tuple(str(v) for v in values)
    if len(labels) != size:
        raise InputError(f"{name} has {len(labels)} entries, expected {size}")
    if len(set(labels)) != size:
        raise InputError(f"{name} contains duplicates")
    return labels


@dataclass(frozen=True)
class Network:
    """Weighted directed interaction matrix; ``weights[i, j]`` is the influence of j on i."""

    weights: np.ndarray
    labels: tuple[str, ...] | None = None
    nonneg: bool = False
    row_normalized: bool = False

    def __post_init__(self) -> None:
        weights = _frozen_array(self.weights, ndim=2, name="network weights")
        n_rows, n_cols = weights.shape
        if n_rows != n_cols or n_rows < 1:
            raise InputError(f"network weights must be square and non-empty, got shape {weights.shape}")
        if np.any(np.diag(weights) != 0.0):
            raise InputError("A1 violated: network diagonal must be exactly zero")
        if self.nonneg and np.any(weights < 0.0):
            raise InputError("network flagged nonneg has negative entries")
        if self.row_normalized:
            sums = weights.sum(axis=1)
            active = np.any(weights != 0.0, axis=1)
            bad = active & (np.abs(sums - 1.0) > config.ROW_SUM_TOL)
            if np.any(bad):
                rows = np.flatnonzero(bad).tolist()
                raise InputError(f"A4' violated: rows {rows[:5]} do not sum to 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", _labels(self.labels, n_rows, "network labels"))

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def empty(cls, n: int, labels: Sequence[Any] | None = None) -> "Network":
        return cls(np.zeros((n, n)), labels=tuple(labels) if labels is not None else None, nonneg=True)

    def support(self, tol: float = config.ZERO_TOL) -> np.ndarray:
        """Boolean off-diagonal support ``|W_ij| > tol``."""
        return np.abs(self.weights) > tol

    def row_sums(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def relabel(self, order: Sequence[int]) -> "Network":
        """Permute nodes; ``order[k]`` is the old index placed at position k."""
        idx = np.asarray(order, dtype=int)
        assert self.labels is not None
        return Network(
            self.weights[np.ix_(idx, idx)],
            labels=tuple(self.labels[i] for i in idx),
            nonneg=self.nonneg,
            row_normalized=self.row_normalized,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "labels": list(self.labels or ()),
            "weights": self.weights.tolist(),
            "nonneg": self.nonneg,
            "row_normalized": self.row_normalized,
        }


@dataclass(frozen=True)
class StructuralParams:
    """Full parameter vector theta = (W, rho, gamma_k, beta_k).

    Assumptions A2-A5 are not enforced at construction (the non-uniqueness
    witness deliberately violates them); see ``validate`` and
    ``sil.model.core.check_assumptions``.
    """

    network: Network
    rho: float
    gamma: tuple[float, ...]
    beta: tuple[float, ...]
    exogenous_networks: tuple[Network, ...] | None = None

    def __post_init__(self) -> None:
        gamma = tuple(float(g) for g in np.atleast_1d(self.gamma))
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if len(gamma) != len(beta) or not beta:
            raise InputError(f"gamma and beta must have the same positive length, got {len(gamma)} and {len(beta)}")
        if not all(np.isfinite(gamma + beta)) or not np.isfinite(self.rho):
            raise InputError("structural scalars must be finite")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)
        if self.exogenous_networks is not None:
            nets = tuple(self.exogenous_networks)
            if len(nets) != len(beta):
                raise InputError(f"exogenous_networks has {len(nets)} entries, expected {len(beta)}")
            if any(net.n != self.network.n for net in nets):
                raise InputError("exogenous networks must match the endogenous network size")
            object.__setattr__(self, "exogenous_networks", nets)

    @property
    def k(self) -> int:
        return len(self.beta)

    @property
    def n(self) -> int:
        return self.network.n

    def exogenous_network(self, k: int) -> Network:
        if self.exogenous_networks is None:
            return self.network
        return self.exogenous_networks[k]

    def validate(self) -> None:
        """Raise ``AssumptionViolation`` for the first failing assumption among A1-A4."""
        from sil.model.core import check_assumptions

        check_assumptions(self).raise_for_violation(("A1", "A2", "A3", "A4"))

    def with_network(self, network: Network) -> "StructuralParams":
        return StructuralParams(network, self.rho, self.gamma, self.beta, self.exogenous_networks)

    def to_dict(self) -> dict:
        payload = {
            "rho": self.rho,
            "gamma": list(self.gamma),
            "beta": list(self.beta),
            "network": self.network.to_dict(),
        }
        if self.exogenous_networks is not None:
            payload["exogenous_networks"] = [net.to_dict() for net in self.exogenous_networks]
        return payload


@dataclass(frozen=True)
class PanelData:
    """T x N outcomes, T x N x K covariates and optional T x N x L instruments."""

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray | None = None
    unit_labels: tuple[str, ...] | None = None
    time_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y = _frozen_array(self.y, ndim=2, name="y")
        x_raw = np.asarray(self.x, dtype=float)
        if x_raw.ndim == 2:
            x_raw = x_raw[:, :, None]
        x = _frozen_array(x_raw, ndim=3, name="x")
        t_periods, n_units = y.shape
        if t_periods < 1 or n_units < 2:
            raise InputError(f"panel needs T >= 1 and N >= 2, got T={t_periods}, N={n_units}")
        if x.shape[:2] != y.shape or x.shape[2] < 1:
            raise InputError(f"x has shape {x.shape}, expected ({t_periods}, {n_units}, K>=1)")
        z = None
        if self.z is not None:
            z_raw = np.asarray(self.z, dtype=float)
            if z_raw.ndim == 2:
                z_raw = z_raw[:, :, None]
            z = _frozen_array(z_raw, ndim=3, name="z")
            if z.shape[:2] != y.shape:
                raise InputError(f"z has shape {z.shape}, expected ({t_periods}, {n_units}, L)")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "unit_labels", _labels(self.unit_labels, n_units, "unit_labels"))
        object.__setattr__(self, "time_labels", _labels(self.time_labels, t_periods, "time_labels"))

    @property
    def t(self) -> int:
        return int(self.y.shape[0])

    @property
    def n(self) -> int:
        return int(self.y.shape[1])

    @property
    def k(self) -> int:
        return int(self.x.shape[2])

    def replace(self, **changes: Any) -> "PanelData":
        fields_ = {
            "y": self.y,
            "x": self.x,
            "z": self.z,
            "unit_labels": self.unit_labels,
            "time_labels": self.time_labels,
        }
        fields_.update(changes)
        return PanelData(**fields_)


@dataclass(frozen=True)
class ReducedForm:
    """One N x N projection matrix per covariate."""

    pi: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        mats = tuple(_frozen_array(p, ndim=2, name="reduced form") for p in self.pi)
        if not mats:
            raise InputError("reduced form needs at least one matrix")
        n = mats[0].shape[0]
        if any(m.shape != (n, n) for m in mats):
            raise InputError("reduced-form matrices must all be square and of equal size")
        object.__setattr__(self, "pi", mats)

    @classmethod
    def single(cls, matrix: Any) -> "ReducedForm":
        return cls((np.asarray(matrix, dtype=float),))

    @property
    def first(self) -> np.ndarray:
        return self.pi[0]

    @property
    def n(self) -> int:
        return int(self.first.shape[0])


@dataclass(frozen=True)
class ShockConfig:
    """Shock structure for ``simulate_panel``.

    ``alpha_t = time_scale * N(1, 1)`` and ``alpha_i = unit_scale * N(1, 1)``;
    a disabled flag zeroes the component while keeping the RNG stream aligned.
    """

    unit_effects: bool = True
    unit_scale: float = 1.0
    time_effects: bool = True
    time_scale: float = 1.0
    noise_scale: float = 1.0
    noise_cross_correlation: float = 0.0
    covariate_shock_loading: tuple[float, float] = (0.0, 0.0)  # (alpha_t, alpha_i)
    covariate_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        q = float(self.noise_cross_correlation)
        if not 0.0 <= q <= 1.0:
            raise InputError(f"noise_cross_correlation must lie in [0, 1], got {q}")
        loading = tuple(float(v) for v in self.covariate_shock_loading)
        if len(loading) != 2:
            raise InputError("covariate_shock_loading must be a pair (time, unit)")
        if min(self.unit_scale, self.time_scale, self.noise_scale, self.covariate_scale) < 0:
            raise InputError("shock scales must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "covariate_shock_loading", loading)
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def noiseless(cls, seed: int = 0) -> "ShockConfig":
        return cls(unit_effects=False, time_effects=False, noise_scale=0.0, seed=seed)

    def with_seed(self, seed: int) -> "ShockConfig":
        payload = self.to_dict()
        payload["seed"] = int(seed)
        return ShockConfig(**payload)

    def to_dict(self) -> dict:
        return {
            "unit_effects": self.unit_effects,
            "unit_scale": self.unit_scale,
            "time_effects": self.time_effects,
            "time_scale": self.time_scale,
            "noise_scale": self.noise_scale,
            "noise_cross_correlation": self.noise_cross_correlation,
            "covariate_shock_loading": list(self.covariate_shock_loading),
            "covariate_scale": self.covariate_scale,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    holds: bool
    diagnostic: float
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...] = field(default_factory=tuple)
    extra: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    @property
    def all_hold(self) -> bool:
        return all(check.holds for check in self.checks)

    def raise_for_violation(self, names: Sequence[str] | None = None) -> None:
        from sil.errors import AssumptionViolation

        for check in self.checks:
            if names is not None and check.name not in names:
                continue
            if not check.holds:
                raise AssumptionViolation(check.name, check.detail, diagnostic=check.diagnostic)

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "assumptions": {
                check.name: {"holds": check.holds, "diagnostic": check.diagnostic, "detail": check.detail}
                for check in self.checks
            },
            "extra": dict(self.extra),
            "all_hold": self.all_hold,
        }
