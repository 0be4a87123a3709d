"""Configuration and result containers for the penalized GMM estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Any

import numpy as np

from sil import config
from sil.errors import InputError
from sil.model.types import StructuralParams

Triple = tuple[float, float, float]
MOMENT_SOURCES = ("covariates", "instruments")
NORMALIZE_MODES = ("all", "one")
DEFAULT_GRID: tuple[Triple, ...] = tuple(product(config.PENALTY_AXIS, repeat=3))


def parse_grid(text: str) -> tuple[Triple, ...]:
    """Parse ``"p1:p1s:p2,p1:p1s:p2"`` into penalty triples."""
    triples = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise InputError(f"grid point '{chunk}' must look like p1:p1_star:p2")
        try:
            triples.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise InputError(f"grid point '{chunk}' is not numeric") from exc
    return tuple(triples)  # type: ignore[return-value]


@dataclass(frozen=True)
class PenaltyConfig:
    """One penalty triple plus the grid it is selected from."""

    p1: float = 0.0
    p1_star: float = 0.0
    p2: float = 0.0
    adaptive_exponent: float = config.ADAPTIVE_EXPONENT
    grid: tuple[Triple, ...] = DEFAULT_GRID

    def __post_init__(self) -> None:
        if min(self.p1, self.p1_star, self.p2) < 0:
            raise InputError("penalty weights must be non-negative")
        if self.adaptive_exponent <= 0:
            raise InputError(f"adaptive_exponent must be positive, got {self.adaptive_exponent}")
        grid = tuple(tuple(float(v) for v in triple) for triple in self.grid)
        if not grid:
            raise InputError("penalty grid must not be empty")
        if any(len(triple) != 3 or min(triple) < 0 for triple in grid):
            raise InputError("every grid point must be a non-negative (p1, p1_star, p2) triple")
        object.__setattr__(self, "grid", grid)

    @property
    def triple(self) -> Triple:
        return (self.p1, self.p1_star, self.p2)

    def at(self, triple: Triple) -> "PenaltyConfig":
        p1, p1_star, p2 = triple
        return PenaltyConfig(p1, p1_star, p2, self.adaptive_exponent, self.grid)

    def frozen(self, triple: Triple) -> "PenaltyConfig":
        """Single-point grid at ``triple``."""
        return PenaltyConfig(*triple, adaptive_exponent=self.adaptive_exponent, grid=(tuple(triple),))

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p1_star": self.p1_star,
            "p2": self.p2,
            "adaptive_exponent": self.adaptive_exponent,
            "grid": [list(t) for t in self.grid],
        }


@dataclass(frozen=True)
class GmmConfig:
    weight_matrix: np.ndarray | None = None  # None means identity
    moment_source: str = "covariates"
    max_iterations: int = config.QUASI_NEWTON_MAX_ITER
    gradient_tolerance: float = config.GRADIENT_TOL
    parameter_tolerance: float = config.PARAMETER_TOL
    particle_count: int = config.PARTICLE_COUNT
    swarm_iterations: int = config.SWARM_ITERATIONS
    seed: int = 0
    normalize: str = "all"
    normalized_row: int = 0
    transforms: tuple[str, ...] = ("demean_time", "global_difference")
    threads: int = 1

    def __post_init__(self) -> None:
        if self.moment_source not in MOMENT_SOURCES:
            raise InputError(f"moment_source must be one of {MOMENT_SOURCES}, got {self.moment_source!r}")
        if self.normalize not in NORMALIZE_MODES:
            raise InputError(f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}")
        if self.particle_count < config.DETERMINISTIC_PARTICLES:
            raise InputError(f"particle_count must be at least {config.DETERMINISTIC_PARTICLES}")
        if self.max_iterations < 1 or self.swarm_iterations < 0:
            raise InputError("iteration limits must be positive")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.weight_matrix is not None:
            weights = np.array(self.weight_matrix, dtype=float)
            if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
                raise InputError("weight_matrix must be square")
            if not np.allclose(weights, weights.T, atol=1e-12):
                raise InputError("weight_matrix must be symmetric")
            if np.min(np.linalg.eigvalsh(weights)) <= 0:
                raise InputError("weight_matrix must be positive definite")
            weights.setflags(write=False)
            object.__setattr__(self, "weight_matrix", weights)

    def with_seed(self, seed: int) -> "GmmConfig":
        payload = {name: getattr(self, name) for name in self.__dataclass_fields__}
        payload["seed"] = int(seed)
        return GmmConfig(**payload)

    def to_dict(self) -> dict:
        return {
            "weight_matrix": "identity" if self.weight_matrix is None else "user",
            "moment_source": self.moment_source,
            "max_iterations": self.max_iterations,
            "gradient_tolerance": self.gradient_tolerance,
            "parameter_tolerance": self.parameter_tolerance,
            "particle_count": self.particle_count,
            "swarm_iterations": self.swarm_iterations,
            "seed": self.seed,
            "normalize": self.normalize,
            "normalized_row": self.normalized_row,
            "transforms": list(self.transforms),
        }


@dataclass(frozen=True)
class TwoSlsResult:
    rho: float
    beta: tuple[float, ...]
    gamma: tuple[float, ...]
    cov: np.ndarray
    n_obs: int

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def to_dict(self) -> dict:
        se = self.standard_errors.tolist()
        k = len(self.beta)
        return {
            "rho": self.rho,
            "beta": list(self.beta),
            "gamma": list(self.gamma),
            "se_rho": se[0],
            "se_beta": se[1 : 1 + k],
            "se_gamma": se[1 + k :],
            "cov": self.cov.tolist(),
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class GridPointResult:
    triple: Triple
    theta: StructuralParams
    stage1_theta: StructuralParams
    gmm_value: float
    bic: float
    nonzero_count: int

    def summary(self) -> dict:
        return {
            "penalty": list(self.triple),
            "gmm_value": self.gmm_value,
            "bic": self.bic,
            "nonzero_count": self.nonzero_count,
        }


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: StructuralParams
    chosen_penalty: Triple
    bic_value: float
    objective_value: float
    stage1_theta: StructuralParams
    post_2sls: TwoSlsResult | None
    zero_pattern: np.ndarray
    convergence_log: tuple[dict[str, Any], ...] = ()
    grid_summary: tuple[dict[str, Any], ...] = ()
    failed_points: tuple[Triple, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "schema_version": config.SCHEMA_VERSION,
            "theta_hat": self.theta_hat.to_dict(),
            "chosen_penalty": list(self.chosen_penalty),
            "bic_value": self.bic_value,
            "objective_value": self.objective_value,
            "stage1_theta": self.stage1_theta.to_dict(),
            "post_2sls": None if self.post_2sls is None else self.post_2sls.to_dict(),
            "zero_pattern": self.zero_pattern.astype(int).tolist(),
            "grid_summary": list(self.grid_summary),
            "failed_points": [list(t) for t in self.failed_points],
        }
