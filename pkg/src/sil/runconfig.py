"""JSON run-config parsing with field-path diagnostics.

Every section is validated by hand into the frozen dataclasses the library
already uses; unknown keys are rejected so typos surface as errors instead of
silently falling back to defaults. The whole document is then checked
against the shipped JSON schema (``sil/schemas/config.schema.json``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from sil import config, schemas
from sil.errors import ConfigError, InputError
from sil.estimation.types import DEFAULT_GRID, GmmConfig, PenaltyConfig, Triple, parse_grid
from sil.model.types import Network, ShockConfig, StructuralParams

_MISSING = object()
NETWORK_KINDS = ("erdos_renyi", "political_party", "highschool", "village", "from_file")


def load_json(path: str | Path) -> dict:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"no such file: {file_path}")
    text = file_path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(payload, dict):
        raise ConfigError("top level must be a JSON object")
    return payload


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def check_keys(payload: dict, allowed: tuple[str, ...], path: str = "") -> None:
    for key in payload:
        if key not in allowed:
            raise ConfigError(f"unknown field; expected one of {sorted(allowed)}", field=_join(path, key))


def section(payload: dict, key: str, path: str = "", *, required: bool = False) -> dict:
    value = payload.get(key, _MISSING)
    if value is _MISSING:
        if required:
            raise ConfigError("required section is missing", field=_join(path, key))
        return {}
    if not isinstance(value, dict):
        raise ConfigError("must be a JSON object", field=_join(path, key))
    return value


def number(payload: dict, key: str, path: str = "", default: Any = _MISSING, *, minimum: float | None = None) -> float:
    value = payload.get(key, default)
    if value is _MISSING:
        raise ConfigError("required field is missing", field=_join(path, key))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"must be a number, got {value!r}", field=_join(path, key))
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=_join(path, key))
    return float(value)


def integer(payload: dict, key: str, path: str = "", default: Any = _MISSING, *, minimum: int | None = None) -> int:
    value = payload.get(key, default)
    if value is _MISSING:
        raise ConfigError("required field is missing", field=_join(path, key))
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value!r}", field=_join(path, key))
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=_join(path, key))
    return int(value)


def string(payload: dict, key: str, path: str = "", default: Any = _MISSING, *, choices: tuple[str, ...] | None = None) -> str:
    value = payload.get(key, default)
    if value is _MISSING:
        raise ConfigError("required field is missing", field=_join(path, key))
    if not isinstance(value, str):
        raise ConfigError(f"must be a string, got {value!r}", field=_join(path, key))
    if choices is not None and value not in choices:
        raise ConfigError(f"must be one of {list(choices)}, got {value!r}", field=_join(path, key))
    return value


def numbers(payload: dict, key: str, path: str = "", default: Any = _MISSING) -> tuple[float, ...]:
    value = payload.get(key, default)
    if value is _MISSING:
        raise ConfigError("required field is missing", field=_join(path, key))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if not isinstance(value, list) or not value:
        raise ConfigError("must be a number or a non-empty list of numbers", field=_join(path, key))
    for idx, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"must be a number, got {item!r}", field=f"{_join(path, key)}[{idx}]")
    return tuple(float(v) for v in value)


def validate_config(payload: dict, kind: str) -> None:
    """Check a parsed config against its JSON schema.

    Runs after the hand parsing above, which already names the first bad
    field; this catches range and shape rules the parsers leave to the
    dataclasses.
    """
    issues = schemas.schema_errors(payload, schemas.CONFIG, kind)
    if issues:
        field, message = issues[0]
        raise ConfigError(message, field=field or None)


def _wrap(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(str(exc), field=path) from exc


# ── network ─────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class NetworkSpec:
    """Where a true network comes from: a generator with a size, a fixture, or a file."""

    kind: str
    n: int | None = None
    path: str | None = None
    strong_weak: bool = False

    @classmethod
    def from_dict(cls, payload: dict, path: str = "network") -> "NetworkSpec":
        check_keys(payload, ("kind", "n", "path", "strong_weak"), path)
        kind = string(payload, "kind", path, choices=NETWORK_KINDS)
        n = None
        file_path = None
        if kind in ("erdos_renyi", "political_party"):
            n = integer(payload, "n", path, minimum=6 if kind == "political_party" else 2)
        elif kind == "from_file":
            file_path = string(payload, "path", path)
        strong_weak = payload.get("strong_weak", False)
        if not isinstance(strong_weak, bool):
            raise ConfigError("must be true or false", field=_join(path, "strong_weak"))
        return cls(kind=kind, n=n, path=file_path, strong_weak=strong_weak)

    @property
    def name(self) -> str:
        if self.n is not None:
            return f"{self.kind}_{self.n}"
        if self.kind == "from_file":
            return Path(self.path or "network").stem
        return self.kind

    def build(self, seed: int, base_dir: Path | None = None) -> Network:
        from sil.data.io import read_edge_list
        from sil.harness.generators import assign_strong_weak, gen_erdos_renyi, gen_fixture, gen_political_party

        if self.kind == "erdos_renyi":
            net = gen_erdos_renyi(int(self.n), seed)
        elif self.kind == "political_party":
            net = gen_political_party(int(self.n), seed)
        elif self.kind == "from_file":
            file_path = Path(self.path or "")
            if base_dir is not None and not file_path.is_absolute():
                file_path = base_dir / file_path
            net = read_edge_list(file_path, nonneg=True)
        else:
            net = gen_fixture(self.kind, seed)
        if self.strong_weak:
            net = assign_strong_weak(net, seed)
        return net

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "path": self.path, "strong_weak": self.strong_weak}


# ── structural scalars, shocks, penalty and optimizer settings ──────────────
@dataclass(frozen=True)
class ThetaSpec:
    rho: float = config.RHO_0
    beta: tuple[float, ...] = (config.BETA_0,)
    gamma: tuple[float, ...] = (config.GAMMA_0,)

    @classmethod
    def from_dict(cls, payload: dict, path: str = "theta") -> "ThetaSpec":
        check_keys(payload, ("rho", "beta", "gamma"), path)
        beta = numbers(payload, "beta", path, [config.BETA_0])
        gamma = numbers(payload, "gamma", path, [config.GAMMA_0])
        if len(beta) != len(gamma):
            raise ConfigError("beta and gamma must have the same length", field=path)
        return cls(rho=number(payload, "rho", path, config.RHO_0), beta=beta, gamma=gamma)

    def params(self, network: Network) -> StructuralParams:
        return StructuralParams(network, self.rho, self.gamma, self.beta)

    def to_dict(self) -> dict:
        return {"rho": self.rho, "beta": list(self.beta), "gamma": list(self.gamma)}


_SHOCK_FIELDS = (
    "unit_effects",
    "unit_scale",
    "time_effects",
    "time_scale",
    "noise_scale",
    "noise_cross_correlation",
    "covariate_shock_loading",
    "covariate_scale",
)


def parse_shock(payload: dict, path: str = "shock", seed: int = 0) -> ShockConfig:
    check_keys(payload, _SHOCK_FIELDS, path)
    kwargs: dict[str, Any] = {}
    for key in ("unit_effects", "time_effects"):
        if key in payload:
            if not isinstance(payload[key], bool):
                raise ConfigError("must be true or false", field=_join(path, key))
            kwargs[key] = payload[key]
    for key in ("unit_scale", "time_scale", "noise_scale", "noise_cross_correlation", "covariate_scale"):
        if key in payload:
            kwargs[key] = number(payload, key, path)
    if "covariate_shock_loading" in payload:
        loading = numbers(payload, "covariate_shock_loading", path)
        if len(loading) != 2:
            raise ConfigError("must be a pair [time, unit]", field=_join(path, "covariate_shock_loading"))
        kwargs["covariate_shock_loading"] = loading
    return _wrap(path, ShockConfig, seed=seed, **kwargs)


def parse_penalty(payload: dict, path: str = "penalty") -> PenaltyConfig:
    check_keys(payload, ("grid", "adaptive_exponent"), path)
    grid: tuple[Triple, ...] = DEFAULT_GRID
    raw = payload.get("grid")
    if isinstance(raw, str):
        try:
            grid = parse_grid(raw)
        except InputError as exc:
            raise ConfigError(str(exc), field=_join(path, "grid")) from exc
    elif isinstance(raw, list):
        triples = []
        for idx, item in enumerate(raw):
            if not isinstance(item, list) or len(item) != 3:
                raise ConfigError("must be a [p1, p1_star, p2] triple", field=f"{path}.grid[{idx}]")
            triples.append(tuple(numbers({"v": item}, "v", f"{path}.grid[{idx}]")))
        grid = tuple(triples)  # type: ignore[assignment]
    elif raw is not None:
        raise ConfigError("must be a 'p1:p1s:p2,...' string or a list of triples", field=_join(path, "grid"))
    exponent = number(payload, "adaptive_exponent", path, config.ADAPTIVE_EXPONENT)
    return _wrap(path, PenaltyConfig, adaptive_exponent=exponent, grid=grid)


_GMM_FIELDS = (
    "max_iterations",
    "particle_count",
    "swarm_iterations",
    "gradient_tolerance",
    "parameter_tolerance",
    "normalize",
    "normalized_row",
    "transforms",
    "moment_source",
)


def parse_gmm(payload: dict, path: str = "gmm", *, seed: int = 0, threads: int = 1) -> GmmConfig:
    check_keys(payload, _GMM_FIELDS, path)
    kwargs: dict[str, Any] = {"seed": seed, "threads": threads}
    for key in ("max_iterations", "particle_count", "swarm_iterations", "normalized_row"):
        if key in payload:
            kwargs[key] = integer(payload, key, path, minimum=0)
    for key in ("gradient_tolerance", "parameter_tolerance"):
        if key in payload:
            kwargs[key] = number(payload, key, path, minimum=0.0)
    for key in ("normalize", "moment_source"):
        if key in payload:
            kwargs[key] = string(payload, key, path)
    if "transforms" in payload:
        transforms = payload["transforms"]
        if not isinstance(transforms, list) or not all(isinstance(t, str) for t in transforms):
            raise ConfigError("must be a list of transform names", field=_join(path, "transforms"))
        kwargs["transforms"] = tuple(transforms)
    return _wrap(path, GmmConfig, **kwargs)
