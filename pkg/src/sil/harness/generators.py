"""Network generators for the Monte Carlo design.

Every generator re-draws on the same RNG stream until diag(W^2) is not
constant, so each seed maps to one network that satisfies A5.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np

from sil import config
from sil.errors import ConvergenceError, InputError
from sil.model.types import Network

# Calibrated to the published size and link density of the original networks,
# which are not redistributed; these are synthetic stand-ins.
FIXTURE_SHAPES = {
    "highschool": (70, 0.0758),
    "village": (65, 0.0507),
}
FIXTURE_NOTE = (
    "synthetic stand-in matching only size and density; the original survey network is "
    "licensed separately and must be supplied as an edge list via from_file"
)


def _diag_w2_varies(weights: np.ndarray) -> bool:
    return float(np.std(np.einsum("ij,ji->i", weights, weights))) > config.ZERO_TOL


def _redraw(draw: Callable[[np.random.Generator], np.ndarray], rng: np.random.Generator, name: str) -> np.ndarray:
    for _ in range(config.MAX_A5_REDRAWS):
        weights = draw(rng)
        if _diag_w2_varies(weights):
            return weights
    raise ConvergenceError(f"{name}: no draw with non-constant diag(W^2) after {config.MAX_A5_REDRAWS} attempts")


def _strong_weak(weights: np.ndarray, rng: np.random.Generator, normalize_all_rows: bool = True) -> np.ndarray:
    out = np.zeros_like(weights, dtype=float)
    for i in range(weights.shape[0]):
        links = np.flatnonzero(weights[i] != 0)
        if links.size == 0:
            if normalize_all_rows:
                raise InputError(f"row {i} has no links and every row must be normalized")
            continue
        if links.size == 1:
            out[i, links[0]] = 1.0
            continue
        out[i, links] = (1.0 - config.STRONG_WEIGHT) / (links.size - 1)
        out[i, rng.choice(links)] = config.STRONG_WEIGHT
    return out


def assign_strong_weak(net: Network, seed: int, *, normalize_all_rows: bool = True) -> Network:
    """One random link per row gets weight .7 and the rest share .3; a single link keeps weight 1."""
    rng = np.random.default_rng(seed)
    weights = _strong_weak(net.weights, rng, normalize_all_rows)
    return Network(weights, labels=net.labels, nonneg=True, row_normalized=True)


def _erdos_renyi_draw(n: int) -> Callable[[np.random.Generator], np.ndarray]:
    def draw(rng: np.random.Generator) -> np.ndarray:
        weights = np.zeros((n, n))
        for i in range(n):
            j = int(rng.integers(n - 1))
            weights[i, j if j < i else j + 1] = 1.0
        return weights

    return draw


def gen_erdos_renyi(n: int, seed: int) -> Network:
    """Exactly one link of weight 1 per row, target chosen uniformly."""
    if n < 2:
        raise InputError(f"Erdos-Renyi generator needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    if n == 2:
        # the only candidate; diag(W^2) is necessarily constant
        return Network(np.array([[0.0, 1.0], [1.0, 0.0]]), nonneg=True, row_normalized=True)
    weights = _redraw(_erdos_renyi_draw(n), rng, "erdos_renyi")
    return Network(weights, nonneg=True, row_normalized=True)


def party_sizes(n: int) -> tuple[int, int]:
    """Party A holds the first round(n/3) units, party B the rest."""
    size_a = int(math.floor(n / 3 + 0.5))
    return size_a, n - size_a


def _party_draw(n: int) -> Callable[[np.random.Generator], np.ndarray]:
    size_a, size_b = party_sizes(n)
    parties = ((0, size_a), (size_a, size_b))

    def draw(rng: np.random.Generator) -> np.ndarray:
        links = np.zeros((n, n))
        for leader, size in parties:
            members = np.arange(leader + 1, leader + size)
            followers = min(size // 2, size - 1)
            chosen = rng.choice(members, size=followers, replace=False)
            links[chosen, leader] = 1.0
        for i in range(n):
            open_cols = np.flatnonzero(links[i] == 0)
            open_cols = open_cols[open_cols != i]
            links[i, rng.choice(open_cols)] = 1.0
        return _strong_weak(links, rng)

    return draw


def gen_political_party(n: int, seed: int) -> Network:
    """Two parties whose leaders (units 0 and round(n/3)) each influence half their members.

    Every row also gets one extra random link; weights follow the strong/weak rule.
    """
    if n < 6:
        raise InputError(f"political-party generator needs n >= 6, got {n}")
    rng = np.random.default_rng(seed)
    weights = _redraw(_party_draw(n), rng, "political_party")
    return Network(weights, nonneg=True, row_normalized=True)


def _fixture_draw(n: int, density: float) -> Callable[[np.random.Generator], np.ndarray]:
    edges = int(round(density * n * (n - 1)))

    def draw(rng: np.random.Generator) -> np.ndarray:
        links = np.zeros((n, n))
        for i in range(n):
            j = int(rng.integers(n - 1))
            links[i, j if j < i else j + 1] = 1.0
        off = np.flatnonzero((links.ravel() == 0) & ~np.eye(n, dtype=bool).ravel())
        extra = rng.choice(off, size=max(edges - n, 0), replace=False)
        links.flat[extra] = 1.0
        return _strong_weak(links, rng)

    return draw


def gen_fixture(kind: str, seed: int) -> Network:
    """Synthetic network with the size and density of a named survey network."""
    if kind not in FIXTURE_SHAPES:
        raise InputError(f"unknown fixture '{kind}'; expected one of {sorted(FIXTURE_SHAPES)}")
    n, density = FIXTURE_SHAPES[kind]
    rng = np.random.default_rng(seed)
    weights = _redraw(_fixture_draw(n, density), rng, kind)
    return Network(weights, nonneg=True, row_normalized=True)
