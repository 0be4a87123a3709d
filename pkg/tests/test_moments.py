from __future__ import annotations

import numpy as np

from sil import config
from sil.errors import InputError
from sil.estimation import GmmConfig, MomentSystem, PenaltyConfig, gmm_moments, objective_stage1
from sil.estimation.parameterization import RowSumParameterization
from sil.model import Network, ShockConfig, StructuralParams, simulate_panel


def _ring(n: int) -> Network:
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i + 1) % n] = 0.6
        w[i, (i + 2) % n] = 0.4
    return Network(w, nonneg=True, row_normalized=True)


def _random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    w = rng.uniform(0.1, 1.0, size=(n, n))
    np.fill_diagonal(w, 0.0)
    return w / w.sum(axis=1, keepdims=True)


def _panel(t: int = 40, seed: int = 3):
    return simulate_panel(StructuralParams(_ring(4), 0.3, (0.5,), (0.4,)), ShockConfig(seed=seed), t)


def _finite_difference(func, point: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        up = point.copy()
        down = point.copy()
        up[idx] += step
        down[idx] -= step
        grad[idx] = (func(up) - func(down)) / (2.0 * step)
    return grad


def test_analytic_gradient_matches_finite_differences() -> None:
    rng = np.random.default_rng(10)
    panel = _panel()
    for transforms in (("demean_time", "global_difference"), ("demean_time",)):
        system = MomentSystem(panel, GmmConfig(transforms=transforms))
        for _ in range(10):
            rho = float(rng.uniform(0.05, 0.5))
            beta = rng.uniform(0.1, 1.0, size=1)
            gamma = rng.uniform(-1.0, 1.0, size=1)
            w = _random_weights(rng, 4)

            _, grad = system.value_and_gradient(rho, beta, gamma, w)

            packed = np.concatenate([[rho], beta, gamma, w.ravel()])
            numeric = _finite_difference(
                lambda v: system.value(v[0], v[1:2], v[2:3], v[3:].reshape(4, 4)), packed
            )
            analytic = np.concatenate([[grad.rho], grad.beta, grad.gamma, grad.w.ravel()])
            off = np.concatenate([[True, True, True], (~np.eye(4, dtype=bool)).ravel()])
            scale = max(1.0, float(np.max(np.abs(analytic[off]))))
            assert np.max(np.abs(numeric[off] - analytic[off])) <= 1e-4 * scale


def test_chain_rule_through_row_sum_coordinates() -> None:
    rng = np.random.default_rng(4)
    system = MomentSystem(_panel())
    support = ~np.eye(4, dtype=bool)
    param = RowSumParameterization(support, 1)
    z = param.encode(0.3, [0.4], [0.5], _random_weights(rng, 4))

    def func(vector: np.ndarray) -> float:
        return system.value(*param.decode(vector))

    rho, beta, gamma, w = param.decode(z)
    _, grad = system.value_and_gradient(rho, beta, gamma, w)
    analytic = param.chain(z, grad.rho, grad.beta, grad.gamma, grad.w)
    numeric = _finite_difference(func, z)

    assert np.max(np.abs(numeric - analytic)) <= 1e-4 * max(1.0, float(np.max(np.abs(analytic))))


def test_moments_vanish_at_truth_on_noiseless_panel() -> None:
    theta = StructuralParams(_ring(4), 0.3, (0.5,), (0.4,))
    panel = simulate_panel(theta, ShockConfig.noiseless(seed=2), 30)

    g = gmm_moments(theta, panel)

    assert g.shape == (16,)
    assert np.max(np.abs(g)) <= 1e-12


def test_unstable_theta_returns_sentinel_moments() -> None:
    theta = StructuralParams(_ring(4), 1.2, (0.5,), (0.4,))

    g = gmm_moments(theta, _panel())

    assert abs(float(g @ g) - config.SENTINEL_OBJECTIVE) <= 1e-6 * config.SENTINEL_OBJECTIVE


def test_gmm_moments_checks_dimensions() -> None:
    theta = StructuralParams(_ring(5), 0.3, (0.5,), (0.4,))
    try:
        gmm_moments(theta, _panel())
    except InputError as exc:
        assert "5 nodes" in str(exc)
    else:
        raise AssertionError("Expected InputError")


def test_stage1_objective_adds_elastic_net_penalty() -> None:
    theta = StructuralParams(_ring(4), 0.3, (0.5,), (0.4,))
    panel = simulate_panel(theta, ShockConfig.noiseless(seed=2), 30)
    penalty = PenaltyConfig(p1=0.05, p2=0.1)

    value = objective_stage1(theta, panel, penalty)

    # each row of the ring holds .6 and .4
    expected = 0.05 * 4 * 1.0 + 0.1 * 4 * (0.36 + 0.16)
    assert abs(value - expected) <= 1e-10


def test_weight_matrix_scales_objective() -> None:
    panel = _panel()
    theta = StructuralParams(_ring(4), 0.2, (0.1,), (0.9,))
    plain = MomentSystem(panel)
    doubled = MomentSystem(panel, GmmConfig(weight_matrix=2.0 * np.eye(16)))

    args = (theta.rho, theta.beta, theta.gamma, theta.network.weights)
    assert abs(doubled.value(*args) - 2.0 * plain.value(*args)) <= 1e-9 * plain.value(*args)


def test_weight_matrix_must_match_moment_count() -> None:
    try:
        MomentSystem(_panel(), GmmConfig(weight_matrix=np.eye(9)))
    except InputError as exc:
        assert "16 x 16" in str(exc)
    else:
        raise AssertionError("Expected InputError")


def test_batch_values_agree_with_single_evaluation() -> None:
    rng = np.random.default_rng(7)
    system = MomentSystem(_panel())
    rho = np.array([0.1, 0.4, 1.5])
    beta = rng.uniform(0.1, 1.0, size=(3, 1))
    gamma = rng.uniform(-1.0, 1.0, size=(3, 1))
    w = np.stack([_random_weights(rng, 4) for _ in range(3)])

    batch = system.batch_values(rho, beta, gamma, w)

    for p in range(2):
        single = system.value(rho[p], beta[p], gamma[p], w[p])
        assert abs(batch[p] - single) <= 1e-9 * max(1.0, single)
    assert batch[2] == config.SENTINEL_OBJECTIVE
