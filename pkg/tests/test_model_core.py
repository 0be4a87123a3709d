from __future__ import annotations

import warnings

import numpy as np

from sil.errors import AssumptionViolation, DegenerateCovarianceWarning, InputError, InsufficientDataError
from sil.identification import nonuniqueness_witness
from sil.model import (
    Network,
    ShockConfig,
    StructuralParams,
    check_assumptions,
    demean_time,
    global_difference,
    neumann_reduced_form,
    reachability,
    reduced_form,
    simulate_panel,
)
from sil.model.core import neumann_order

PAIR = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def _random_network(rng: np.random.Generator, n: int, density: float = 0.3) -> Network:
    links = (rng.random((n, n)) < density).astype(float)
    np.fill_diagonal(links, 0.0)
    for i in range(n):
        if not links[i].any():
            links[i, (i + 1) % n] = 1.0
    weights = links * rng.uniform(0.5, 1.5, size=(n, n))
    weights /= weights.sum(axis=1, keepdims=True)
    return Network(weights, nonneg=True, row_normalized=True)


def test_worked_example_reduced_form() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    expected = np.array([[275.0, 310.0, 0.0], [310.0, 275.0, 0.0], [0.0, 0.0, 182.0]]) / 455.0

    pi = reduced_form(params).first

    assert np.max(np.abs(pi - expected)) <= 1e-12


def test_zero_rho_gives_direct_effects_only() -> None:
    w = Network(PAIR)
    pi = reduced_form(StructuralParams(w, 0.0, (0.5,), (0.4,))).first
    assert np.allclose(pi, 0.4 * np.eye(3) + 0.5 * PAIR, atol=1e-15)


def test_empty_network_reduced_form_is_scalar() -> None:
    pi = reduced_form(StructuralParams(Network.empty(4), 0.6, (0.2,), (0.7,))).first
    assert np.allclose(pi, 0.7 * np.eye(4), atol=1e-15)


def test_row_sum_law_on_random_admissible_structures() -> None:
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(3, 11))
        rho = float(rng.uniform(-0.9, 0.9))
        beta = float(rng.uniform(0.1, 1.0))
        gamma = float(rng.uniform(-1.0, 1.0))
        params = StructuralParams(_random_network(rng, n), rho, (gamma,), (beta,))
        pi = reduced_form(params).first
        assert np.allclose(pi.sum(axis=1), (beta + gamma) / (1.0 - rho), atol=1e-8)


def test_neumann_series_matches_direct_solve() -> None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        params = StructuralParams(_random_network(rng, n), float(rng.uniform(-0.8, 0.8)), (0.5,), (0.4,))
        direct = reduced_form(params).first
        series = neumann_reduced_form(params).first
        assert np.max(np.abs(direct - series)) <= 1e-10


def test_neumann_order_tail_bound() -> None:
    q = 0.3
    order = neumann_order(q, 1e-12)
    assert q ** (order + 1) / (1 - q) <= 1e-12
    assert q**order / (1 - q) > 1e-12
    try:
        neumann_order(1.0)
    except AssumptionViolation as exc:
        assert exc.assumption == "A2"
    else:
        raise AssertionError("Expected AssumptionViolation")


def test_sparsity_follows_reachability() -> None:
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 11))
        net = _random_network(rng, n, density=float(rng.uniform(0.05, 0.4)))
        params = StructuralParams(net, 0.3, (0.5,), (0.4,))
        series = neumann_reduced_form(params).first
        off = ~np.eye(n, dtype=bool)
        reach = reachability(net)
        assert np.array_equal((series != 0.0)[off], reach[off])
        assert np.max(np.abs(reduced_form(params).first - series)) <= 1e-10


def test_reachability_direction() -> None:
    # 0 influences 1, 1 influences 2: W[1, 0] and W[2, 1]
    w = np.zeros((3, 3))
    w[1, 0] = 1.0
    w[2, 1] = 1.0
    reach = reachability(Network(w))
    assert reach[2, 0] and reach[1, 0] and reach[2, 1]
    assert not reach[0, 2]
    assert not reach.diagonal().any()


def test_social_operator_rejects_unit_root() -> None:
    ring = Network(np.roll(np.eye(4), 1, axis=1), nonneg=True, row_normalized=True)
    try:
        reduced_form(StructuralParams(ring, 1.0, (0.5,), (0.4,)))
    except AssumptionViolation as exc:
        assert exc.assumption == "A2"
        assert "A2" in str(exc)
    else:
        raise AssertionError("Expected AssumptionViolation")


def test_network_rejects_self_influence() -> None:
    try:
        Network(np.eye(3))
    except InputError as exc:
        assert "A1" in str(exc)
    else:
        raise AssertionError("Expected InputError")


def test_row_normalized_flag_is_checked() -> None:
    try:
        Network(np.array([[0.0, 0.5], [1.0, 0.0]]), row_normalized=True)
    except InputError as exc:
        assert "A4'" in str(exc)
    else:
        raise AssertionError("Expected InputError")


def test_witness_structures_fail_assumptions() -> None:
    first, second = nonuniqueness_witness()
    pi_first = neumann_reduced_form(first).first
    report_first = check_assumptions(first)
    report_second = check_assumptions(second)

    assert not report_first["A5"].holds
    assert not report_second["A5"].holds
    assert not report_second["A2"].holds
    assert report_first["A2"].holds
    assert np.allclose(pi_first.sum(axis=1), (1.0 + 0.5) / (1 - 0.5))


def test_check_assumptions_reports_diagnostics() -> None:
    w = np.zeros((3, 3))
    w[0, 1] = 1.0
    w[1, 0] = 0.5
    w[1, 2] = 0.5
    w[2, 0] = 1.0
    report = check_assumptions(StructuralParams(Network(w), 0.4, (0.5,), (0.4,)))

    assert report.all_hold
    assert report["A2"].diagnostic == 0.4
    assert report.extra["abs_rho"] == 0.4
    assert report.to_dict()["assumptions"]["A5"]["holds"] is True


def test_simulate_panel_is_deterministic_and_noiseless_panel_is_exact() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    first = simulate_panel(params, ShockConfig(seed=9), 20)
    second = simulate_panel(params, ShockConfig(seed=9), 20)
    assert np.array_equal(first.y, second.y)
    assert first.y.shape == (20, 3) and first.x.shape == (20, 3, 1)

    clean = simulate_panel(params, ShockConfig.noiseless(seed=9), 20)
    pi = reduced_form(params).first
    assert np.allclose(clean.y, clean.x[:, :, 0] @ pi.T, atol=1e-12)


def test_disabling_a_component_keeps_other_streams() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    full = simulate_panel(params, ShockConfig(seed=4), 10)
    no_time = simulate_panel(params, ShockConfig(seed=4, time_effects=False), 10)
    assert np.array_equal(full.x, no_time.x)


def test_fully_correlated_noise_warns() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        panel = simulate_panel(params, ShockConfig(seed=1, noise_cross_correlation=1.0), 5)
    assert any(issubclass(item.category, DegenerateCovarianceWarning) for item in caught)
    assert np.all(np.isfinite(panel.y))


def test_within_transforms() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    panel = simulate_panel(params, ShockConfig(seed=2), 8)

    demeaned = demean_time(panel)
    differenced = global_difference(panel)

    assert np.allclose(demeaned.y.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(differenced.y.mean(axis=1), 0.0, atol=1e-12)
    try:
        demean_time(simulate_panel(params, ShockConfig(seed=2), 1))
    except InsufficientDataError:
        pass
    else:
        raise AssertionError("Expected InsufficientDataError")


def test_per_covariate_networks() -> None:
    w = Network(PAIR)
    other = np.zeros((3, 3))
    other[2, 0] = 1.0
    params = StructuralParams(w, 0.3, (0.5, 0.2), (0.4, 1.0), exogenous_networks=(w, Network(other)))
    pi = reduced_form(params)
    operator_inv = np.linalg.inv(np.eye(3) - 0.3 * PAIR)

    assert len(pi.pi) == 2
    assert np.allclose(pi.pi[1], operator_inv @ (1.0 * np.eye(3) + 0.2 * other), atol=1e-12)


def test_social_multiplier_commutes_with_the_direct_block() -> None:
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        w = _random_network(rng, n).weights
        rho, beta, gamma = float(rng.uniform(-0.9, 0.9)), float(rng.uniform(0.1, 1.0)), float(rng.uniform(-1.0, 1.0))
        inverse = np.linalg.inv(np.eye(n) - rho * w)
        direct = beta * np.eye(n) + gamma * w

        assert np.allclose(inverse @ direct, direct @ inverse, rtol=0.0, atol=1e-12)
        pi = reduced_form(StructuralParams(Network(w), rho, (gamma,), (beta,))).first
        assert np.allclose(pi, direct @ inverse, rtol=0.0, atol=1e-12)


def test_global_difference_removes_common_shocks_and_transforms_are_idempotent() -> None:
    params = StructuralParams(Network(PAIR), 0.3, (0.5,), (0.4,))
    panel = simulate_panel(params, ShockConfig(seed=5), 12)
    rng = np.random.default_rng(0)
    common_y = rng.normal(size=(12, 1))
    common_x = rng.normal(size=(12, 1, 1))
    shocked = panel.replace(y=panel.y + common_y, x=panel.x + common_x)

    assert np.allclose(global_difference(shocked).y, global_difference(panel).y, atol=1e-12)
    assert np.allclose(global_difference(shocked).x, global_difference(panel).x, atol=1e-12)
    for transform in (demean_time, global_difference):
        once = transform(panel)
        twice = transform(once)
        assert np.allclose(twice.y, once.y, atol=1e-12)
        assert np.allclose(twice.x, once.x, atol=1e-12)


def test_a2_needs_the_row_sum_bound_not_only_abs_rho() -> None:
    # max row sum 1.5, so rho = .99 gives |rho| * ||W|| = 1.485
    w = np.array([[0.0, 1.5, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])

    report = check_assumptions(StructuralParams(Network(w), 0.99, (0.5,), (0.4,)))

    assert abs(report.extra["abs_rho"] - 0.99) <= 1e-15
    assert not report["A2"].holds
    assert abs(report["A2"].diagnostic - 1.485) <= 1e-12
    assert check_assumptions(StructuralParams(Network(w), 0.6, (0.5,), (0.4,)))["A2"].holds
