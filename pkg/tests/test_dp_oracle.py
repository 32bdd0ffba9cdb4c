import numpy as np
import pytest

from storval import reference as R
from storval.dp_oracle import (epsilon_bar, expected_dispatch_cost, headline_residual, midpoint_convexity,
                               perfect_foresight_revenue, simulate_threshold_arbitrage, solve_dp_grid,
                               solve_dp_single_device, verify_threshold_policy)
from storval.errors import BudgetExceededError, VerificationError
from storval.network import build_flow_operators
from storval.valuation import build_price_lattice, lmv


def _setup(net, tree):
    ops = build_flow_operators(net)
    lat = build_price_lattice(net, ops, tree)
    return ops, lat, lmv(lat, tree)


def test_beta_then_alpha_by_hand(copperplate):
    # Charge eps at price 2, discharge at price 10: cost 8 - 8 eps.
    net, ops = copperplate
    tree = R.beta_alpha_path()
    assert solve_dp_single_device(net, ops, tree, 0, 0.0) == pytest.approx(8.0)
    assert solve_dp_single_device(net, ops, tree, 0, 0.3) == pytest.approx(8.0 - 8.0 * 0.3)


def test_epsilon_bar_examples(copperplate):
    net, ops = copperplate
    # Prices at +-1 change once demand crosses zero, a distance of 1; half of that is kept.
    assert epsilon_bar(net, ops, R.iid_copperplate(3)) == pytest.approx(0.5, abs=1e-3)
    assert epsilon_bar(net, ops, R.iid_copperplate(3)) < 0.5
    assert epsilon_bar(net, ops, R.constant_tree(1, value=0.7)) == pytest.approx(0.35, abs=1e-3)


def test_epsilon_bar_cap():
    # A price-insensitive network: alpha == beta, prices never move.
    from storval.network import Network
    net = Network(1, [], [5.0], [5.0])
    assert epsilon_bar(net, build_flow_operators(net), R.iid_copperplate(2)) == pytest.approx(50.0)


def test_zero_capacity_is_no_storage(copperplate):
    net, ops = copperplate
    tree = R.iid_copperplate(3)
    assert solve_dp_single_device(net, ops, tree, 0, 0.0) == pytest.approx(expected_dispatch_cost(net, ops, tree))


def test_eps_range_checked(copperplate):
    net, ops = copperplate
    with pytest.raises(ValueError):
        solve_dp_single_device(net, ops, R.iid_copperplate(2), 0, 0.6, eps_bar=0.5)
    with pytest.raises(ValueError):
        solve_dp_single_device(net, ops, R.iid_copperplate(2), 0, -0.1)


@pytest.mark.parametrize("name", ["two-node-iid3-N3", "triangle-het-markov-N4", "four-node-iid3-N3"])
def test_value_is_linear_below_epsilon_bar(name):
    inst = next(i for i in R.corpus() if i.name == name)
    net, tree = inst.network, inst.tree
    ops, _, rep = _setup(net, tree)
    eb = epsilon_bar(net, ops, tree)
    for i in range(net.node_count):
        j0 = solve_dp_single_device(net, ops, tree, i, 0.0)
        slopes = [(j0 - solve_dp_single_device(net, ops, tree, i, f * eb)) / (f * eb) for f in (0.2, 0.6, 0.95)]
        assert slopes == pytest.approx([rep.lmv[i]] * 3, abs=1e-8)


@pytest.mark.parametrize("i", [0, 1])
def test_grid_solver_matches_single_device(two_node, i):
    net, ops = two_node
    tree = R.two_node_iid3(3)
    b = np.zeros(2)
    b[i] = 0.05
    assert solve_dp_grid(net, ops, tree, b, 2).value == pytest.approx(
        solve_dp_single_device(net, ops, tree, i, 0.05), abs=1e-12)


def test_grid_value_monotone_on_nested_grids(two_node):
    net, ops = two_node
    tree = R.two_node_iid3(3)
    values = [solve_dp_grid(net, ops, tree, [0.3 * j / 4, 0.2 * j / 4], max(2 * j + 1, 2)).value for j in range(5)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < values[0]


def test_midpoint_convexity_report(two_node):
    net, ops = two_node
    rep = midpoint_convexity(net, ops, R.two_node_iid3(3), [0.3, 0.0], [0.0, 0.3], 4)
    assert set(rep) == {"j_b1", "j_b2", "j_mid", "violation"}
    assert rep["violation"] == pytest.approx(rep["j_mid"] - 0.5 * (rep["j_b1"] + rep["j_b2"]))


def test_grid_budget(two_node):
    net, ops = two_node
    with pytest.raises(BudgetExceededError):
        solve_dp_grid(net, ops, R.two_node_iid3(3), [1.0, 1.0], 60, budget=10_000)


@pytest.mark.parametrize("inst", [i for i in R.corpus() if len(i.tree) <= 40], ids=lambda i: i.name)
def test_threshold_policy_and_value_identity(inst):
    net, tree = inst.network, inst.tree
    ops, lat, _ = _setup(net, tree)
    eb = epsilon_bar(net, ops, tree)
    for i in range(net.node_count):
        rep = verify_threshold_policy(net, ops, tree, i, 0.5 * eb, lattice=lat, eps_bar=eb)
        assert rep.passed and rep.max_residual <= 1e-9


def test_threshold_strict_failure_is_raised(copperplate):
    # Above epsilon-bar the bang-bang structure can break; force that with a large device.
    net, ops = copperplate
    tree = R.iid_copperplate(3)
    rep = verify_threshold_policy(net, ops, tree, 0, 1.7, strict=False)
    assert not rep.passed
    with pytest.raises(VerificationError) as info:
        verify_threshold_policy(net, ops, tree, 0, 1.7)
    assert info.value.failures


@pytest.mark.parametrize("inst", R.corpus(), ids=lambda i: i.name)
def test_arbitrage_equivalences(inst):
    net, tree = inst.network, inst.tree
    _, lat, rep = _setup(net, tree)
    for i in range(net.node_count):
        for b in (0.5, 2.0):
            causal = simulate_threshold_arbitrage(lat, tree, i, b)
            foresight = perfect_foresight_revenue(lat, tree, i, b)
            assert causal == pytest.approx(b * rep.lmv[i], abs=1e-9)
            assert foresight == pytest.approx(b * rep.upper_bound[i], abs=1e-9)
            assert causal <= foresight + 1e-9


def test_headline_residual_reuses_j0(copperplate):
    net, ops = copperplate
    tree = R.iid_copperplate(3)
    r1, j0 = headline_residual(net, ops, tree, 0, 0.2, 4.0)
    r2, j0b = headline_residual(net, ops, tree, 0, 0.2, 4.0, j0=j0)
    assert j0 == j0b == pytest.approx(12.0)
    assert r1 == r2 <= 1e-12


def test_epsilon_bar_below_true_distance(two_node):
    net, ops = two_node
    from storval.dispatch import price_fn
    from storval.scenario import build_deterministic

    xi = np.array([3.0, -2.0])
    tree = build_deterministic([xi])
    eb = epsilon_bar(net, ops, tree)
    base = price_fn(net, ops, xi)
    grid = np.linspace(0.0, 5.0, 5001)[1:]
    distance = np.inf
    for i in range(2):
        for sign in (1, -1):
            for t in grid:
                probe = xi.copy()
                probe[i] += sign * t
                if np.max(np.abs(price_fn(net, ops, probe) - base)) > 1e-7:
                    distance = min(distance, t)
                    break
    assert 0 < eb <= distance


def test_epsilon_bar_uncongested_two_node():
    from storval.scenario import build_deterministic

    # Prices change only when the total demand crosses zero: 2 units along either axis.
    net = R.two_node(capacity=1e6)
    assert epsilon_bar(net, build_flow_operators(net), build_deterministic([[1.0, 1.0]])) == pytest.approx(1.0, abs=1e-3)
    # Single bus at demand 1: distance 1, so at most 0.5.
    single = R.copperplate()
    assert epsilon_bar(single, build_flow_operators(single), build_deterministic([[1.0]])) <= 0.5


def test_headline_example(copperplate):
    net, ops = copperplate
    tree = R.iid_copperplate(3)
    j0 = solve_dp_single_device(net, ops, tree, 0, 0.0)
    assert j0 - solve_dp_single_device(net, ops, tree, 0, 0.1) == pytest.approx(0.1 * 4.0, abs=1e-9)


def test_grid_examples(two_node):
    net, ops = two_node
    tree = R.two_node_iid3(3)
    assert solve_dp_grid(net, ops, tree, [0.0, 0.0], 1).value == pytest.approx(expected_dispatch_cost(net, ops, tree))
    assert solve_dp_grid(net, ops, tree, [0.4, 0.0], 3).value <= solve_dp_grid(net, ops, tree, [0.2, 0.0], 2).value


def test_threshold_value_examples(copperplate):
    net, ops = copperplate
    tree = R.beta_alpha_path()
    rep = verify_threshold_policy(net, ops, tree, 0, 0.2)
    first = next(r for r in rep.records if r.node == 0 and r.z == 0.0)
    assert first.dp_difference == pytest.approx(0.2 * 8.0)
    # Terminal stage: difference is price times stored energy.
    last = next(r for r in rep.records if r.node == 1 and r.z == 0.2)
    assert last.dp_difference == pytest.approx(10.0 * 0.2)


def test_revenue_examples(copperplate):
    from storval.scenario import build_deterministic

    net, ops = copperplate
    tree = R.beta_alpha_path()
    lat = build_price_lattice(net, ops, tree)
    assert simulate_threshold_arbitrage(lat, tree, 0, 0.0) == 0.0
    assert simulate_threshold_arbitrage(lat, tree, 0, 1.0) == pytest.approx(8.0)
    iid = R.iid_copperplate(3)
    assert simulate_threshold_arbitrage(build_price_lattice(net, ops, iid), iid, 0, 2.0) == pytest.approx(8.0)
    flat = build_deterministic([[0.7]] * 4)
    assert perfect_foresight_revenue(build_price_lattice(net, ops, flat), flat, 0, 1.0) == 0.0
    zigzag = build_deterministic([[-1.0], [1.0], [-1.0], [1.0]])
    assert perfect_foresight_revenue(build_price_lattice(net, ops, zigzag), zigzag, 0, 1.0) == pytest.approx(16.0)
