import numpy as np
import pytest
from scipy.optimize import linprog

from storval import reference as R
from storval.dispatch import (check_assumption_interiority, gradient_check, price_fn, require_interior,
                              solve_ed, subdifferential_violations)
from storval.errors import BoundaryPointError
from storval.network import build_flow_operators, is_acyclic

NETWORKS = {
    "copperplate": R.copperplate(), "two_node": R.two_node(), "four_node": R.four_node_tree(),
    "star": R.five_node_star(), "triangle": R.triangle(True), "triangle_hom": R.triangle(False),
    "two_node_het": R.two_node(0.7, (10.0, 14.0), (2.0, 5.0)),
}


def test_congested_two_node_reference(two_node):
    net, ops = two_node
    sol = solve_ed(net, ops, [3.0, -2.0])
    assert sol.prices == pytest.approx([10.0, 2.0])
    assert sol.cost == pytest.approx(18.0)
    assert abs(sol.line_flows[0]) == pytest.approx(1.0)


@pytest.mark.parametrize("xi, price, cost", [(1.0, 10.0, 10.0), (-1.0, 2.0, -2.0), (2.5, 10.0, 25.0)])
def test_copperplate(copperplate, xi, price, cost):
    net, ops = copperplate
    sol = solve_ed(net, ops, [xi])
    assert sol.prices == pytest.approx([price])
    assert sol.cost == pytest.approx(cost)


def test_balanced_point_on_two_node_is_a_boundary(two_node):
    net, ops = two_node
    assert not check_assumption_interiority(net, ops, [0.5, -0.5])
    with pytest.raises(BoundaryPointError) as info:
        require_interior(net, ops, [0.5, -0.5], node=7)
    assert info.value.node == 7
    assert check_assumption_interiority(net, ops, [3.0, -2.0])


def _samples(net, count, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-2.0, 2.0, size=(count, net.node_count)).round(3) + 0.0001


@pytest.mark.parametrize("name", NETWORKS)
def test_price_properties(name):
    net = NETWORKS[name]
    ops = build_flow_operators(net)
    for xi in _samples(net, 25, 1):
        sol = solve_ed(net, ops, xi)
        assert np.all(sol.prices >= -1e-10)
        assert subdifferential_violations(net, sol) == []
        if check_assumption_interiority(net, ops, xi):
            assert np.max(gradient_check(net, ops, xi)) <= 1e-6


@pytest.mark.parametrize("name", NETWORKS)
def test_prices_match_highs_duals(name):
    net = NETWORKS[name]
    ops = build_flow_operators(net)
    for xi in _samples(net, 10, 4):
        if check_assumption_interiority(net, ops, xi):
            assert price_fn(net, ops, xi) == pytest.approx(_highs_prices(net, ops, xi), abs=1e-8)


@pytest.mark.parametrize("name", NETWORKS)
def test_cost_is_convex_along_segments(name):
    net = NETWORKS[name]
    ops = build_flow_operators(net)
    pts = _samples(net, 12, 2)
    for a, b in zip(pts[::2], pts[1::2]):
        qa, qb = solve_ed(net, ops, a).cost, solve_ed(net, ops, b).cost
        for t in (0.25, 0.5, 0.75):
            assert solve_ed(net, ops, t * a + (1 - t) * b).cost <= t * qa + (1 - t) * qb + 1e-8


@pytest.mark.parametrize("name", [n for n, net in NETWORKS.items() if is_acyclic(net) and net.homogeneous_costs])
def test_acyclic_homogeneous_prices_take_two_values(name):
    net = NETWORKS[name]
    ops = build_flow_operators(net)
    for xi in _samples(net, 30, 3):
        if check_assumption_interiority(net, ops, xi):
            lam = price_fn(net, ops, xi)
            assert np.all(np.minimum(np.abs(lam - 10.0), np.abs(lam - 2.0)) <= 1e-7)


def test_cyclic_network_has_intermediate_price():
    # Homogeneous costs, but the loop lets a congested line set a blended price.
    net = R.triangle(False)
    ops = build_flow_operators(net)
    xi = [0.45, 1.15, -1.35]
    lam = price_fn(net, ops, xi)
    assert 2.0 + 1e-3 < lam[0] < 10.0 - 1e-3
    assert lam == pytest.approx(_highs_prices(net, ops, xi), abs=1e-9)


def _highs_prices(net, ops, xi):
    # Independent formulation: v = xi + Y theta, nodal cost max(alpha v, beta v) via v = p - q.
    m, l = net.node_count, net.line_count
    Y, B = ops.admittance, ops.incidence
    c = np.concatenate([net.alpha, -net.beta, np.zeros(m)])
    A_eq = np.hstack([np.eye(m), -np.eye(m), -Y])
    A_ub = np.vstack([np.hstack([np.zeros((l, 2 * m)), B]), np.hstack([np.zeros((l, 2 * m)), -B])])
    b_ub = np.concatenate([net.capacities, net.capacities])
    bounds = [(0, None)] * (2 * m) + [(0, 0)] + [(None, None)] * (m - 1)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=xi, bounds=bounds, method="highs")
    assert res.status == 0
    return res.eqlin.marginals


def test_price_scales_with_costs():
    net = R.triangle(True)
    xi = [1.3, -0.4, 2.1]
    lam = price_fn(net, build_flow_operators(net), xi)
    scaled = net.scaled_costs(3.0)
    assert price_fn(scaled, build_flow_operators(scaled), xi) == pytest.approx(3.0 * lam)


@pytest.mark.parametrize("xi, prices, cost", [((1.0, 1.0), (10.0, 10.0), 20.0), ((-1.0, -1.0), (2.0, 2.0), -4.0)])
def test_uncongested_two_node(xi, prices, cost):
    net = R.two_node(capacity=1e6)
    ops = build_flow_operators(net)
    sol = solve_ed(net, ops, xi)
    assert sol.prices == pytest.approx(prices)
    assert sol.cost == pytest.approx(cost)
    assert check_assumption_interiority(net, ops, xi)
    assert np.max(gradient_check(net, ops, xi)) <= 1e-6


def test_congested_gradient(two_node):
    net, ops = two_node
    assert np.max(gradient_check(net, ops, [3.0, -2.0])) <= 1e-6
