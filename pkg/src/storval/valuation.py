"""Locational marginal value of storage from the nodal price process.

For each bus ``i`` the marginal value of a first unit of storage capacity is::

    LMV_i = E[ sum_{k=0}^{N-2} (E[lambda_{k+1} | history_k] - lambda_k)^+ ]

and is dominated by ``1/2 E[TV(lambda_i)] + 1/2 E[lambda_{i,N-1} - lambda_{i,0}]``.
All expectations are exact sums over the scenario tree.
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .dispatch import interiority_failure, price_fn
from .errors import BoundaryPointError, ScenarioError, StructuralError
from .network import FlowOperators, Network, build_flow_operators, is_acyclic
from .scenario import ScenarioTree, conditional_expectation, path_probability


@dataclass(frozen=True)
class PriceLattice:
    prices: dict[int, np.ndarray]
    predictors: dict[int, np.ndarray]

    def path_prices(self, tree: ScenarioTree, leaf: int) -> np.ndarray:
        """``(N, m)`` array of prices along the root path of ``leaf``."""
        return np.array([self.prices[n] for n in tree.path(leaf)])


@dataclass(frozen=True)
class LmvReport:
    lmv: np.ndarray
    upper_bound: np.ndarray
    tv_expectation: np.ndarray
    terminal_drift: np.ndarray
    tight: np.ndarray


def _price_probe(args):
    net, xi, delta, tol = args
    ops = build_flow_operators(net)
    prices = price_fn(net, ops, xi)
    failure = None
    if delta is not None:
        failure = interiority_failure(net, ops, xi, delta, tol, prices=prices)
    return prices, failure


def build_price_lattice(net: Network, ops: FlowOperators, tree: ScenarioTree, *,
                        tol: Tolerances = DEFAULT_TOLERANCES, check_interior: bool = True,
                        workers: int = 1) -> PriceLattice:
    """Prices at every tree node plus one-step predictors at non-terminal nodes.

    Prices are computed once per distinct demand vector (keyed by its exact
    bit pattern). Raises :class:`BoundaryPointError` if a demand vector fails
    the interiority probe.
    """
    if tree.dimension != net.node_count:
        raise ScenarioError(f"tree demand has dimension {tree.dimension}, network has {net.node_count} nodes")
    first_node: dict[bytes, int] = {}
    distinct = []
    for nid in tree.iter_nodes():
        xi = tree.node(nid).xi
        key = xi.tobytes()
        if key not in first_node:
            first_node[key] = nid
            distinct.append(xi)

    delta = tol.dual_probe_delta if check_interior else None
    if workers > 1 and len(distinct) > 1:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_price_probe, [(net, xi, delta, tol) for xi in distinct]))
    else:
        results = []
        for xi in distinct:
            prices = price_fn(net, ops, xi)
            failure = interiority_failure(net, ops, xi, delta, tol, prices=prices) if check_interior else None
            results.append((prices, failure))

    by_key = {}
    for xi, (prices, failure) in zip(distinct, results):
        key = xi.tobytes()
        if failure is not None:
            i, sign = failure
            raise BoundaryPointError(
                f"tree node {first_node[key]}: net demand {xi.tolist()} lies on a price-regime "
                f"boundary (coordinate {i}, {'+' if sign > 0 else '-'} probe)",
                xi=xi, coordinate=i, node=first_node[key],
            )
        prices = np.array(prices)
        prices.setflags(write=False)
        by_key[key] = prices

    lattice_prices = {nid: by_key[tree.node(nid).xi.tobytes()] for nid in tree.iter_nodes()}
    predictors = {}
    for nid in tree.iter_nodes():
        if tree.node(nid).stage < tree.horizon - 1:
            predictors[nid] = np.asarray(conditional_expectation(tree, nid, lattice_prices))
    return PriceLattice(lattice_prices, predictors)


def _positive_part_sum(lattice: PriceLattice, tree: ScenarioTree, gamma: float) -> np.ndarray:
    total = np.zeros(tree.dimension)
    for nid, pred in lattice.predictors.items():
        total += path_probability(tree, nid) * np.maximum(gamma * pred - lattice.prices[nid], 0.0)
    return total


def lmv(lattice: PriceLattice, tree: ScenarioTree, tol: float = 1e-8) -> LmvReport:
    value = _positive_part_sum(lattice, tree, 1.0)
    tv = np.zeros(tree.dimension)
    drift = np.zeros(tree.dimension)
    for leaf in tree.leaves():
        w = path_probability(tree, leaf)
        path = lattice.path_prices(tree, leaf)
        tv += w * np.abs(np.diff(path, axis=0)).sum(axis=0)
        drift += w * (path[-1] - path[0])
    bound = 0.5 * tv + 0.5 * drift
    return LmvReport(lmv=value, upper_bound=bound, tv_expectation=tv, terminal_drift=drift,
                     tight=np.abs(value - bound) <= tol)


def lmv_dissipative(lattice: PriceLattice, tree: ScenarioTree, gamma: float) -> np.ndarray:
    """Marginal value when stored energy decays by the factor ``gamma`` each period."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return _positive_part_sum(lattice, tree, gamma)


def upper_bound_stepwise(lattice: PriceLattice, tree: ScenarioTree) -> np.ndarray:
    """The TV bound written as ``sum_k E[(lambda_{k+1} - lambda_k)^+]``."""
    total = np.zeros(tree.dimension)
    for nid in tree.iter_nodes():
        parent = tree.node(nid).parent
        if parent is not None:
            step = lattice.prices[nid] - lattice.prices[parent]
            total += path_probability(tree, nid) * np.maximum(step, 0.0)
    return total


def jensen_gaps(lattice: PriceLattice, tree: ScenarioTree) -> dict[int, np.ndarray]:
    """Per non-terminal node: ``E[(child - price)^+] - (predictor - price)^+`` (nonnegative)."""
    out = {}
    for nid, pred in lattice.predictors.items():
        lam = lattice.prices[nid]
        ups = {c: np.maximum(lattice.prices[c] - lam, 0.0) for c in tree.children(nid)}
        out[nid] = np.asarray(conditional_expectation(tree, nid, ups)) - np.maximum(pred - lam, 0.0)
    return out


@dataclass(frozen=True)
class SpecialCaseReport:
    applicable: bool
    transition_value: np.ndarray | None = None
    lmv: np.ndarray | None = None
    upper_bound: np.ndarray | None = None
    coincide: bool | None = None
    reason: str = ""


def spcase_diagnostics(net: Network, lattice: PriceLattice, tree: ScenarioTree,
                       price_tol: float = 1e-7, value_tol: float = 1e-8) -> SpecialCaseReport:
    """Check the two-price structure of acyclic, spatially homogeneous networks.

    On such networks every price is ``alpha`` or ``beta``, and the marginal
    value equals both the TV bound and ``(alpha - beta)`` times the expected
    number of beta-to-alpha transitions.
    """
    if not is_acyclic(net):
        return SpecialCaseReport(False, reason="network graph has a cycle")
    if not net.homogeneous_costs:
        return SpecialCaseReport(False, reason="costs are not spatially homogeneous")
    a, b = float(net.alpha[0]), float(net.beta[0])
    for nid, lam in lattice.prices.items():
        off = np.minimum(np.abs(lam - a), np.abs(lam - b)) > price_tol
        if np.any(off):
            i = int(np.flatnonzero(off)[0])
            raise StructuralError(f"tree node {nid}: price {lam[i]!r} at bus {i} is neither alpha={a} nor beta={b}")

    count = np.zeros(tree.dimension)
    for leaf in tree.leaves():
        path = lattice.path_prices(tree, leaf)
        low = np.abs(path[:-1] - b) <= price_tol
        high = np.abs(path[1:] - a) <= price_tol
        if a - b > price_tol:
            count += path_probability(tree, leaf) * np.sum(low & high, axis=0)
    transition_value = (a - b) * count
    report = lmv(lattice, tree)
    coincide = bool(np.all(np.abs(report.lmv - transition_value) <= value_tol)
                    and np.all(np.abs(report.upper_bound - transition_value) <= value_tol))
    return SpecialCaseReport(True, transition_value, report.lmv, report.upper_bound, coincide)


def _upcrossing_probability(tree: ScenarioTree, series) -> float:
    total = 0.0
    for nid in tree.iter_nodes():
        parent = tree.node(nid).parent
        if parent is not None and series(tree.node(parent).xi) < 0 < series(tree.node(nid).xi):
            total += path_probability(tree, nid)
    return total


def two_node_limits(alpha: float, beta: float, tree: ScenarioTree) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form marginal values of a homogeneous two-bus network as the line capacity
    tends to zero and to infinity.

    Vanishing capacity decouples the buses, so each value counts zero-upcrossings
    of the local demand. Unlimited capacity merges them, so both values count
    zero-upcrossings of the total demand.
    """
    if tree.dimension != 2:
        raise ScenarioError("two_node_limits needs a two-dimensional demand tree")
    for nid in tree.iter_nodes():
        xi = tree.node(nid).xi
        if np.any(xi == 0.0):
            i = int(np.flatnonzero(xi == 0.0)[0])
            raise BoundaryPointError(f"tree node {nid}: zero demand at bus {i}", xi=xi, coordinate=i, node=nid)
        if xi.sum() == 0.0:
            raise BoundaryPointError(f"tree node {nid}: total demand is zero", xi=xi, node=nid)
    spread = alpha - beta
    f0 = np.array([spread * _upcrossing_probability(tree, lambda x, i=i: x[i]) for i in range(2)])
    total = spread * _upcrossing_probability(tree, lambda x: x.sum())
    return f0, np.array([total, total])
