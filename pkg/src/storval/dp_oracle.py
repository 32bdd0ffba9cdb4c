"""Stochastic dynamic programming over scenario trees.

An independent route to the marginal value of storage: solve the
multi-period dispatch problem with storage exactly by backward recursion,

    J_k(z, node) = min_u  Q(xi_node + u) + E[J_{k+1}(z + u, child) | node],

where the storage injection ``u`` enters as extra demand and ``0 <= z + u <= b``.
For a single small device of capacity ``eps`` at bus ``i`` the optimal
policy is bang-bang, so the exact state set is ``{0, eps}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .dispatch import DispatchSolution, price_fn, require_interior, solve_ed
from .errors import BudgetExceededError, ScenarioError, VerificationError
from .network import FlowOperators, Network
from .scenario import ScenarioTree, path_probability
from .valuation import PriceLattice, build_price_lattice

logger = logging.getLogger(__name__)

CHARGE = "charge"
DISCHARGE = "discharge"


@dataclass(frozen=True)
class StorageConfig:
    capacities: np.ndarray
    initial_state: np.ndarray = None

    def __post_init__(self):
        b = np.array(self.capacities, dtype=float).reshape(-1)
        z0 = np.zeros_like(b) if self.initial_state is None else np.array(self.initial_state, dtype=float)
        if np.any(b < 0):
            raise ValueError("storage capacities must be nonnegative")
        if z0.shape != b.shape or np.any(z0 < 0) or np.any(z0 > b):
            raise ValueError("initial state must satisfy 0 <= z0 <= b")
        object.__setattr__(self, "capacities", b)
        object.__setattr__(self, "initial_state", z0)


@dataclass
class ValueFunctionTable:
    """Optimal values and decisions at every (tree node, storage state)."""

    value: float
    values: dict[tuple[int, tuple[float, ...]], float]
    policy: dict[tuple[int, tuple[float, ...]], tuple[np.ndarray, np.ndarray]]
    grid: list[np.ndarray]
    capacities: np.ndarray
    actions: dict[tuple[int, float], str] = field(default_factory=dict)
    action_values: dict[tuple[int, float], tuple[float, float]] = field(default_factory=dict)


class _CostCache:
    """Memoized dispatch solves keyed by the exact bytes of the shifted demand."""

    def __init__(self, net: Network, ops: FlowOperators):
        self.net, self.ops = net, ops
        self._memo: dict[bytes, DispatchSolution] = {}

    def __call__(self, xi) -> DispatchSolution:
        xi = np.asarray(xi, dtype=float)
        key = xi.tobytes()
        sol = self._memo.get(key)
        if sol is None:
            sol = self._memo[key] = solve_ed(self.net, self.ops, xi)
        return sol

    def __len__(self):
        return len(self._memo)


def _backward_order(tree: ScenarioTree) -> list[int]:
    return list(tree.iter_nodes())[::-1]


def expected_dispatch_cost(net: Network, ops: FlowOperators, tree: ScenarioTree) -> float:
    """``J*(0)``: expected total dispatch cost without storage."""
    cost = _CostCache(net, ops)
    return float(sum(path_probability(tree, n) * cost(tree.node(n).xi).cost for n in tree.iter_nodes()))


def epsilon_bar(net: Network, ops: FlowOperators, tree: ScenarioTree, *, delta0: float | None = None,
                cap: float = 100.0, safety: float = 0.5, bisect_steps: int = 12,
                tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Safe storage size below which every axis shift keeps prices unchanged.

    Every support point is probed along each coordinate axis in both
    directions: the shift doubles from ``delta0`` until the price vector
    changes, then the bracket is bisected. The smallest verified distance,
    times ``safety``, is returned. Directions with no change up to ``cap``
    count as distance ``cap``.
    """
    delta0 = tol.dual_probe_delta if delta0 is None else delta0
    support = tree.support()
    for xi in support:
        require_interior(net, ops, xi, delta0, tol)

    def changed(xi, base, i, shift):
        probe = xi.copy()
        probe[i] += shift
        return np.max(np.abs(price_fn(net, ops, probe) - base)) > tol.price_equal

    best = cap
    for xi in support:
        base = price_fn(net, ops, xi)
        for i in range(net.node_count):
            for sign in (1.0, -1.0):
                lo = delta0
                hi = None
                while lo < best:
                    nxt = 2.0 * lo
                    if changed(xi, base, i, sign * nxt):
                        hi = nxt
                        break
                    lo = nxt
                if hi is None:
                    continue
                for _ in range(bisect_steps):
                    mid = 0.5 * (lo + hi)
                    if changed(xi, base, i, sign * mid):
                        hi = mid
                    else:
                        lo = mid
                best = min(best, lo)
    return safety * min(best, cap)


def _single_device(net, ops, tree, i, eps, cost=None):
    """Exact recursion on the two-point state set ``{0, eps}`` at bus ``i``."""
    cost = cost or _CostCache(net, ops)
    unit = np.zeros(net.node_count)
    unit[i] = 1.0
    levels = (0.0, float(eps))
    J: dict[tuple[int, float], float] = {}
    policy, actions, action_values = {}, {}, {}
    for nid in _backward_order(tree):
        nd = tree.node(nid)
        kids = tree.children(nid) if nd.stage < tree.horizon - 1 else []
        for z in levels:
            options = {}
            for action, target in ((DISCHARGE, 0.0), (CHARGE, float(eps))):
                u = target - z
                sol = cost(nd.xi + u * unit)
                future = sum(tree.node(c).prob * J[(c, target)] for c in kids)
                options[action] = (sol.cost + future, u, sol)
            v_dis, v_chg = options[DISCHARGE][0], options[CHARGE][0]
            tie = 1e-12 * max(1.0, abs(v_dis), abs(v_chg))
            action = CHARGE if v_chg <= v_dis + tie else DISCHARGE
            value, u, sol = options[action]
            J[(nid, z)] = value
            policy[(nid, (z,))] = (u * unit, sol.dispatch)
            actions[(nid, z)] = action
            action_values[(nid, z)] = (v_dis, v_chg)
    total = float(sum(tree.node(r).prob * J[(r, 0.0)] for r in tree.roots))
    return ValueFunctionTable(
        value=total,
        values={(n, (z,)): v for (n, z), v in J.items()},
        policy=policy,
        grid=[np.array(levels)],
        capacities=float(eps) * unit,
        actions=actions,
        action_values=action_values,
    )


def _check_eps(eps, eps_bar):
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if eps_bar is not None and eps > 0 and not eps < eps_bar:
        raise ValueError(f"eps={eps} is not below the safe bound {eps_bar}")


def solve_dp_single_device(net: Network, ops: FlowOperators, tree: ScenarioTree, node_index: int,
                           eps: float, *, eps_bar: float | None = None) -> float:
    """``J*(eps e_i)`` for one device of capacity ``eps`` at bus ``node_index``.

    ``eps = 0`` is allowed and gives ``J*(0)``. Pass ``eps_bar`` (from
    :func:`epsilon_bar`) to have the range checked.
    """
    if not 0 <= node_index < net.node_count:
        raise ValueError(f"node_index {node_index} outside 0..{net.node_count - 1}")
    _check_eps(eps, eps_bar)
    return _single_device(net, ops, tree, node_index, eps).value


def solve_dp_grid(net: Network, ops: FlowOperators, tree: ScenarioTree, b, grid_points_per_dim: int,
                  *, budget: int = 2_000_000) -> ValueFunctionTable:
    """Storage DP restricted to a uniform grid per bus.

    Buses with zero capacity keep the single level 0. Moves are restricted
    to land on grid points, so the value is an upper bound on ``J*(b)``;
    grids with a shared spacing are nested, which makes the value monotone
    along such capacity sequences.
    """
    cfg = StorageConfig(b)
    b = cfg.capacities
    if b.shape != (net.node_count,):
        raise ValueError(f"capacity vector must have length {net.node_count}")
    if np.any(b > 0) and grid_points_per_dim < 2:
        raise ValueError("grid_points_per_dim must be at least 2 when any capacity is positive")
    grid = [np.linspace(0.0, bi, grid_points_per_dim) if bi > 0 else np.zeros(1) for bi in b]
    Z = np.array(np.meshgrid(*grid, indexing="ij")).reshape(net.node_count, -1).T
    S = Z.shape[0]
    if S * len(tree) > budget or S * S > budget:
        raise BudgetExceededError(f"grid DP with {S} states over {len(tree)} nodes exceeds budget {budget}")

    cost = _CostCache(net, ops)
    shifts = Z[None, :, :] - Z[:, None, :]
    cost_mats: dict[bytes, np.ndarray] = {}

    def cost_matrix(xi):
        key = xi.tobytes()
        if key not in cost_mats:
            flat = shifts.reshape(-1, net.node_count)
            cost_mats[key] = np.array([cost(xi + u).cost for u in flat]).reshape(S, S)
        return cost_mats[key]

    J: dict[int, np.ndarray] = {}
    arg: dict[int, np.ndarray] = {}
    for nid in _backward_order(tree):
        nd = tree.node(nid)
        future = np.zeros(S)
        if nd.stage < tree.horizon - 1:
            for c in tree.children(nid):
                future = future + tree.node(c).prob * J[c]
        M = cost_matrix(nd.xi) + future[None, :]
        arg[nid] = np.argmin(M, axis=1)
        J[nid] = M[np.arange(S), arg[nid]]

    zero = int(np.flatnonzero(np.all(Z == cfg.initial_state, axis=1))[0])
    total = float(sum(tree.node(r).prob * J[r][zero] for r in tree.roots))
    values, policy = {}, {}
    for nid in tree.iter_nodes():
        xi = tree.node(nid).xi
        for s in range(S):
            key = (nid, tuple(Z[s]))
            values[key] = float(J[nid][s])
            u = Z[arg[nid][s]] - Z[s]
            policy[key] = (u, cost(xi + u).dispatch)
    return ValueFunctionTable(value=total, values=values, policy=policy, grid=grid, capacities=b)


@dataclass
class ThresholdRecord:
    node: int
    stage: int
    z: float
    dp_difference: float
    formula: float
    residual: float
    dp_action: str
    threshold_action: str
    policy_ok: bool

    @property
    def ok(self) -> bool:
        return self.policy_ok and self.residual <= 1e-9


@dataclass
class ThresholdReport:
    node_index: int
    eps: float
    records: list[ThresholdRecord]
    value_tol: float = 1e-9

    @property
    def failures(self) -> list[ThresholdRecord]:
        return [r for r in self.records if not r.policy_ok or r.residual > self.value_tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.records), default=0.0)


def _future_positive_parts(lattice: PriceLattice, tree: ScenarioTree, i: int) -> dict[int, float]:
    """``E[sum_{j>=k} (pred_j - lambda_j)^+ | node]`` for bus ``i``."""
    W = {}
    for nid in _backward_order(tree):
        if nid in lattice.predictors:
            own = max(lattice.predictors[nid][i] - lattice.prices[nid][i], 0.0)
            W[nid] = own + sum(tree.node(c).prob * W[c] for c in tree.children(nid))
        else:
            W[nid] = 0.0
    return W


def verify_threshold_policy(net: Network, ops: FlowOperators, tree: ScenarioTree, i: int, eps: float, *,
                  lattice: PriceLattice | None = None, eps_bar: float | None = None,
                  value_tol: float = 1e-9, strict: bool = True,
                  tol: Tolerances = DEFAULT_TOLERANCES) -> ThresholdReport:
    """Compare the exact DP with the closed-form value difference and threshold policy.

    At every node and ``z in {0, eps}``:
    ``J_k(0; 0) - J_k(z; eps e_i) = lambda_k z + eps E[sum_{j>=k} (pred_j - lambda_j)^+ | node]``,
    and the DP decision is "fill" when ``lambda_k <= pred_k`` and "empty"
    otherwise (always "empty" at the last stage). Exact ties in the DP
    are accepted either way.
    """
    _check_eps(eps, eps_bar)
    if lattice is None:
        lattice = build_price_lattice(net, ops, tree, tol=tol)
    cost = _CostCache(net, ops)
    with_storage = _single_device(net, ops, tree, i, eps, cost)
    no_storage = _single_device(net, ops, tree, i, 0.0, cost)
    W = _future_positive_parts(lattice, tree, i)

    records = []
    for nid in tree.iter_nodes():
        nd = tree.node(nid)
        lam = lattice.prices[nid][i]
        if nid in lattice.predictors:
            threshold = CHARGE if lam <= lattice.predictors[nid][i] else DISCHARGE
        else:
            threshold = DISCHARGE
        j0 = no_storage.values[(nid, (0.0,))]
        for z in (0.0, float(eps)):
            diff = j0 - with_storage.values[(nid, (z,))]
            formula = lam * z + eps * W[nid]
            dp_action = with_storage.actions[(nid, z)]
            v_dis, v_chg = with_storage.action_values[(nid, z)]
            policy_ok = dp_action == threshold or abs(v_dis - v_chg) <= value_tol
            records.append(ThresholdRecord(nid, nd.stage, z, diff, formula, abs(diff - formula),
                                        dp_action, threshold, policy_ok))
    report = ThresholdReport(i, float(eps), records, value_tol)
    if strict and not report.passed:
        bad = report.failures[0]
        raise VerificationError(
            f"threshold-policy check failed at tree node {bad.node} (stage {bad.stage}, z={bad.z}): "
            f"residual {bad.residual:.3e}, DP action {bad.dp_action}, threshold action {bad.threshold_action}",
            failures=report.failures,
        )
    return report


def simulate_threshold_arbitrage(lattice: PriceLattice, tree: ScenarioTree, i: int, b: float,
                                 gamma: float | None = None) -> float:
    """Expected revenue of the causal fill/empty threshold policy at bus ``i``.

    Fill to ``b`` when the current price is at most ``gamma`` times the
    one-step predictor, otherwise empty; always empty at the last stage.
    Buying ``q`` costs ``q * price`` and selling ``q`` earns ``q * price``.
    Stored energy decays as ``z_{k+1} = gamma z_k + u_k``.
    """
    gamma = 1.0 if gamma is None else float(gamma)
    if b < 0:
        raise ValueError("capacity must be nonnegative")

    def revenue(nid, z):
        lam = lattice.prices[nid][i]
        if nid in lattice.predictors:
            target = b if lam <= gamma * lattice.predictors[nid][i] else 0.0
        else:
            target = 0.0
        u = target - gamma * z
        return -u * lam + sum(tree.node(c).prob * revenue(c, target) for c in tree.children(nid)
                              if nid in lattice.predictors)

    return float(sum(tree.node(r).prob * revenue(r, 0.0) for r in tree.roots))


def _foresight_path_revenue(prices: np.ndarray) -> float:
    """Buy at each local minimum, sell at the following local maximum."""
    total = 0.0
    holding = None
    n = len(prices)
    for k in range(n):
        last = k == n - 1
        if holding is None:
            if not last and prices[k + 1] > prices[k]:
                holding = prices[k]
        elif last or prices[k + 1] < prices[k]:
            total += prices[k] - holding
            holding = None
    return total


def perfect_foresight_revenue(lattice: PriceLattice, tree: ScenarioTree, i: int, b: float) -> float:
    """Expected arbitrage revenue when the whole price path is known in advance."""
    if b < 0:
        raise ValueError("capacity must be nonnegative")
    total = 0.0
    for leaf in tree.leaves():
        path = lattice.path_prices(tree, leaf)[:, i]
        total += path_probability(tree, leaf) * _foresight_path_revenue(path)
    return float(b * total)


def midpoint_convexity(net: Network, ops: FlowOperators, tree: ScenarioTree, b1, b2,
                       grid_points_per_dim: int) -> dict[str, float]:
    """Soft convexity probe on the grid solver.

    Returns the three grid values and ``violation = J(mid) - (J(b1) + J(b2)) / 2``.
    Grid restriction can make this positive even though the exact value
    function is convex.
    """
    b1, b2 = np.asarray(b1, dtype=float), np.asarray(b2, dtype=float)
    j1 = solve_dp_grid(net, ops, tree, b1, grid_points_per_dim).value
    j2 = solve_dp_grid(net, ops, tree, b2, grid_points_per_dim).value
    jm = solve_dp_grid(net, ops, tree, 0.5 * (b1 + b2), grid_points_per_dim).value
    return {"j_b1": j1, "j_b2": j2, "j_mid": jm, "violation": jm - 0.5 * (j1 + j2)}


def headline_residual(net: Network, ops: FlowOperators, tree: ScenarioTree, i: int, eps: float,
                      lmv_i: float, *, j0: float | None = None) -> tuple[float, float]:
    """``(|J*(0) - J*(eps e_i) - eps LMV_i|, J*(0))``."""
    cost = _CostCache(net, ops)
    if j0 is None:
        j0 = _single_device(net, ops, tree, i, 0.0, cost).value
    j_eps = _single_device(net, ops, tree, i, eps, cost).value
    return abs((j0 - j_eps) - eps * lmv_i), j0


verify_lemma3 = verify_threshold_policy
