"""Single-period economic dispatch and nodal prices.

The dispatch problem at net demand ``xi`` is the linear program::

    minimize    alpha^T v+ - beta^T v-
    subject to  v+ - v- - Y theta = xi      (power balance, duals = prices)
                B theta - s = 0             (line flows)
                v+, v- >= 0,  -f <= s <= f

Prices are read off the balance-row duals of the final simplex basis. The
critical-region partition of demand space is never enumerated; properties
that depend on it are checked point-wise by re-solving at perturbed demands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import BoundaryPointError, DispatchError
from .lp import INF, LinearProgram, LpSolution, solve
from .network import FlowOperators, Network


@dataclass(frozen=True)
class DispatchSolution:
    dispatch: np.ndarray
    angles: np.ndarray
    cost: float
    prices: np.ndarray
    line_flows: np.ndarray


def build_ed_lp(net: Network, ops: FlowOperators, xi) -> LinearProgram:
    """LP reformulation of the dispatch problem. Variable order is ``(v+, v-, theta, s)``."""
    m, l = net.node_count, net.line_count
    xi = np.asarray(xi, dtype=float)
    Y, B = ops.admittance, ops.incidence
    n = 3 * m + l
    A = np.zeros((m + l, n))
    A[:m, :m] = np.eye(m)
    A[:m, m:2 * m] = -np.eye(m)
    A[:m, 2 * m:3 * m] = -Y
    A[m:, 2 * m:3 * m] = B
    A[m:, 3 * m:] = -np.eye(l)
    b = np.concatenate([xi, np.zeros(l)])
    c = np.concatenate([net.alpha, -net.beta, np.zeros(m + l)])
    f = net.capacities
    lo = np.concatenate([np.zeros(2 * m), np.full(m, -INF), -f])
    hi = np.concatenate([np.full(2 * m, INF), np.full(m, INF), f])
    if ops.shunt_free:
        # Y has the all-ones null space; pin the reference angle.
        lo[2 * m] = hi[2 * m] = 0.0
    return LinearProgram(c, A, b, lo, hi, name=f"ed(xi={xi.tolist()})")


def solve_ed(net: Network, ops: FlowOperators, xi, *, debug: bool = False) -> DispatchSolution:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != (net.node_count,):
        raise ValueError(f"xi must have length {net.node_count}")
    if not np.all(np.isfinite(xi)):
        raise ValueError("xi must be finite")
    lp = build_ed_lp(net, ops, xi)
    try:
        sol: LpSolution = solve(lp, debug=debug)
    except Exception as exc:
        raise DispatchError(f"LP solver failed at xi={xi.tolist()}: {exc}", xi=xi) from exc
    if not sol.optimal:
        raise DispatchError(f"dispatch LP {sol.status.value} at xi={xi.tolist()}", xi=xi)
    m = net.node_count
    x = sol.primal
    theta = x[2 * m:3 * m]
    return DispatchSolution(
        dispatch=x[:m] - x[m:2 * m],
        angles=theta.copy(),
        cost=sol.objective_value,
        prices=sol.eq_duals[:m].copy(),
        line_flows=ops.incidence @ theta,
    )


def price_fn(net: Network, ops: FlowOperators, xi) -> np.ndarray:
    return solve_ed(net, ops, xi).prices


def subdifferential_violations(net: Network, sol: DispatchSolution,
                               tol: Tolerances = DEFAULT_TOLERANCES) -> list[int]:
    """Nodes whose price is not a subgradient of the nodal cost at the dispatch."""
    bad = []
    for i, (v, lam) in enumerate(zip(sol.dispatch, sol.prices)):
        a, b = net.alpha[i], net.beta[i]
        if v > tol.dispatch_sign:
            ok = abs(lam - a) <= tol.price_equal
        elif v < -tol.dispatch_sign:
            ok = abs(lam - b) <= tol.price_equal
        else:
            ok = b - tol.price_equal <= lam <= a + tol.price_equal
        if not ok:
            bad.append(i)
    return bad


def interiority_failure(net: Network, ops: FlowOperators, xi, delta: float | None = None,
                        tol: Tolerances = DEFAULT_TOLERANCES, *, prices=None):
    """First ``(coordinate, sign)`` where an axis probe changes the prices, else None."""
    delta = tol.dual_probe_delta if delta is None else delta
    if not delta > 0:
        raise ValueError("delta must be positive")
    xi = np.asarray(xi, dtype=float)
    base = price_fn(net, ops, xi) if prices is None else prices
    for i in range(net.node_count):
        for sign in (1.0, -1.0):
            probe = xi.copy()
            probe[i] += sign * delta
            if np.max(np.abs(price_fn(net, ops, probe) - base)) > tol.price_equal:
                return i, sign
    return None


def check_assumption_interiority(net: Network, ops: FlowOperators, xi, delta: float | None = None,
                                 tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Point-wise test that ``xi`` sits inside a region of constant prices."""
    return interiority_failure(net, ops, xi, delta, tol) is None


def require_interior(net: Network, ops: FlowOperators, xi, delta: float | None = None,
                     tol: Tolerances = DEFAULT_TOLERANCES, node=None) -> None:
    failure = interiority_failure(net, ops, xi, delta, tol)
    if failure is not None:
        i, sign = failure
        where = f" at tree node {node}" if node is not None else ""
        raise BoundaryPointError(
            f"net demand {np.asarray(xi).tolist()}{where} lies on a price-regime boundary: "
            f"prices change when coordinate {i} moves by {'+' if sign > 0 else '-'}delta",
            xi=np.asarray(xi), coordinate=i, node=node,
        )


def gradient_check(net: Network, ops: FlowOperators, xi, delta: float | None = None,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """``|dQ/dxi_i - lambda_i|`` using central differences of the dispatch cost."""
    delta = tol.dual_probe_delta if delta is None else delta
    xi = np.asarray(xi, dtype=float)
    require_interior(net, ops, xi, delta, tol)
    lam = price_fn(net, ops, xi)
    out = np.empty(net.node_count)
    for i in range(net.node_count):
        up, down = xi.copy(), xi.copy()
        up[i] += delta
        down[i] -= delta
        dq = (solve_ed(net, ops, up).cost - solve_ed(net, ops, down).cost) / (2 * delta)
        out[i] = abs(dq - lam[i])
    return out
