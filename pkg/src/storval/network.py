"""DC transmission network: admittance, incidence and PTDF operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import NetworkError, SingularNetworkError


@dataclass(frozen=True)
class Line:
    from_node: int
    to_node: int
    susceptance: float
    capacity: float


@dataclass(frozen=True)
class Network:
    """Buses 0..node_count-1 joined by lines, with per-bus linear cost slopes.

    ``alpha`` is the marginal cost of generation and ``beta`` the marginal
    utility of consumption at each bus.
    """

    node_count: int
    lines: tuple[Line, ...]
    alpha: np.ndarray
    beta: np.ndarray
    shunt_susceptances: np.ndarray = None

    def __post_init__(self):
        m = int(self.node_count)
        if m < 1:
            raise NetworkError("node_count must be positive")
        object.__setattr__(self, "node_count", m)
        lines = tuple(l if isinstance(l, Line) else Line(*l) for l in self.lines)
        object.__setattr__(self, "lines", lines)
        shunts = self.shunt_susceptances
        if shunts is None:
            shunts = np.zeros(m)
        for name, value in (("alpha", self.alpha), ("beta", self.beta), ("shunt_susceptances", shunts)):
            arr = np.array(value, dtype=float).reshape(-1)
            if arr.shape != (m,):
                raise NetworkError(f"{name} must have length {m}, got {arr.shape[0]}")
            if not np.all(np.isfinite(arr)):
                raise NetworkError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        if np.any(self.beta < 0) or np.any(self.alpha < self.beta):
            raise NetworkError("costs must satisfy alpha >= beta >= 0 at every node")
        if np.any(self.shunt_susceptances < 0):
            raise NetworkError("shunt susceptances must be nonnegative")
        for k, line in enumerate(lines):
            if not (0 <= line.from_node < m and 0 <= line.to_node < m):
                raise NetworkError(f"line {k} references a node outside 0..{m - 1}")
            if line.from_node == line.to_node:
                raise NetworkError(f"line {k} is a self-loop")
            if not line.susceptance > 0:
                raise NetworkError(f"line {k} susceptance must be strictly positive")
            if not line.capacity >= 0:
                raise NetworkError(f"line {k} capacity must be nonnegative")
        if not _connected(m, lines):
            raise NetworkError("network graph is not connected")

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([l.capacity for l in self.lines], dtype=float)

    @property
    def has_shunts(self) -> bool:
        return bool(np.any(self.shunt_susceptances != 0))

    @property
    def homogeneous_costs(self) -> bool:
        return bool(np.all(self.alpha == self.alpha[0]) and np.all(self.beta == self.beta[0]))

    def with_capacities(self, capacity) -> "Network":
        caps = np.broadcast_to(np.asarray(capacity, dtype=float), (self.line_count,))
        lines = tuple(Line(l.from_node, l.to_node, l.susceptance, float(c)) for l, c in zip(self.lines, caps))
        return Network(self.node_count, lines, self.alpha, self.beta, self.shunt_susceptances)

    def scaled_costs(self, s: float) -> "Network":
        return Network(self.node_count, self.lines, s * self.alpha, s * self.beta, self.shunt_susceptances)


def _connected(m: int, lines: Sequence[Line]) -> bool:
    adj = [[] for _ in range(m)]
    for l in lines:
        adj[l.from_node].append(l.to_node)
        adj[l.to_node].append(l.from_node)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == m


@dataclass(frozen=True)
class FlowOperators:
    admittance: np.ndarray
    incidence: np.ndarray
    ptdf: np.ndarray
    shunt_free: bool = field(default=True)


def build_flow_operators(net: Network) -> FlowOperators:
    """Admittance ``Y``, weighted incidence ``B`` and PTDF ``H``.

    ``H = B (Y^T Y + e_1 e_1^T)^{-1} Y^T``; the rank-one term pins the angle
    reference at bus 0.
    """
    m, l = net.node_count, net.line_count
    Y = np.diag(np.array(net.shunt_susceptances, dtype=float))
    B = np.zeros((l, m))
    for k, line in enumerate(net.lines):
        i, j, y = line.from_node, line.to_node, line.susceptance
        Y[i, j] -= y
        Y[j, i] -= y
        Y[i, i] += y
        Y[j, j] += y
        B[k, i] = y
        B[k, j] = -y

    M = Y.T @ Y
    M[0, 0] += 1.0
    try:
        # Solve instead of forming the inverse: H^T = Y M^{-1} B^T since M is symmetric.
        Ht = Y @ np.linalg.solve(M, B.T)
    except np.linalg.LinAlgError as exc:
        raise SingularNetworkError(f"PTDF system is singular: {exc}") from exc
    if not np.all(np.isfinite(Ht)) or np.linalg.cond(M) > 1e14:
        raise SingularNetworkError("PTDF system is numerically singular")
    for arr in (Y, B):
        arr.setflags(write=False)
    H = np.ascontiguousarray(Ht.T)
    H.setflags(write=False)
    return FlowOperators(admittance=Y, incidence=B, ptdf=H, shunt_free=not net.has_shunts)


def _angles_for(ops: FlowOperators, x: np.ndarray) -> np.ndarray:
    Y = ops.admittance
    if ops.shunt_free:
        # Y is singular with null space 1; fix angle 0 at bus 0.
        Yr = Y[:, 1:]
        theta_r, *_ = np.linalg.lstsq(Yr, x, rcond=None)
        return np.concatenate([[0.0], theta_r])
    return np.linalg.solve(Y, x)


def injection_feasible(ops: FlowOperators, net: Network, x, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Whether ``x`` lies in the injection polytope (within tolerance)."""
    x = np.asarray(x, dtype=float)
    f = net.capacities
    if ops.shunt_free:
        if abs(x.sum()) > tol.balance:
            return False
        flows = ops.ptdf @ x
    else:
        theta = _angles_for(ops, x)
        if np.max(np.abs(ops.admittance @ theta - x), initial=0.0) > tol.balance:
            return False
        flows = ops.incidence @ theta
    return bool(np.all(np.abs(flows) <= f + tol.flow))


def is_acyclic(net: Network) -> bool:
    # Graph is connected by construction, so a tree iff it has m - 1 lines.
    return net.line_count == net.node_count - 1
