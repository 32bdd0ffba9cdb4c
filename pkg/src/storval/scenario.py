"""Finite-support net-demand processes as scenario trees.

A tree node stands for a full demand history: its root path. Nodes at
stage ``k`` carry the demand vector realised at period ``k`` together with
the probability of reaching them from their parent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .config import DEFAULT_NODE_BUDGET
from .errors import BudgetExceededError, ScenarioError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class TreeNode:
    id: int
    stage: int
    parent: int | None
    xi: np.ndarray
    prob: float


class ScenarioTree:
    """Immutable scenario tree with validated probabilities."""

    def __init__(self, horizon: int, nodes: Iterable[TreeNode], node_budget: int = DEFAULT_NODE_BUDGET):
        self.horizon = int(horizon)
        if self.horizon < 1:
            raise ScenarioError("horizon must be positive")
        nodes = list(nodes)
        if len(nodes) > node_budget:
            raise BudgetExceededError(f"tree has {len(nodes)} nodes, budget is {node_budget}")
        self._nodes: dict[int, TreeNode] = {}
        dim = None
        for nd in nodes:
            xi = np.array(nd.xi, dtype=float).reshape(-1)
            xi.setflags(write=False)
            nd = TreeNode(int(nd.id), int(nd.stage), None if nd.parent is None else int(nd.parent),
                          xi, float(nd.prob))
            if nd.id in self._nodes:
                raise ScenarioError(f"duplicate node id {nd.id}", node=nd.id)
            if dim is None:
                dim = xi.shape[0]
            elif xi.shape[0] != dim:
                raise ScenarioError(f"node {nd.id}: xi has length {xi.shape[0]}, expected {dim}", node=nd.id)
            if not np.all(np.isfinite(xi)):
                raise ScenarioError(f"node {nd.id}: xi must be finite", node=nd.id)
            if not 0.0 < nd.prob <= 1.0:
                raise ScenarioError(f"node {nd.id}: probability {nd.prob} outside (0, 1]", node=nd.id)
            self._nodes[nd.id] = nd
        if not self._nodes:
            raise ScenarioError("tree has no nodes")
        self.dimension = dim

        self._children: dict[int, list[int]] = {i: [] for i in self._nodes}
        self.roots: list[int] = []
        for nd in self._nodes.values():
            if nd.parent is None:
                if nd.stage != 0:
                    raise ScenarioError(f"node {nd.id}: root must be at stage 0", node=nd.id)
                self.roots.append(nd.id)
            else:
                par = self._nodes.get(nd.parent)
                if par is None:
                    raise ScenarioError(f"node {nd.id}: unknown parent {nd.parent}", node=nd.id)
                if nd.stage != par.stage + 1:
                    raise ScenarioError(f"node {nd.id}: stage {nd.stage} does not follow parent stage {par.stage}", node=nd.id)
                self._children[nd.parent].append(nd.id)
            if not 0 <= nd.stage < self.horizon:
                raise ScenarioError(f"node {nd.id}: stage {nd.stage} outside 0..{self.horizon - 1}", node=nd.id)
        self.roots.sort()
        for kids in self._children.values():
            kids.sort()

        if abs(sum(self._nodes[r].prob for r in self.roots) - 1.0) > PROB_TOL:
            raise ScenarioError("root probabilities do not sum to 1")
        for nid, kids in self._children.items():
            nd = self._nodes[nid]
            if nd.stage < self.horizon - 1:
                if not kids:
                    raise ScenarioError(f"node {nid} at stage {nd.stage} has no children", node=nid)
                total = sum(self._nodes[c].prob for c in kids)
                if abs(total - 1.0) > PROB_TOL:
                    raise ScenarioError(f"children of node {nid} have probabilities summing to {total!r}", node=nid)

        self._path_prob: dict[int, float] = {}
        for nid in self.iter_nodes():
            nd = self._nodes[nid]
            base = 1.0 if nd.parent is None else self._path_prob[nd.parent]
            self._path_prob[nid] = base * nd.prob

    def __len__(self) -> int:
        return len(self._nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioTree):
            return NotImplemented
        if self.horizon != other.horizon or set(self._nodes) != set(other._nodes):
            return False
        for nid, a in self._nodes.items():
            b = other._nodes[nid]
            if (a.stage, a.parent, a.prob) != (b.stage, b.parent, b.prob) or not np.array_equal(a.xi, b.xi):
                return False
        return True

    def node(self, node_id: int) -> TreeNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise ScenarioError(f"unknown node id {node_id}") from None

    def children(self, node_id: int) -> list[int]:
        self.node(node_id)
        return self._children[node_id]

    def iter_nodes(self) -> Iterator[int]:
        """Node ids in breadth-first order (stage, then id)."""
        frontier = list(self.roots)
        while frontier:
            yield from frontier
            frontier = [c for nid in frontier for c in self._children[nid]]

    def stage_nodes(self, k: int) -> list[int]:
        return sorted(nid for nid, nd in self._nodes.items() if nd.stage == k)

    def leaves(self) -> list[int]:
        return self.stage_nodes(self.horizon - 1)

    def path(self, node_id: int) -> list[int]:
        out = [node_id]
        while self._nodes[out[-1]].parent is not None:
            out.append(self._nodes[out[-1]].parent)
        return out[::-1]

    def support(self) -> list[np.ndarray]:
        """Distinct net-demand vectors, in first-visit order."""
        seen = {}
        for nid in self.iter_nodes():
            xi = self._nodes[nid].xi
            seen.setdefault(xi.tobytes(), xi)
        return list(seen.values())


def path_probability(tree: ScenarioTree, node_id: int) -> float:
    tree.node(node_id)
    return tree._path_prob[node_id]


def conditional_expectation(tree: ScenarioTree, node_id: int, values: Mapping[int, float]):
    """Probability-weighted mean of ``values`` over the children of ``node_id``.

    Works for scalar or array values.
    """
    nd = tree.node(node_id)
    if nd.stage >= tree.horizon - 1:
        raise ScenarioError(f"node {node_id} is at the terminal stage", node=node_id)
    total = 0.0
    for c in tree.children(node_id):
        if c not in values:
            raise ScenarioError(f"missing value for child {c} of node {node_id}")
        total = total + tree.node(c).prob * np.asarray(values[c], dtype=float)
    return total if np.ndim(total) else float(total)


def _check_distribution(probs, what):
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
        raise ScenarioError(f"{what} is not a probability distribution")
    return probs


def _tree_size(branching: Sequence[int], horizon: int) -> int:
    return sum(int(np.prod(branching[: k + 1])) for k in range(horizon))


def build_iid(support: Sequence, probs: Sequence[float], horizon: int,
              node_budget: int = DEFAULT_NODE_BUDGET) -> ScenarioTree:
    """Tree of an i.i.d. process with the given finite support."""
    support = [np.asarray(s, dtype=float).reshape(-1) for s in support]
    probs = _check_distribution(probs, "support probabilities")
    if len(support) != probs.size:
        raise ScenarioError("support and probabilities differ in length")
    keep = [j for j in range(len(support)) if probs[j] > 0]
    size = _tree_size([len(keep)] * horizon, horizon)
    if size > node_budget:
        raise BudgetExceededError(f"i.i.d. tree would have {size} nodes, budget is {node_budget}")
    nodes = []
    ids = itertools.count()
    frontier = [None]
    for k in range(horizon):
        nxt = []
        for parent in frontier:
            for j in keep:
                nid = next(ids)
                nodes.append(TreeNode(nid, k, parent, support[j], float(probs[j])))
                nxt.append(nid)
        frontier = nxt
    return ScenarioTree(horizon, nodes, node_budget)


def build_markov(states: Sequence, transition, initial: Sequence[float], horizon: int,
                 node_budget: int = DEFAULT_NODE_BUDGET) -> ScenarioTree:
    """Tree of a finite Markov chain, expanded without recombination.

    Zero-probability transitions are pruned.
    """
    states = [np.asarray(s, dtype=float).reshape(-1) for s in states]
    P = np.asarray(transition, dtype=float)
    init = _check_distribution(initial, "initial distribution")
    if P.shape != (len(states), len(states)) or init.size != len(states):
        raise ScenarioError("transition matrix must be square and match the state count")
    for r, row in enumerate(P):
        _check_distribution(row, f"transition row {r}")

    nodes = []
    ids = itertools.count()
    frontier = []
    for s in range(len(states)):
        if init[s] > 0:
            nid = next(ids)
            nodes.append(TreeNode(nid, 0, None, states[s], float(init[s])))
            frontier.append((nid, s))
    for k in range(1, horizon):
        nxt = []
        for parent, s in frontier:
            for t in range(len(states)):
                if P[s, t] > 0:
                    nid = next(ids)
                    nodes.append(TreeNode(nid, k, parent, states[t], float(P[s, t])))
                    nxt.append((nid, t))
                    if len(nodes) > node_budget:
                        raise BudgetExceededError(f"Markov tree exceeds node budget {node_budget}")
        frontier = nxt
    return ScenarioTree(horizon, nodes, node_budget)


def build_deterministic(path: Sequence, node_budget: int = DEFAULT_NODE_BUDGET) -> ScenarioTree:
    """Single-path tree through the given demand sequence."""
    nodes = [TreeNode(k, k, None if k == 0 else k - 1, xi, 1.0) for k, xi in enumerate(path)]
    return ScenarioTree(len(nodes), nodes, node_budget)
