"""Reference networks, scenario trees and the cross-check corpus.

Demand values are deliberately irregular so that no support point sits on
a price-regime boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import Line, Network
from .scenario import ScenarioTree, build_deterministic, build_iid, build_markov


def copperplate(alpha: float = 10.0, beta: float = 2.0) -> Network:
    """Single bus, no lines."""
    return Network(1, [], [alpha], [beta])


def two_node(capacity: float = 1.0, alpha=(10.0, 10.0), beta=(2.0, 2.0)) -> Network:
    return Network(2, [Line(0, 1, 1.0, capacity)], alpha, beta)


def four_node_tree() -> Network:
    lines = [Line(0, 1, 1.0, 0.8), Line(1, 2, 2.0, 1.2), Line(1, 3, 1.5, 0.5)]
    return Network(4, lines, [10.0] * 4, [2.0] * 4)


def five_node_star() -> Network:
    lines = [Line(0, k, 1.0 + 0.25 * k, 0.4 + 0.3 * k) for k in range(1, 5)]
    return Network(5, lines, [10.0] * 5, [2.0] * 5)


def triangle(heterogeneous: bool = True) -> Network:
    lines = [Line(0, 1, 1.0, 0.6), Line(1, 2, 1.5, 0.8), Line(0, 2, 0.7, 0.5)]
    if heterogeneous:
        return Network(3, lines, [10.0, 12.0, 15.0], [2.0, 3.0, 1.0])
    return Network(3, lines, [10.0] * 3, [2.0] * 3)


# --- scenario trees ------------------------------------------------------

def iid_copperplate(horizon: int = 3) -> ScenarioTree:
    """Demand -1 or +1 with probability 1/2 each period."""
    return build_iid([[-1.0], [1.0]], [0.5, 0.5], horizon)


def beta_alpha_path() -> ScenarioTree:
    """Deterministic surplus then deficit on one bus: price goes beta -> alpha."""
    return build_deterministic([[-1.0], [1.0]])


def two_node_congested_path() -> ScenarioTree:
    return build_deterministic([[3.0, -2.0], [1.3, 0.45], [-0.6, -1.1]])


def two_node_markov(horizon: int = 4) -> ScenarioTree:
    states = [[1.3, -0.45], [-1.2, -0.35]]
    return build_markov(states, [[0.7, 0.3], [0.4, 0.6]], [0.5, 0.5], horizon)


def two_node_iid3(horizon: int = 3) -> ScenarioTree:
    support = [[1.3, -0.45], [-0.8, 1.9], [-1.2, -0.35]]
    return build_iid(support, [0.5, 0.3, 0.2], horizon)


def constant_tree(dimension: int, horizon: int = 3, value: float = 0.7) -> ScenarioTree:
    return build_deterministic([[value] * dimension] * horizon)


@dataclass(frozen=True)
class Instance:
    name: str
    network: Network
    tree: ScenarioTree

    @property
    def acyclic_homogeneous(self) -> bool:
        from .network import is_acyclic

        return is_acyclic(self.network) and self.network.homogeneous_costs


def corpus() -> list[Instance]:
    """Instances used for the oracle cross-checks (22 of them)."""
    cp = copperplate()
    tn = two_node()
    tn_het = two_node(0.7, (10.0, 14.0), (2.0, 5.0))
    t4 = four_node_tree()
    st = five_node_star()
    tri = triangle(True)
    tri_h = triangle(False)

    t4_pts = [[1.15, -0.55, 0.35, -0.85], [-0.95, 0.65, -1.25, 0.45], [0.25, 1.35, -0.15, 1.05]]
    st_pts = [[0.35, -0.65, 0.85, -1.15, 0.55], [-0.45, 1.25, -0.75, 0.95, -1.35], [1.45, 0.15, -0.25, 0.6, 0.3]]
    tri_pts = [[1.3, -0.4, 2.1], [-1.7, 0.6, -0.9], [0.45, 1.15, -1.35], [2.2, -1.6, 0.35]]

    return [
        Instance("copperplate-det-N2", cp, beta_alpha_path()),
        Instance("copperplate-iid2-N3", cp, iid_copperplate(3)),
        Instance("copperplate-iid3-N4", cp, build_iid([[-1.1], [0.4], [1.7]], [0.3, 0.45, 0.25], 4)),
        Instance("copperplate-markov-N5", cp, build_markov([[-0.9], [1.3]], [[0.8, 0.2], [0.35, 0.65]], [0.6, 0.4], 5)),
        Instance("two-node-det-N3", tn, two_node_congested_path()),
        Instance("two-node-iid2-N4", tn, build_iid([[1.3, -0.45], [-1.2, -0.35]], [0.5, 0.5], 4)),
        Instance("two-node-iid3-N3", tn, two_node_iid3(3)),
        Instance("two-node-markov-N4", tn, two_node_markov(4)),
        Instance("two-node-het-iid3-N3", tn_het, two_node_iid3(3)),
        Instance("two-node-het-markov-N5", tn_het, two_node_markov(5)),
        Instance("four-node-det-N4", t4, build_deterministic([t4_pts[0], t4_pts[1], t4_pts[2], t4_pts[0]])),
        Instance("four-node-iid2-N3", t4, build_iid(t4_pts[:2], [0.4, 0.6], 3)),
        Instance("four-node-iid3-N3", t4, build_iid(t4_pts, [0.25, 0.5, 0.25], 3)),
        Instance("four-node-markov-N4", t4, build_markov(t4_pts[:2], [[0.55, 0.45], [0.3, 0.7]], [1.0, 0.0], 4)),
        Instance("star-det-N3", st, build_deterministic(st_pts)),
        Instance("star-iid2-N3", st, build_iid(st_pts[:2], [0.5, 0.5], 3)),
        Instance("star-markov-N4", st, build_markov(st_pts[1:], [[0.2, 0.8], [0.6, 0.4]], [0.5, 0.5], 4)),
        Instance("triangle-het-det-N4", tri, build_deterministic(tri_pts)),
        Instance("triangle-het-iid3-N3", tri, build_iid(tri_pts[1:], [0.3, 0.3, 0.4], 3)),
        Instance("triangle-het-markov-N4", tri, build_markov(tri_pts[2:], [[0.5, 0.5], [0.25, 0.75]], [0.5, 0.5], 4)),
        Instance("triangle-hom-iid2-N3", tri_h, build_iid(tri_pts[2:], [0.5, 0.5], 3)),
        Instance("triangle-hom-markov-N2", tri_h, build_markov(tri_pts[:2], [[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5], 2)),
    ]


def two_node_limit_trees() -> list[ScenarioTree]:
    """Two-bus demand trees for the transmission-capacity limit checks."""
    return [
        build_iid([[-1.0, 0.6], [1.0, -1.4]], [0.5, 0.5], 3),
        build_iid([[1.3, -0.45], [-0.8, 1.9], [-1.2, -0.35]], [0.5, 0.3, 0.2], 3),
        build_markov([[0.9, -1.7], [-0.6, 0.25]], [[0.3, 0.7], [0.55, 0.45]], [0.4, 0.6], 4),
        build_deterministic([[-0.5, -0.4], [0.7, -1.1], [-0.3, 0.8], [1.2, 0.9]]),
    ]
