"""Readers and writers for the line-oriented network and scenario files.

Both formats are plain text, one record per line, ``#`` starts a comment.
Records are a keyword, positional fields, then ``key=value`` fields. Bus
numbers in network files are 1-based. Unknown records or fields are
rejected with the offending line number.

Network file (``storval-net/1``)::

    format storval-net/1
    nodes 2
    bus 1 alpha=10 beta=2
    bus 2 alpha=10 beta=2 shunt=0
    line 1 2 susceptance=1 capacity=1

Scenario file (``storval-tree/1``)::

    format storval-tree/1
    horizon 2
    dimension 2
    node id=0 stage=0 parent=none prob=1 xi=3,-2
    node id=1 stage=1 parent=0 prob=1 xi=1,1

Floats are written with ``repr`` so files round-trip bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, NetworkError, ScenarioError
from .network import Line, Network
from .scenario import ScenarioTree, TreeNode

NET_SCHEMA = "storval-net/1"
TREE_SCHEMA = "storval-tree/1"

_BUS_FIELDS = {"alpha", "beta", "shunt"}
_LINE_FIELDS = {"susceptance", "capacity"}
_NODE_FIELDS = {"id", "stage", "parent", "prob", "xi"}


def _records(text: str, path):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _split_fields(tokens, allowed, required, lineno, path):
    positional, named = [], {}
    for tok in tokens:
        if "=" in tok:
            key, _, value = tok.partition("=")
            if key not in allowed:
                raise FormatError(f"unknown field {key!r}", path, lineno)
            if key in named:
                raise FormatError(f"field {key!r} given twice", path, lineno)
            named[key] = value
        else:
            if named:
                raise FormatError(f"positional value {tok!r} after named fields", path, lineno)
            positional.append(tok)
    missing = sorted(required - named.keys())
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}", path, lineno)
    return positional, named


def _float(value, what, lineno, path):
    try:
        out = float(value)
    except ValueError:
        raise FormatError(f"{what}: {value!r} is not a number", path, lineno) from None
    if not np.isfinite(out):
        raise FormatError(f"{what} must be finite", path, lineno)
    return out


def _int(value, what, lineno, path):
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"{what}: {value!r} is not an integer", path, lineno) from None


def _check_format_line(records, schema, path):
    try:
        lineno, tokens = next(records)
    except StopIteration:
        raise FormatError("empty file", path, 1) from None
    if tokens != ["format", schema]:
        raise FormatError(f"first record must be 'format {schema}'", path, lineno)


def parse_network(text: str, path=None) -> Network:
    records = _records(text, path)
    _check_format_line(records, NET_SCHEMA, path)
    m = None
    buses: dict[int, tuple[float, float, float]] = {}
    lines: list[Line] = []
    line_at: list[int] = []
    for lineno, tokens in records:
        kind, rest = tokens[0], tokens[1:]
        if kind == "nodes":
            if m is not None:
                raise FormatError("'nodes' given twice", path, lineno)
            if len(rest) != 1:
                raise FormatError("'nodes' takes one integer", path, lineno)
            m = _int(rest[0], "nodes", lineno, path)
            if m < 1:
                raise FormatError("node count must be positive", path, lineno)
        elif kind == "bus":
            if m is None:
                raise FormatError("'bus' before 'nodes'", path, lineno)
            pos, named = _split_fields(rest, _BUS_FIELDS, {"alpha", "beta"}, lineno, path)
            if len(pos) != 1:
                raise FormatError("'bus' takes one bus number", path, lineno)
            k = _int(pos[0], "bus number", lineno, path)
            if not 1 <= k <= m:
                raise FormatError(f"bus number {k} outside 1..{m}", path, lineno)
            if k in buses:
                raise FormatError(f"bus {k} defined twice", path, lineno)
            buses[k] = (_float(named["alpha"], "alpha", lineno, path),
                        _float(named["beta"], "beta", lineno, path),
                        _float(named.get("shunt", "0"), "shunt", lineno, path))
        elif kind == "line":
            if m is None:
                raise FormatError("'line' before 'nodes'", path, lineno)
            pos, named = _split_fields(rest, _LINE_FIELDS, _LINE_FIELDS, lineno, path)
            if len(pos) != 2:
                raise FormatError("'line' takes two bus numbers", path, lineno)
            i, j = (_int(t, "bus number", lineno, path) for t in pos)
            for k in (i, j):
                if not 1 <= k <= m:
                    raise FormatError(f"bus number {k} outside 1..{m}", path, lineno)
            lines.append(Line(i - 1, j - 1, _float(named["susceptance"], "susceptance", lineno, path),
                              _float(named["capacity"], "capacity", lineno, path)))
            line_at.append(lineno)
        else:
            raise FormatError(f"unknown record {kind!r}", path, lineno)
    if m is None:
        raise FormatError("missing 'nodes' record", path, None)
    missing = [k for k in range(1, m + 1) if k not in buses]
    if missing:
        raise FormatError(f"missing bus record(s): {missing}", path, None)
    try:
        return Network(m, lines,
                       alpha=[buses[k][0] for k in range(1, m + 1)],
                       beta=[buses[k][1] for k in range(1, m + 1)],
                       shunt_susceptances=[buses[k][2] for k in range(1, m + 1)])
    except NetworkError as exc:
        raise FormatError(str(exc), path, None) from exc


def format_network(net: Network) -> str:
    out = [f"format {NET_SCHEMA}", f"nodes {net.node_count}"]
    for i in range(net.node_count):
        rec = f"bus {i + 1} alpha={float(net.alpha[i])!r} beta={float(net.beta[i])!r}"
        if net.shunt_susceptances[i] != 0:
            rec += f" shunt={float(net.shunt_susceptances[i])!r}"
        out.append(rec)
    for l in net.lines:
        out.append(f"line {l.from_node + 1} {l.to_node + 1} "
                   f"susceptance={float(l.susceptance)!r} capacity={float(l.capacity)!r}")
    return "\n".join(out) + "\n"


def parse_tree(text: str, path=None, node_budget: int | None = None) -> ScenarioTree:
    records = _records(text, path)
    _check_format_line(records, TREE_SCHEMA, path)
    horizon = dim = None
    nodes: list[TreeNode] = []
    node_line: dict[int, int] = {}
    for lineno, tokens in records:
        kind, rest = tokens[0], tokens[1:]
        if kind in ("horizon", "dimension"):
            if len(rest) != 1:
                raise FormatError(f"'{kind}' takes one integer", path, lineno)
            value = _int(rest[0], kind, lineno, path)
            if value < 1:
                raise FormatError(f"{kind} must be positive", path, lineno)
            if kind == "horizon":
                horizon = value
            else:
                dim = value
        elif kind == "node":
            pos, named = _split_fields(rest, _NODE_FIELDS, _NODE_FIELDS, lineno, path)
            if pos:
                raise FormatError("'node' takes only named fields", path, lineno)
            nid = _int(named["id"], "id", lineno, path)
            stage = _int(named["stage"], "stage", lineno, path)
            parent = None if named["parent"] == "none" else _int(named["parent"], "parent", lineno, path)
            prob = _float(named["prob"], "prob", lineno, path)
            xi = [_float(t, "xi", lineno, path) for t in named["xi"].split(",")]
            if dim is not None and len(xi) != dim:
                raise FormatError(f"xi has {len(xi)} entries, dimension is {dim}", path, lineno)
            if nid in node_line:
                raise FormatError(f"node id {nid} already defined on line {node_line[nid]}", path, lineno)
            node_line[nid] = lineno
            nodes.append(TreeNode(nid, stage, parent, np.array(xi), prob))
        else:
            raise FormatError(f"unknown record {kind!r}", path, lineno)
    if horizon is None:
        raise FormatError("missing 'horizon' record", path, None)
    kwargs = {} if node_budget is None else {"node_budget": node_budget}
    try:
        return ScenarioTree(horizon, nodes, **kwargs)
    except ScenarioError as exc:
        raise FormatError(str(exc), path, node_line.get(exc.node)) from exc


def format_tree(tree: ScenarioTree) -> str:
    out = [f"format {TREE_SCHEMA}", f"horizon {tree.horizon}", f"dimension {tree.dimension}"]
    for nid in tree.iter_nodes():
        nd = tree.node(nid)
        parent = "none" if nd.parent is None else str(nd.parent)
        xi = ",".join(repr(float(v)) for v in nd.xi)
        out.append(f"node id={nid} stage={nd.stage} parent={parent} prob={nd.prob!r} xi={xi}")
    return "\n".join(out) + "\n"


def read_network(path) -> Network:
    path = Path(path)
    return parse_network(path.read_text(encoding="utf-8"), path)


def read_tree(path, node_budget: int | None = None) -> ScenarioTree:
    path = Path(path)
    return parse_tree(path.read_text(encoding="utf-8"), path, node_budget)


def write_network(net: Network, path) -> None:
    Path(path).write_text(format_network(net), encoding="utf-8")


def write_tree(tree: ScenarioTree, path) -> None:
    Path(path).write_text(format_tree(tree), encoding="utf-8")
