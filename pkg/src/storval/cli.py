"""Command-line front end.

Exit codes: 0 on success, 1 when a validation or verification check fails,
2 on malformed input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audit import audit_csv, format_csv, run_verification
from .config import DEFAULT_NODE_BUDGET, DEFAULT_TOLERANCES, Tolerances
from .dispatch import price_fn, solve_ed
from .dp_oracle import solve_dp_grid
from .errors import (BoundaryPointError, BudgetExceededError, FormatError, ScenarioError,
                     StorvalError, StructuralError, VerificationError)
from .formats import format_tree, read_network, read_tree
from .network import build_flow_operators
from .scenario import build_iid, build_markov
from .valuation import build_price_lattice, lmv, lmv_dissipative, two_node_limits

logger = logging.getLogger("storval")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line value."""


@dataclass
class RunConfig:
    network_path: Path | None = None
    scenario_path: Path | None = None
    tolerances: Tolerances = field(default_factory=lambda: DEFAULT_TOLERANCES)
    node_budget: int = DEFAULT_NODE_BUDGET
    worker_count: int = 1
    output_path: Path | None = None

    def __post_init__(self):
        if self.node_budget < 1 or self.worker_count < 1:
            raise InputError("--node-budget and --workers must be positive")


def _vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _vectors(text: str, what: str) -> list[np.ndarray]:
    return [_vector(part, what) for part in text.split(";")]


def _config(args) -> RunConfig:
    tol = DEFAULT_TOLERANCES.with_overrides(
        balance=args.tol_balance, flow=args.tol_flow,
        dual_probe_delta=args.tol_probe, verify=args.tol_verify,
    )
    return RunConfig(
        network_path=getattr(args, "net", None),
        scenario_path=getattr(args, "tree", None),
        tolerances=tol,
        node_budget=args.node_budget,
        worker_count=args.workers,
        output_path=args.out,
    )


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output_path is None:
        sys.stdout.write(text)
    else:
        Path(cfg.output_path).write_text(text, encoding="utf-8")


def _load(cfg: RunConfig, need_tree: bool = True):
    net = read_network(cfg.network_path)
    tree = read_tree(cfg.scenario_path, cfg.node_budget) if need_tree else None
    return net, tree


def cmd_ed(args, cfg):
    net, _ = _load(cfg, need_tree=False)
    xi = _vector(args.xi, "--xi")
    if xi.shape != (net.node_count,):
        raise InputError(f"--xi needs {net.node_count} values")
    sol = solve_ed(net, build_flow_operators(net), xi)
    rows = [("cost", "", sol.cost)]
    for name, vec in (("dispatch", sol.dispatch), ("angle", sol.angles), ("price", sol.prices)):
        rows += [(name, i + 1, v) for i, v in enumerate(vec)]
    rows += [("flow", k + 1, v) for k, v in enumerate(sol.line_flows)]
    _emit(format_csv(("quantity", "index", "value"), rows), cfg)
    return EXIT_OK


def cmd_lmv(args, cfg):
    net, tree = _load(cfg)
    ops = build_flow_operators(net)
    lattice = build_price_lattice(net, ops, tree, tol=cfg.tolerances, workers=cfg.worker_count)
    rep = lmv(lattice, tree)
    header = ["bus", "lmv", "upper_bound", "tv_expectation", "terminal_drift", "tight"]
    cols = [rep.lmv, rep.upper_bound, rep.tv_expectation, rep.terminal_drift, rep.tight]
    if args.gamma is not None:
        header.append("lmv_dissipative")
        cols.append(lmv_dissipative(lattice, tree, args.gamma))
    rows = [[i + 1] + [c[i] for c in cols] for i in range(net.node_count)]
    _emit(format_csv(header, rows), cfg)
    return EXIT_OK


def _grid_spec(text: str):
    axes = []
    for part in text.split(","):
        try:
            lo, hi, n = part.split(":")
            axes.append(np.linspace(float(lo), float(hi), int(n)))
        except ValueError:
            raise InputError(f"--grid: expected 'lo:hi:n,lo:hi:n', got {text!r}") from None
    if len(axes) != 2 or any(len(a) < 1 for a in axes):
        raise InputError("--grid needs exactly two axes")
    return axes


def cmd_grid(args, cfg):
    net, _ = _load(cfg, need_tree=False)
    ops = build_flow_operators(net)
    axes = _grid_spec(args.grid)
    a, b = (int(t) - 1 for t in args.axes.split(","))
    m = net.node_count
    if not (0 <= a < m and 0 <= b < m and a != b):
        raise InputError("--axes must name two distinct buses")
    base = _vector(args.xi, "--xi") if args.xi else np.zeros(m)
    if base.shape != (m,):
        raise InputError(f"--xi needs {m} values")
    rows = []
    for x in axes[0]:
        for y in axes[1]:
            xi = base.copy()
            xi[a], xi[b] = x, y
            rows.append(list(xi) + list(price_fn(net, ops, xi)))
    header = [f"xi_{i + 1}" for i in range(m)] + [f"lambda_{i + 1}" for i in range(m)]
    _emit(format_csv(header, rows), cfg)
    return EXIT_OK


def cmd_verify(args, cfg):
    net, tree = _load(cfg)
    fracs = tuple(_vector(args.eps, "--eps"))
    if any(not 0.0 < f <= 1.0 for f in fracs):
        raise InputError("--eps fractions must lie in (0, 1]")
    rows = run_verification(net, tree, cfg.tolerances, cfg.worker_count, fracs)
    _emit(audit_csv(rows), cfg)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        logger.error("check %s failed (bus %s, residual %.3e > %.3e)", r.check, r.bus, r.residual, r.tolerance)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_dp(args, cfg):
    net, tree = _load(cfg)
    cap = _vector(args.cap, "--cap")
    if cap.shape != (net.node_count,) or np.any(cap < 0):
        raise InputError(f"--cap needs {net.node_count} nonnegative values")
    if args.grid < 2 or args.steps < 1:
        raise InputError("--grid must be >= 2 and --steps >= 1")
    ops = build_flow_operators(net)
    rows = []
    # Sample j uses (grid - 1) * j intervals so all samples share one spacing.
    for j in range(args.steps + 1):
        b = cap * (j / args.steps)
        points = (args.grid - 1) * j + 1
        table = solve_dp_grid(net, ops, tree, b, max(points, 2) if np.any(b > 0) else 1)
        rows.append([j] + list(b) + [points, table.value])
    header = ["sample"] + [f"b_{i + 1}" for i in range(net.node_count)] + ["grid_points", "value"]
    _emit(format_csv(header, rows), cfg)
    return EXIT_OK


def cmd_limits(args, cfg):
    net, tree = _load(cfg)
    if net.node_count != 2 or not net.homogeneous_costs:
        raise InputError("limits needs a two-bus network with homogeneous costs")
    f0, finf = two_node_limits(float(net.alpha[0]), float(net.beta[0]), tree)
    rows = [[i + 1, f0[i], finf[i]] for i in range(2)]
    _emit(format_csv(("bus", "lmv_f0", "lmv_finf"), rows), cfg)
    return EXIT_OK


def cmd_gen_tree(args, cfg):
    if args.kind == "iid":
        if not args.support or not args.probs:
            raise InputError("gen-tree iid needs --support and --probs")
        tree = build_iid(_vectors(args.support, "--support"), _vector(args.probs, "--probs"),
                         args.horizon, cfg.node_budget)
    else:
        if not (args.states and args.transition and args.initial):
            raise InputError("gen-tree markov needs --states, --transition and --initial")
        tree = build_markov(_vectors(args.states, "--states"),
                            np.array(_vectors(args.transition, "--transition")),
                            _vector(args.initial, "--initial"), args.horizon, cfg.node_budget)
    _emit(format_tree(tree), cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    common.add_argument("--tol-balance", type=float, default=None)
    common.add_argument("--tol-flow", type=float, default=None)
    common.add_argument("--tol-probe", type=float, default=None, help="interiority probe step")
    common.add_argument("--tol-verify", type=float, default=None, help="relative tolerance of the headline check")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="storval", description="Locational marginal value of storage.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ed", parents=[common], help="single-period economic dispatch")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--xi", required=True, help="net demand, comma separated")
    p.set_defaults(func=cmd_ed)

    p = sub.add_parser("lmv", parents=[common], help="marginal value report per bus")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--gamma", type=float, default=None, help="storage retention factor in (0, 1)")
    p.set_defaults(func=cmd_lmv)

    p = sub.add_parser("grid", parents=[common], help="sample prices on a 2-D demand grid")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--grid", required=True, help="lo:hi:n,lo:hi:n")
    p.add_argument("--axes", default="1,2", help="buses varied along the two grid axes")
    p.add_argument("--xi", default=None, help="demand at the remaining buses")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("verify", parents=[common], help="DP oracle cross-checks")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--eps", default="0.1,0.5,0.9", help="capacities to probe, as fractions of epsilon-bar")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dp", parents=[common], help="grid DP values along a capacity ray")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--tree", type=Path, required=True)
    p.add_argument("--cap", required=True, help="largest capacity vector")
    p.add_argument("--grid", type=int, default=3, help="grid points per bus for the first sample")
    p.add_argument("--steps", type=int, default=4)
    p.set_defaults(func=cmd_dp)

    p = sub.add_parser("limits", parents=[common], help="two-bus capacity limit formulas")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--tree", type=Path, required=True)
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("gen-tree", parents=[common], help="write an i.i.d. or Markov scenario tree")
    p.add_argument("kind", choices=("iid", "markov"))
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--support", help="support vectors, ';' between vectors")
    p.add_argument("--probs")
    p.add_argument("--states", help="state vectors, ';' between vectors")
    p.add_argument("--transition", help="transition rows, ';' between rows")
    p.add_argument("--initial")
    p.set_defaults(func=cmd_gen_tree)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (FormatError, InputError, OSError, ScenarioError, BudgetExceededError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BoundaryPointError, StructuralError, VerificationError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except StorvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
