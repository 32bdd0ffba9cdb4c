"""Oracle cross-checks on one instance, collected as audit rows."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .dp_oracle import epsilon_bar, headline_residual, verify_threshold_policy
from .network import Network, build_flow_operators
from .scenario import ScenarioTree
from .valuation import build_price_lattice, lmv, spcase_diagnostics

EPS_FRACTIONS = (0.1, 0.5, 0.9)
AUDIT_FIELDS = ("check", "bus", "eps", "value", "reference", "residual", "tolerance", "passed")


@dataclass(frozen=True)
class AuditRow:
    check: str
    bus: int | None
    eps: float | None
    value: float
    reference: float
    residual: float
    tolerance: float
    passed: bool


def run_verification(net: Network, tree: ScenarioTree, tol: Tolerances = DEFAULT_TOLERANCES,
                     workers: int = 1, eps_fractions=EPS_FRACTIONS) -> list[AuditRow]:
    """epsilon-bar, headline identity, threshold policy, bound dominance and
    special-case tightness, in that order. Bus numbers are 1-based."""
    ops = build_flow_operators(net)
    lattice = build_price_lattice(net, ops, tree, tol=tol, workers=workers)
    report = lmv(lattice, tree)
    rows: list[AuditRow] = []
    eb = epsilon_bar(net, ops, tree, tol=tol)
    rows.append(AuditRow("epsilon_bar", None, None, eb, 0.0, 0.0, 0.0, eb > 0))

    for i in range(net.node_count):
        j0 = None
        for frac in eps_fractions:
            eps = frac * eb
            res, j0 = headline_residual(net, ops, tree, i, eps, float(report.lmv[i]), j0=j0)
            limit = tol.verify * max(1.0, abs(j0))
            rows.append(AuditRow("headline", i + 1, eps, res, eps * float(report.lmv[i]), res, limit, res <= limit))

    for i in range(net.node_count):
        eps = 0.5 * eb
        rep = verify_threshold_policy(net, ops, tree, i, eps, lattice=lattice, strict=False, tol=tol)
        policy_ok = all(r.policy_ok for r in rep.records)
        rows.append(AuditRow("threshold_value", i + 1, eps, rep.max_residual, 0.0, rep.max_residual,
                             rep.value_tol, rep.max_residual <= rep.value_tol))
        mismatches = sum(not r.policy_ok for r in rep.records)
        rows.append(AuditRow("threshold_policy", i + 1, eps, float(mismatches), 0.0, float(mismatches), 0.0, policy_ok))

    for i in range(net.node_count):
        excess = max(float(report.lmv[i] - report.upper_bound[i]), 0.0)
        rows.append(AuditRow("bound_dominance", i + 1, None, float(report.lmv[i]), float(report.upper_bound[i]),
                             excess, 1e-9, excess <= 1e-9))

    sp = spcase_diagnostics(net, lattice, tree)
    if sp.applicable:
        for i in range(net.node_count):
            res = max(abs(sp.lmv[i] - sp.transition_value[i]), abs(sp.upper_bound[i] - sp.transition_value[i]))
            rows.append(AuditRow("tightness", i + 1, None, float(sp.lmv[i]), float(sp.transition_value[i]),
                                 float(res), 1e-8, res <= 1e-8))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def audit_csv(rows: list[AuditRow]) -> str:
    return format_csv(AUDIT_FIELDS, ([getattr(r, f) for f in AUDIT_FIELDS] for r in rows))
