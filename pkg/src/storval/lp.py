"""Dense bounded-variable primal simplex with exact basis duals.

Solves::

    minimize    c^T x
    subject to  A_eq x = b_eq
                lower <= x <= upper

Infinite bounds are accepted as ``+-inf`` or any magnitude at or above
:data:`INF` and are treated as absent. The returned ``eq_duals`` are the
simplex multipliers ``y = B^{-T} c_B`` of the final basis, so that
``d(objective)/d(b_eq) = y`` whenever the optimal basis is unique.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import CyclingError, LpError

logger = logging.getLogger(__name__)

INF = 1e30


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    name: str = "lp"

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).reshape(-1)
        n = c.shape[0]
        A = np.array(self.eq_matrix, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        b = np.array(self.eq_rhs, dtype=float).reshape(-1)
        lo = np.array(self.lower_bounds, dtype=float).reshape(-1)
        hi = np.array(self.upper_bounds, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"eq_matrix has {A.shape[0]} rows but eq_rhs has {b.shape[0]}")
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if not np.all(np.isfinite(b)) or np.any(np.abs(b) >= INF):
            raise ValueError("eq_rhs must be finite")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A))):
            raise ValueError("objective and eq_matrix must be finite")
        lo = np.where(lo <= -INF, -INF, lo)
        hi = np.where(hi >= INF, INF, hi)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        for name, arr in (("objective", c), ("eq_matrix", A), ("eq_rhs", b),
                          ("lower_bounds", lo), ("upper_bounds", hi)):
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.eq_matrix.shape


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    objective_value: float
    eq_duals: np.ndarray
    reduced_costs: np.ndarray
    basis: tuple[int, ...]
    iterations: int
    certificate: np.ndarray | None = None
    tableau: str | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def kkt_residuals(self, lp: LinearProgram) -> dict[str, float]:
        """Primal, dual, complementarity and duality-gap residuals."""
        A, b, c = lp.eq_matrix, lp.eq_rhs, lp.objective
        lo, hi = lp.lower_bounds, lp.upper_bounds
        x, y = self.primal, self.eq_duals
        d = c - A.T @ y
        has_lo, has_hi = lo > -INF, hi < INF
        primal = max(
            np.max(np.abs(A @ x - b), initial=0.0),
            np.max(lo - x, initial=0.0),
            np.max(x - hi, initial=0.0),
        )
        # A positive reduced cost needs a finite lower bound to rest on, a negative one an upper bound.
        dual = max(
            np.max(np.where(has_lo, 0.0, np.maximum(d, 0.0)), initial=0.0),
            np.max(np.where(has_hi, 0.0, np.maximum(-d, 0.0)), initial=0.0),
        )
        comp = max(
            np.max(np.where(has_lo, np.maximum(d, 0.0) * (x - lo), 0.0), initial=0.0),
            np.max(np.where(has_hi, np.maximum(-d, 0.0) * (hi - x), 0.0), initial=0.0),
        )
        bound_terms = np.sum(np.where(has_lo & (d > 0), d * lo, 0.0)) \
            + np.sum(np.where(has_hi & (d < 0), d * hi, 0.0))
        gap = abs(c @ x - (b @ y + bound_terms))
        return {"primal": float(primal), "dual": float(dual),
                "complementarity": float(comp), "gap": float(gap)}


class _Workspace:
    """Mutable simplex state for one solve call."""

    def __init__(self, A, b, lo, hi, x, basis, name):
        self.A, self.b, self.lo, self.hi = A, b, lo, hi
        self.x = x
        self.basis = list(basis)
        self.name = name
        self.p, self.n = A.shape
        self.pivots = 0

    def factor(self):
        return lu_factor(self.A[:, self.basis], check_finite=False)

    def refresh_basic(self, lu):
        nb = np.ones(self.n, dtype=bool)
        nb[self.basis] = False
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = lu_solve(lu, rhs, check_finite=False)

    def run(self, c, max_pivots):
        """Iterate to optimality for costs ``c``. Returns ``(status, direction)``."""
        A, lo, hi = self.A, self.lo, self.hi
        p, n = self.p, self.n
        bland_after = self.pivots + 10 * (n + p)
        opt_tol = 1e-9 * max(1.0, float(np.max(np.abs(c), initial=0.0)))
        while True:
            if p == 0:
                basis_arr = np.zeros(0, dtype=int)
                y = np.zeros(0)
                lu = None
            else:
                lu = self.factor()
                self.refresh_basic(lu)
                basis_arr = np.asarray(self.basis)
                y = lu_solve(lu, c[basis_arr], trans=1, check_finite=False)
            d = c - A.T @ y
            d[basis_arr] = 0.0
            x = self.x
            can_up = x < hi - 1e-12 * np.maximum(1.0, np.abs(hi))
            can_down = x > lo + 1e-12 * np.maximum(1.0, np.abs(lo))
            score = np.where(can_up & (d < -opt_tol), -d, 0.0)
            score = np.maximum(score, np.where(can_down & (d > opt_tol), d, 0.0))
            score[basis_arr] = 0.0
            candidates = np.flatnonzero(score > 0)
            if candidates.size == 0:
                return LpStatus.OPTIMAL, None
            use_bland = self.pivots >= bland_after
            q = int(candidates[0]) if use_bland else int(candidates[np.argmax(score[candidates])])
            sigma = 1.0 if d[q] < 0 else -1.0

            w = lu_solve(lu, A[:, q], check_finite=False) if p else np.zeros(0)
            t_max = hi[q] - lo[q] if (hi[q] < INF and lo[q] > -INF) else np.inf
            leave, leave_to_upper, best_a = None, False, 0.0
            piv_tol = 1e-9 * max(1.0, float(np.max(np.abs(w), initial=0.0)))
            for k in range(p):
                a = sigma * w[k]
                j = self.basis[k]
                if a > piv_tol and lo[j] > -INF:
                    room, to_upper = (x[j] - lo[j]) / a, False
                elif a < -piv_tol and hi[j] < INF:
                    room, to_upper = (hi[j] - x[j]) / (-a), True
                else:
                    continue
                room = max(room, 0.0)
                if room < t_max - 1e-12:
                    take = True
                elif room <= t_max + 1e-12 and leave is not None:
                    # Tie: Bland takes the smallest variable index, Dantzig the largest pivot.
                    take = j < self.basis[leave] if use_bland else abs(a) > best_a
                else:
                    take = False
                if take:
                    t_max, leave, leave_to_upper, best_a = room, k, to_upper, abs(a)
            if not np.isfinite(t_max):
                direction = np.zeros(n)
                direction[q] = sigma
                direction[basis_arr] = -sigma * w
                return LpStatus.UNBOUNDED, direction

            self.pivots += 1
            if self.pivots > max_pivots:
                raise CyclingError(f"simplex pivot budget ({max_pivots}) exceeded on LP {self.name!r}")
            x[q] += sigma * t_max
            if p:
                x[basis_arr] -= sigma * t_max * w
            if leave is None:
                x[q] = hi[q] if sigma > 0 else lo[q]
            else:
                j = self.basis[leave]
                x[j] = hi[j] if leave_to_upper else lo[j]
                self.basis[leave] = q

    def tableau_text(self, c) -> str:
        A = self.A
        if self.p:
            lu = self.factor()
            T = lu_solve(lu, A, check_finite=False)
            y = lu_solve(lu, c[self.basis], trans=1, check_finite=False)
        else:
            T, y = np.zeros((0, self.n)), np.zeros(0)
        d = c - A.T @ y
        lines = ["basis | " + " ".join(f"x{j:<10d}" for j in range(self.n)) + " | value"]
        for k, j in enumerate(self.basis):
            row = " ".join(f"{v: .4e}" for v in T[k])
            lines.append(f"x{j:<4d} | {row} | {self.x[j]: .6e}")
        lines.append("d     | " + " ".join(f"{v: .4e}" for v in d))
        return "\n".join(lines)


def _initial_point(lo, hi):
    return np.where(lo > -INF, lo, np.where(hi < INF, hi, 0.0))


def solve(lp: LinearProgram, *, debug: bool = False, max_pivots: int | None = None) -> LpSolution:
    """Two-phase bounded-variable simplex.

    Pricing is Dantzig's rule, switching to Bland's rule once ``10 (n + p)``
    pivots have been spent in a phase. A :class:`CyclingError` is raised
    if ``max_pivots`` (default ``100 (n + p) + 100``) is exhausted.
    """
    A, b, c = lp.eq_matrix, lp.eq_rhs, lp.objective
    lo, hi = lp.lower_bounds, lp.upper_bounds
    p, n = A.shape
    if max_pivots is None:
        max_pivots = 100 * (n + p) + 100

    x0 = _initial_point(lo, hi)
    r = b - A @ x0
    sign = np.where(r >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(sign)]) if p else np.zeros((0, n))
    lo1 = np.concatenate([lo, np.zeros(p)])
    hi1 = np.concatenate([hi, np.full(p, INF)])
    x1 = np.concatenate([x0, np.abs(r)])
    ws = _Workspace(A1, b, lo1, hi1, x1, range(n, n + p), lp.name)

    c1 = np.concatenate([np.zeros(n), np.ones(p)])
    status, _ = ws.run(c1, max_pivots)
    infeas = float(np.sum(ws.x[n:]))
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if status is not LpStatus.OPTIMAL:
        raise LpError(f"phase 1 did not terminate optimally on LP {lp.name!r}")
    if infeas > 1e-9 * scale:
        logger.debug("LP %s infeasible: phase-1 residual %.3e", lp.name, infeas)
        return LpSolution(LpStatus.INFEASIBLE, ws.x[:n].copy(), np.nan, np.full(p, np.nan),
                          np.full(n, np.nan), tuple(ws.basis), ws.pivots,
                          certificate=None, tableau=ws.tableau_text(c1) if debug else None)

    # Artificials are pinned at zero for phase 2; basic ones stay as degenerate placeholders.
    ws.hi[n:] = 0.0
    ws.x[n:] = 0.0
    c2 = np.concatenate([c, np.zeros(p)])
    status, direction = ws.run(c2, max_pivots)
    x = ws.x[:n].copy()
    tableau = ws.tableau_text(c2) if debug else None
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, x, -np.inf, np.full(p, np.nan), np.full(n, np.nan),
                          tuple(ws.basis), ws.pivots, certificate=direction[:n], tableau=tableau)

    if p:
        lu = ws.factor()
        y = lu_solve(lu, c2[ws.basis], trans=1, check_finite=False)
    else:
        y = np.zeros(0)
    d = c - A.T @ y
    return LpSolution(LpStatus.OPTIMAL, x, float(c @ x), y, d, tuple(ws.basis), ws.pivots,
                      tableau=tableau)
