import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from storval import reference as R
from storval.dispatch import build_ed_lp
from storval.errors import CyclingError
from storval.lp import INF, LinearProgram, LpStatus, solve
from storval.network import build_flow_operators


def test_single_variable_dual():
    sol = solve(LinearProgram([1.0], [[1.0]], [1.0], [0.0], [INF]))
    assert sol.optimal
    assert sol.primal == pytest.approx([1.0])
    assert sol.eq_duals == pytest.approx([1.0])


def test_bounded_single_variable():
    sol = solve(LinearProgram([1.0], [[1.0]], [1.0], [0.0], [2.0]))
    assert sol.primal == pytest.approx([1.0]) and sol.eq_duals == pytest.approx([1.0])


def test_infeasible_bound():
    sol = solve(LinearProgram([0.0], [[1.0]], [3.0], [0.0], [2.0]))
    assert sol.status is LpStatus.INFEASIBLE


def test_unbounded():
    sol = solve(LinearProgram([-1.0, 0.0], [[1.0, -1.0]], [0.0], [0.0, 0.0], [INF, INF]))
    assert sol.status is LpStatus.UNBOUNDED
    assert sol.certificate is not None


def _vertex_enumeration(lp):
    """Brute force over bases: every vertex of a bounded LP sets n - p variables to a bound."""
    A, b, c = lp.eq_matrix, lp.eq_rhs, lp.objective
    p, n = A.shape
    best = np.inf
    for basic in itertools.combinations(range(n), p):
        nonbasic = [j for j in range(n) if j not in basic]
        Bm = A[:, basic]
        if abs(np.linalg.det(Bm)) < 1e-12:
            continue
        for pattern in itertools.product((0, 1), repeat=len(nonbasic)):
            x = np.zeros(n)
            for j, at_hi in zip(nonbasic, pattern):
                x[j] = lp.upper_bounds[j] if at_hi else lp.lower_bounds[j]
            if np.any(np.abs(x) >= INF):
                continue
            x[list(basic)] = np.linalg.solve(Bm, b - A[:, nonbasic] @ x[nonbasic])
            if np.all(x >= lp.lower_bounds - 1e-9) and np.all(x <= lp.upper_bounds + 1e-9):
                best = min(best, c @ x)
    return best


@pytest.mark.parametrize("xi", [[1.0, -0.25], [3.0, -2.0], [0.4, 0.3], [-1.7, 0.2], [1.3, -0.45]])
def test_two_node_ed_matches_vertex_enumeration(xi):
    net = R.two_node()
    lp = build_ed_lp(net, build_flow_operators(net), xi)
    # Angles are free; bound them so that every vertex is finite.
    lo = np.where(lp.lower_bounds <= -INF, -50.0, lp.lower_bounds)
    hi = np.where(lp.upper_bounds >= INF, 50.0, lp.upper_bounds)
    boxed = LinearProgram(lp.objective, lp.eq_matrix, lp.eq_rhs, lo, hi)
    sol = solve(lp)
    assert sol.objective_value == pytest.approx(_vertex_enumeration(boxed), abs=1e-9)
    # Balance-row duals: nudging demand at bus i moves the enumerated optimum by lambda_i.
    h = 1e-6
    for i in range(2):
        rhs = boxed.eq_rhs.copy()
        rhs[i] += h
        nudged = LinearProgram(boxed.objective, boxed.eq_matrix, rhs, lo, hi)
        slope = (_vertex_enumeration(nudged) - _vertex_enumeration(boxed)) / h
        assert slope == pytest.approx(sol.eq_duals[i], abs=1e-5)


def _random_lp(rng):
    p, n = rng.integers(1, 5), rng.integers(2, 8)
    A = rng.normal(size=(p, n)).round(2)
    x = rng.uniform(0, 2, size=n)
    lo = np.where(rng.random(n) < 0.2, -INF, 0.0)
    hi = np.where(rng.random(n) < 0.5, INF, 3.0)
    return LinearProgram(rng.normal(size=n).round(2), A, A @ x, lo, hi)


def test_matches_highs_on_random_lps():
    rng = np.random.default_rng(42)
    for _ in range(200):
        lp = _random_lp(rng)
        ours = solve(lp)
        bounds = [(None if l <= -INF else l, None if h >= INF else h)
                  for l, h in zip(lp.lower_bounds, lp.upper_bounds)]
        ref = linprog(lp.objective, A_eq=lp.eq_matrix, b_eq=lp.eq_rhs, bounds=bounds, method="highs")
        if ref.status == 3:
            assert ours.status is LpStatus.UNBOUNDED
            continue
        assert ref.status == 0
        assert ours.optimal
        assert ours.objective_value == pytest.approx(ref.fun, abs=1e-7)
        res = ours.kkt_residuals(lp)
        assert max(res.values()) <= 1e-8 * max(1.0, abs(ref.fun))


@pytest.mark.parametrize("xi", [[3.0, -2.0], [1.3, -0.45], [-0.8, 1.9]])
def test_duals_are_rhs_sensitivities(xi):
    net = R.two_node()
    lp = build_ed_lp(net, build_flow_operators(net), xi)
    sol = solve(lp)
    h = 1e-6
    for r in range(lp.eq_rhs.size):
        up = lp.eq_rhs.copy()
        up[r] += h
        dn = lp.eq_rhs.copy()
        dn[r] -= h
        fd = (solve(LinearProgram(lp.objective, lp.eq_matrix, up, lp.lower_bounds, lp.upper_bounds)).objective_value
              - solve(LinearProgram(lp.objective, lp.eq_matrix, dn, lp.lower_bounds, lp.upper_bounds)).objective_value) / (2 * h)
        assert fd == pytest.approx(sol.eq_duals[r], abs=1e-6)


def test_deterministic_and_debug_tableau():
    lp = build_ed_lp(R.triangle(), build_flow_operators(R.triangle()), [1.3, -0.4, 2.1])
    a, b = solve(lp), solve(lp, debug=True)
    assert np.array_equal(a.primal, b.primal) and np.array_equal(a.eq_duals, b.eq_duals)
    assert a.basis == b.basis
    assert a.tableau is None and "basis" in b.tableau.lower()


def test_pivot_budget_raises():
    lp = _random_lp(np.random.default_rng(3))
    with pytest.raises(CyclingError, match=lp.name):
        solve(lp, max_pivots=0)


def test_invalid_lp():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [np.inf], [0.0], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [1.0], [2.0], [1.0])
