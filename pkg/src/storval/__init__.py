"""Locational marginal value of energy storage in DC power networks."""

from .config import DEFAULT_NODE_BUDGET, DEFAULT_TOLERANCES, Tolerances
from .dispatch import DispatchSolution, gradient_check, price_fn, solve_ed
from .dp_oracle import epsilon_bar, headline_residual, solve_dp_grid, solve_dp_single_device, verify_threshold_policy
from .errors import (BoundaryPointError, BudgetExceededError, CyclingError, DispatchError, FormatError,
                     LpError, NetworkError, ScenarioError, SingularNetworkError, StorvalError,
                     StructuralError, VerificationError)
from .estimators import NodalPriceTransformer, StorageValueEstimator
from .formats import read_network, read_tree, write_network, write_tree
from .lp import LinearProgram, LpStatus, solve
from .network import Line, Network, build_flow_operators, injection_feasible, is_acyclic
from .scenario import ScenarioTree, TreeNode, build_deterministic, build_iid, build_markov
from .valuation import LmvReport, build_price_lattice, lmv, lmv_dissipative, spcase_diagnostics, two_node_limits

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_NODE_BUDGET", "DEFAULT_TOLERANCES", "Tolerances",
    "DispatchSolution", "gradient_check", "price_fn", "solve_ed",
    "epsilon_bar", "headline_residual", "solve_dp_grid", "solve_dp_single_device", "verify_threshold_policy",
    "BoundaryPointError", "BudgetExceededError", "CyclingError", "DispatchError", "FormatError",
    "LpError", "NetworkError", "ScenarioError", "SingularNetworkError", "StorvalError",
    "StructuralError", "VerificationError",
    "NodalPriceTransformer", "StorageValueEstimator",
    "read_network", "read_tree", "write_network", "write_tree",
    "LinearProgram", "LpStatus", "solve",
    "Line", "Network", "build_flow_operators", "injection_feasible", "is_acyclic",
    "ScenarioTree", "TreeNode", "build_deterministic", "build_iid", "build_markov",
    "LmvReport", "build_price_lattice", "lmv", "lmv_dissipative", "spcase_diagnostics", "two_node_limits",
]
