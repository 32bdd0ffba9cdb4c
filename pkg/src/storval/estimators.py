"""scikit-learn style wrappers around the functional API.

``NodalPriceTransformer`` maps rows of net demand to rows of nodal prices.
``StorageValueEstimator`` is fitted on a scenario tree and exposes the
per-bus marginal storage value. Both keep ``__init__`` free of work so that
``get_params``/``set_params``/``clone`` behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import DEFAULT_TOLERANCES
from .dispatch import price_fn, require_interior
from .network import Network, build_flow_operators
from .scenario import ScenarioTree
from .valuation import build_price_lattice, lmv, lmv_dissipative


class NodalPriceTransformer(TransformerMixin, BaseEstimator):
    """Transform net-demand rows ``(n_samples, m)`` into nodal price rows."""

    def __init__(self, network: Network | None = None, check_interior: bool = False, tolerances=None):
        self.network = network
        self.check_interior = check_interior
        self.tolerances = tolerances

    def fit(self, X=None, y=None):
        if not isinstance(self.network, Network):
            raise TypeError("network must be a storval Network")
        self.operators_ = build_flow_operators(self.network)
        self.n_features_in_ = self.network.node_count
        return self

    def transform(self, X):
        check_is_fitted(self, "operators_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        tol = self.tolerances or DEFAULT_TOLERANCES
        out = np.empty_like(X)
        for r, xi in enumerate(X):
            if self.check_interior:
                require_interior(self.network, self.operators_, xi, tol=tol)
            out[r] = price_fn(self.network, self.operators_, xi)
        return out


class StorageValueEstimator(BaseEstimator):
    """Marginal value of storage at each bus for a given demand tree.

    After ``fit(tree)``: ``lmv_``, ``upper_bound_``, ``report_`` and
    ``lattice_``; with ``gamma`` set, also ``lmv_dissipative_``.
    """

    def __init__(self, network: Network | None = None, gamma: float | None = None,
                 workers: int = 1, tolerances=None):
        self.network = network
        self.gamma = gamma
        self.workers = workers
        self.tolerances = tolerances

    def fit(self, tree: ScenarioTree, y=None):
        if not isinstance(self.network, Network):
            raise TypeError("network must be a storval Network")
        if not isinstance(tree, ScenarioTree):
            raise TypeError("fit expects a ScenarioTree")
        ops = build_flow_operators(self.network)
        tol = self.tolerances or DEFAULT_TOLERANCES
        self.lattice_ = build_price_lattice(self.network, ops, tree, tol=tol, workers=self.workers)
        self.report_ = lmv(self.lattice_, tree)
        self.lmv_ = self.report_.lmv
        self.upper_bound_ = self.report_.upper_bound
        if self.gamma is not None:
            self.lmv_dissipative_ = lmv_dissipative(self.lattice_, tree, self.gamma)
        return self

    def predict(self, capacities):
        """First-order expected cost saving ``b @ lmv_`` for each capacity row."""
        check_is_fitted(self, "lmv_")
        b = check_array(np.atleast_2d(capacities), dtype=float)
        return b @ self.lmv_
