"""Numerical tolerances shared across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Absolute tolerances. All reference instances use O(1) magnitudes."""

    balance: float = 1e-8
    flow: float = 1e-8
    dual_probe_delta: float = 1e-5
    price_equal: float = 1e-7
    dispatch_sign: float = 1e-7
    verify: float = 1e-8

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name!r} must be positive")

    def with_overrides(self, **kwargs) -> "Tolerances":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_TOLERANCES = Tolerances()

#: Largest scenario tree the builders will materialize.
DEFAULT_NODE_BUDGET = 200_000
