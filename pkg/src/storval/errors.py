"""Exception hierarchy."""


class StorvalError(Exception):
    """Base class for all toolkit errors."""


class NetworkError(StorvalError, ValueError):
    """Invalid network description."""


class SingularNetworkError(NetworkError):
    """Flow operators could not be built (disconnected graph or degenerate susceptances)."""


class ScenarioError(StorvalError, ValueError):
    """Invalid scenario tree or distribution."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class LpError(StorvalError):
    """Linear program could not be solved."""


class CyclingError(LpError):
    """Pivot budget exhausted, most likely from degenerate cycling."""


class DispatchError(StorvalError):
    """Economic dispatch failed at a particular net demand."""

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class BoundaryPointError(StorvalError):
    """A net demand lies on (or numerically next to) a price-regime boundary."""

    def __init__(self, message, xi=None, coordinate=None, node=None):
        super().__init__(message)
        self.xi = xi
        self.coordinate = coordinate
        self.node = node


class StructuralError(StorvalError):
    """A structural claim about prices failed (e.g. a price outside {alpha, beta})."""


class BudgetExceededError(StorvalError):
    """Requested table or tree is larger than the configured budget."""


class VerificationError(StorvalError):
    """An oracle cross-check failed."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = list(failures or [])


class FormatError(StorvalError, ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, path=None, lineno=None):
        where = f"{path or '<input>'}:{lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno
