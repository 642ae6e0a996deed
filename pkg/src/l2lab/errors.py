"""Exception types shared across the toolkit."""


class L2LabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(L2LabError):
    """Bad or unknown configuration input."""


class ConditionViolated(L2LabError):
    """An existence condition required by a fee oracle does not hold."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class NoSignChange(L2LabError):
    """The estimated pnl curve never crosses zero on the search interval."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ThresholdViolation(L2LabError):
    """A solved policy column is not single-switch hold -> post."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NonConvergence(L2LabError):
    """Iterative solver exhausted its iteration budget."""


class DivergingQueue(L2LabError):
    """Burn-in left the queue pinned at the truncation boundary."""


class InsufficientPeriods(L2LabError):
    """Too few posting periods observed for a renewal-based estimate."""
