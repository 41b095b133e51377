"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: validation problems exit 2, I/O problems
exit 3, anything else exits 4.
"""


class StarPredictError(Exception):
    """Base class for all package errors."""


class ValidationError(StarPredictError, ValueError):
    """Bad input data or an invalid configuration value."""


class CalendarRangeError(ValidationError):
    """A timestamp or week index falls outside the semester calendar."""


class MetricUndefinedError(StarPredictError, ValueError):
    """A metric has no defined value on the given input (e.g. one class only)."""


class EmptyDistributionError(StarPredictError):
    """A walk step has no candidate transitions (isolated current node)."""
