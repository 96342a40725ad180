"""Exception hierarchy.

Every error raised on purpose by the package derives from ``HypoxiaError``.
Each family carries the process exit code the CLI maps it to.
"""


class HypoxiaError(Exception):
    exit_code = 1


class UsageError(HypoxiaError):
    """Bad invocation, malformed config or missing prerequisite artifact."""

    exit_code = 2


class ConfigError(UsageError):
    pass


class DataError(HypoxiaError):
    exit_code = 3


class SchemaError(DataError):
    pass


class IntegrityError(DataError):
    pass


class ParseError(DataError):
    pass


class DomainError(DataError, ValueError):
    pass


class SplitError(DataError):
    pass


class FitError(DataError):
    pass


class ResampleError(DataError):
    pass


class WeightingError(ResampleError):
    pass


class MetricError(DataError, ValueError):
    pass


class DegenerateTestError(MetricError):
    """McNemar on two classifiers that never disagree."""


class ContractError(HypoxiaError, ValueError):
    exit_code = 3


class ShapeError(ContractError):
    pass


class TrainingError(DataError):
    pass


class NumericError(HypoxiaError, ArithmeticError):
    exit_code = 4
