"""Exceptions raised by pydbicc.

Everything the library raises on bad input or an undefined estimate derives
from DbiccError, so callers can catch the whole family at once. The command
line maps ParseError and ConfigError to their own exit codes and everything
else to the computation-error code."""

__all__ = [
    'DbiccError',
    'ParseError',
    'ConfigError',
    'InputShapeError',
    'DuplicateReplicateError',
    'NonFiniteError',
    'InsufficientGroupsError',
    'InsufficientReplicatesError',
    'InsufficientDataError',
    'InvalidDistanceMatrixError',
    'MetricMismatchError',
    'DegenerateInputError',
    'DegenerateDistancesError',
    'SingularMatrixError',
    'FactorizationError',
    'ParameterError',
    'SmallBootstrapWarning',
]


class DbiccError(Exception):
    """Base class for every pydbicc error"""


class ParseError(DbiccError):
    """An input file does not follow its declared format.

    Line and column are 1-based and refer to the offending cell; either may be
    None when the problem is with the file as a whole."""
    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        self.message = message
        location = self.path
        if line is not None:
            location += ':%d' % line
            if column is not None:
                location += ':%d' % column
        super(ParseError, self).__init__('%s: %s' % (location, message))


class ConfigError(DbiccError):
    """A run option is outside the range the library accepts"""


class InputShapeError(DbiccError):
    """Payloads or vectors have incompatible dimensions"""


class DuplicateReplicateError(InputShapeError):
    """The same (individual, replicate) key occurs more than once"""


class NonFiniteError(DbiccError):
    """A payload holds NaN or infinite values"""


class InsufficientGroupsError(DbiccError):
    """Fewer than two individuals"""


class InsufficientReplicatesError(DbiccError):
    """No individual has two or more replicates, so MSD_w is undefined"""


class InsufficientDataError(DbiccError):
    """Too few observations, points or estimates for the requested computation"""


class InvalidDistanceMatrixError(DbiccError):
    """A distance matrix is asymmetric, negative, has a nonzero diagonal or
    disagrees with its row grouping"""


class MetricMismatchError(DbiccError):
    """The requested distance cannot be applied to this payload kind"""


class DegenerateInputError(DbiccError):
    """Zero variance (or too few entries) where a correlation is required"""


class DegenerateDistancesError(DbiccError):
    """MSD_b is zero, so the dbICC is undefined"""


class SingularMatrixError(DbiccError):
    """A matrix that must be positive definite is not"""


class FactorizationError(DbiccError):
    """A covariance matrix could not be Cholesky-factorized"""


class ParameterError(DbiccError, ValueError):
    """A scalar parameter is outside its valid range"""


class SmallBootstrapWarning(UserWarning):
    """Fewer bootstrap replicates than percentile intervals reasonably need"""
