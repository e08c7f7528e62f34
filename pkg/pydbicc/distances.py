"""Distances between observations and connectivity-matrix utilities.

Three distances are provided, each usable on vectors or on matrices treated
entry-wise:
 l2:   square root of the sum of squared differences (Frobenius for matrices)
 l1:   sum of absolute differences
 corr: sqrt(1 - r), r the Pearson correlation of the strictly lower
       triangular entries of two square matrices ("correlation of
       correlations")

Note that l2 and l1 are NOT the operator 2- and 1-norm distances.

Alongside the distances live the operations that produce and transform
connectivity matrices: correlations from a scan, soft-thresholding, and the
-log|R| connectivity score."""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.spatial import distance as spd

from .errors import (InputShapeError, InsufficientDataError, DegenerateInputError,
                     DegenerateDistancesError, MetricMismatchError, ParameterError,
                     SingularMatrixError)

__all__ = [
    'DistanceKind',
    'DistanceSpec',
    'DISTANCE_NAME_MAP',
    'l2_distance',
    'l1_distance',
    'corr_of_corr_distance',
    'correlation_from_timeseries',
    'soft_threshold',
    'connectivity_score',
    'pairwise_matrix',
    'middle_window',
    'select_rois',
    'connectivity_matrices',
    'ThresholdSweepRow',
    'sweep_threshold',
]

logger = logging.getLogger(__name__)


class DistanceKind(Enum):
    L2 = 'l2'
    L1 = 'l1'
    CORR = 'corr'


# Names accepted on the command line and in DistanceSpec.parse()
DISTANCE_NAME_MAP = {
    'l2': DistanceKind.L2,
    'l2_vec': DistanceKind.L2,
    'euclidean': DistanceKind.L2,
    'frobenius': DistanceKind.L2,
    'l1': DistanceKind.L1,
    'l1_vec': DistanceKind.L1,
    'cityblock': DistanceKind.L1,
    'corr': DistanceKind.CORR,
    'corr_of_corr': DistanceKind.CORR,
}


def _check_lengths(a, b):
    a = np.asarray(a, dtype = float).ravel()
    b = np.asarray(b, dtype = float).ravel()
    if a.shape != b.shape:
        raise InputShapeError('cannot compare payloads of %d and %d entries' % (a.size, b.size))
    return a, b


def l2_distance(a, b):
    """Euclidean distance between two vectors (Frobenius distance for matrices)"""
    a, b = _check_lengths(a, b)
    return float(spd.euclidean(a, b))


def l1_distance(a, b):
    """Sum of absolute differences"""
    a, b = _check_lengths(a, b)
    return float(spd.cityblock(a, b))


def _lower_triangle(matrix):
    """Strictly lower triangular entries of a square matrix, row-major"""
    matrix = np.asarray(matrix, dtype = float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputShapeError('expected a square matrix, got shape %s' % (matrix.shape,))
    p = matrix.shape[0]
    if p < 3:
        raise DegenerateInputError('correlation of correlations needs p >= 3, got p = %d' % p)
    if not np.allclose(matrix, matrix.T, rtol = 0.0, atol = 1e-10):
        raise MetricMismatchError('correlation of correlations needs symmetric matrices')
    entries = matrix[np.tril_indices(p, -1)]
    if np.ptp(entries) == 0:
        raise DegenerateInputError('lower triangle is constant; its correlation is undefined')
    return entries


def corr_of_corr_distance(R1, R2):
    """sqrt(1 - r) with r the Pearson correlation of the strictly lower
    triangular entries of R1 and R2.

    The result lies in [0, sqrt(2)]; 1 - r is clamped at 0 so rounding can
    never produce a NaN."""
    u = _lower_triangle(R1)
    v = _lower_triangle(R2)
    if u.shape != v.shape:
        raise InputShapeError('cannot compare %d x %d and %d x %d matrices'
                              % (np.shape(R1) + np.shape(R2)))
    return float(np.sqrt(max(spd.correlation(u, v), 0.0)))


def correlation_from_timeseries(X):
    """Pearson correlation matrix of the columns of an m x p scan (rows are time points)"""
    X = np.asarray(X, dtype = float)
    if X.ndim != 2:
        raise InputShapeError('a scan must be an m x p matrix, got shape %s' % (X.shape,))
    if X.shape[0] < 3:
        raise InsufficientDataError('need at least 3 time points, got %d' % X.shape[0])
    constant = np.flatnonzero(np.ptp(X, axis = 0) == 0)
    if constant.size:
        raise DegenerateInputError('constant column(s) %s have no correlation' % constant.tolist())
    R = np.atleast_2d(np.corrcoef(X, rowvar = False))
    R = np.clip((R + R.T) / 2, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


def soft_threshold(R, threshold):
    """Soft-thresholds the off-diagonal entries of a correlation matrix.

    Each off-diagonal r becomes sign(r) * max(|r| - threshold, 0); the
    diagonal is left as it is. Returns the new matrix together with the
    fraction of off-diagonal entries that end up exactly zero."""
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError('threshold must lie in [0, 1], got %r' % threshold)
    R = np.asarray(R, dtype = float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InputShapeError('expected a square matrix, got shape %s' % (R.shape,))
    p = R.shape[0]
    shrunk = np.sign(R) * np.clip(np.abs(R) - threshold, 0.0, None)
    off_diagonal = ~np.eye(p, dtype = bool)
    out = np.where(off_diagonal, shrunk, R)
    if p < 2:
        return out, 0.0
    fraction = np.count_nonzero(out[off_diagonal] == 0) / float(p * (p - 1))
    return out, fraction


def connectivity_score(R):
    """-log det(R) via a Cholesky factorization; zero for the identity"""
    R = np.asarray(R, dtype = float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InputShapeError('expected a square matrix, got shape %s' % (R.shape,))
    try:
        factor, lower = linalg.cho_factor(R, check_finite = True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixError('matrix is not positive definite: %s' % e)
    return float(-2.0 * np.sum(np.log(np.diag(factor))))


@dataclass(frozen = True)
class DistanceSpec(object):
    """A distance kind plus an optional soft threshold applied to matrix
    payloads before distancing."""
    kind: DistanceKind = DistanceKind.L2
    threshold: float = None

    def __post_init__(self):
        if not isinstance(self.kind, DistanceKind):
            object.__setattr__(self, 'kind', DISTANCE_NAME_MAP[str(self.kind)])
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ParameterError('threshold must lie in [0, 1], got %r' % self.threshold)

    @classmethod
    def parse(cls, name, threshold = None):
        try:
            kind = DISTANCE_NAME_MAP[str(name).lower()]
        except KeyError:
            raise ParameterError('unknown distance %r (choose from %s)' % (name, ', '.join(sorted(DISTANCE_NAME_MAP))))
        return cls(kind, threshold)

    @property
    def requires_matrix(self):
        return self.kind is DistanceKind.CORR or self.threshold is not None

    def label(self):
        if self.threshold is None:
            return self.kind.value
        return '%s+soft(%g)' % (self.kind.value, self.threshold)

    def prepare(self, payload):
        """Applies the soft threshold, if any, to a matrix payload"""
        if self.threshold is None:
            return np.asarray(payload, dtype = float)
        return soft_threshold(payload, self.threshold)[0]

    def distance(self, a, b):
        """The distance between two payloads under this metric"""
        a, b = self.prepare(a), self.prepare(b)
        if self.kind is DistanceKind.L2:
            return l2_distance(a, b)
        if self.kind is DistanceKind.L1:
            return l1_distance(a, b)
        return corr_of_corr_distance(a, b)


def pairwise_matrix(payloads, spec):
    """Full n x n distance matrix among payloads.

    Uses scipy's condensed pdist, which evaluates each unordered pair once,
    then expands it; the result is symmetric with an exact zero diagonal."""
    prepared = [spec.prepare(payload) for payload in payloads]
    if spec.kind is DistanceKind.CORR:
        stacked = np.vstack([_lower_triangle(matrix) for matrix in prepared])
        condensed = np.sqrt(np.clip(spd.pdist(stacked, 'correlation'), 0.0, None))
    else:
        stacked = np.vstack([matrix.ravel() for matrix in prepared])
        metric = 'euclidean' if spec.kind is DistanceKind.L2 else 'cityblock'
        condensed = spd.pdist(stacked, metric)
    return spd.squareform(condensed, checks = False)


def middle_window(X, m):
    """The middle m rows of a scan (used to study shorter acquisitions)"""
    X = np.asarray(X)
    if not 1 <= m <= X.shape[0]:
        raise ParameterError('window of %d rows does not fit a scan of %d rows' % (m, X.shape[0]))
    start = (X.shape[0] - m) // 2
    return X[start:start + m]


def select_rois(sample, rois):
    """Restricts every payload to a subset of regions.

    rois are 0-based indices: the columns of a scan or vector, or the rows
    and columns of a connectivity matrix. Used to study one network (e.g.
    the default mode or visual ROIs) out of a whole-brain parcellation."""
    from .grouped import PayloadKind

    rois = np.asarray(rois).ravel()
    if rois.size == 0 or not np.issubdtype(rois.dtype, np.integer):
        raise ParameterError('ROI selection needs a non-empty list of integer indices')
    p = sample.payloads()[0].shape[-1]
    if rois.min() < 0 or rois.max() >= p:
        raise ParameterError('ROI indices must lie in [0, %d), got %d..%d' % (p, rois.min(), rois.max()))
    if np.unique(rois).size != rois.size:
        raise ParameterError('ROI indices repeat')
    logger.debug('keeping %d of %d ROIs', rois.size, p)
    if sample.payload_kind is PayloadKind.MATRIX:
        return sample.map_payloads(lambda R: R[np.ix_(rois, rois)])
    return sample.map_payloads(lambda X: X[..., rois])


def connectivity_matrices(sample, kind = 'correlation', window = None):
    """Reduces a time-series sample to per-scan correlation or covariance matrices.

    If window is given, only the middle window rows of each scan are used."""
    from .grouped import PayloadKind
    from .simulation import gen_sample_cov

    if sample.payload_kind is not PayloadKind.TIMESERIES:
        raise MetricMismatchError('connectivity matrices are computed from time series, got %s payloads'
                                  % sample.payload_kind.value)
    if kind == 'correlation':
        reduce = correlation_from_timeseries
    elif kind == 'covariance':
        reduce = gen_sample_cov
    else:
        raise ParameterError("kind must be 'correlation' or 'covariance', got %r" % kind)
    if window is not None:
        return sample.map_payloads(lambda X: reduce(middle_window(X, window)), PayloadKind.MATRIX)
    return sample.map_payloads(reduce, PayloadKind.MATRIX)


@dataclass(frozen = True)
class ThresholdSweepRow(object):
    threshold: float
    fraction_zeroed: float
    rho_hat: float


def sweep_threshold(sample, spec, thresholds):
    """dbICC of a matrix sample after soft-thresholding at each threshold.

    fraction_zeroed is averaged over every scan. A threshold that zeroes so
    much that the dbICC is undefined yields rho_hat = NaN rather than
    aborting the sweep."""
    from .dbicc import dbicc_point
    from .grouped import compute_distance_matrix

    if not isinstance(spec, DistanceSpec):
        spec = DistanceSpec.parse(spec)
    payloads = sample.payloads()
    rows = []
    for threshold in thresholds:
        fractions = [soft_threshold(payload, threshold)[1] for payload in payloads]
        thresholded = DistanceSpec(spec.kind, threshold)
        try:
            rho = dbicc_point(compute_distance_matrix(sample, thresholded)).rho_hat
        except (DegenerateDistancesError, DegenerateInputError) as e:
            logger.warning('dbICC undefined at threshold %g: %s', threshold, e)
            rho = float('nan')
        rows.append(ThresholdSweepRow(float(threshold), float(np.mean(fractions)), rho))
    return rows
