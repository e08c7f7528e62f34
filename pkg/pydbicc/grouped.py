"""Grouped repeated-measures data and grouped distance matrices.

A GroupedSample holds the replicate observations X_ij of each individual i; a
DistanceMatrix holds the dissimilarities among all of them with every row
tagged by its (individual, replicate) position. Everything else in pydbicc
consumes these two types."""

import logging
from dataclasses import dataclass
from enum import Enum
from math import fsum

import numpy as np

from .distances import DistanceSpec, pairwise_matrix
from .errors import (InputShapeError, DuplicateReplicateError, NonFiniteError,
                     InsufficientGroupsError, InsufficientReplicatesError,
                     InvalidDistanceMatrixError, MetricMismatchError)

__all__ = [
    'PayloadKind',
    'IndividualRecord',
    'GroupedSample',
    'DistanceMatrix',
    'build_grouped_sample',
    'compute_distance_matrix',
]

logger = logging.getLogger(__name__)


class PayloadKind(Enum):
    VECTOR = 'vector'
    MATRIX = 'matrix'
    TIMESERIES = 'timeseries'


def _as_payload(value, kind):
    """Converts one raw observation to a read-only float array of the right rank"""
    payload = np.array(value, dtype = float)
    if kind is PayloadKind.VECTOR:
        payload = np.atleast_1d(payload).ravel()
    elif payload.ndim != 2:
        raise InputShapeError('%s payloads must be 2-dimensional, got shape %s'
                              % (kind.value, payload.shape))
    if not np.all(np.isfinite(payload)):
        raise NonFiniteError('payload contains NaN or infinite values')
    payload.flags.writeable = False
    return payload


def _infer_kind(value):
    array = np.asarray(value, dtype = float)
    if array.ndim <= 1:
        return PayloadKind.VECTOR
    if array.ndim == 2 and array.shape[0] == array.shape[1]:
        return PayloadKind.MATRIX
    return PayloadKind.TIMESERIES


def _replicate_order(replicate_ids):
    """Sort key for replicate labels: numeric when every label is numeric"""
    try:
        keys = [float(r) for r in replicate_ids]
    except (TypeError, ValueError):
        keys = [str(r) for r in replicate_ids]
    return sorted(range(len(replicate_ids)), key = lambda k: keys[k])


@dataclass(frozen = True, eq = False)
class IndividualRecord(object):
    """One individual's replicate observations, in replicate order."""
    id: str
    replicates: tuple
    replicate_ids: tuple = ()

    @property
    def n_replicates(self):
        return len(self.replicates)


@dataclass(frozen = True, eq = False)
class GroupedSample(object):
    """Repeated observations indexed by (individual, replicate).

    Invariants are checked on construction: at least two individuals, at
    least one of them with two or more replicates, finite payloads of a
    common shape (time series need only share their column count)."""
    individuals: tuple
    payload_kind: PayloadKind

    def __post_init__(self):
        object.__setattr__(self, 'individuals', tuple(self.individuals))
        if len(self.individuals) < 2:
            raise InsufficientGroupsError('need at least 2 individuals, got %d' % len(self.individuals))
        if any(record.n_replicates < 1 for record in self.individuals):
            raise InputShapeError('every individual needs at least one replicate')
        if max(record.n_replicates for record in self.individuals) < 2:
            raise InsufficientReplicatesError('no individual has 2 or more replicates')
        shapes = set()
        for payload in self.payloads():
            if not np.all(np.isfinite(payload)):
                raise NonFiniteError('payload contains NaN or infinite values')
            if self.payload_kind is PayloadKind.TIMESERIES:
                shapes.add(payload.shape[1:])
            else:
                shapes.add(payload.shape)
        if len(shapes) != 1:
            raise InputShapeError('payload dimensions differ: %s' % sorted(shapes))
        if self.payload_kind is PayloadKind.MATRIX:
            (shape,) = shapes
            if shape[0] != shape[1]:
                raise InputShapeError('matrix payloads must be square, got %s' % (shape,))

    @property
    def n_individuals(self):
        return len(self.individuals)

    @property
    def ids(self):
        return [record.id for record in self.individuals]

    @property
    def replicate_counts(self):
        return [record.n_replicates for record in self.individuals]

    @property
    def n_observations(self):
        return sum(self.replicate_counts)

    @property
    def feature_dim(self):
        """p for vectors and p x p matrices; the column count for time series"""
        shape = self.individuals[0].replicates[0].shape
        return shape[-1]

    @property
    def groups(self):
        """(individual_index, replicate_index) of each observation, in group order"""
        return [(i, j) for i, record in enumerate(self.individuals)
                for j in range(record.n_replicates)]

    def payloads(self):
        """All payloads in group order"""
        return [payload for record in self.individuals for payload in record.replicates]

    def relabel(self, mapping):
        """Returns a copy with individual ids renamed through a bijective mapping"""
        new_ids = [mapping[record.id] for record in self.individuals]
        if len(set(new_ids)) != len(new_ids):
            raise InputShapeError('relabeling must be bijective')
        return GroupedSample(
            [IndividualRecord(new_id, record.replicates, record.replicate_ids)
             for new_id, record in zip(new_ids, self.individuals)],
            self.payload_kind)

    def map_payloads(self, func, payload_kind = None):
        """Applies func to every payload, keeping the grouping.

        Used to turn scans into connectivity matrices; payload_kind defaults to
        the current kind."""
        kind = payload_kind or self.payload_kind
        records = []
        for record in self.individuals:
            replicates = tuple(_as_payload(func(payload), kind) for payload in record.replicates)
            records.append(IndividualRecord(record.id, replicates, record.replicate_ids))
        return GroupedSample(records, kind)


def build_grouped_sample(records, payload_kind = None):
    """Builds a GroupedSample from (individual_id, replicate_id, payload) rows.

    Individuals keep the order of their first appearance; replicates are
    sorted by replicate_id (numerically when every id is numeric). The
    payload kind is inferred from the first payload when not given: 1-d is a
    vector, square 2-d a matrix, anything else a time series."""
    rows = list(records)
    if not rows:
        raise InsufficientGroupsError('no records')
    if payload_kind is None:
        payload_kind = _infer_kind(rows[0][2])
    elif not isinstance(payload_kind, PayloadKind):
        payload_kind = PayloadKind(payload_kind)

    order = []
    grouped = {}
    for individual_id, replicate_id, value in rows:
        key = str(individual_id)
        if key not in grouped:
            grouped[key] = {}
            order.append(key)
        if replicate_id in grouped[key]:
            raise DuplicateReplicateError('individual %r has replicate %r twice' % (key, replicate_id))
        grouped[key][replicate_id] = _as_payload(value, payload_kind)

    if len(order) < 2:
        raise InsufficientGroupsError('need at least 2 distinct individuals, got %d' % len(order))

    individuals = []
    for key in order:
        replicate_ids = list(grouped[key])
        ranked = [replicate_ids[k] for k in _replicate_order(replicate_ids)]
        individuals.append(IndividualRecord(key, tuple(grouped[key][r] for r in ranked), tuple(ranked)))
    return GroupedSample(individuals, payload_kind)


class DistanceMatrix(object):
    """A symmetric, zero-diagonal, nonnegative dissimilarity matrix whose rows
    are tagged by (individual_index, replicate_index).

    The triangle inequality is not required. Instances are read-only once
    built; the per-block sums of squared distances are computed on first use
    and cached, since the bootstrap needs them for every replicate.

    Construct with DistanceMatrix(values, groups) for trusted input, or with
    DistanceMatrix.from_square() to validate a user-supplied matrix."""

    SYMMETRY_TOLERANCE = 1e-10

    def __init__(self, values, groups):
        values = np.array(values, dtype = float)
        groups = [(int(i), int(j)) for i, j in groups]
        n = len(groups)
        if values.shape != (n, n):
            raise InvalidDistanceMatrixError('matrix is %s but %d rows are grouped' % (values.shape, n))
        if len(set(groups)) != n:
            raise InvalidDistanceMatrixError('duplicate (individual, replicate) in grouping')
        labels = np.array([i for i, j in groups], dtype = int)
        individuals = sorted(set(labels.tolist()))
        if individuals != list(range(len(individuals))):
            raise InvalidDistanceMatrixError('individual indices must run 0..I-1')
        values.flags.writeable = False
        labels.flags.writeable = False
        self.values = values
        self.groups = groups
        self.labels = labels
        self._block_sums = None

    @classmethod
    def from_square(cls, values, groups):
        """Validates a user-supplied matrix before wrapping it.

        Asymmetry within SYMMETRY_TOLERANCE (relative to the largest entry) is
        symmetrized away; anything larger, a nonzero diagonal, negative or
        non-finite entries raise."""
        values = np.array(values, dtype = float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidDistanceMatrixError('distance matrix must be square, got %s' % (values.shape,))
        if not np.all(np.isfinite(values)):
            raise NonFiniteError('distance matrix contains NaN or infinite values')
        scale = max(1.0, float(np.abs(values).max(initial = 0.0)))
        if np.abs(values - values.T).max(initial = 0.0) > cls.SYMMETRY_TOLERANCE * scale:
            raise InvalidDistanceMatrixError('distance matrix is not symmetric')
        if np.any(np.diag(values) != 0):
            raise InvalidDistanceMatrixError('distance matrix has a nonzero diagonal')
        if np.any(values < 0):
            raise InvalidDistanceMatrixError('distance matrix has negative entries')
        return cls((values + values.T) / 2, groups)

    @property
    def n(self):
        return len(self.groups)

    @property
    def n_individuals(self):
        return int(self.labels.max()) + 1 if self.n else 0

    @property
    def replicate_counts(self):
        return np.bincount(self.labels, minlength = self.n_individuals)

    def rows_of(self, individual):
        return np.flatnonzero(self.labels == individual)

    def block_sums(self):
        """I x I matrix of summed squared distances between individual blocks.

        The diagonal holds each individual's full within block, i.e. twice
        its unordered within-pair sum."""
        if self._block_sums is None:
            squared = self.values ** 2
            rows = [self.rows_of(i) for i in range(self.n_individuals)]
            sums = np.zeros((self.n_individuals, self.n_individuals))
            for a, rows_a in enumerate(rows):
                for b in range(a, len(rows)):
                    total = fsum(squared[np.ix_(rows_a, rows[b])].ravel().tolist())
                    sums[a, b] = sums[b, a] = total
            sums.flags.writeable = False
            self._block_sums = sums
        return self._block_sums

    def permuted(self, order):
        """Returns the matrix with rows and columns taken in the given order"""
        order = np.asarray(order)
        return DistanceMatrix(self.values[np.ix_(order, order)], [self.groups[k] for k in order])

    def __repr__(self):
        return 'DistanceMatrix(n=%d, individuals=%d)' % (self.n, self.n_individuals)


def compute_distance_matrix(sample, metric):
    """Distances among all payloads of a sample, in group order.

    The correlation-of-correlations distance and soft-thresholding only make
    sense for square matrix payloads; anything else raises
    MetricMismatchError. Each unordered pair is computed exactly once."""
    if not isinstance(metric, DistanceSpec):
        metric = DistanceSpec.parse(metric)
    if metric.requires_matrix and sample.payload_kind is not PayloadKind.MATRIX:
        raise MetricMismatchError('%s needs square matrix payloads, got %s payloads'
                                  % (metric.label(), sample.payload_kind.value))
    payloads = sample.payloads()
    if len(set(payload.shape for payload in payloads)) != 1:
        raise MetricMismatchError('%s needs payloads of one shape; time series of different '
                                  'lengths must be reduced to matrices first' % metric.label())
    logger.debug('computing %s distances among %d payloads', metric.label(), len(payloads))
    values = pairwise_matrix(payloads, metric)
    return DistanceMatrix(values, sample.groups)
