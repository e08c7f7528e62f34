"""Point estimation of the distance-based intraclass correlation.

    rho = 1 - MSD_w / MSD_b

MSD_b averages squared distances between observations of different
individuals, MSD_w between replicates of the same individual. Each
unordered pair counts once; individuals with a single replicate contribute
to MSD_b only. Negative estimates are legal and mean replicates of one
individual are further apart than observations of different individuals.

Sums use math.fsum over the upper triangle, so an estimate is exactly
reproducible and does not depend on how rows are ordered."""

from dataclasses import dataclass
from math import fsum

import numpy as np

from .errors import (InsufficientGroupsError, InsufficientReplicatesError,
                     DegenerateDistancesError, ParameterError)

__all__ = [
    'DbiccEstimate',
    'msd_between',
    'msd_within',
    'dbicc_point',
    'population_dbicc_gaussian',
]


@dataclass(frozen = True)
class DbiccEstimate(object):
    rho_hat: float
    msd_within: float
    msd_between: float
    n_within_pairs: int
    n_between_pairs: int

    @property
    def snr(self):
        """(MSD_b - MSD_w) / MSD_w, which equals rho/(1 - rho)"""
        if self.msd_within == 0:
            return float('inf')
        return (self.msd_between - self.msd_within) / self.msd_within


def _upper_pairs(D):
    """Squared distances over the upper triangle (row-major) and a same-individual mask"""
    rows, cols = np.triu_indices(D.n, 1)
    squared = D.values[rows, cols] ** 2
    same = D.labels[rows] == D.labels[cols]
    return squared, same


def _between(D):
    if D.n_individuals < 2:
        raise InsufficientGroupsError('MSD_b needs at least 2 individuals')
    squared, same = _upper_pairs(D)
    pairs = squared[~same]
    return fsum(pairs.tolist()), int(pairs.size)


def _within(D):
    squared, same = _upper_pairs(D)
    pairs = squared[same]
    if pairs.size == 0:
        raise InsufficientReplicatesError('MSD_w needs an individual with 2 or more replicates')
    return fsum(pairs.tolist()), int(pairs.size)


def msd_between(D):
    """Mean squared distance over all cross-individual pairs"""
    total, count = _between(D)
    return total / count


def msd_within(D):
    """Mean squared distance over all within-individual replicate pairs"""
    total, count = _within(D)
    return total / count


def dbicc_point(D):
    """The plug-in dbICC estimate of a grouped distance matrix"""
    between, n_between = _between(D)
    within, n_within = _within(D)
    msd_b = between / n_between
    msd_w = within / n_within
    if msd_b == 0:
        raise DegenerateDistancesError('MSD_b is zero (all payloads identical); dbICC undefined')
    return DbiccEstimate(1.0 - msd_w / msd_b, msd_w, msd_b, n_within, n_between)


def population_dbicc_gaussian(trace_sigma_T, trace_sigma_eps):
    """tr(Sigma_T) / (tr(Sigma_T) + tr(Sigma_eps)): the population dbICC of
    X = T + eps under the Euclidean distance"""
    if trace_sigma_T < 0 or trace_sigma_eps < 0:
        raise ParameterError('covariance traces must be nonnegative')
    total = trace_sigma_T + trace_sigma_eps
    if total <= 0:
        raise ParameterError('at least one covariance trace must be positive')
    return trace_sigma_T / total
