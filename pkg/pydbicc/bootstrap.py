"""Individual-level bootstrap confidence intervals for the dbICC.

Each bootstrap replicate draws I individuals with replacement and
re-evaluates the estimator on the resampled blocks of the ORIGINAL distance
matrix; distances are never recomputed. When one individual is drawn more
than once, the blocks between its copies are nominally between-individual
but really within-individual (and carry a zero diagonal), which biases
MSD_b^r down and the estimate with it. The corrected bootstrap drops every
block pair whose two draws are the same original individual from the
between-individual sum. Within-individual sums always use every drawn copy.

Replicate r draws from its own stream, derived from (seed, r) through
numpy's SeedSequence, so replicates may run on any number of threads
without changing the result.
"""

import logging
import warnings
from dataclasses import dataclass
from math import fsum

import numpy as np

from .dbicc import dbicc_point
from .errors import InsufficientGroupsError, InsufficientDataError, ParameterError, SmallBootstrapWarning
from .workers import ReplicateRunner

__all__ = [
    'DEFAULT_BOOT',
    'DEFAULT_LEVEL',
    'BootstrapResult',
    'resample_individuals',
    'percentile_ci',
    'bootstrap_dbicc',
    'bootstrap_pair',
]

logger = logging.getLogger(__name__)

DEFAULT_BOOT = 1200
DEFAULT_LEVEL = 0.95
MIN_RECOMMENDED_BOOT = 100


@dataclass(frozen = True)
class BootstrapResult(object):
    """Bootstrap replicate estimates and their percentile interval.

    replicate_ids[k] is the replicate index r that produced
    replicate_estimates[k]; replicates whose estimate was undefined are
    missing from both and counted in n_degenerate."""
    replicate_estimates: tuple
    ci_low: float
    ci_high: float
    level: float
    corrected: bool
    seed: int
    B: int
    n_degenerate: int
    replicate_ids: tuple = ()

    @property
    def median(self):
        return float(np.median(self.replicate_estimates))

    def covers(self, value):
        return self.ci_low <= value <= self.ci_high


def resample_individuals(I, rng):
    """Draws I individual indices (0-based) uniformly with replacement"""
    if I < 2:
        raise InsufficientGroupsError('bootstrap needs at least 2 individuals, got %d' % I)
    return rng.integers(0, I, size = I)


def percentile_ci(replicate_estimates, level = DEFAULT_LEVEL):
    """Percentile interval from the (1-level)/2 to the 1-(1-level)/2 quantile.

    Quantiles interpolate linearly between order statistics (numpy's
    'linear' method), so 1..100 at level 0.95 gives (3.475, 97.525)."""
    if not 0.0 < level < 1.0:
        raise ParameterError('level must lie in (0, 1), got %r' % level)
    estimates = np.asarray(replicate_estimates, dtype = float)
    if estimates.size < 2:
        raise InsufficientDataError('percentile interval needs at least 2 estimates, got %d' % estimates.size)
    alpha = 1.0 - level
    low, high = np.quantile(estimates, [alpha / 2, 1.0 - alpha / 2], method = 'linear')
    return float(low), float(high)


def _new_seed():
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


class _ReplicateKernel(object):
    """Evaluates bootstrap replicates of one distance matrix from its block sums"""
    def __init__(self, D):
        self.I = D.n_individuals
        self.sizes = D.replicate_counts.astype(np.int64)
        self.blocks = D.block_sums()
        self.within = np.diag(self.blocks) / 2
        self.upper = np.triu_indices(self.I, 1)

    def draw(self, seed_sequence):
        return resample_individuals(self.I, np.random.default_rng(seed_sequence))

    def estimate(self, draw, corrected):
        """rho^r for one draw, or None when the replicate is degenerate"""
        counts = np.bincount(draw, minlength = self.I)
        sizes = self.sizes

        within_sum = fsum((counts * self.within).tolist())
        within_pairs = int(np.sum(counts * sizes * (sizes - 1) // 2))

        # pairs of draws from two different originals
        a, b = self.upper
        weight = counts[a] * counts[b]
        between_terms = (weight * self.blocks[a, b]).tolist()
        between_pairs = int(np.sum(weight * sizes[a] * sizes[b]))
        if not corrected:
            # pairs of copies of the same original: C(c, 2) full blocks each
            copies = counts * (counts - 1) // 2
            between_terms += (copies * np.diag(self.blocks)).tolist()
            between_pairs += int(np.sum(copies * sizes * sizes))

        if within_pairs == 0 or between_pairs == 0:
            return None
        msd_b = fsum(between_terms) / between_pairs
        if msd_b == 0:
            return None
        return 1.0 - (within_sum / within_pairs) / msd_b


def _check_request(D, B, level):
    if B < 2:
        raise ParameterError('B must be at least 2 for a percentile interval, got %r' % B)
    if not 0.0 < level < 1.0:
        raise ParameterError('level must lie in (0, 1), got %r' % level)
    if B < MIN_RECOMMENDED_BOOT:
        warnings.warn('B = %d bootstrap replicates is too few for stable percentile intervals' % B,
                      SmallBootstrapWarning, stacklevel = 3)
    # raises for too few individuals or replicates and for MSD_b = 0
    dbicc_point(D)


def _summarize(values, corrected, level, seed, B):
    kept = [(r, value) for r, value in enumerate(values) if value is not None]
    n_degenerate = B - len(kept)
    if n_degenerate:
        logger.debug('%d of %d %s replicates degenerate (seed %d)', n_degenerate, B,
                     'corrected' if corrected else 'naive', seed)
    estimates = tuple(value for r, value in kept)
    if len(estimates) < 2:
        raise InsufficientDataError('only %d of %d %s bootstrap replicates were usable (seed %d)'
                                    % (len(estimates), B, 'corrected' if corrected else 'naive', seed))
    low, high = percentile_ci(estimates, level)
    return BootstrapResult(estimates, low, high, level, corrected, seed, B, n_degenerate,
                           tuple(r for r, value in kept))


def bootstrap_dbicc(D, B = DEFAULT_BOOT, corrected = True, level = DEFAULT_LEVEL, seed = None, threads = 1):
    """Bootstrap the dbICC of a grouped distance matrix.

    Arguments are:
     D: the DistanceMatrix
     B: number of bootstrap replicates
     corrected: drop same-original block pairs from the between-individual sum
     level: confidence level of the percentile interval
     seed: integer seed; a fresh one is drawn (and reported) when None
     threads: worker threads; never changes the result

    Raises ParameterError for B < 2, and InsufficientDataError when fewer
    than two replicates survive the degeneracy filter."""
    _check_request(D, B, level)
    seed = _new_seed() if seed is None else int(seed)
    kernel = _ReplicateKernel(D)
    streams = np.random.SeedSequence(seed).spawn(B)
    runner = ReplicateRunner(threads, label = 'bootstrap replicates')
    values = runner.map(lambda stream: kernel.estimate(kernel.draw(stream), corrected), streams)
    return _summarize(values, corrected, level, seed, B)


def bootstrap_pair(D, B = DEFAULT_BOOT, level = DEFAULT_LEVEL, seed = None, threads = 1):
    """Naive and corrected bootstraps evaluated on identical draws.

    Returns (naive, corrected, duplicated) where duplicated[r] tells whether
    draw r picked some individual more than once; where it did not, the two
    estimates of replicate r are equal."""
    _check_request(D, B, level)
    seed = _new_seed() if seed is None else int(seed)
    kernel = _ReplicateKernel(D)
    streams = np.random.SeedSequence(seed).spawn(B)

    def both(stream):
        draw = kernel.draw(stream)
        duplicated = len(np.unique(draw)) < len(draw)
        return kernel.estimate(draw, False), kernel.estimate(draw, True), duplicated

    runner = ReplicateRunner(threads, label = 'paired bootstrap replicates')
    results = runner.map(both, streams)
    naive = _summarize([r[0] for r in results], False, level, seed, B)
    corrected = _summarize([r[1] for r in results], True, level, seed, B)
    return naive, corrected, tuple(r[2] for r in results)
