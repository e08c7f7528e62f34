"""Data generators and Monte Carlo experiments.

Generators:
 gen_gaussian_sample:  X_ij = T_i + e_ij with Gaussian true scores and errors
 gen_mvn_timeseries:   a VAR(1) scan x_t = phi x_{t-1} + u_t, u_t ~ N(0, Sigma),
                       started from its stationary law
 gen_sample_cov:       the unbiased sample covariance of a scan
 gen_connectivity_sample: per-individual scans reduced to covariance or
                       correlation matrices

Every generator takes an explicit numpy Generator. Experiment runners take
an integer seed and derive one SeedSequence child per (replicate, intensity,
individual), so results do not depend on the number of threads.

Covariances are Cholesky-factorized and a matrix that is not symmetric
positive definite is an error; no jitter is ever added."""

import logging
import os
from dataclasses import dataclass, replace
from math import sqrt

import numpy as np
from scipy import linalg, signal, stats

from .bootstrap import DEFAULT_BOOT, DEFAULT_LEVEL, bootstrap_pair
from .dbicc import dbicc_point, population_dbicc_gaussian
from .distances import DistanceSpec, correlation_from_timeseries
from .errors import (FactorizationError, ParameterError, InsufficientDataError,
                     InputShapeError, DbiccError)
from .grouped import PayloadKind, IndividualRecord, GroupedSample, compute_distance_matrix
from .spearman_brown import build_sb_curve, snr
from .workers import ReplicateRunner

__all__ = [
    'DEFAULT_M_GRID',
    'DEFAULT_POPULATION_DIM',
    'TrueScorePopulation',
    'ConnectivityPopulation',
    'gen_gaussian_sample',
    'gen_mvn_timeseries',
    'gen_sample_cov',
    'random_covariance_population',
    'gen_connectivity_sample',
    'verify_delta_eps',
    'delta_eps_analytic',
    'MonteCarloMean',
    'check_error_exchangeability',
    'check_cross_term',
    'PointStudyReport',
    'run_point_study',
    'CoverageReport',
    'run_coverage_study',
    'SbExperimentReport',
    'run_sb_experiment',
    'write_synthetic_scans',
]

logger = logging.getLogger(__name__)

# 8 intensities from 25 to 197, about equally spaced on the log scale
DEFAULT_M_GRID = (25, 34, 45, 61, 81, 109, 147, 197)
DEFAULT_POPULATION_DIM = 40
DELTA_EPS_CHUNK = 1000


def _cholesky(matrix, name = 'covariance'):
    matrix = np.asarray(matrix, dtype = float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputShapeError('%s must be square, got shape %s' % (name, matrix.shape))
    if not np.allclose(matrix, matrix.T, rtol = 0.0, atol = 1e-12 * max(1.0, np.abs(matrix).max())):
        raise FactorizationError('%s is not symmetric' % name)
    try:
        return linalg.cholesky(matrix, lower = True)
    except linalg.LinAlgError as e:
        raise FactorizationError('%s is not positive definite: %s' % (name, e))


def _streams(seed, count):
    """count independent child SeedSequences of seed (an int, SeedSequence or None)"""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(count)


def _seed_of(seed):
    if seed is None:
        return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    return int(seed)


@dataclass(frozen = True, eq = False)
class TrueScorePopulation(object):
    """T_i ~ N(0, sigma_T), e_ij ~ N(0, sigma_eps), I individuals with J replicates each"""
    sigma_T: np.ndarray
    sigma_eps: np.ndarray
    I: int
    J: int

    def __post_init__(self):
        sigma_T = np.atleast_2d(np.asarray(self.sigma_T, dtype = float))
        sigma_eps = np.atleast_2d(np.asarray(self.sigma_eps, dtype = float))
        if sigma_T.shape != sigma_eps.shape:
            raise InputShapeError('sigma_T is %s but sigma_eps is %s' % (sigma_T.shape, sigma_eps.shape))
        if self.I < 2 or self.J < 1:
            raise ParameterError('need I >= 2 and J >= 1, got I = %r, J = %r' % (self.I, self.J))
        object.__setattr__(self, 'sigma_T', sigma_T)
        object.__setattr__(self, 'sigma_eps', sigma_eps)
        object.__setattr__(self, '_factors', (_cholesky(sigma_T, 'sigma_T'), _cholesky(sigma_eps, 'sigma_eps')))

    @classmethod
    def from_reliability(cls, rho, I, J = 4, p = 2):
        """Isotropic design T ~ N(0, I_p), e ~ N(0, c I_p) with c = (1 - rho)/rho"""
        if not 0.0 < rho < 1.0:
            raise ParameterError('rho must lie in (0, 1), got %r' % rho)
        c = (1.0 - rho) / rho
        return cls(np.eye(p), c * np.eye(p), I, J)

    @property
    def p(self):
        return self.sigma_T.shape[0]

    @property
    def rho(self):
        """The population dbICC under the Euclidean distance"""
        return population_dbicc_gaussian(np.trace(self.sigma_T), np.trace(self.sigma_eps))


@dataclass(frozen = True, eq = False)
class ConnectivityPopulation(object):
    """Per-individual innovation covariances Sigma_i, scan length m and lag-1
    coefficient phi (0 gives IID rows)."""
    sigmas: tuple
    m: int
    phi: float = 0.0

    def __post_init__(self):
        sigmas = tuple(np.asarray(sigma, dtype = float) for sigma in self.sigmas)
        if len(sigmas) < 2:
            raise ParameterError('need covariances for at least 2 individuals')
        if len(set(sigma.shape for sigma in sigmas)) != 1:
            raise InputShapeError('covariances differ in shape')
        if not 0.0 <= self.phi < 1.0:
            raise ParameterError('phi must lie in [0, 1), got %r' % self.phi)
        if self.m < 2:
            raise ParameterError('scans need m >= 2 time points, got %r' % self.m)
        object.__setattr__(self, 'sigmas', sigmas)
        object.__setattr__(self, '_factors', tuple(_cholesky(sigma, 'Sigma_%d' % i) for i, sigma in enumerate(sigmas)))

    @property
    def I(self):
        return len(self.sigmas)

    @property
    def p(self):
        return self.sigmas[0].shape[0]


def _sample_from_arrays(X):
    """GroupedSample of vectors from an I x J x p array"""
    records = [IndividualRecord('s%03d' % i, tuple(_frozen(X[i, j]) for j in range(X.shape[1])),
                                tuple(range(1, X.shape[1] + 1)))
               for i in range(X.shape[0])]
    return GroupedSample(records, PayloadKind.VECTOR)


def _frozen(array):
    array = np.array(array, dtype = float)
    array.flags.writeable = False
    return array


def gen_gaussian_sample(pop, rng):
    """Draws X_ij = T_i + e_ij for every individual and replicate of pop"""
    factor_T, factor_eps = pop._factors
    T = rng.standard_normal((pop.I, pop.p)) @ factor_T.T
    eps = rng.standard_normal((pop.I, pop.J, pop.p)) @ factor_eps.T
    return _sample_from_arrays(T[:, None, :] + eps)


def gen_mvn_timeseries(sigma, m, phi, rng, factor = None):
    """An m x p VAR(1) scan with innovation covariance sigma.

    x_1 is drawn from the stationary law N(0, sigma / (1 - phi^2)), so every
    row has that marginal covariance; phi = 0 gives m IID N(0, sigma) rows.
    A precomputed Cholesky factor of sigma may be passed to skip the
    factorization."""
    if not 0.0 <= phi < 1.0:
        raise ParameterError('phi must lie in [0, 1), got %r' % phi)
    if m < 2:
        raise ParameterError('a scan needs m >= 2 time points, got %r' % m)
    if factor is None:
        factor = _cholesky(sigma)
    innovations = rng.standard_normal((m, factor.shape[0])) @ factor.T
    if phi == 0.0:
        return innovations
    innovations[0] /= sqrt(1.0 - phi * phi)
    return signal.lfilter([1.0], [1.0, -phi], innovations, axis = 0)


def gen_sample_cov(X):
    """Unbiased (divisor m - 1) sample covariance of the columns of X"""
    X = np.asarray(X, dtype = float)
    if X.ndim != 2:
        raise InputShapeError('expected an m x p matrix, got shape %s' % (X.shape,))
    if X.shape[0] < 2:
        raise InsufficientDataError('sample covariance needs m >= 2 rows, got %d' % X.shape[0])
    return np.atleast_2d(np.cov(X, rowvar = False, ddof = 1))


def random_covariance_population(I, p = DEFAULT_POPULATION_DIM, rng = None, df = None, correlation_scaled = True):
    """I synthetic covariance matrices Sigma_i = W_i / df with W_i ~ Wishart(df, I_p).

    With correlation_scaled (the default) each is rescaled to unit diagonal.
    df defaults to 2p, which keeps every Sigma_i well conditioned."""
    df = 2 * p if df is None else df
    if df < p:
        raise ParameterError('Wishart degrees of freedom must be >= p = %d, got %r' % (p, df))
    draws = stats.wishart(df = df, scale = np.eye(p) / df).rvs(size = I, random_state = rng)
    draws = np.asarray(draws).reshape(I, p, p)
    sigmas = []
    for sigma in draws:
        if correlation_scaled:
            scale = 1.0 / np.sqrt(np.diag(sigma))
            sigma = sigma * np.outer(scale, scale)
            np.fill_diagonal(sigma, 1.0)
        sigmas.append((sigma + sigma.T) / 2)
    return sigmas


def _reducer(kind):
    if kind == 'covariance':
        return gen_sample_cov
    if kind == 'correlation':
        return correlation_from_timeseries
    if kind == 'timeseries':
        return None
    raise ParameterError("kind must be 'covariance', 'correlation' or 'timeseries', got %r" % kind)


def gen_connectivity_sample(pop, J, rng, kind = 'covariance'):
    """J scans per individual of pop, reduced to covariance or correlation
    matrices (kind='timeseries' keeps the raw scans).

    rng may be a Generator, or a SeedSequence from which one child stream per
    individual is spawned."""
    reduce = _reducer(kind)
    if isinstance(rng, np.random.SeedSequence):
        generators = [np.random.default_rng(child) for child in rng.spawn(pop.I)]
    else:
        generators = [rng] * pop.I
    records = []
    for i, (factor, generator) in enumerate(zip(pop._factors, generators)):
        scans = []
        for j in range(J):
            X = gen_mvn_timeseries(None, pop.m, pop.phi, generator, factor = factor)
            scans.append(_frozen(X if reduce is None else reduce(X)))
        records.append(IndividualRecord('s%03d' % i, tuple(scans), tuple(range(1, J + 1))))
    return GroupedSample(records, PayloadKind.TIMESERIES if reduce is None else PayloadKind.MATRIX)


def _sample_covs(factor, m, count, rng):
    """count sample covariances of m IID N(0, factor factor^T) rows, as a count x p x p array"""
    Z = rng.standard_normal((count, m, factor.shape[0])) @ factor.T
    Z -= Z.mean(axis = 1, keepdims = True)
    return np.einsum('kti,ktj->kij', Z, Z) / (m - 1)


def delta_eps_analytic(sigma, m):
    """2 [(tr Sigma)^2 + tr(Sigma^2)] / (m - 1): expected squared Frobenius
    distance between the errors of two sample covariances"""
    sigma = np.asarray(sigma, dtype = float)
    return 2.0 * (np.trace(sigma) ** 2 + np.trace(sigma @ sigma)) / (m - 1)


def verify_delta_eps(sigma, m, n_rep, rng):
    """Monte Carlo check of the sample-covariance error distance.

    Draws n_rep independent pairs of sample covariances (each from m IID
    N(0, sigma) rows) and averages ||S_1 - S_2||_F^2, which is the squared
    distance between their errors S - sigma. Returns (monte_carlo, analytic)."""
    factor = _cholesky(sigma)
    p = factor.shape[0]
    if m < p + 2:
        raise ParameterError('need m >= p + 2 = %d for well-conditioned sample covariances, got %d' % (p + 2, m))
    if n_rep < 1000:
        raise ParameterError('need n_rep >= 1000 for a stable Monte Carlo mean, got %d' % n_rep)
    totals = []
    done = 0
    while done < n_rep:
        count = min(DELTA_EPS_CHUNK, n_rep - done)
        first = _sample_covs(factor, m, count, rng)
        second = _sample_covs(factor, m, count, rng)
        totals.append(np.sum((first - second) ** 2, axis = (1, 2)))
        done += count
    return float(np.mean(np.concatenate(totals))), float(delta_eps_analytic(sigma, m))


@dataclass(frozen = True)
class MonteCarloMean(object):
    mean: float
    se: float
    n: int

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype = float)
        return cls(float(values.mean()), float(values.std(ddof = 1) / sqrt(values.size)), int(values.size))


def _two_individuals(I, rng):
    first, second = rng.choice(I, size = 2, replace = False)
    return int(first), int(second)


def check_error_exchangeability(sigmas, m, n_rep, rng):
    """Mean squared Frobenius distance between sample-covariance errors of the
    same individual versus of two different individuals.

    Returns (same, different) MonteCarloMeans; the expectations agree when
    the errors are exchangeable across individuals."""
    factors = [_cholesky(sigma) for sigma in sigmas]
    sigmas = [np.asarray(sigma, dtype = float) for sigma in sigmas]
    same, different = [], []
    for _ in range(n_rep):
        i1, i2 = _two_individuals(len(sigmas), rng)
        e11, e12 = _sample_covs(factors[i1], m, 2, rng) - sigmas[i1]
        e2 = _sample_covs(factors[i2], m, 1, rng)[0] - sigmas[i2]
        e1 = _sample_covs(factors[i1], m, 1, rng)[0] - sigmas[i1]
        same.append(np.sum((e11 - e12) ** 2))
        different.append(np.sum((e1 - e2) ** 2))
    return MonteCarloMean.of(same), MonteCarloMean.of(different)


def check_cross_term(sigmas, m, n_rep, rng):
    """Monte Carlo mean of <Sigma_i1 - Sigma_i2, e_i1 - e_i2> (trace inner
    product) over random pairs of distinct individuals; it should be zero."""
    factors = [_cholesky(sigma) for sigma in sigmas]
    sigmas = [np.asarray(sigma, dtype = float) for sigma in sigmas]
    values = []
    for _ in range(n_rep):
        i1, i2 = _two_individuals(len(sigmas), rng)
        e1 = _sample_covs(factors[i1], m, 1, rng)[0] - sigmas[i1]
        e2 = _sample_covs(factors[i2], m, 1, rng)[0] - sigmas[i2]
        values.append(np.sum((sigmas[i1] - sigmas[i2]) * (e1 - e2)))
    return MonteCarloMean.of(values)


@dataclass(frozen = True)
class PointStudyReport(object):
    rho: float
    I: int
    J: int
    seed: int
    estimates: tuple

    @property
    def mean(self):
        return float(np.mean(self.estimates))

    @property
    def bias(self):
        return self.mean - self.rho

    @property
    def sd(self):
        return float(np.std(self.estimates, ddof = 1))


def run_point_study(rho, I, J = 4, n_rep = 500, p = 2, seed = None, threads = 1):
    """Distribution of the Euclidean dbICC estimate over n_rep simulated samples"""
    pop = TrueScorePopulation.from_reliability(rho, I, J, p)
    seed = _seed_of(seed)
    metric = DistanceSpec.parse('l2')
    logger.info('point study: rho=%g I=%d J=%d reps=%d seed=%d', rho, I, J, n_rep, seed)

    def one(stream):
        sample = gen_gaussian_sample(pop, np.random.default_rng(stream))
        return dbicc_point(compute_distance_matrix(sample, metric)).rho_hat

    estimates = ReplicateRunner(threads, label = 'point-study replicates').map(one, _streams(seed, n_rep))
    return PointStudyReport(rho, I, J, seed, tuple(estimates))


@dataclass(frozen = True)
class CoverageReport(object):
    """Naive and corrected bootstrap interval coverage over outer replicates.

    Per outer replicate k: the point estimate, the bootstrap seed, whether
    each interval covered rho, and each bootstrap median."""
    rho: float
    I: int
    J: int
    B: int
    level: float
    seed: int
    point_estimates: tuple
    bootstrap_seeds: tuple
    naive_covered: tuple
    corrected_covered: tuple
    naive_medians: tuple
    corrected_medians: tuple
    n_degenerate: int

    @property
    def naive_coverage(self):
        """Percent of naive intervals covering rho"""
        return 100.0 * float(np.mean(self.naive_covered))

    @property
    def corrected_coverage(self):
        return 100.0 * float(np.mean(self.corrected_covered))

    @property
    def correction_closer_fraction(self):
        """Fraction of replicates whose corrected median is strictly closer to rho than the naive one"""
        naive = np.abs(np.asarray(self.naive_medians) - self.rho)
        corrected = np.abs(np.asarray(self.corrected_medians) - self.rho)
        return float(np.mean(corrected < naive))


def run_coverage_study(rho, I, J = 4, B = DEFAULT_BOOT, n_rep = 500, level = DEFAULT_LEVEL, p = 2,
                       seed = None, threads = 1):
    """Simulates n_rep samples and bootstraps each one naively and with the
    correction, on identical draws.

    Outer replicates run in parallel; each bootstrap runs serially inside its
    worker."""
    pop = TrueScorePopulation.from_reliability(rho, I, J, p)
    seed = _seed_of(seed)
    metric = DistanceSpec.parse('l2')
    logger.info('coverage study: rho=%g I=%d J=%d B=%d reps=%d seed=%d', rho, I, J, B, n_rep, seed)

    def one(stream):
        data_stream, boot_stream = stream.spawn(2)
        boot_seed = int(boot_stream.generate_state(1, np.uint64)[0])
        D = compute_distance_matrix(gen_gaussian_sample(pop, np.random.default_rng(data_stream)), metric)
        naive, corrected, duplicated = bootstrap_pair(D, B, level, boot_seed)
        return (dbicc_point(D).rho_hat, boot_seed, naive.covers(rho), corrected.covers(rho),
                naive.median, corrected.median, naive.n_degenerate + corrected.n_degenerate)

    results = ReplicateRunner(threads, label = 'coverage replicates').map(one, _streams(seed, n_rep))
    columns = list(zip(*results))
    return CoverageReport(rho, I, J, B, level, seed, *(tuple(column) for column in columns[:6]),
                          n_degenerate = int(sum(columns[6])))


@dataclass(frozen = True)
class SbExperimentReport(object):
    """Spearman-Brown curves from repeated simulations over an intensity grid.

    estimates[c][k] is the dbICC of curve replicate c at m_grid[k]; curves
    holds the fitted SbCurve of every replicate that had enough usable
    points."""
    m_grid: tuple
    offset: int
    phi: float
    kind: str
    distance: str
    seed: int
    estimates: tuple
    curves: tuple

    @property
    def slopes(self):
        return np.array([curve.fit.slope for curve in self.curves])

    @property
    def intercepts(self):
        return np.array([curve.fit.intercept for curve in self.curves])

    @property
    def mean_slope(self):
        return float(self.slopes.mean())

    @property
    def mean_intercept(self):
        return float(self.intercepts.mean())

    def mean_log_snr(self):
        """Mean log SNR over replicates at each m of the grid (NaN where no estimate is in (0, 1))"""
        out = []
        for k in range(len(self.m_grid)):
            logs = [np.log(snr(row[k])) for row in self.estimates if 0.0 < row[k] < 1.0]
            out.append(float(np.mean(logs)) if logs else float('nan'))
        return np.array(out)


def run_sb_experiment(population, m_grid = DEFAULT_M_GRID, J = 2, phi = 0.0, kind = 'covariance',
                      distance = 'l2', n_curves = 20, offset = 1, seed = None, threads = 1):
    """dbICC against scan length m for a population of covariances.

    For every curve replicate and every m, J scans per individual are drawn
    (VAR(1) with coefficient phi), reduced to covariance or correlation
    matrices, distanced and estimated. population is a sequence of covariance
    matrices or a ConnectivityPopulation; only its covariances are used, m
    and phi always come from the arguments."""
    if not isinstance(population, ConnectivityPopulation):
        population = ConnectivityPopulation(tuple(population), max(m_grid), phi)
    metric = distance if isinstance(distance, DistanceSpec) else DistanceSpec.parse(distance)
    m_grid = tuple(int(m) for m in m_grid)
    _reducer(kind)
    seed = _seed_of(seed)
    logger.info('SB experiment: kind=%s phi=%g distance=%s curves=%d m=%s seed=%d',
                kind, phi, metric.label(), n_curves, m_grid, seed)

    populations = [replace(population, m = m, phi = phi) for m in m_grid]
    tasks = [(c, k, stream) for c, curve_stream in enumerate(_streams(seed, n_curves))
             for k, stream in enumerate(curve_stream.spawn(len(m_grid)))]

    def one(task):
        c, k, stream = task
        sample = gen_connectivity_sample(populations[k], J, stream, kind)
        return dbicc_point(compute_distance_matrix(sample, metric)).rho_hat

    values = ReplicateRunner(threads, label = 'SB estimates').map(one, tasks)
    estimates = tuple(tuple(values[c * len(m_grid):(c + 1) * len(m_grid)]) for c in range(n_curves))

    curves = []
    for c, row in enumerate(estimates):
        try:
            curves.append(build_sb_curve(list(zip(m_grid, row)), offset))
        except DbiccError as e:
            logger.warning('curve replicate %d has no usable fit: %s', c, e)
    return SbExperimentReport(m_grid, offset, phi, kind, metric.label(), seed, estimates, tuple(curves))


def write_synthetic_scans(directory, I = 25, J = 2, m = 197, p = 333, phi = 0.0, seed = None, df = None):
    """Writes I x J synthetic scans and a manifest.csv describing them.

    Scans follow a VAR(1) model with a random correlation-scaled Wishart
    covariance per individual, so the full command-line pipeline can run
    without external data. Returns the manifest path and the seed used."""
    from .formats import write_matrix_csv, write_manifest

    seed = _seed_of(seed)
    population_stream, scan_stream = np.random.SeedSequence(seed).spawn(2)
    sigmas = random_covariance_population(I, p, np.random.default_rng(population_stream), df)
    sample = gen_connectivity_sample(ConnectivityPopulation(tuple(sigmas), m, phi), J, scan_stream, 'timeseries')
    os.makedirs(directory, exist_ok = True)
    rows = []
    for record in sample.individuals:
        for replicate, scan in zip(record.replicate_ids, record.replicates):
            name = '%s_r%d.csv' % (record.id, replicate)
            write_matrix_csv(os.path.join(directory, name), scan)
            rows.append((record.id, replicate, name))
    manifest = os.path.join(directory, 'manifest.csv')
    write_manifest(manifest, rows)
    logger.info('wrote %d synthetic %dx%d scans to %s (seed %d)', len(rows), m, p, directory, seed)
    return manifest, seed
