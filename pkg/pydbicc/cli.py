"""The dbicc command line.

    dbicc estimate INPUT [--distance l2|l1|corr] [--threshold LAMBDA] [--rois FILE]
    dbicc bootstrap INPUT [--boot B] [--level A] [--corrected|--naive] [--seed N]
    dbicc sweep-threshold INPUT [--threshold-grid a:b:step] [--distance l2|l1|corr|all]
    dbicc simulate --experiment point|coverage|sb|delta-eps|scans

INPUT is a vector CSV, a distance matrix (with a groups.csv) or a manifest of
scans; see pydbicc.formats. Results go to stdout, or to --out, as JSON or
CSV. Exit codes: 0 success, 2 input error, 3 computation error, 4 bad
options."""

import argparse
import io
import logging
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import formats
from .bootstrap import DEFAULT_BOOT, DEFAULT_LEVEL, bootstrap_pair
from .dbicc import dbicc_point
from .distances import DISTANCE_NAME_MAP, DistanceSpec, connectivity_matrices, select_rois, sweep_threshold
from .errors import DbiccError, ParseError, ConfigError, ParameterError
from .grouped import PayloadKind, compute_distance_matrix
from .simulation import (DEFAULT_M_GRID, random_covariance_population, verify_delta_eps,
                         run_point_study, run_coverage_study, run_sb_experiment, write_synthetic_scans)

__all__ = [
    'EXIT_OK',
    'EXIT_INPUT',
    'EXIT_COMPUTATION',
    'EXIT_CONFIG',
    'RunConfig',
    'parse_threshold_grid',
    'parse_m_grid',
    'cmd_estimate',
    'cmd_bootstrap',
    'cmd_sweep_threshold',
    'cmd_simulate',
    'main',
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTATION = 3
EXIT_CONFIG = 4

COMMANDS = ('estimate', 'bootstrap', 'sweep-threshold', 'simulate')
EXPERIMENTS = ('point', 'coverage', 'sb', 'delta-eps', 'scans')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')

DEFAULT_THRESHOLD_GRID = '0:0.5:0.05'
ALL_DISTANCES = 'all'
SWEEP_DISTANCES = ('l2', 'l1', 'corr')

# Per-experiment defaults for options left unset on the command line
EXPERIMENT_DEFAULTS = {
    'point':     {'I': 70, 'J': 4, 'p': 2, 'reps': 500},
    'coverage':  {'I': 40, 'J': 4, 'p': 2, 'reps': 500},
    'sb':        {'I': 25, 'J': 2, 'p': 40, 'reps': 20},
    'delta-eps': {'p': 2, 'm': 5, 'reps': 10000},
    'scans':     {'I': 25, 'J': 2, 'p': 333, 'm': 197},
}


def parse_threshold_grid(text):
    """'a:b:step' to the thresholds a, a + step, ... up to and including b"""
    try:
        start, stop, step = [float(part) for part in text.split(':')]
    except ValueError:
        raise ConfigError("threshold grid must look like a:b:step, got %r" % text)
    if step <= 0 or not 0.0 <= start <= stop <= 1.0:
        raise ConfigError('threshold grid needs 0 <= a <= b <= 1 and step > 0, got %r' % text)
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + k * step, 12) for k in range(count))


def parse_m_grid(text):
    """Comma-separated scan lengths, e.g. '25,34,45'"""
    try:
        grid = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise ConfigError('m-grid must be a comma-separated list of integers, got %r' % text)
    return grid


@dataclass
class RunConfig(object):
    """Everything one dbicc invocation needs, as parsed from the command line.

    Options that do not apply to the chosen command are ignored."""
    command: str
    input: str = None
    format: str = 'auto'
    groups: str = None
    payload: str = 'timeseries'
    matrix: str = 'correlation'
    rois: str = None
    distance: str = 'l2'
    threshold: float = None
    threshold_grid: tuple = ()
    boot: int = DEFAULT_BOOT
    level: float = DEFAULT_LEVEL
    corrected: bool = True
    seed: int = None
    threads: int = 1
    out: str = None
    replicates_out: str = None
    csv: str = None
    experiment: str = None
    rho: float = 0.5
    I: int = None
    J: int = None
    p: int = None
    m: int = None
    reps: int = None
    phi: float = 0.0
    kind: str = 'covariance'
    m_grid: tuple = field(default = DEFAULT_M_GRID)
    sb_offset: int = 1

    @classmethod
    def from_args(cls, args):
        known = set(f.name for f in fields(cls))
        config = cls(**dict((k, v) for k, v in vars(args).items() if k in known and v is not None))
        if isinstance(config.threshold_grid, str):
            config.threshold_grid = parse_threshold_grid(config.threshold_grid)
        if isinstance(config.m_grid, str):
            config.m_grid = parse_m_grid(config.m_grid)
        if config.command == 'simulate':
            for name, value in EXPERIMENT_DEFAULTS.get(config.experiment, {}).items():
                if getattr(config, name) is None:
                    setattr(config, name, value)
        return config

    def validate(self):
        """Raises ConfigError for any option outside its accepted range"""
        if self.command not in COMMANDS:
            raise ConfigError('unknown command %r' % self.command)
        if self.command != 'simulate' and not self.input:
            raise ConfigError('%s needs an input file' % self.command)
        if self.format not in ('auto',) + formats.FORMATS:
            raise ConfigError('unknown input format %r' % self.format)
        if self.distance.lower() == ALL_DISTANCES:
            if self.command != 'sweep-threshold':
                raise ConfigError('--distance all is only accepted by sweep-threshold')
        elif self.distance.lower() not in DISTANCE_NAME_MAP:
            raise ConfigError('unknown distance %r' % self.distance)
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ConfigError('--threshold must lie in [0, 1], got %r' % self.threshold)
        if self.boot < 2:
            raise ConfigError('--boot must be at least 2, got %r' % self.boot)
        if not 0.0 < self.level < 1.0:
            raise ConfigError('--level must lie in (0, 1), got %r' % self.level)
        if self.seed is not None and self.seed < 0:
            raise ConfigError('--seed must be nonnegative, got %r' % self.seed)
        if self.threads < 1:
            raise ConfigError('--threads must be at least 1, got %r' % self.threads)
        if self.sb_offset not in (0, 1):
            raise ConfigError('--sb-offset must be 0 or 1, got %r' % self.sb_offset)
        if len(self.m_grid) < 3 or len(set(self.m_grid)) != len(self.m_grid) or min(self.m_grid) <= max(2, self.sb_offset):
            raise ConfigError('--m-grid needs at least 3 distinct lengths above 2, got %s' % (self.m_grid,))
        if self.command == 'simulate':
            self._validate_simulation()

    def _validate_simulation(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError('--experiment must be one of %s' % ', '.join(EXPERIMENTS))
        if not 0.0 < self.rho < 1.0:
            raise ConfigError('--rho must lie in (0, 1), got %r' % self.rho)
        if not 0.0 <= self.phi < 1.0:
            raise ConfigError('--phi must lie in [0, 1), got %r' % self.phi)
        if self.kind not in ('covariance', 'correlation'):
            raise ConfigError("--kind must be 'covariance' or 'correlation', got %r" % self.kind)
        for name, least in (('I', 2), ('J', 1), ('p', 1), ('m', 2), ('reps', 1)):
            value = getattr(self, name)
            if value is not None and value < least:
                raise ConfigError('-%s%s must be at least %d, got %r'
                                  % ('' if len(name) == 1 else '-', name, least, value))
        if self.experiment in ('point', 'coverage') and self.J < 2:
            raise ConfigError('-J must be at least 2 for a %s study' % self.experiment)
        if self.experiment == 'sb' and DISTANCE_NAME_MAP[self.distance.lower()].value == 'corr' and self.p < 3:
            raise ConfigError('the corr distance needs p >= 3')
        if self.experiment == 'delta-eps':
            if self.m < self.p + 2:
                raise ConfigError('-m must be at least p + 2 = %d' % (self.p + 2))
            if self.reps < 1000:
                raise ConfigError('--reps must be at least 1000 for delta-eps, got %r' % self.reps)
        if self.experiment == 'scans' and not self.out:
            raise ConfigError('the scans experiment needs --out DIRECTORY')


def _new_seed():
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def _load(config):
    """Reads the input of config into ('sample', GroupedSample) or ('matrix', DistanceMatrix)"""
    kind = config.format
    if kind == 'auto':
        kind = formats.detect_format(config.input)
    logger.info('reading %s input from %s', kind, config.input)
    if kind == formats.DISTANCES:
        if config.rois:
            raise ConfigError('--rois cannot be applied to a precomputed distance matrix')
        D, individuals = formats.read_distance_input(config.input, config.groups)
        return 'matrix', D
    if kind == formats.VECTORS:
        sample = formats.read_vector_csv(config.input)
    else:
        sample = formats.read_manifest(config.input, PayloadKind(config.payload))
    if config.rois:
        rois = formats.read_roi_file(config.rois)
        try:
            sample = select_rois(sample, rois)
        except ParameterError as e:
            raise ConfigError('--rois %s: %s' % (config.rois, e))
        logger.info('restricted to %d ROIs from %s', len(rois), config.rois)
    if sample.payload_kind is PayloadKind.TIMESERIES:
        sample = connectivity_matrices(sample, config.matrix)
    return 'sample', sample


def _spec(config):
    return DistanceSpec.parse(config.distance, config.threshold)


def _distance_matrix(config):
    """The DistanceMatrix of the input and the label of the distance used"""
    what, loaded = _load(config)
    if what == 'matrix':
        if config.threshold is not None:
            raise ConfigError('--threshold cannot be applied to a precomputed distance matrix')
        return loaded, 'precomputed'
    spec = _spec(config)
    return compute_distance_matrix(loaded, spec), spec.kind.value


def _emit(config, text):
    if config.out:
        with open(config.out, 'w', encoding = 'utf-8') as f:
            f.write(text)
        logger.info('wrote %s', config.out)
    else:
        sys.stdout.write(text)


def _estimate_document(config, D, distance):
    estimate = dbicc_point(D)
    return {
        'rho_hat': estimate.rho_hat,
        'msd_within': estimate.msd_within,
        'msd_between': estimate.msd_between,
        'n_within_pairs': estimate.n_within_pairs,
        'n_between_pairs': estimate.n_between_pairs,
        'distance': distance,
        'threshold': config.threshold,
        'n_individuals': D.n_individuals,
        'n_observations': D.n,
    }


def cmd_estimate(config):
    """Point estimate of the dbICC of the input, as a JSON document"""
    D, distance = _distance_matrix(config)
    return formats.dumps_json(_estimate_document(config, D, distance))


def _write_replicate_log(path, naive, corrected, duplicated):
    values = {}
    for result in (naive, corrected):
        values[result.corrected] = dict(zip(result.replicate_ids, result.replicate_estimates))
    rows = [(r, int(dup), values[False].get(r, ''), values[True].get(r, ''))
            for r, dup in enumerate(duplicated)]
    with open(path, 'w', newline = '', encoding = 'utf-8') as f:
        formats.write_rows_csv(f, ['r', 'duplicated', 'naive', 'corrected'], rows)
    logger.info('wrote %d bootstrap replicates to %s', len(rows), path)


def cmd_bootstrap(config):
    """Point estimate plus a bootstrap percentile interval, as a JSON document.

    Naive and corrected replicates are always evaluated on the same draws;
    --corrected/--naive picks which one is reported."""
    D, distance = _distance_matrix(config)
    seed = _new_seed() if config.seed is None else config.seed
    naive, corrected, duplicated = bootstrap_pair(D, config.boot, config.level, seed, config.threads)
    if config.replicates_out:
        _write_replicate_log(config.replicates_out, naive, corrected, duplicated)
    result = corrected if config.corrected else naive
    document = _estimate_document(config, D, distance)
    document.update({
        'ci_low': result.ci_low,
        'ci_high': result.ci_high,
        'level': result.level,
        'B': result.B,
        'corrected': result.corrected,
        'seed': result.seed,
        'n_degenerate': result.n_degenerate,
        'bootstrap_median': result.median,
    })
    return formats.dumps_json(document)


def cmd_sweep_threshold(config):
    """CSV of (threshold, avg_fraction_zeroed, rho_hat, distance), one row per
    threshold and distance; --distance all sweeps l2, l1 and corr in turn."""
    what, sample = _load(config)
    if what == 'matrix':
        raise ConfigError('sweep-threshold needs matrix or scan input, not a precomputed distance matrix')
    grid = config.threshold_grid or parse_threshold_grid(DEFAULT_THRESHOLD_GRID)
    names = SWEEP_DISTANCES if config.distance.lower() == ALL_DISTANCES else (config.distance,)
    rows = []
    for name in names:
        spec = DistanceSpec.parse(name)
        rows.extend((row.threshold, row.fraction_zeroed, row.rho_hat, spec.kind.value)
                    for row in sweep_threshold(sample, spec, grid))
    buffer = io.StringIO()
    formats.write_rows_csv(buffer, ['threshold', 'avg_fraction_zeroed', 'rho_hat', 'distance'], rows)
    return buffer.getvalue()


def _write_csv(path, header, rows):
    if path:
        with open(path, 'w', newline = '', encoding = 'utf-8') as f:
            formats.write_rows_csv(f, header, rows)
        logger.info('wrote %s', path)


def _simulate_point(config, seed):
    report = run_point_study(config.rho, config.I, config.J, config.reps, config.p, seed, config.threads)
    _write_csv(config.csv, ['replicate', 'rho_hat'], enumerate(report.estimates))
    return {'rho': report.rho, 'I': report.I, 'J': report.J, 'p': config.p, 'n_rep': len(report.estimates),
            'mean': report.mean, 'bias': report.bias, 'sd': report.sd, 'estimates': report.estimates}


def _simulate_coverage(config, seed):
    report = run_coverage_study(config.rho, config.I, config.J, config.boot, config.reps, config.level,
                                config.p, seed, config.threads)
    _write_csv(config.csv,
               ['replicate', 'rho_hat', 'bootstrap_seed', 'naive_covered', 'corrected_covered',
                'naive_median', 'corrected_median'],
               [(k,) + row for k, row in enumerate(zip(report.point_estimates, report.bootstrap_seeds,
                                                         report.naive_covered, report.corrected_covered,
                                                         report.naive_medians, report.corrected_medians))])
    return {'rho': report.rho, 'I': report.I, 'J': report.J, 'p': config.p, 'B': report.B,
            'level': report.level, 'n_rep': len(report.point_estimates),
            'naive_coverage': report.naive_coverage, 'corrected_coverage': report.corrected_coverage,
            'correction_closer_fraction': report.correction_closer_fraction,
            'n_degenerate': report.n_degenerate, 'bootstrap_seeds': report.bootstrap_seeds}


def _simulate_sb(config, seed):
    population_stream, experiment_stream = np.random.SeedSequence(seed).spawn(2)
    sigmas = random_covariance_population(config.I, config.p, np.random.default_rng(population_stream))
    experiment_seed = int(experiment_stream.generate_state(1, np.uint64)[0])
    report = run_sb_experiment(sigmas, config.m_grid, config.J, config.phi, config.kind, config.distance,
                               config.reps, config.sb_offset, experiment_seed, config.threads)
    rows = []
    for c, curve in enumerate(report.curves):
        for point in curve.points:
            rows.append((c, point.m, point.rho_hat, point.x, point.y))
    _write_csv(config.csv, ['curve', 'm', 'rho_hat', 'x', 'y'], rows)
    return {'I': config.I, 'J': config.J, 'p': config.p, 'phi': report.phi, 'kind': report.kind,
            'distance': report.distance, 'offset': report.offset, 'm_grid': report.m_grid,
            'n_curves': len(report.estimates), 'n_fitted': len(report.curves),
            'mean_slope': report.mean_slope, 'mean_intercept': report.mean_intercept,
            'slopes': report.slopes, 'intercepts': report.intercepts,
            'slope_se': [curve.fit.slope_se for curve in report.curves],
            'mean_log_snr': report.mean_log_snr(), 'experiment_seed': experiment_seed}


def _simulate_delta_eps(config, seed):
    population_stream, draw_stream = np.random.SeedSequence(seed).spawn(2)
    sigma = random_covariance_population(1, config.p, np.random.default_rng(population_stream))[0]
    monte_carlo, analytic = verify_delta_eps(sigma, config.m, config.reps, np.random.default_rng(draw_stream))
    return {'p': config.p, 'm': config.m, 'n_rep': config.reps, 'monte_carlo': monte_carlo,
            'analytic': analytic, 'relative_error': abs(monte_carlo - analytic) / analytic}


def _simulate_scans(config, seed):
    manifest, seed = write_synthetic_scans(config.out, config.I, config.J, config.m, config.p, config.phi, seed)
    # --out named the scan directory; the report itself goes to stdout
    config.out = None
    return {'manifest': manifest, 'I': config.I, 'J': config.J, 'm': config.m, 'p': config.p, 'phi': config.phi}


SIMULATIONS = {
    'point': _simulate_point,
    'coverage': _simulate_coverage,
    'sb': _simulate_sb,
    'delta-eps': _simulate_delta_eps,
    'scans': _simulate_scans,
}


def cmd_simulate(config):
    """Runs one simulation experiment and reports it as JSON (plus --csv rows)"""
    seed = _new_seed() if config.seed is None else config.seed
    logger.info('simulate %s with seed %d', config.experiment, seed)
    document = {'experiment': config.experiment, 'seed': seed}
    document.update(SIMULATIONS[config.experiment](config, seed))
    return formats.dumps_json(document)


COMMAND_FUNCTIONS = {
    'estimate': cmd_estimate,
    'bootstrap': cmd_bootstrap,
    'sweep-threshold': cmd_sweep_threshold,
    'simulate': cmd_simulate,
}


def _add_input_options(parser):
    parser.add_argument('input', help = 'vector CSV, distance matrix CSV or scan manifest')
    parser.add_argument('--format', choices = ('auto',) + formats.FORMATS,
                        help = 'input format (default: detected from the header)')
    parser.add_argument('--groups', help = 'groups CSV of a distance matrix (default: groups.csv beside it)')
    parser.add_argument('--payload', choices = ('timeseries', 'matrix'),
                        help = 'what each manifest file holds (default: timeseries)')
    parser.add_argument('--matrix', choices = ('correlation', 'covariance'),
                        help = 'matrix computed from each scan (default: correlation)')
    parser.add_argument('--rois', help = 'file of 0-based ROI indices to keep (default: all ROIs)')


def _add_distance_options(parser, threshold = True, every = False):
    choices = sorted(DISTANCE_NAME_MAP) + ([ALL_DISTANCES] if every else [])
    parser.add_argument('--distance', choices = choices, help = 'default: l2')
    if threshold:
        parser.add_argument('--threshold', type = float, help = 'soft threshold applied to matrices first')


def _add_run_options(parser):
    parser.add_argument('--seed', type = int, help = 'random seed (default: fresh, reported in the output)')
    parser.add_argument('--threads', type = int, help = 'worker threads; never changes results')


class _ArgumentParser(argparse.ArgumentParser):
    """Reports rejected options as a ConfigError instead of exiting"""
    def error(self, message):
        raise ConfigError('%s: %s' % (self.prog, message))


def build_parser():
    parser = _ArgumentParser(prog = 'dbicc', description = 'Distance-based intraclass correlation')
    parser.add_argument('-v', '--verbose', action = 'count', default = 0, help = 'more logging (repeatable)')
    parser.add_argument('--log-level', choices = LOG_LEVELS, help = 'explicit log level')
    commands = parser.add_subparsers(dest = 'command', required = True)

    estimate = commands.add_parser('estimate', help = 'point estimate')
    _add_input_options(estimate)
    _add_distance_options(estimate)
    estimate.add_argument('--out', help = 'write JSON here instead of stdout')

    boot = commands.add_parser('bootstrap', help = 'point estimate and bootstrap interval')
    _add_input_options(boot)
    _add_distance_options(boot)
    boot.add_argument('--boot', type = int, help = 'bootstrap replicates (default: %d)' % DEFAULT_BOOT)
    boot.add_argument('--level', type = float, help = 'confidence level (default: %g)' % DEFAULT_LEVEL)
    correction = boot.add_mutually_exclusive_group()
    correction.add_argument('--corrected', dest = 'corrected', action = 'store_true', default = None,
                            help = 'report the corrected bootstrap (default)')
    correction.add_argument('--naive', dest = 'corrected', action = 'store_false',
                            help = 'report the naive bootstrap')
    boot.add_argument('--replicates-out', help = 'CSV of every replicate, naive and corrected')
    _add_run_options(boot)
    boot.add_argument('--out', help = 'write JSON here instead of stdout')

    sweep = commands.add_parser('sweep-threshold', help = 'dbICC across soft thresholds')
    _add_input_options(sweep)
    _add_distance_options(sweep, threshold = False, every = True)
    sweep.add_argument('--threshold-grid', help = 'a:b:step (default: %s)' % DEFAULT_THRESHOLD_GRID)
    sweep.add_argument('--out', help = 'write CSV here instead of stdout')

    simulate = commands.add_parser('simulate', help = 'simulation experiments')
    simulate.add_argument('--experiment', choices = EXPERIMENTS, required = True)
    simulate.add_argument('--rho', type = float, help = 'true reliability for point/coverage (default: 0.5)')
    simulate.add_argument('-I', type = int, dest = 'I', help = 'individuals')
    simulate.add_argument('-J', type = int, dest = 'J', help = 'replicates per individual')
    simulate.add_argument('-p', type = int, dest = 'p', help = 'dimension')
    simulate.add_argument('-m', type = int, dest = 'm', help = 'scan length (delta-eps, scans)')
    simulate.add_argument('--reps', type = int, help = 'outer replicates, or curves for sb')
    simulate.add_argument('--phi', type = float, help = 'lag-1 autocorrelation (default: 0)')
    simulate.add_argument('--kind', choices = ('covariance', 'correlation'), help = 'matrices for sb')
    simulate.add_argument('--m-grid', help = 'comma-separated scan lengths for sb')
    simulate.add_argument('--sb-offset', type = int, choices = (0, 1), help = 'log(m - offset) axis (default: 1)')
    simulate.add_argument('--boot', type = int, help = 'bootstrap replicates for coverage')
    simulate.add_argument('--level', type = float, help = 'confidence level for coverage')
    _add_distance_options(simulate, threshold = False)
    _add_run_options(simulate)
    simulate.add_argument('--csv', help = 'plot-ready CSV of the per-replicate results')
    simulate.add_argument('--out', help = 'write JSON here (the output directory for scans)')
    return parser


def _configure_logging(args):
    if args.log_level:
        level = getattr(logging, args.log_level)
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level = level, stream = sys.stderr, force = True,
                        format = '%(asctime)s %(name)s %(levelname)s: %(message)s')
    logging.captureWarnings(True)


def main(argv = None):
    """Entry point of the dbicc script; returns the exit code"""
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        sys.stderr.write('ConfigError: %s\n' % e)
        return EXIT_CONFIG
    _configure_logging(args)
    try:
        config = RunConfig.from_args(args)
        config.validate()
        text = COMMAND_FUNCTIONS[config.command](config)
        _emit(config, text)
    except ParseError as e:
        sys.stderr.write('ParseError: %s\n' % e)
        return EXIT_INPUT
    except ConfigError as e:
        sys.stderr.write('ConfigError: %s\n' % e)
        return EXIT_CONFIG
    except DbiccError as e:
        sys.stderr.write('%s: %s\n' % (type(e).__name__, e))
        return EXIT_COMPUTATION
    except OSError as e:
        sys.stderr.write('%s: %s\n' % (type(e).__name__, e))
        return EXIT_INPUT
    return EXIT_OK


if __name__ == '__main__':
    raise SystemExit(main())
