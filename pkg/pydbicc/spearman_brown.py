"""Signal-to-noise ratios and Spearman-Brown relations for the dbICC.

With SNR = rho/(1 - rho), the classical Spearman-Brown formula says that
averaging m replicates multiplies the SNR by m. For the dbICC the SNR is
(MSD_b - MSD_w)/MSD_w; when only MSD_w depends on the measurement intensity
m, the SNR is proportional to 1/MSD_w(m). For sample covariance matrices of
m IID normal observations that gives SNR proportional to m - 1.

An SbCurve holds the points (log(m - offset), log SNR) of a set of dbICC
estimates at several intensities, and the ordinary least squares line
through them. Its slope estimates the exponent beta in MSD_w(m) ~ m^-beta.
"""

import logging
from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy import stats

from .errors import ParameterError, InsufficientDataError, DegenerateInputError

__all__ = [
    'snr',
    'inverse_snr',
    'snr_from_msd',
    'classical_sb',
    'LineFit',
    'SbPoint',
    'SbCurve',
    'fit_loglog',
    'build_sb_curve',
    'estimate_beta',
]

logger = logging.getLogger(__name__)


def snr(rho):
    """rho / (1 - rho) for rho in [0, 1)"""
    if not 0.0 <= rho < 1.0:
        raise ParameterError('SNR needs rho in [0, 1), got %r' % rho)
    return rho / (1.0 - rho)


def inverse_snr(s):
    """s / (1 + s): the reliability with signal-to-noise ratio s"""
    if s < 0:
        raise ParameterError('SNR must be nonnegative, got %r' % s)
    return s / (1.0 + s)


def snr_from_msd(msd_between, msd_within):
    """(MSD_b - MSD_w) / MSD_w, the SNR of 1 - MSD_w/MSD_b"""
    if msd_within <= 0:
        raise ParameterError('MSD_w must be positive, got %r' % msd_within)
    return (msd_between - msd_within) / msd_within


def classical_sb(rho1, m):
    """m rho1 / (1 + (m - 1) rho1): reliability of the mean of m replicates"""
    if not 0.0 <= rho1 <= 1.0:
        raise ParameterError('rho1 must lie in [0, 1], got %r' % rho1)
    if m < 1 or int(m) != m:
        raise ParameterError('m must be a positive integer, got %r' % m)
    return m * rho1 / (1.0 + (m - 1) * rho1)


@dataclass(frozen = True)
class LineFit(object):
    """Ordinary least squares line. Standard errors use n - 2 degrees of
    freedom; a two-point fit is exact, reports zero errors and is flagged
    degenerate."""
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    n_points: int
    degenerate: bool = False


@dataclass(frozen = True)
class SbPoint(object):
    m: int
    rho_hat: float
    x: float
    y: float


@dataclass(frozen = True)
class SbCurve(object):
    points: tuple
    offset: int
    fit: LineFit
    excluded: tuple = field(default = ())

    @property
    def xs(self):
        return np.array([point.x for point in self.points])

    @property
    def ys(self):
        return np.array([point.y for point in self.points])


def fit_loglog(points):
    """OLS fit of y on x for a sequence of (x, y) points"""
    points = [(float(x), float(y)) for x, y in points]
    if len(points) < 2:
        raise InsufficientDataError('a line needs at least 2 points, got %d' % len(points))
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    if np.ptp(x) == 0:
        raise DegenerateInputError('all x values are identical')
    result = stats.linregress(x, y)
    if len(points) == 2:
        return LineFit(float(result.slope), float(result.intercept), 0.0, 0.0, 2, True)
    return LineFit(float(result.slope), float(result.intercept), float(result.stderr),
                   float(result.intercept_stderr), len(points))


def build_sb_curve(estimates, offset = 1):
    """Turns (m, rho_hat) pairs into an SbCurve and fits its line.

    offset 1 gives the covariance-matrix form log(m - 1); offset 0 the
    general form log(m). Estimates outside (0, 1) have no log SNR and are
    excluded (and listed in SbCurve.excluded)."""
    if offset not in (0, 1):
        raise ParameterError('offset must be 0 or 1, got %r' % offset)
    usable = []
    excluded = []
    for m, rho in sorted(estimates, key = lambda pair: pair[0]):
        if m <= offset:
            raise ParameterError('intensity m = %r must exceed the offset %d' % (m, offset))
        if 0.0 < rho < 1.0 and np.isfinite(rho):
            usable.append((m, rho))
        else:
            excluded.append((m, rho))
    if excluded:
        logger.warning('excluding %d estimate(s) outside (0, 1) from the log-log fit: %s',
                       len(excluded), excluded)
    if len(usable) < 3:
        raise InsufficientDataError('need at least 3 estimates in (0, 1), got %d' % len(usable))
    intensities = [m for m, rho in usable]
    if len(set(intensities)) != len(intensities):
        raise ParameterError('intensities must be distinct: %s' % intensities)
    points = tuple(SbPoint(int(m), float(rho), log(m - offset), log(snr(rho))) for m, rho in usable)
    fit = fit_loglog([(point.x, point.y) for point in points])
    return SbCurve(points, offset, fit, tuple(excluded))


def estimate_beta(estimates):
    """Slope of log SNR on log m: the exponent beta in MSD_w(m) ~ m^-beta"""
    return build_sb_curve(estimates, offset = 0).fit.slope
