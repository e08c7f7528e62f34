# Slopes of log SNR against log(m - 1) for covariance and correlation
# matrices, with and without lag-1 autocorrelation

import sys
from pydbicc import *
import numpy as np

threads = int(sys.argv[1]) if len(sys.argv) > 1 else 4

sigmas = random_covariance_population(25, DEFAULT_POPULATION_DIM, np.random.default_rng(2019))

for kind in ('covariance', 'correlation'):
    for phi in (0.0, 0.6, 0.9):
        report = run_sb_experiment(sigmas, DEFAULT_M_GRID, J = 2, phi = phi, kind = kind,
                                   n_curves = 20, seed = 7, threads = threads)
        print('%-11s phi=%.1f  slope %.3f (sd %.3f)  intercept %.3f' % (
            kind, phi, report.mean_slope, report.slopes.std(ddof = 1), report.mean_intercept))
