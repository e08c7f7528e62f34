# Naive and corrected bootstrap coverage for I = 10, 20 and 40 individuals
# usage: python coverage_table.py [reps] [threads]

import sys
import logging
from pydbicc import *

logging.basicConfig(level = logging.INFO)

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
threads = int(sys.argv[2]) if len(sys.argv) > 2 else 4

print('rho   I   naive  corrected  closer')
for rho in (0.2, 0.5, 0.8):
    for I in (10, 20, 40):
        report = run_coverage_study(rho, I, J = 4, B = DEFAULT_BOOT, n_rep = reps, seed = 1000 + I, threads = threads)
        print('%.1f  %2d  %5.1f  %9.1f  %6.2f' % (rho, I, report.naive_coverage, report.corrected_coverage,
                                                  report.correction_closer_fraction))
