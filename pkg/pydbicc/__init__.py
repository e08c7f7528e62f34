"""Distance-based intraclass correlation for repeated measurements.

The dbICC, 1 - MSD_w/MSD_b, measures test-retest reliability of any data
object a distance can be defined on: vectors, correlation or covariance
matrices, scans. GroupedSample and DistanceMatrix hold the repeated
observations and their distances; dbicc_point estimates the coefficient and
bootstrap_dbicc gives an individual-level bootstrap interval, optionally with
the correction for individuals drawn more than once. The simulation module
generates true-score and connectivity data and runs the coverage and
Spearman-Brown experiments, and the dbicc command line wraps it all for
batch use.

"""

from .errors import *
from .distances import *
from .grouped import *
from .dbicc import *
from .workers import *
from .bootstrap import *
from .spearman_brown import *
from .simulation import *
from .formats import *
