# dbICC of resting-state connectivity from a directory of ROI time series.
#
# Expects a manifest.csv (individual,replicate,path) whose files are m x p
# time courses, e.g. 197 x 333 ROI averages with two scans per subject.
# Any further arguments are ROI files (0-based indices, comma- or
# newline-separated), e.g. the default mode and visual networks; each is
# analysed next to the whole brain.
# Without real data, make some first:
#   dbicc simulate --experiment scans --out scans --seed 1
# then run: python connectivity_recipe.py scans/manifest.csv [dmn.txt visual.txt]

import os
import sys
import logging
from pydbicc import *

logging.basicConfig(level = logging.INFO)

manifest = sys.argv[1]
scans = read_manifest(manifest)
networks = [('all', scans)]
for path in sys.argv[2:]:
    networks.append((os.path.splitext(os.path.basename(path))[0], select_rois(scans, read_roi_file(path))))

for network, subset in networks:
    correlations = connectivity_matrices(subset, 'correlation')
    print('%s: %d ROIs' % (network, correlations.payloads()[0].shape[0]))
    for name in ('l2', 'l1', 'corr'):
        D = compute_distance_matrix(correlations, name)
        estimate = dbicc_point(D)
        result = bootstrap_dbicc(D, DEFAULT_BOOT, corrected = True, seed = 1, threads = 4)
        print('  %-5s %.3f (%.3f, %.3f)' % (name, estimate.rho_hat, result.ci_low, result.ci_high))

    # shorter acquisitions: the middle m time points of every scan
    for m in DEFAULT_M_GRID:
        shorter = connectivity_matrices(subset, 'correlation', window = m)
        rho = dbicc_point(compute_distance_matrix(shorter, 'l2')).rho_hat
        print('  m=%3d  dbICC %.3f' % (m, rho))
