import numpy as np
import pytest

from pydbicc.distances import DistanceSpec
from pydbicc.grouped import build_grouped_sample, compute_distance_matrix


def scalar_sample(values):
    """GroupedSample of 1-vectors from {individual: [replicate values]}"""
    rows = [(individual, j + 1, [value]) for individual, replicates in values.items()
            for j, value in enumerate(replicates)]
    return build_grouped_sample(rows)


def random_vector_sample(rng, I = 6, J = 3, p = 2, ragged = False):
    rows = []
    for i in range(I):
        truth = rng.standard_normal(p)
        count = int(rng.integers(1, J + 1)) if ragged and i > 0 else J
        for j in range(count):
            rows.append(('s%d' % i, j + 1, truth + 0.5 * rng.standard_normal(p)))
    return build_grouped_sample(rows)


@pytest.fixture
def hand_sample():
    """Two individuals measured twice: {0, 2} and {0, 2}"""
    return scalar_sample({'a': [0.0, 2.0], 'b': [0.0, 2.0]})


@pytest.fixture
def hand_matrix(hand_sample):
    return compute_distance_matrix(hand_sample, DistanceSpec.parse('l2'))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
