import math

import numpy as np
import pytest

from pydbicc.dbicc import dbicc_point
from pydbicc.distances import (DistanceKind, DistanceSpec, connectivity_matrices, connectivity_score,
                               corr_of_corr_distance, correlation_from_timeseries, l1_distance,
                               l2_distance, middle_window, pairwise_matrix, select_rois, soft_threshold,
                               sweep_threshold)
from pydbicc.errors import (DegenerateInputError, InputShapeError, InsufficientDataError,
                            ParameterError, SingularMatrixError)
from pydbicc.grouped import PayloadKind, build_grouped_sample, compute_distance_matrix


def random_correlation(rng, p, m = 50):
    return correlation_from_timeseries(rng.standard_normal((m, p)))


def pearson(u, v):
    du, dv = u - u.mean(), v - v.mean()
    return (du * dv).sum() / math.sqrt((du * du).sum() * (dv * dv).sum())


def test_l2_and_l1():
    assert l2_distance([0, 0], [3, 4]) == 5.0
    assert l1_distance([0, 0], [3, 4]) == 7.0
    assert l2_distance([1, 2], [1, 2]) == 0.0
    assert l1_distance([1, 2], [1, 2]) == 0.0
    with pytest.raises(InputShapeError):
        l2_distance([0, 0], [1, 2, 3])


def test_l2_and_l1_match_elementwise_oracles(rng):
    a, b = rng.standard_normal(10), rng.standard_normal(10)
    assert l2_distance(a, b) == pytest.approx(math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b))))
    assert l1_distance(a, b) == pytest.approx(sum(abs(x - y) for x, y in zip(a, b)))


def test_frobenius_is_entrywise():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert l2_distance(A, np.zeros((2, 2))) == pytest.approx(math.sqrt(30))


def test_corr_of_corr_extremes(rng):
    R = random_correlation(rng, 4)
    assert corr_of_corr_distance(R, R) == pytest.approx(0.0, abs = 1e-7)
    negated = -R
    np.fill_diagonal(negated, 1.0)
    assert corr_of_corr_distance(R, negated) == pytest.approx(math.sqrt(2))


def test_corr_of_corr_matches_pearson_oracle(rng):
    R1, R2 = random_correlation(rng, 4), random_correlation(rng, 4)
    lower = np.tril_indices(4, -1)
    expected = math.sqrt(1 - pearson(R1[lower], R2[lower]))
    assert corr_of_corr_distance(R1, R2) == pytest.approx(expected, rel = 1e-10)


def test_corr_of_corr_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        corr_of_corr_distance(np.eye(2), np.eye(2))
    constant = np.full((3, 3), 0.5)
    np.fill_diagonal(constant, 1.0)
    with pytest.raises(DegenerateInputError):
        corr_of_corr_distance(constant, constant)


def test_correlation_from_timeseries(rng):
    x = rng.standard_normal(20)
    R = correlation_from_timeseries(np.column_stack([x, x, -x]))
    assert R[0, 1] == pytest.approx(1.0)
    assert R[0, 2] == pytest.approx(-1.0)
    assert np.all(np.diag(R) == 1.0)

    X = rng.standard_normal((20, 3))
    R = correlation_from_timeseries(X)
    for a in range(3):
        for b in range(3):
            assert R[a, b] == pytest.approx(pearson(X[:, a], X[:, b]))


def test_correlation_from_timeseries_errors(rng):
    with pytest.raises(InsufficientDataError):
        correlation_from_timeseries(rng.standard_normal((2, 3)))
    X = rng.standard_normal((10, 3))
    X[:, 1] = 4.0
    with pytest.raises(DegenerateInputError):
        correlation_from_timeseries(X)


def test_soft_threshold_examples():
    R = np.array([[1.0, 0.5, -0.1], [0.5, 1.0, 0.0], [-0.1, 0.0, 1.0]])
    same, fraction = soft_threshold(R, 0.0)
    assert np.array_equal(same, R)
    assert fraction == pytest.approx(2 / 6)

    shrunk, fraction = soft_threshold(R, 0.2)
    assert shrunk[0, 1] == pytest.approx(0.3)
    assert shrunk[0, 2] == 0.0
    assert np.all(np.diag(shrunk) == 1.0)
    assert fraction == pytest.approx(4 / 6)

    saturated, fraction = soft_threshold(R, 0.5)
    assert fraction == 1.0
    with pytest.raises(ParameterError):
        soft_threshold(R, 1.5)


def test_soft_threshold_composes(rng):
    R = random_correlation(rng, 6, m = 10)
    twice = soft_threshold(soft_threshold(R, 0.1)[0], 0.15)[0]
    once = soft_threshold(R, 0.25)[0]
    np.testing.assert_allclose(twice, once, atol = 1e-12)


def test_connectivity_score(rng):
    assert connectivity_score(np.eye(4)) == pytest.approx(0.0, abs = 1e-15)
    assert connectivity_score([[1.0, 0.6], [0.6, 1.0]]) == pytest.approx(-math.log(0.64))
    assert connectivity_score([[1.0, 0.6], [0.6, 1.0]]) == pytest.approx(0.4463, abs = 1e-4)
    R = random_correlation(rng, 5)
    assert connectivity_score(R) == pytest.approx(-np.log(np.linalg.eigvalsh(R)).sum())
    with pytest.raises(SingularMatrixError):
        connectivity_score([[1.0, 1.0], [1.0, 1.0]])


def test_distance_spec_parsing():
    assert DistanceSpec.parse('euclidean').kind is DistanceKind.L2
    assert DistanceSpec.parse('corr_of_corr').kind is DistanceKind.CORR
    assert DistanceSpec.parse('l2', 0.1).label() == 'l2+soft(0.1)'
    assert DistanceSpec.parse('l1').label() == 'l1'
    assert DistanceSpec.parse('corr').requires_matrix
    assert DistanceSpec.parse('l2', 0.0).requires_matrix
    with pytest.raises(ParameterError):
        DistanceSpec.parse('mahalanobis')


@pytest.mark.parametrize('name', ['l2', 'l1', 'corr'])
def test_pairwise_matrix_matches_pairwise_calls(rng, name):
    payloads = [random_correlation(rng, 4) for _ in range(5)]
    spec = DistanceSpec.parse(name, 0.05)
    values = pairwise_matrix(payloads, spec)
    for a in range(5):
        assert values[a, a] == 0.0
        for b in range(5):
            if a != b:
                assert values[a, b] == pytest.approx(spec.distance(payloads[a], payloads[b]), abs = 1e-7)


def test_middle_window():
    X = np.arange(20).reshape(10, 2)
    assert middle_window(X, 4)[0, 0] == 6
    assert middle_window(X, 10).shape == (10, 2)
    with pytest.raises(ParameterError):
        middle_window(X, 11)


def scan_sample(rng, I = 6, J = 2, m = 40, p = 5):
    rows = []
    for i in range(I):
        mixing = np.eye(p) + 0.4 * rng.standard_normal((p, p))
        for j in range(J):
            rows.append(('s%d' % i, j + 1, rng.standard_normal((m, p)) @ mixing))
    return build_grouped_sample(rows, PayloadKind.TIMESERIES)


def test_connectivity_matrices(rng):
    sample = scan_sample(rng)
    correlations = connectivity_matrices(sample, 'correlation')
    assert correlations.payload_kind is PayloadKind.MATRIX
    assert np.all(np.diag(correlations.payloads()[0]) == 1.0)
    covariances = connectivity_matrices(sample, 'covariance', window = 20)
    X = middle_window(sample.payloads()[0], 20)
    np.testing.assert_allclose(covariances.payloads()[0], np.cov(X, rowvar = False))
    with pytest.raises(ParameterError):
        connectivity_matrices(sample, 'precision')


def test_sweep_threshold(rng):
    sample = connectivity_matrices(scan_sample(rng), 'correlation')
    rows = sweep_threshold(sample, 'l2', [0.0, 0.05, 0.1, 0.2, 0.3])
    assert rows[0].rho_hat == dbicc_point(compute_distance_matrix(sample, 'l2')).rho_hat
    fractions = [row.fraction_zeroed for row in rows]
    assert fractions == sorted(fractions)
    assert all(row.rho_hat <= 1 for row in rows)
    assert len(set(row.rho_hat for row in rows)) > 1


def test_sweep_threshold_reports_undefined_values(rng):
    sample = connectivity_matrices(scan_sample(rng), 'correlation')
    rows = sweep_threshold(sample, 'l2', [1.0])
    assert rows[0].fraction_zeroed == 1.0
    assert math.isnan(rows[0].rho_hat)


@pytest.mark.parametrize('distance', [l2_distance, l1_distance])
def test_l2_and_l1_are_metrics(rng, distance):
    for _ in range(50):
        a, b, c = rng.standard_normal((3, 6))
        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12


def test_corr_of_corr_is_symmetric_and_bounded(rng):
    for _ in range(50):
        R1, R2 = random_correlation(rng, 5, m = 8), random_correlation(rng, 5, m = 8)
        d = corr_of_corr_distance(R1, R2)
        assert d == corr_of_corr_distance(R2, R1)
        assert 0.0 <= d <= math.sqrt(2)


def test_soft_threshold_only_shrinks(rng):
    R = random_correlation(rng, 8, m = 12)
    for threshold in (0.0, 0.1, 0.3, 0.7):
        shrunk = soft_threshold(R, threshold)[0]
        assert np.all(np.abs(shrunk) <= np.abs(R))
        off = ~np.eye(8, dtype = bool)
        assert np.all(shrunk[off] * R[off] >= 0)


def test_select_rois(rng):
    scans = scan_sample(rng, p = 6)
    network = [4, 1, 2]
    subset = select_rois(scans, network)
    assert subset.payload_kind is PayloadKind.TIMESERIES
    np.testing.assert_array_equal(subset.payloads()[3], scans.payloads()[3][:, network])

    # reducing then selecting equals selecting then reducing
    from_matrices = select_rois(connectivity_matrices(scans, 'correlation'), network)
    from_scans = connectivity_matrices(subset, 'correlation')
    np.testing.assert_allclose(from_matrices.payloads()[0], from_scans.payloads()[0], atol = 1e-12)
    assert dbicc_point(compute_distance_matrix(from_matrices, 'corr')).rho_hat == pytest.approx(
        dbicc_point(compute_distance_matrix(from_scans, 'corr')).rho_hat, rel = 1e-9)

    for bad in ([], [0, 6], [-1], [1, 1], [0.5]):
        with pytest.raises(ParameterError):
            select_rois(scans, bad)
