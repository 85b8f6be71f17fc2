"""Distance-based clustering, the coefficient-space Gaussian mixture, and
the permutation-matched accuracy metric.

Hierarchical merges are cross-checked against scipy's linkage on random
distance matrices; the accuracy metric's brute-force path is cross-checked
against the assignment solver it falls back to for many labels.
"""

import numpy as np
import pytest
import scipy.cluster.hierarchy
import scipy.spatial.distance
from numpy.testing import assert_allclose
from scipy.optimize import linear_sum_assignment

from armm.baselines import (
    GmmFit,
    _pacf_from_rho,
    acf_vector,
    ar_coefficients,
    clustering_accuracy,
    d_acf,
    d_pacf,
    d_pic,
    distance_matrix,
    feature_vectors,
    gmm_fit,
    hierarchical_cluster,
    pacf,
)
from armm.errors import ConfigError
from armm.features import TimeSeries, panel_features

from conftest import make_ar_panel
from test_yule_walker import ar_autocorr


def ts(values, id="x"):
    return TimeSeries(id, np.asarray(values, dtype=float))


# ---- feature distances ----------------------------------------------------


def test_acf_vector_alternating():
    assert_allclose(acf_vector(ts([1, -1, 1, -1]), 3), [-0.75, 0.5])


def test_d_acf_identical_zero():
    x = ts(np.sin(np.arange(30)))
    assert d_acf(x, x, 3) == 0.0


def test_d_acf_hand_value():
    # rho(x) = (-0.75, 0.5), rho(y) = (0.25, -0.3): distance sqrt(1.64)
    x, y = ts([1, -1, 1, -1]), ts([1, 2, 3, 4], id="y")
    assert_allclose(d_acf(x, y, 3), np.sqrt(1.64), rtol=1e-12)


def test_distances_are_pseudometrics():
    rng = np.random.default_rng(0)
    series = [ts(rng.normal(size=50), id=f"s{i}") for i in range(6)]
    for d in (d_acf, d_pacf, d_pic):
        for a in series:
            for b in series:
                dab = d(a, b, 3)
                assert dab >= 0
                assert_allclose(dab, d(b, a, 3), rtol=1e-12)
        for a in series:
            for b in series:
                for c in series:
                    assert d(a, c, 3) <= d(a, b, 3) + d(b, c, 3) + 1e-12


def test_d_acf_scale_invariant():
    rng = np.random.default_rng(1)
    x = ts(rng.normal(size=40))
    y = ts(rng.normal(size=60), id="y")
    base = d_acf(x, y, 3)
    scaled = d_acf(ts(5.0 * x.values), ts(-0.2 * y.values, id="y"), 3)
    assert_allclose(scaled, base, rtol=1e-12)


def test_pacf_white_noise_small():
    rng = np.random.default_rng(2)
    vals = pacf(ts(rng.normal(size=5000)), 4)
    assert np.abs(vals).max() < 0.05


def test_pacf_first_value_is_rho1():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = ts(rng.normal(size=80))
        assert_allclose(pacf(x, 3)[0], acf_vector(x, 3)[0], rtol=1e-12)


def test_pacf_from_exact_ar_correlations():
    # the partial autocorrelation of an AR(p) vanishes past lag p and
    # equals the last coefficient at lag p
    rng = np.random.default_rng(4)
    for _ in range(50):
        phi = rng.uniform(-0.5, 0.5, size=2)
        if abs(phi[1]) >= 1 - abs(phi[0]):
            continue
        rho = ar_autocorr(phi, 5)
        vals = _pacf_from_rho(rho[1:])
        assert_allclose(vals[1], phi[1], atol=1e-10)
        assert_allclose(vals[2:], 0.0, atol=1e-10)


def test_pacf_ar1_closed_form():
    rho = ar_autocorr([0.5], 4)
    assert_allclose(_pacf_from_rho(rho[1:]), [0.5, 0.0, 0.0, 0.0], atol=1e-12)


def test_pic_distance_from_exact_coefficients():
    # AR(1) shapes with phi 0.6 and 0.5: coefficient vectors (0.6, 0) and
    # (0.5, 0), distance exactly 0.1
    from armm.features import ScatterFeature

    a = ScatterFeature("a", ar_autocorr([0.6], 2), 100)
    b = ScatterFeature("b", ar_autocorr([0.5], 2), 100)
    vecs = feature_vectors([a, b], "pic")
    dm = distance_matrix([a, b], "pic")
    assert_allclose(vecs[0], [0.6, 0.0], atol=1e-12)
    assert_allclose(dm.values[0, 1], 0.1, rtol=1e-10)


def test_distance_matrix_from_exact_autocorrelations():
    from armm.features import ScatterFeature

    a = ScatterFeature("a", np.array([1.0, 0.5, 0.25]), 50)
    b = ScatterFeature("b", np.array([2.0, 0.6, 0.18]), 80)  # rho (0.3, 0.09)
    dm = distance_matrix([a, b], "acf")
    assert dm.ids == ["a", "b"]
    assert_allclose(dm.values[0, 1], np.sqrt(0.0656), rtol=1e-12)
    assert dm.values[0, 0] == 0.0


def test_ar_coefficients_estimators_agree_on_long_series():
    series, _ = make_ar_panel([(0.6,)], n=5000, count=1, seed=5)
    yw = ar_coefficients(series[0], 3, estimator="yw")
    cls = ar_coefficients(series[0], 3, estimator="cls")
    assert_allclose(yw, cls, atol=0.02)
    with pytest.raises(ConfigError):
        ar_coefficients(series[0], 3, estimator="mle")


# ---- hierarchical clustering ----------------------------------------------


def random_distance(rng, n):
    x = rng.normal(size=(n, 3))
    d = scipy.spatial.distance.squareform(scipy.spatial.distance.pdist(x))
    return d


def test_hierarchical_two_blobs():
    d = np.full((6, 6), 10.0)
    np.fill_diagonal(d, 0.0)
    d[:3, :3] = 0.01
    d[3:, 3:] = 0.01
    np.fill_diagonal(d, 0.0)
    from armm.baselines import DistanceMatrix

    dm = DistanceMatrix([f"s{i}" for i in range(6)], d)
    labels = hierarchical_cluster(dm, 2)
    assert len(set(labels[:3])) == 1
    assert len(set(labels[3:])) == 1
    assert labels[0] != labels[5]


def test_hierarchical_singletons():
    rng = np.random.default_rng(6)
    from armm.baselines import DistanceMatrix

    d = random_distance(rng, 5)
    dm = DistanceMatrix([f"s{i}" for i in range(5)], d)
    labels = hierarchical_cluster(dm, 5)
    assert sorted(labels) == [0, 1, 2, 3, 4]


def test_hierarchical_hand_dendrogram():
    # merge order: (0,1) at 1, (2,3) at 2; cutting at two groups pairs them
    d = np.array(
        [
            [0.0, 1.0, 8.0, 9.0],
            [1.0, 0.0, 7.0, 8.5],
            [8.0, 7.0, 0.0, 2.0],
            [9.0, 8.5, 2.0, 0.0],
        ]
    )
    from armm.baselines import DistanceMatrix

    dm = DistanceMatrix(list("abcd"), d)
    assert hierarchical_cluster(dm, 2).tolist() == [0, 0, 1, 1]


@pytest.mark.parametrize("linkage", ["complete", "average"])
def test_hierarchical_matches_scipy(linkage):
    rng = np.random.default_rng(7)
    from armm.baselines import DistanceMatrix

    for trial in range(20):
        n = int(rng.integers(5, 25))
        g = int(rng.integers(2, min(6, n)))
        d = random_distance(rng, n)
        dm = DistanceMatrix([f"s{i}" for i in range(n)], d)
        ours = hierarchical_cluster(dm, g, linkage=linkage)
        z = scipy.cluster.hierarchy.linkage(
            scipy.spatial.distance.squareform(d), method=linkage
        )
        ref = scipy.cluster.hierarchy.fcluster(z, g, criterion="maxclust")
        assert clustering_accuracy(ours, ref) == 1.0


# ---- Gaussian mixture on coefficients -------------------------------------


def test_gmm_single_component_closed_form():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(40, 2))
    out = gmm_fit(x, 1, n_restarts=1, seed=0)
    assert_allclose(out.mean[0], x.mean(axis=0), rtol=1e-9)
    centered = x - x.mean(axis=0)
    mle_cov = centered.T @ centered / len(x)
    ridge = 1e-8 * np.trace(mle_cov) / 2.0
    assert_allclose(out.cov[0], mle_cov + ridge * np.eye(2), rtol=1e-8)
    assert_allclose(out.pi, [1.0])


def test_gmm_separates_point_masses():
    x = np.array([[0.9], [0.9], [0.9], [-0.9], [-0.9], [-0.9]])
    x = x + np.random.default_rng(9).normal(scale=1e-3, size=x.shape)
    out = gmm_fit(x, 2, seed=0)
    assert clustering_accuracy(out.labels, [0, 0, 0, 1, 1, 1]) == 1.0


def test_gmm_loglik_monotone():
    rng = np.random.default_rng(10)
    x = np.vstack(
        [rng.normal(0, 1, size=(30, 2)), rng.normal(3, 0.5, size=(30, 2))]
    )
    out = gmm_fit(x, 2, seed=1)
    diffs = np.diff(out.loglik_trace)
    assert diffs.min() > -1e-8 * (1 + np.abs(out.loglik_trace).max())


def test_gmm_deterministic():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(50, 2))
    a = gmm_fit(x, 2, seed=3)
    b = gmm_fit(x, 2, seed=3)
    assert_allclose(a.resp, b.resp, rtol=0, atol=0)


# ---- accuracy metric ------------------------------------------------------


def test_accuracy_exact_match():
    assert clustering_accuracy([0, 1, 0], [0, 1, 0]) == 1.0


def test_accuracy_swapped_names():
    assert clustering_accuracy([1, 0, 1], [0, 1, 0]) == 1.0


def test_accuracy_hand_value():
    assert clustering_accuracy([1, 2, 2, 2], [1, 1, 2, 2]) == 0.75


def test_accuracy_brute_force_matches_assignment_solver():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(10, 60))
        g = int(rng.integers(2, 7))
        est = rng.integers(0, g, size=n)
        true = rng.integers(0, g, size=n)
        got = clustering_accuracy(est, true)
        # reference: optimal assignment on the confusion matrix
        conf = np.zeros((g, g))
        np.add.at(conf, (est, true), 1)
        rows, cols = linear_sum_assignment(-conf)
        assert_allclose(got, conf[rows, cols].sum() / n, rtol=1e-12)


def test_accuracy_many_labels_path():
    rng = np.random.default_rng(13)
    est = rng.integers(0, 10, size=200)
    true = rng.integers(0, 10, size=200)
    acc = clustering_accuracy(est, true)
    assert 0.0 <= acc <= 1.0
    assert acc >= (np.bincount(true).max() / 200) / 10


def test_accuracy_rejects_length_mismatch():
    with pytest.raises(ConfigError):
        clustering_accuracy([0, 1], [0, 1, 0])
