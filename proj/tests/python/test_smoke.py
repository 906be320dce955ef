import math

import numpy as np
import pytest

import gridscan as gs


@pytest.fixture(scope="module")
def small_year():
    return gs.generate_synthetic_year(n_hours=600, n_attributes=8, seed=3)


def test_synthetic_year_shape_and_range(small_year):
    points, informative = small_year
    assert len(points) == 600
    assert points.dimension == 8
    assert len(informative) == 3
    assert np.all(np.abs(points.values) <= 1.0)
    assert points.hours == list(range(600))


def test_normalize_matches_minmax():
    raw = np.array([[10.0, 5.0, 0.0], [20.0, 5.0, 1.0], [30.0, 5.0, 4.0]])
    s = gs.normalize(raw, ["load01_P", "gen01_Q", "other"])
    np.testing.assert_allclose(s.values[:, 0], [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(s.values[:, 1], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(s.values[:, 2], [-1.0, -0.5, 1.0])
    np.testing.assert_allclose(s.denormalized(), raw, rtol=1e-12)
    assert s.kinds[0] == "load_P"


def test_two_bus_margin_closed_form():
    assert gs.two_bus_margin(1.0, 0.5, 0.0) == pytest.approx(1.0)
    assert gs.two_bus_margin(1.0, 0.5, 0.5) == pytest.approx(0.5)


def test_weighted_distance():
    d = gs.weighted_distance(np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([4.0, 1.0]))
    assert d == pytest.approx(math.sqrt(5.0))


def test_kmeans_two_pairs():
    data = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
    r = gs.kmeans(data, data[[0, 2]], np.ones(2))
    np.testing.assert_allclose(r["centroids"], [[0.05, 0.0], [5.05, 5.0]])
    assert r["converged"]


def test_oracle_counts_and_custom_callable(small_year):
    points, _ = small_year
    oracle = gs.StabilityOracle.custom(lambda x: 1.0 + float(x[0]))
    trace = gs.full_scan(points, oracle)
    assert oracle.eval_count == len(points)
    assert trace["lambda"][5] == pytest.approx(1.0 + points.values[5, 0])


def test_invalid_parameters_raise_value_error(small_year):
    points, informative = small_year
    oracle = gs.StabilityOracle.damping(informative, points.dimension)
    with pytest.raises(ValueError):
        gs.select_features(points, oracle, relief={"nonsense": 1})
    with pytest.raises(gs.ValidationError):
        gs.select_features(points, oracle, relief={"k": 0})


def test_fast_scan_end_to_end(small_year):
    points, informative = small_year
    oracle = gs.StabilityOracle.damping(informative, points.dimension)
    r = gs.fast_scan(points, oracle, sample_size=100)
    assert r["oracle_evaluations"] == r["training_size"] + r["k_final"]
    assert 0.0 <= r["reduction"] < 1.0
    assert r["validation"]["mape"] < 0.05
    lam = np.array(r["lambda_hat"])
    cl = np.array(r["cluster_of_hour"])
    for c in np.unique(cl):
        assert np.all(lam[cl == c] == lam[cl == c][0])
    top = sorted(f["adjusted_rank"] for i, f in enumerate(r["features"]["features"]) if i in informative)
    assert top == [1, 2, 3]


def test_worst_case_negated_demand():
    demand = [1.0, 3.0, 2.0, 5.0, 4.0]
    r = gs.worst_case_analysis(list(range(5)), [-d for d in demand], demand)
    assert r["correlation"] == pytest.approx(-1.0)
    assert r["min_lambda_hour"] == r["max_demand_hour"] == 3
    assert not r["shifted"]
