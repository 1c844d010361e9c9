import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lumigroup.errors import DegenerateLabels, TooShort
from lumigroup.tsfeatures import (
    LIBRARY_NAMES,
    STATISTICAL_NAMES,
    feature_matrix,
    rank_features,
    read_feature_csv,
    select_top,
    statistical_features,
    ts_feature_library,
    write_feature_csv,
)


def naive_statistics(z):
    z = [float(v) for v in z]
    n = len(z)
    mean = sum(z) / n
    var = sum((v - mean) ** 2 for v in z) / n
    s = sorted(z)
    median = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    m3 = sum((v - mean) ** 3 for v in z) / n
    m4 = sum((v - mean) ** 4 for v in z) / n
    return {
        "mean": mean, "variance": var, "std": var ** 0.5, "min": s[0], "max": s[-1], "median": median,
        "length": float(n), "skewness": m3 / var ** 1.5, "kurtosis": m4 / var**2 - 3.0,
        "rms": (sum(v * v for v in z) / n) ** 0.5,
    }


def test_names_and_sizes():
    assert ts_feature_library(np.arange(10.0)).names == LIBRARY_NAMES
    assert statistical_features([1.0, 2.0]).names == STATISTICAL_NAMES
    assert len(LIBRARY_NAMES) == 33


def test_constant_signal():
    f = statistical_features([1.0, 1.0, 1.0, 1.0]).as_dict()
    assert (f["variance"], f["std"], f["mean"], f["length"]) == (0.0, 0.0, 1.0, 4.0)


def test_two_point_signal():
    f = statistical_features([0.0, 2.0]).as_dict()
    assert f["mean"] == 1.0 and f["variance"] == 1.0


def test_matches_naive_on_random_signals():
    rng = np.random.default_rng(0)
    for _ in range(100):
        z = rng.normal(rng.uniform(-50, 50), rng.uniform(0.5, 20), int(rng.integers(5, 200)))
        got = statistical_features(z).as_dict()
        for k, v in naive_statistics(z).items():
            assert got[k] == pytest.approx(v, rel=1e-12, abs=1e-12 * max(1.0, abs(v)) * 100)


def test_constant_library_flags_missing():
    fv = ts_feature_library(np.full(50, 3.0))
    d = fv.as_dict()
    for name, miss in zip(fv.names, fv.missing):
        if name.startswith("autocorrelation"):
            assert miss and d[name] == 0.0
    assert d["mean_crossings"] == 0.0


def test_alternating_signal():
    z = np.tile([1.0, -1.0], 50)
    d = ts_feature_library(z).as_dict()
    assert d["mean_crossings"] == len(z) - 1
    assert d["autocorrelation_lag_1"] == pytest.approx(-1.0)


def test_too_short():
    with pytest.raises(TooShort):
        statistical_features([1.0])
    with pytest.raises(TooShort):
        ts_feature_library(np.arange(5.0))


@given(st.lists(st.floats(-1e4, 1e4), min_size=8, max_size=100))
def test_library_values_finite(z):
    fv = ts_feature_library(z)
    assert np.all(np.isfinite(fv.as_array()))
    assert all(t >= 0 for t in fv.runtimes_us)


def test_label_feature_ranks_first(rng):
    y = np.repeat([0, 1], 30)
    X = np.column_stack([rng.normal(size=60), y.astype(float), rng.normal(size=60)])
    ranking = rank_features(X, y, ["noise_a", "label", "noise_b"])
    assert ranking[0][0] == "label" and ranking[0][1] < 1e-10


def test_noise_feature_median_rank():
    ranks = []
    for seed in range(30):
        r = np.random.default_rng(seed)
        y = np.repeat([0, 1], 25)
        X = np.column_stack([y + r.normal(0, 0.3, 50), r.normal(size=50)])
        names = [n for n, _ in rank_features(X, y, ["signal", "noise"])]
        ranks.append(names.index("noise"))
    assert np.median(ranks) == 1


def test_rank_needs_two_classes():
    with pytest.raises(DegenerateLabels):
        rank_features(np.zeros((20, 2)), np.zeros(20), ["a", "b"])


def test_select_top():
    assert select_top([("a", 0.1), ("b", 0.2)], 1) == ["a"]


def test_feature_csv_round_trip(tmp_path, rng):
    X, names, _ = feature_matrix([rng.normal(size=40) for _ in range(4)])
    write_feature_csv(tmp_path / "f.csv", X, ["a", "b", "a", "b"], names)
    X2, y2, n2 = read_feature_csv(tmp_path / "f.csv")
    assert np.array_equal(X, X2) and y2 == ["a", "b", "a", "b"] and tuple(n2) == names
