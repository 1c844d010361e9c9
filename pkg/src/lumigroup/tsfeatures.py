"""Feature extraction from light signals and hypothesis-test feature ranking.

Two extractors are provided: a fixed set of ten statistical features and a
larger library of time-series features in the spirit of tsfresh. Every value
is timed individually. Features that are undefined on a signal (e.g. an
autocorrelation of a constant trace) are reported as 0 and flagged missing.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import ks_2samp

from .errors import DegenerateLabels, TooShort

STATISTICAL_NAMES = (
    "mean", "variance", "std", "min", "max", "median", "length", "skewness", "kurtosis", "rms",
)


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]
    runtimes_us: tuple[float, ...]
    missing: tuple[bool, ...]

    def __post_init__(self):
        if not len(self.names) == len(self.values) == len(self.runtimes_us) == len(self.missing):
            raise ValueError("feature vector fields differ in length")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


def _run(features: Sequence[tuple[str, Callable[[], float | None]]]) -> FeatureVector:
    names, values, runtimes, missing = [], [], [], []
    for name, fn in features:
        t0 = time.perf_counter_ns()
        v = fn()
        runtimes.append((time.perf_counter_ns() - t0) / 1000.0)
        bad = v is None or not np.isfinite(v)
        names.append(name)
        values.append(0.0 if bad else float(v))
        missing.append(bool(bad))
    return FeatureVector(tuple(names), tuple(values), tuple(runtimes), tuple(missing))


def _moment_ratio(z: np.ndarray, order: int) -> float | None:
    d = z - z.mean()
    var = np.mean(d * d)
    if var <= 1e-12 * max(1.0, float(np.mean(z * z))):
        return None
    return float(np.mean(d**order) / var ** (order / 2))


def _statistical(z: np.ndarray) -> list[tuple[str, Callable[[], float | None]]]:
    def excess_kurtosis():
        k = _moment_ratio(z, 4)
        return None if k is None else k - 3.0

    return [
        ("mean", lambda: z.mean()),
        ("variance", lambda: z.var()),
        ("std", lambda: z.std()),
        ("min", lambda: z.min()),
        ("max", lambda: z.max()),
        ("median", lambda: np.median(z)),
        ("length", lambda: float(len(z))),
        ("skewness", lambda: _moment_ratio(z, 3)),
        # excess kurtosis, 0 for a normal distribution
        ("kurtosis", excess_kurtosis),
        ("rms", lambda: np.sqrt(np.mean(z * z))),
    ]


def _check(z, minimum: int) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if len(z) < minimum:
        raise TooShort(f"need at least {minimum} samples, got {len(z)}")
    return z


def statistical_features(z) -> FeatureVector:
    """Mean, population variance/std, extremes, median, length, moments and RMS."""
    z = _check(z, 2)
    return _run(_statistical(z))


def _autocorr(z: np.ndarray, lag: int) -> float | None:
    n = len(z)
    d = z - z.mean()
    var = np.mean(d * d)
    if lag >= n or var <= 1e-12 * max(1.0, float(np.mean(z * z))):
        return None
    return float(np.dot(d[:-lag], d[lag:]) / ((n - lag) * var))


def _band_energy(z: np.ndarray, band: int, bands: int = 4) -> float | None:
    p = np.abs(np.fft.rfft(z - z.mean()))[1:] ** 2
    total = p.sum()
    if len(p) < bands or total <= 0:
        return None
    edges = np.linspace(0, len(p), bands + 1).astype(int)
    return float(p[edges[band] : edges[band + 1]].sum() / total)


def _longest_run(mask: np.ndarray) -> float:
    best = cur = 0
    for m in mask:
        cur = cur + 1 if m else 0
        best = max(best, cur)
    return float(best)


def _slope(z: np.ndarray) -> float:
    t = np.arange(len(z), dtype=float)
    t -= t.mean()
    return float(np.dot(t, z - z.mean()) / np.dot(t, t))


def _entropy_proxy(z: np.ndarray) -> float | None:
    # irregularity: spread of successive differences relative to the spread of the signal
    s = z.std()
    if s <= 1e-12 * max(1.0, float(np.sqrt(np.mean(z * z)))):
        return None
    return float(np.diff(z).std() / s)


def _library(z: np.ndarray) -> list[tuple[str, Callable[[], float | None]]]:
    m = z.mean()
    above, below = z > m, z < m
    feats = _statistical(z)
    feats += [(f"autocorrelation_lag_{k}", lambda k=k: _autocorr(z, k)) for k in (1, 2, 5, 10)]
    feats += [(f"fft_band_energy_{b}", lambda b=b: _band_energy(z, b)) for b in range(4)]
    feats += [
        ("count_above_mean", lambda: float(above.sum())),
        ("count_below_mean", lambda: float(below.sum())),
        ("longest_strike_above_mean", lambda: _longest_run(above)),
        ("longest_strike_below_mean", lambda: _longest_run(below)),
        ("mean_crossings", lambda: float(np.count_nonzero(above[1:] != above[:-1]))),
        ("absolute_energy", lambda: float(np.dot(z, z))),
        ("mean_abs_change", lambda: float(np.mean(np.abs(np.diff(z))))),
        ("cid_ce", lambda: float(np.sqrt(np.sum(np.diff(z) ** 2)))),
        ("ratio_beyond_1_sigma", lambda: float(np.mean(np.abs(z - m) > z.std()))),
    ]
    feats += [(f"quantile_{q}", lambda q=q: float(np.quantile(z, q))) for q in (0.1, 0.25, 0.75, 0.9)]
    feats += [
        ("linear_trend_slope", lambda: _slope(z)),
        ("entropy_proxy", lambda: _entropy_proxy(z)),
    ]
    return feats


def ts_feature_library(z) -> FeatureVector:
    """The statistical features plus 23 time-series features (33 in total)."""
    z = _check(z, 8)
    return _run(_library(z))


LIBRARY_NAMES = ts_feature_library(np.arange(8.0)).names


def feature_matrix(signals: Sequence, extractor: Callable[[np.ndarray], FeatureVector] = ts_feature_library):
    """Stack feature vectors; returns (X, names, missing mask)."""
    vecs = [extractor(s) for s in signals]
    X = np.array([v.values for v in vecs], dtype=float)
    missing = np.array([v.missing for v in vecs], dtype=bool)
    return X, vecs[0].names, missing


def rank_features(X, y, names: Sequence[str]) -> list[tuple[str, float]]:
    """Order features by significance for the labels, most significant first.

    Each feature gets the smallest two-sample Kolmogorov-Smirnov p-value over
    one-vs-rest splits of the classes. Ties are broken by name.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateLabels("ranking needs at least two classes")
    if len(y) < 10:
        raise DegenerateLabels(f"ranking needs at least 10 rows, got {len(y)}")
    if X.shape != (len(y), len(names)):
        raise ValueError("feature matrix shape does not match labels and names")
    scored = []
    for j, name in enumerate(names):
        col = X[:, j]
        p = min(float(ks_2samp(col[y == c], col[y != c]).pvalue) for c in classes)
        scored.append((name, p))
    return sorted(scored, key=lambda t: (t[1], t[0]))


def select_top(ranking: Sequence[tuple[str, float]], k: int) -> list[str]:
    return [name for name, _ in ranking[:k]]


def write_feature_csv(path, X, y, names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["y"])
        for row, label in zip(np.asarray(X).tolist(), list(y)):
            w.writerow([repr(v) for v in row] + [label])


def read_feature_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0][:-1]
    X = np.array([[float(v) for v in r[:-1]] for r in rows[1:]])
    y = [r[-1] for r in rows[1:]]
    return X, y, names
