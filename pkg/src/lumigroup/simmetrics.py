"""Similarity of light signals and the same-region decision built on it.

Two sequences are first brought to a common length (``equalize``), then
scored with a correlation or warping metric mapped onto [0, 1]. Scores are
exactly symmetric: the pair is put into a canonical order before any
order-dependent step (DTW tie-breaking, lag search).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np
from scipy.signal import correlate
from scipy.stats import rankdata

from .errors import EmptyInput
from .lightsig import distort_signal, generate_pattern, synthesize_signal


class Metric(str, Enum):
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    DISTANCE_CORRELATION = "distance_correlation"
    DTW_DISTANCE = "dtw_distance"


class Equalizer(str, Enum):
    FILL = "fill"
    CUT = "cut"
    DTW = "dtw"
    # cut both sequences to the overlap at the lag of best Pearson alignment
    XCORR = "xcorr"


@dataclass(frozen=True)
class SimilarityConfig:
    metric: Metric = Metric.PEARSON
    equalizer: Equalizer = Equalizer.XCORR
    threshold: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "equalizer", Equalizer(self.equalizer))
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")


DEFAULT_THRESHOLD = 0.7

# best metric/equalizer combinations of the parameter study
BEST_COMBINATIONS = {
    Metric.PEARSON: SimilarityConfig(Metric.PEARSON, Equalizer.DTW, 0.8),
    Metric.SPEARMAN: SimilarityConfig(Metric.SPEARMAN, Equalizer.DTW, 0.9),
    Metric.DTW_DISTANCE: SimilarityConfig(Metric.DTW_DISTANCE, Equalizer.DTW, 0.7),
}

# thresholds that keep 40 % distorted copies in the same region
DISTORTION_THRESHOLDS = {
    Metric.SPEARMAN: 0.74,
    Metric.PEARSON: 0.83,
    Metric.DISTANCE_CORRELATION: 0.86,
}


@dataclass(frozen=True)
class Comparison:
    score: float
    degenerate: bool
    same_region: bool


# -- dynamic time warping ----------------------------------------------------------------


@numba.njit(cache=True)
def _dtw_matrix(a, b):
    n, m = len(a), len(b)
    d = np.full((n + 1, m + 1), np.inf)
    d[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = d[i - 1, j - 1]
            if d[i - 1, j] < best:
                best = d[i - 1, j]
            if d[i, j - 1] < best:
                best = d[i, j - 1]
            d[i, j] = best + abs(a[i - 1] - b[j - 1])
    return d


@numba.njit(cache=True)
def _dtw_backtrack(d):
    i, j = d.shape[0] - 1, d.shape[1] - 1
    ia = np.empty(i + j, np.int64)
    jb = np.empty(i + j, np.int64)
    k = 0
    while i > 0 and j > 0:
        ia[k] = i - 1
        jb[k] = j - 1
        k += 1
        diag, up, left = d[i - 1, j - 1], d[i - 1, j], d[i, j - 1]
        # diagonal wins ties, then the step along the first sequence
        if diag <= up and diag <= left:
            i -= 1
            j -= 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
    return ia[:k][::-1].copy(), jb[:k][::-1].copy()


def _as_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if len(x) == 0:
        raise EmptyInput("similarity inputs must be non-empty")
    return x


def dtw_distance(a, b) -> float:
    """Cumulative absolute-difference cost of the optimal warping path."""
    a, b = _as_array(a), _as_array(b)
    return float(_dtw_matrix(a, b)[-1, -1])


def dtw_path(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs of the optimal warping path, steps {(1,0), (0,1), (1,1)}."""
    a, b = _as_array(a), _as_array(b)
    return _dtw_backtrack(_dtw_matrix(a, b))


# -- equalization -----------------------------------------------------------------------


def _xcorr_lag(a: np.ndarray, b: np.ndarray, min_overlap: int) -> int:
    """Lag k maximising Pearson r between a[k:] and b (k < 0 shifts b instead)."""
    na, nb = len(a), len(b)
    a = a - a.mean()
    b = b - b.mean()
    sxy = correlate(a, b, mode="full", method="fft")  # index k + nb - 1
    lags = np.arange(-(nb - 1), na)
    lo = np.maximum(0, lags)  # overlap start in a
    m = np.minimum(na - lo, nb - np.maximum(0, -lags))
    ca = np.concatenate(([0.0], np.cumsum(a)))
    ca2 = np.concatenate(([0.0], np.cumsum(a * a)))
    cb = np.concatenate(([0.0], np.cumsum(b)))
    cb2 = np.concatenate(([0.0], np.cumsum(b * b)))
    lb = np.maximum(0, -lags)
    sa, sa2 = ca[lo + m] - ca[lo], ca2[lo + m] - ca2[lo]
    sb, sb2 = cb[lb + m] - cb[lb], cb2[lb + m] - cb2[lb]
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sxy - sa * sb / m
        va = sa2 - sa * sa / m
        vb = sb2 - sb * sb / m
        r = cov / np.sqrt(va * vb)
    ok = (m >= min_overlap) & (va > 1e-12 * ca2[-1]) & (vb > 1e-12 * cb2[-1])
    if not np.any(ok):
        return 0
    r = np.where(ok, r, -np.inf)
    return int(lags[int(np.argmax(r))])


def equalize(a, b, method=Equalizer.FILL, min_overlap: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Bring two sequences to a common length.

    FILL pads the shorter with its last value, CUT truncates the longer, DTW
    resamples both along the optimal warping path. XCORR slides one sequence
    over the other and keeps the overlap at the lag of highest Pearson
    correlation, the overlap covering at least ``min_overlap`` of the shorter.
    Equal-length inputs are returned unchanged by FILL, CUT and DTW.
    """
    a, b = _as_array(a), _as_array(b)
    method = Equalizer(method)
    if method is Equalizer.FILL:
        n = max(len(a), len(b))
        return np.pad(a, (0, n - len(a)), mode="edge"), np.pad(b, (0, n - len(b)), mode="edge")
    if method is Equalizer.CUT:
        n = min(len(a), len(b))
        return a[:n], b[:n]
    if method is Equalizer.DTW:
        if len(a) == len(b):
            return a, b
        ia, jb = dtw_path(a, b)
        return a[ia], b[jb]
    need = max(2, int(np.ceil(min_overlap * min(len(a), len(b)))))
    lag = _xcorr_lag(a, b, need)
    if lag >= 0:
        n = min(len(a) - lag, len(b))
        return a[lag : lag + n], b[:n]
    n = min(len(a), len(b) + lag)
    return a[:n], b[-lag : -lag + n]


# -- metrics ----------------------------------------------------------------------------


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    x = x - x.mean()
    y = y - y.mean()
    sxx, syy = float(np.dot(x, x)), float(np.dot(y, y))
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(np.clip(np.dot(x, y) / np.sqrt(sxx * syy), -1.0, 1.0))


@numba.njit(cache=True)
def _dcor_sums(x, y):
    # double-centred distance matrices, accumulated without materialising them
    n = len(x)
    ra = np.zeros(n)
    rb = np.zeros(n)
    for i in range(n):
        for j in range(n):
            ra[i] += abs(x[i] - x[j])
            rb[i] += abs(y[i] - y[j])
    ga, gb = ra.sum() / (n * n), rb.sum() / (n * n)
    ra /= n
    rb /= n
    sab = 0.0
    saa = 0.0
    sbb = 0.0
    for i in range(n):
        for j in range(n):
            u = abs(x[i] - x[j]) - ra[i] - ra[j] + ga
            v = abs(y[i] - y[j]) - rb[i] - rb[j] + gb
            sab += u * v
            saa += u * u
            sbb += v * v
    return sab, saa, sbb


def distance_correlation(x, y) -> float | None:
    """Sample distance correlation (V-statistic); None when either input is constant."""
    x, y = _as_array(x), _as_array(y)
    if len(x) != len(y):
        raise ValueError("distance correlation needs equal lengths")
    # centring first keeps the sums well conditioned for large offsets
    sab, saa, sbb = _dcor_sums(x - x.mean(), y - y.mean())
    if saa <= 0.0 or sbb <= 0.0:
        return None
    return float(np.sqrt(np.clip(sab / np.sqrt(saa * sbb), 0.0, 1.0)))


def _dtw_score(x: np.ndarray, y: np.ndarray) -> float:
    d = _dtw_matrix(x, y)
    ia, _ = _dtw_backtrack(d)
    span = max(x.max(), y.max()) - min(x.min(), y.min())
    if span == 0.0:
        return 1.0
    return 1.0 / (1.0 + float(d[-1, -1]) / (len(ia) * span))


def _canonical(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if (len(a), a.tobytes()) <= (len(b), b.tobytes()):
        return a, b
    return b, a


def score_pair(a, b, config: SimilarityConfig = SimilarityConfig()) -> tuple[float, bool]:
    """Similarity score in [0, 1] plus a flag marking degenerate (constant) inputs.

    Correlations map through (r + 1) / 2, distance correlation is used as
    is, and DTW cost becomes 1 / (1 + cost / (path length * dynamic range)).
    Degenerate inputs score 0.
    """
    a, b = _canonical(_as_array(a), _as_array(b))
    x, y = equalize(a, b, config.equalizer)
    if config.metric is Metric.DTW_DISTANCE:
        return _dtw_score(x, y), False
    if len(x) < 2:
        return 0.0, True
    if config.metric is Metric.PEARSON:
        r = _pearson(x, y)
    elif config.metric is Metric.SPEARMAN:
        r = _pearson(rankdata(x), rankdata(y))
    else:
        r = distance_correlation(x, y)
        return (0.0, True) if r is None else (r, False)
    return (0.0, True) if r is None else ((r + 1.0) / 2.0, False)


def similarity(a, b, config: SimilarityConfig = SimilarityConfig()) -> float:
    return score_pair(a, b, config)[0]


def compare(a, b, config: SimilarityConfig = SimilarityConfig()) -> Comparison:
    s, flag = score_pair(a, b, config)
    return Comparison(s, flag, s >= config.threshold)


def same_region(a, b, config: SimilarityConfig = SimilarityConfig()) -> bool:
    """Same light region when the score reaches the threshold (ties count as same)."""
    return compare(a, b, config).same_region


DISTORTION_RATES = tuple(round(0.1 * i, 1) for i in range(11))


def distortion_study(rates=DISTORTION_RATES, seeds: int = 50, length: int = 4, window_factor: float = 4.0,
                     seed: int = 0, metrics=tuple(Metric)) -> dict:
    """Scores of clean signals against distorted copies of themselves.

    Per seed one random pattern is sampled over ``window_factor`` pattern
    durations; each rate distorts that trace once and every metric scores the
    same copy (equalised by filling). Returns metric -> (rates x seeds) array.
    """
    out = {Metric(m): np.zeros((len(rates), seeds)) for m in metrics}
    for s in range(seeds):
        rng = np.random.default_rng([seed, s])
        p = generate_pattern(length, rng)
        offset = np.floor(rng.uniform(0, p.duration_ms) * 1000) / 1000
        sig = synthesize_signal(p, window_factor * p.duration_ms, float(offset), rng=rng)
        for i, rate in enumerate(rates):
            noisy = distort_signal(sig, rate, np.random.default_rng([seed, s, int(round(rate * 1000))]))
            for m in out:
                out[m][i, s] = similarity(sig.voltage_mv, noisy.voltage_mv, SimilarityConfig(m, Equalizer.FILL))
    return out
