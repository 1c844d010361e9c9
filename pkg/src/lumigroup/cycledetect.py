"""Recover repeating light patterns from raw voltage traces.

Two routes are provided. :func:`detect_cycles` segments the trace with the
FFT autocorrelation (maxima of R, mean maxima distance, minima of z searched
from every maximum). :func:`extract_period_list` plus :func:`fold_to_pattern`
work on the ON/OFF period list instead, which survives abrupt pattern changes
far better and is what the grouping pipeline uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySignal, FlatSignal, NoRepetition, NotFound, TooFewMaxima
from .lightsig import (
    ALLOWED_LENGTHS,
    DISTINCT_MARGIN,
    MIN_DURATION_MS,
    NOISE_STD_MV,
    OFF,
    ON,
    LightPattern,
    RawLightSignal,
    as_rng,
    generate_pattern,
    synthesize_signal,
)


def autocorrelation(z) -> np.ndarray:
    """Circular autocorrelation via Wiener-Khinchin: R = IFFT(FFT(z) * conj(FFT(z))).

    Returns lags 0..n-1. The input is not demeaned, so a constant c gives
    R(tau) = n * c**2 at every lag.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or len(z) < 2:
        raise EmptySignal("autocorrelation needs at least two samples")
    f = np.fft.fft(z)
    return np.fft.ifft(f * np.conj(f)).real


def direct_autocorrelation(z) -> np.ndarray:
    """O(n^2) circular autocorrelation, kept as a reference implementation."""
    z = np.asarray(z, dtype=float)
    return np.array([np.dot(z, np.roll(z, -k)) for k in range(len(z))])


@dataclass(frozen=True)
class CycleSegmentation:
    maxima: tuple[int, ...]
    mean_distance: int
    minima: tuple[int, ...]
    cycles: tuple[tuple[int, int], ...]  # half-open [start, stop) sample ranges

    @property
    def cycle_lengths(self) -> list[int]:
        return [b - a for a, b in self.cycles]


def find_maxima(r: np.ndarray, rel_height: float = 0.5, min_separation: int = 10) -> list[int]:
    """Non-ambiguous local maxima of a circular autocorrelation.

    A lag counts when it beats both circular neighbours and reaches
    ``rel_height`` times the maximum over lags [1, n/2]. Maxima closer than
    ``min_separation`` samples are thinned, keeping the larger.
    """
    n = len(r)
    half = max(2, n // 2 + 1)
    ref = float(np.max(r[1:half]))
    if ref <= 0:
        return []
    left, right = np.roll(r, 1), np.roll(r, -1)
    cand = np.flatnonzero((r > left) & (r >= right) & (r >= rel_height * ref))
    kept: list[int] = []
    for i in sorted(cand.tolist(), key=lambda k: (-r[k], k)):
        if all(abs(i - j) >= min_separation for j in kept):
            kept.append(i)
    return sorted(kept)


def fundamental_lag(z: np.ndarray, candidates: Sequence[int], min_separation: int = 10,
                    tolerance: float = 0.02) -> Optional[int]:
    """Smallest candidate lag whose overlap correlation is within ``tolerance`` of the best.

    A truly periodic trace correlates (almost) perfectly with itself shifted
    by its period or any multiple of it, while lags that only align part of
    a pattern stay clearly below. Only lags in [min_separation, n/2] count.
    """
    n = len(z)
    scored = []
    for lag in candidates:
        if not min_separation <= lag <= n // 2:
            continue
        a, b = z[:-lag], z[lag:]
        if np.std(a) == 0 or np.std(b) == 0:
            continue
        scored.append((lag, float(np.corrcoef(a, b)[0, 1])))
    if not scored:
        return None
    best = max(r for _, r in scored)
    return min(lag for lag, r in scored if r >= best - tolerance)


def detect_cycles(z, rel_height: float = 0.5, min_separation: int = 10) -> CycleSegmentation:
    """Split a trace into light cycles with the autocorrelation segmentation.

    The mean is removed before correlating so that the DC level does not
    swamp the maxima. Of the local maxima, only lag 0 and those within
    ``min_separation`` samples of a multiple of the fundamental lag are kept.
    Cycles are the slices between consecutive minima.
    """
    z = np.asarray(z, dtype=float)
    r = autocorrelation(z - z.mean())
    cand = find_maxima(r, rel_height, min_separation)
    base = fundamental_lag(z, cand, min_separation)
    if base is None:
        raise TooFewMaxima("no periodic autocorrelation maximum")
    zeta = [c for c in cand if abs(c - base * round(c / base)) < min_separation]
    if len(zeta) < 2:
        raise TooFewMaxima(f"found {len(zeta)} autocorrelation maxima, need 2")
    delta = int(math.ceil((zeta[-1] - zeta[0]) / (len(zeta) - 1)))
    mu: list[int] = []
    for i, start in enumerate(zeta):
        stop = min(start + delta, len(z) - 1)
        # integer maxima can sit one sample past the true (fractional) lag
        start = max(int(start) - (i > 0), 0)
        seg = z[start : stop + 1]
        ties = np.flatnonzero(seg == seg.min()) + start
        # exact ties only occur on noiseless traces; keep the phase of the previous minimum
        m = int(ties[0]) if not mu else int(ties[np.argmin(np.abs(ties - (mu[-1] + base)))])
        if not mu or m > mu[-1]:
            mu.append(m)
    cycles = tuple((a, b) for a, b in zip(mu, mu[1:]))
    return CycleSegmentation(tuple(zeta), delta, tuple(mu), cycles)


# -- period-list route -----------------------------------------------------------------


@dataclass(frozen=True)
class PeriodList:
    periods: tuple[tuple[int, int], ...]  # (state, duration_us)
    sampling_interval_us: int = 20

    def __post_init__(self):
        for (s0, _), (s1, _) in zip(self.periods, self.periods[1:]):
            if s0 == s1:
                raise ValueError("period states must alternate")
        if any(d <= 0 for _, d in self.periods):
            raise ValueError("period durations must be positive")

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def states(self) -> list[int]:
        return [s for s, _ in self.periods]

    @property
    def durations_us(self) -> list[int]:
        return [d for _, d in self.periods]


def same_duration(a: float, b: float, interval: float = 20.0, margin: float = DISTINCT_MARGIN) -> bool:
    """Two measured durations denote the same emitted period.

    They must differ by less than ``margin`` of the smaller one even after
    widening the gap by the +-1 sample quantisation of each measurement
    (plus headroom), so two emitted periods that are exactly 10 % apart are
    never merged.
    """
    return abs(a - b) + 3 * interval < margin * min(a, b)


def _runs(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    change = np.flatnonzero(np.diff(states.astype(np.int8))) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [len(states)])))
    return states[starts].astype(int), lengths


def _absorb_glitches(st: list[int], ln: list[int], min_samples: int) -> tuple[list[int], list[int]]:
    # Flip the shortest interior run below the floor and merge it with both neighbours.
    while len(ln) > 2:
        inner = [(ln[i], i) for i in range(1, len(ln) - 1) if ln[i] < min_samples]
        if not inner:
            break
        _, i = min(inner)
        ln[i - 1 : i + 2] = [ln[i - 1] + ln[i] + ln[i + 1]]
        st[i - 1 : i + 2] = [st[i - 1]]
    return st, ln


def _snap(periods: list[tuple[int, int]], interval: int, margin: float) -> list[tuple[int, int]]:
    """Map every duration onto its vocabulary entry (median of its cluster, per state)."""
    out = list(periods)
    for state in (ON, OFF):
        idx = sorted((i for i, (s, _) in enumerate(periods) if s == state), key=lambda i: periods[i][1])
        cluster: list[int] = []
        for i in idx + [None]:
            if i is not None and (not cluster or same_duration(periods[cluster[0]][1], periods[i][1], interval, margin)):
                cluster.append(i)
                continue
            if cluster:
                value = int(round(float(np.median([periods[j][1] for j in cluster]))))
                for j in cluster:
                    out[j] = (state, value)
            cluster = [] if i is None else [i]
    return out


def extract_period_list(
    signal: RawLightSignal,
    floor_mv: float = 50.0,
    min_run_us: int = 200,
    trim_edges: bool = True,
    margin: float = DISTINCT_MARGIN,
) -> PeriodList:
    """Threshold, run-length encode and snap a trace into a list of ON/OFF periods.

    The threshold sits halfway between the 5th and 95th percentiles. Runs
    shorter than ``min_run_us`` are treated as glitches and absorbed. With
    ``trim_edges`` the first and last runs, which the window may have cut,
    are dropped unless their duration matches a complete run of the same
    state. Durations within the 10 % margin are then merged into one
    vocabulary entry.
    """
    v = np.asarray(signal.voltage_mv, dtype=float)
    if len(v) == 0:
        raise EmptySignal("empty signal")
    lo, hi = np.percentile(v, [5, 95])
    if hi - lo < floor_mv:
        raise FlatSignal(f"dynamic range {hi - lo:.1f} mV below floor {floor_mv} mV")
    interval = signal.sampling_interval_us
    st, ln = _runs(v > (lo + hi) / 2)
    st, ln = _absorb_glitches(st.tolist(), ln.tolist(), max(1, min_run_us // interval))
    periods = [(s, n * interval) for s, n in zip(st, ln)]
    if trim_edges and len(periods) > 2:
        inner = periods[1:-1]

        def complete(p):
            return any(s == p[0] and same_duration(d, p[1], interval, margin) for s, d in inner)

        head = [periods[0]] if complete(periods[0]) else []
        tail = [periods[-1]] if complete(periods[-1]) else []
        periods = head + inner + tail
    elif trim_edges:
        periods = []
    return PeriodList(tuple(_snap(periods, interval, margin)), interval)


def _tiles(p: Sequence[tuple[int, int]], unit: int, interval: int, margin: float) -> bool:
    return all(
        p[i][0] == p[i + unit][0] and same_duration(p[i][1], p[i + unit][1], interval, margin)
        for i in range(len(p) - unit)
    )


def find_unit(periods: PeriodList, expected_length: Optional[int] = None, min_repeats: int = 2,
              margin: float = DISTINCT_MARGIN) -> tuple[int, int, int]:
    """Shortest even unit tiling the list at least ``min_repeats`` times.

    Returns ``(unit, start, stop)``: edge periods kept by the extractor are
    dropped again (head first) when they spoil the tiling.
    """
    p = periods.periods
    n = len(p)
    spans = [(0, n), (1, n), (0, n - 1), (1, n - 1)]
    for start, stop in spans:
        q = p[start:stop]
        candidates = [expected_length] if expected_length else range(2, len(q) // min_repeats + 1, 2)
        for unit in candidates:
            if (unit and unit % 2 == 0 and len(q) >= min_repeats * unit
                    and _tiles(q, unit, periods.sampling_interval_us, margin)):
                return unit, start, stop
    raise NoRepetition(f"no unit tiles {n} periods at least {min_repeats} times")


def _to_pattern(chunk: Sequence[tuple[int, float]]) -> LightPattern:
    chunk = list(chunk)
    if chunk[0][0] == OFF:
        chunk = chunk[1:] + chunk[:1]
    return LightPattern(tuple((s, d / 1000.0) for s, d in chunk))


def fold_to_pattern(periods: PeriodList, expected_length: Optional[int] = None, min_repeats: int = 2) -> LightPattern:
    """Fold a period list onto its shortest repeating unit.

    Durations are averaged over all copies; the result is rotated to start
    with an ON period. The phase of the emitter is not observable, so the
    pattern equals the emitted one up to a rotation.
    """
    if not periods.periods:
        raise NoRepetition("empty period list")
    unit, start, stop = find_unit(periods, expected_length, min_repeats)
    p = periods.periods[start:stop]
    mean = [
        (p[j][0], float(np.mean([p[k][1] for k in range(j, len(p), unit)])))
        for j in range(unit)
    ]
    return _to_pattern(mean)


def extract_patterns(signal: RawLightSignal, expected_length: Optional[int] = None, min_repeats: int = 2,
                     **kwargs) -> list[LightPattern]:
    """Every complete copy of the repeating unit found in ``signal``."""
    pl = extract_period_list(signal, **kwargs)
    unit, start, stop = find_unit(pl, expected_length, min_repeats)
    p = pl.periods[start:stop]
    return [_to_pattern(p[i : i + unit]) for i in range(0, len(p) - unit + 1, unit)]


def validate_patterns(patterns: Sequence[LightPattern], min_duration_ms: float = MIN_DURATION_MS,
                      tolerance_ms: float = 0.02) -> bool:
    """All patterns share one allowed length and every phase lasts above the minimum.

    ``tolerance_ms`` (one sample at 20 us by default) absorbs quantisation of
    phases emitted at exactly the minimum duration.
    """
    if not patterns:
        return False
    lengths = {len(p) for p in patterns}
    if len(lengths) != 1 or lengths.pop() not in ALLOWED_LENGTHS:
        return False
    return all(d > min_duration_ms - tolerance_ms for p in patterns for d in p.durations_ms)


def is_valid_signal(signal: RawLightSignal, min_repeats: int = 2) -> bool:
    try:
        return validate_patterns(extract_patterns(signal, min_repeats=min_repeats))
    except (NoRepetition, FlatSignal, EmptySignal):
        return False


def minimal_sampling_window(
    pattern: LightPattern,
    rng=None,
    step: float = 0.25,
    max_factor: float = 8.0,
    start_offset_ms: Optional[float] = None,
    noise_std: float = NOISE_STD_MV,
    min_repeats: int = 3,
) -> float:
    """Shortest window (ms) after which the looped pattern is recognised.

    The window grows from one pattern duration in ``step`` multiples from a
    single random start position until every extracted pattern is valid.
    Two copies identify the unit; by default a third complete copy must
    confirm it before the trace counts as recognised.
    """
    rng = as_rng(rng)
    period = pattern.duration_ms
    offset = float(rng.uniform(0.0, period)) if start_offset_ms is None else start_offset_ms
    steps = int(round((max_factor - 1.0) / step))
    for k in range(steps + 1):
        window = period * (1.0 + k * step)
        sig = synthesize_signal(pattern, window, offset, noise_std=noise_std, rng=rng)
        if is_valid_signal(sig, min_repeats):
            return window
    raise NotFound(f"pattern not recognised within {max_factor}x its duration")


def same_up_to_rotation(a: LightPattern, b: LightPattern, tol_ms: float = 0.02) -> bool:
    """Equal state sequences and durations (within ``tol_ms``) under some even rotation."""
    if len(a) != len(b):
        return False
    da, db = np.asarray(a.durations_ms), np.asarray(b.durations_ms)
    return any(np.all(np.abs(np.roll(da, -k) - db) <= tol_ms + 1e-9) for k in range(0, len(a), 2))


def sampling_window_study(lengths: Sequence[int] = ALLOWED_LENGTHS, patterns: int = 100, seed: int = 0,
                          **kwargs) -> dict[int, np.ndarray]:
    """Minimal window over pattern duration for random patterns of each length (nan when never recognised)."""
    out = {}
    for length in lengths:
        ratios = np.full(patterns, np.nan)
        for i in range(patterns):
            rng = np.random.default_rng([seed, length, i])
            p = generate_pattern(length, rng)
            try:
                ratios[i] = minimal_sampling_window(p, rng, **kwargs) / p.duration_ms
            except NotFound:
                pass
        out[length] = ratios
    return out
