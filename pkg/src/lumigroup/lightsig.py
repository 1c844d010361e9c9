"""Random light patterns and the raw photodiode signals a receiver samples from them.

A light pattern is a short, alternating sequence of ON/OFF periods that a bulb
emits in a loop. Receivers sample the photodiode voltage every
``sampling_interval_us`` microseconds, so a signal is the periodic extension
of the pattern, shifted by the receiver's random start position.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidLength, InvalidLevels, InvalidRate, InvalidWindow

ON, OFF = 1, 0
ALLOWED_LENGTHS = (2, 4, 6, 8, 10)
MIN_DURATION_MS = 1.0
MAX_DURATION_MS = 5.0
DISTINCT_MARGIN = 0.10
SAMPLING_INTERVAL_US = 20

V_ON_MV = 3300.0
V_OFF_MV = 100.0
NOISE_STD_MV = 15.0


def as_rng(rng=None) -> np.random.Generator:
    """Accept a Generator, an integer seed or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def durations_distinct(durations: Iterable[float], margin: float = DISTINCT_MARGIN) -> bool:
    """True when every pair differs by at least ``margin`` relative to the smaller one."""
    d = sorted(durations)
    return all(b - a >= margin * a - 1e-12 for a, b in zip(d, d[1:]))


@dataclass(frozen=True)
class LightPattern:
    """Alternating (state, duration_ms) periods, first period ON."""

    periods: tuple[tuple[int, float], ...]

    def __post_init__(self):
        periods = tuple((int(s), float(d)) for s, d in self.periods)
        object.__setattr__(self, "periods", periods)
        if not periods or len(periods) % 2:
            raise InvalidLength(f"pattern length must be even and > 0, got {len(periods)}")
        for i, (s, d) in enumerate(periods):
            if s != (ON if i % 2 == 0 else OFF):
                raise ValueError("pattern states must alternate starting with ON")
            if not d > 0:
                raise ValueError(f"durations must be positive, got {d}")

    @classmethod
    def from_durations(cls, durations_ms: Sequence[float]) -> "LightPattern":
        return cls(tuple((ON if i % 2 == 0 else OFF, d) for i, d in enumerate(durations_ms)))

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def states(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.periods)

    @property
    def durations_ms(self) -> tuple[float, ...]:
        return tuple(d for _, d in self.periods)

    @property
    def duration_ms(self) -> float:
        return float(sum(self.durations_ms))

    def satisfies_invariants(self) -> bool:
        """Generator invariants: allowed length, [1, 5] ms durations, 10 % distinctness."""
        d = self.durations_ms
        return (
            len(d) in ALLOWED_LENGTHS
            and all(MIN_DURATION_MS <= x <= MAX_DURATION_MS for x in d)
            and durations_distinct(d)
        )


@dataclass(eq=False)
class RawLightSignal:
    t_us: np.ndarray
    voltage_mv: np.ndarray
    sampling_interval_us: int = SAMPLING_INTERVAL_US

    def __post_init__(self):
        self.t_us = np.asarray(self.t_us, dtype=np.int64)
        self.voltage_mv = np.asarray(self.voltage_mv, dtype=float)
        if self.t_us.shape != self.voltage_mv.shape:
            raise ValueError("timestamps and voltages differ in length")

    def __len__(self) -> int:
        return len(self.voltage_mv)

    @property
    def duration_ms(self) -> float:
        return len(self) * self.sampling_interval_us / 1000.0

    def copy(self) -> "RawLightSignal":
        return RawLightSignal(self.t_us.copy(), self.voltage_mv.copy(), self.sampling_interval_us)

    def equals(self, other: "RawLightSignal") -> bool:
        return (
            self.sampling_interval_us == other.sampling_interval_us
            and np.array_equal(self.t_us, other.t_us)
            and np.array_equal(self.voltage_mv, other.voltage_mv)
        )

    def check(self) -> None:
        """Raise ValueError unless timestamps step by the sampling interval and voltages are finite."""
        if len(self) > 1 and not np.all(np.diff(self.t_us) == self.sampling_interval_us):
            raise ValueError("timestamps must increase by the sampling interval")
        if not np.all(np.isfinite(self.voltage_mv)):
            raise ValueError("voltages must be finite")


def generate_pattern(length: int, rng=None) -> LightPattern:
    """Draw a random pattern of ``length`` periods.

    Durations are uniform on [1, 5] ms at microsecond resolution. Each new
    duration is redrawn until it keeps the 10 % margin to all earlier ones;
    a full restart happens in the (rare) event that the draw gets stuck.
    """
    if length not in ALLOWED_LENGTHS:
        raise InvalidLength(f"length must be one of {ALLOWED_LENGTHS}, got {length}")
    rng = as_rng(rng)
    while True:
        durations: list[float] = []
        attempts = 0
        while len(durations) < length and attempts < 10_000:
            attempts += 1
            d = round(float(rng.uniform(MIN_DURATION_MS, MAX_DURATION_MS)), 3)
            if durations_distinct(durations + [d]):
                durations.append(d)
        if len(durations) == length:
            return LightPattern.from_durations(durations)


def _boundaries_us(pattern: LightPattern) -> np.ndarray:
    return np.round(np.cumsum(pattern.durations_ms) * 1000.0).astype(np.int64)


def synthesize_signal(
    pattern: LightPattern,
    window_ms: float,
    start_offset_ms: float = 0.0,
    v_on: float = V_ON_MV,
    v_off: float = V_OFF_MV,
    noise_std: float = NOISE_STD_MV,
    rng=None,
    sampling_interval_us: int = SAMPLING_INTERVAL_US,
) -> RawLightSignal:
    """Sample the looped pattern for ``window_ms`` starting ``start_offset_ms`` into it."""
    if not window_ms > 0:
        raise InvalidWindow(f"window must be positive, got {window_ms}")
    if not v_on > v_off:
        raise InvalidLevels(f"v_on ({v_on}) must exceed v_off ({v_off})")
    bounds = _boundaries_us(pattern)
    period_us = int(bounds[-1])
    offset_us = int(round(start_offset_ms * 1000.0))
    if not 0 <= offset_us < period_us:
        raise InvalidWindow(f"start offset must lie in [0, {period_us / 1000} ms)")
    n = int(np.floor(window_ms * 1000.0 / sampling_interval_us + 1e-9))
    if n < 1:
        raise InvalidWindow("window shorter than one sampling interval")
    t = np.arange(n, dtype=np.int64) * sampling_interval_us
    phase = (t + offset_us) % period_us
    idx = np.searchsorted(bounds, phase, side="right")
    states = np.asarray(pattern.states)[idx]
    v = np.where(states == ON, float(v_on), float(v_off))
    if noise_std > 0:
        v = v + as_rng(rng).normal(0.0, noise_std, n)
    return RawLightSignal(t, v, sampling_interval_us)


def distort_signal(signal: RawLightSignal, rate: float, rng=None, v_on=None, v_off=None) -> RawLightSignal:
    """Replace a random fraction ``rate`` of samples by bounded uniform white noise.

    The noise spans [v_off - 3s, v_on + 3s] with s the sample std of the input;
    the levels default to the signal's min and max.
    """
    if not 0.0 <= rate <= 1.0:
        raise InvalidRate(f"rate must lie in [0, 1], got {rate}")
    out = signal.copy()
    n = len(out)
    k = int(round(rate * n))
    if k == 0 or n == 0:
        return out
    rng = as_rng(rng)
    v = signal.voltage_mv
    sd = float(np.std(v))
    lo = (float(np.min(v)) if v_off is None else v_off) - 3 * sd
    hi = (float(np.max(v)) if v_on is None else v_on) + 3 * sd
    idx = rng.choice(n, size=k, replace=False)
    out.voltage_mv[idx] = rng.uniform(lo, hi, size=k)
    return out


def write_signal_csv(signal: RawLightSignal, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "voltage_mv"])
        for t, v in zip(signal.t_us.tolist(), signal.voltage_mv.tolist()):
            w.writerow([t, repr(v)])


def read_signal_csv(path) -> RawLightSignal:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0].astype(np.int64)
    step = int(t[1] - t[0]) if len(t) > 1 else SAMPLING_INTERVAL_US
    return RawLightSignal(t, data[:, 1], step)


def write_pattern_csv(pattern: LightPattern, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "duration_ms"])
        w.writerows(pattern.periods)


def read_pattern_csv(path) -> LightPattern:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return LightPattern(tuple((int(r["state"]), float(r["duration_ms"])) for r in rows))
