import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lumigroup.cycledetect import (
    PeriodList,
    autocorrelation,
    detect_cycles,
    direct_autocorrelation,
    extract_patterns,
    extract_period_list,
    find_unit,
    fold_to_pattern,
    is_valid_signal,
    minimal_sampling_window,
    same_up_to_rotation,
    validate_patterns,
)
from lumigroup.errors import EmptySignal, FlatSignal, NoRepetition, TooFewMaxima
from lumigroup.lightsig import ALLOWED_LENGTHS, LightPattern, RawLightSignal, generate_pattern, synthesize_signal


def _naive_circular(z):
    n = len(z)
    return np.array([sum(z[i] * z[(i + k) % n] for i in range(n)) for k in range(n)])


def test_constant_input_convention():
    assert np.allclose(autocorrelation(np.full(8, 3.0)), 8 * 9.0)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=64))
def test_fft_matches_naive_sum(z):
    z = np.array(z)
    ref = _naive_circular(z)
    assert np.allclose(autocorrelation(z), ref, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(ref).max()))


def test_reference_route_matches_naive_sum(rng):
    z = rng.normal(size=50)
    assert np.allclose(direct_autocorrelation(z), _naive_circular(z))


def test_square_wave_peaks_at_period():
    p = LightPattern.from_durations([2.0, 3.0])
    z = synthesize_signal(p, 50.0, noise_std=0).voltage_mv
    z = z - z.mean()
    r = autocorrelation(z)
    period = 250
    best = 1 + int(np.argmax(r[1 : len(z) // 2 + 1]))
    assert best % period == 0


def test_too_short_autocorrelation():
    with pytest.raises(EmptySignal):
        autocorrelation([1.0])


@pytest.mark.parametrize("length", ALLOWED_LENGTHS)
def test_detect_cycles_noiseless(length):
    for seed in range(5):
        p = generate_pattern(length, seed)
        z = synthesize_signal(p, 4 * p.duration_ms, noise_std=0).voltage_mv
        seg = detect_cycles(z)
        period = p.duration_ms * 1000 / 20
        assert len(seg.cycles) >= 3
        assert all(abs(c - period) <= 2 for c in seg.cycle_lengths)


def test_detect_cycles_on_noise(rng):
    try:
        seg = detect_cycles(rng.normal(size=2000))
    except TooFewMaxima:
        return
    assert len(set(seg.cycle_lengths)) > 1


def test_period_list_exact_runs():
    p = LightPattern.from_durations([2.0, 3.0])
    s = synthesize_signal(p, 30.0, noise_std=0)
    pl = extract_period_list(s, trim_edges=False)
    for state, d in pl.periods[:-1]:
        assert abs(d - (2000 if state == 1 else 3000)) <= 20


def test_close_durations_merge():
    # ON runs of 2.0 and 2.1 ms are the same emitted duration within 10 %
    v = np.concatenate([np.full(100, 3000.0), np.full(150, 100.0), np.full(105, 3000.0), np.full(150, 100.0)] * 3)
    s = RawLightSignal(np.arange(len(v)) * 20, v)
    pl = extract_period_list(s, trim_edges=False)
    assert len({d for st_, d in pl.periods if st_ == 1}) == 1


def test_flat_signal():
    s = RawLightSignal(np.arange(500) * 20, 1000 + np.linspace(0, 10, 500))
    with pytest.raises(FlatSignal):
        extract_period_list(s)


def test_empty_signal():
    with pytest.raises(EmptySignal):
        extract_period_list(RawLightSignal(np.array([], dtype=np.int64), np.array([])))


A, B, C, D = (1, 2000), (0, 3000), (1, 4000), (0, 1000)


def test_fold_shortest_unit():
    p = fold_to_pattern(PeriodList((A, B) * 3))
    assert p == LightPattern(((1, 2.0), (0, 3.0)))


def test_fold_four_unit():
    p = fold_to_pattern(PeriodList((A, B, C, D) * 2))
    assert p.durations_ms == (2.0, 3.0, 4.0, 1.0)


def test_fold_without_tiling():
    with pytest.raises(NoRepetition):
        fold_to_pattern(PeriodList((A, B, (1, 4500))))


def test_fold_rotates_to_on():
    p = fold_to_pattern(PeriodList((B, C, D, A) * 2))
    assert p.states[0] == 1
    assert same_up_to_rotation(p, LightPattern.from_durations([2.0, 3.0, 4.0, 1.0]))


def test_find_unit_respects_expected_length():
    unit, _, _ = find_unit(PeriodList((A, B) * 4), expected_length=4)
    assert unit == 4


@pytest.mark.parametrize("patterns, ok", [
    ([LightPattern.from_durations([1.5, 2, 3, 4])] * 2, True),
    ([LightPattern.from_durations([1.5, 2, 3, 4]), LightPattern.from_durations([1.5, 2, 3, 4, 2, 2])], False),
    ([LightPattern.from_durations([0.8, 2, 3, 4])], False),
    ([], False),
])
def test_validate_patterns(patterns, ok):
    assert validate_patterns(patterns) is ok


@pytest.mark.parametrize("length", ALLOWED_LENGTHS)
def test_noiseless_recovery_many_offsets(length):
    rng = np.random.default_rng(length)
    p = generate_pattern(length, rng)
    for _ in range(20):
        off = float(np.floor(rng.uniform(0, p.duration_ms) * 1000) / 1000)
        s = synthesize_signal(p, 4 * p.duration_ms, off, noise_std=0)
        got = fold_to_pattern(extract_period_list(s))
        assert same_up_to_rotation(got, p)


def test_extract_patterns_copies():
    p = generate_pattern(4, 3)
    s = synthesize_signal(p, 5 * p.duration_ms, noise_std=0)
    copies = extract_patterns(s)
    assert len(copies) >= 3
    assert all(same_up_to_rotation(c, p) for c in copies)


def test_window_of_one_duration_fails():
    p = generate_pattern(4, 5)
    s = synthesize_signal(p, p.duration_ms, 0.7, noise_std=0)
    assert not is_valid_signal(s)


def test_double_window_at_zero_offset_succeeds():
    for seed in range(10):
        p = generate_pattern(4, seed)
        s = synthesize_signal(p, 2 * p.duration_ms, 0.0, noise_std=0)
        assert is_valid_signal(s, min_repeats=2)


def test_minimal_window_ratio_small_sample():
    ratios = []
    for length in ALLOWED_LENGTHS:
        for seed in range(10):
            p = generate_pattern(length, seed)
            ratios.append(minimal_sampling_window(p, seed) / p.duration_ms)
    assert 2.5 <= np.mean(ratios) <= 4.0
