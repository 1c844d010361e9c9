import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lumigroup.errors import InvalidLength, InvalidLevels, InvalidRate, InvalidWindow
from lumigroup.lightsig import (
    ALLOWED_LENGTHS,
    OFF,
    ON,
    LightPattern,
    distort_signal,
    durations_distinct,
    generate_pattern,
    read_pattern_csv,
    read_signal_csv,
    synthesize_signal,
    write_pattern_csv,
    write_signal_csv,
)
from lumigroup.simmetrics import Equalizer, SimilarityConfig, similarity


@pytest.mark.parametrize("length", ALLOWED_LENGTHS)
def test_generated_pattern_shape(length):
    p = generate_pattern(length, 7)
    assert len(p) == length
    assert p.states == tuple(ON if i % 2 == 0 else OFF for i in range(length))
    assert all(1.0 <= d <= 5.0 for d in p.durations_ms)


@pytest.mark.parametrize("length", [0, 1, 3, 12, -2])
def test_invalid_length(length):
    with pytest.raises(InvalidLength):
        generate_pattern(length, 0)


def test_pairwise_distinct_brute_force():
    rng = np.random.default_rng(0)
    for seed in range(1000):
        p = generate_pattern(int(rng.choice(ALLOWED_LENGTHS)), seed)
        for a, b in itertools.combinations(p.durations_ms, 2):
            lo, hi = min(a, b), max(a, b)
            assert hi - lo >= 0.1 * lo - 1e-12


@given(st.lists(st.floats(1.0, 5.0), min_size=1, max_size=10))
def test_distinctness_matches_pairwise_definition(ds):
    brute = all(abs(a - b) >= 0.1 * min(a, b) - 1e-12 for a, b in itertools.combinations(ds, 2))
    assert durations_distinct(ds) == brute


@given(st.sampled_from(ALLOWED_LENGTHS), st.integers(0, 2**32 - 1))
def test_generator_invariants(length, seed):
    assert generate_pattern(length, seed).satisfies_invariants()


def test_square_wave_noiseless():
    p = LightPattern.from_durations([2.0, 2.0])
    s = synthesize_signal(p, 8.0, 0.0, v_on=3300, v_off=100, noise_std=0)
    assert len(s) == 400
    blocks = s.voltage_mv.reshape(4, 100)
    assert np.all(blocks[0] == 3300) and np.all(blocks[1] == 100)
    assert np.all(blocks[2] == 3300) and np.all(blocks[3] == 100)
    assert np.array_equal(s.t_us, np.arange(400) * 20)


def test_offset_starts_in_off_phase():
    p = LightPattern.from_durations([2.0, 2.0])
    s = synthesize_signal(p, 8.0, 2.0, v_on=3300, v_off=100, noise_std=0)
    assert np.all(s.voltage_mv[:100] == 100)
    assert np.all(s.voltage_mv[100:200] == 3300)


@pytest.mark.parametrize("window, offset", [(0.0, 0.0), (-1.0, 0.0), (5.0, 4.0), (5.0, -0.5), (0.01, 0.0)])
def test_invalid_windows(window, offset):
    p = LightPattern.from_durations([2.0, 2.0])
    with pytest.raises(InvalidWindow):
        synthesize_signal(p, window, offset, noise_std=0)


def test_invalid_levels():
    with pytest.raises(InvalidLevels):
        synthesize_signal(LightPattern.from_durations([2.0, 2.0]), 8.0, v_on=100, v_off=100)


def test_noise_level(rng):
    p = generate_pattern(4, rng)
    clean = synthesize_signal(p, 40.0, noise_std=0)
    noisy = synthesize_signal(p, 40.0, noise_std=15.0, rng=rng)
    assert abs(np.std(noisy.voltage_mv - clean.voltage_mv) - 15.0) < 1.0


def test_distort_rate_zero_is_identity(rng):
    s = synthesize_signal(generate_pattern(4, rng), 30.0, rng=rng)
    assert distort_signal(s, 0.0, rng).equals(s)


@given(st.floats(0.0, 1.0), st.integers(0, 1000))
def test_distort_replaces_expected_count(rate, seed):
    s = synthesize_signal(generate_pattern(4, seed), 20.0, noise_std=0)
    d = distort_signal(s, rate, seed)
    changed = np.count_nonzero(d.voltage_mv != s.voltage_mv)
    assert changed <= round(rate * len(s))
    assert np.array_equal(d.t_us, s.t_us)


def test_full_distortion_destroys_structure():
    scores = []
    for seed in range(100):
        r = np.random.default_rng(seed)
        s = synthesize_signal(generate_pattern(4, r), 20.0, rng=r)
        d = distort_signal(s, 1.0, r)
        scores.append(similarity(s.voltage_mv, d.voltage_mv, SimilarityConfig("pearson", Equalizer.FILL)))
    # scores map r through (r + 1) / 2, so r < 0.3 means score < 0.65
    assert np.median(2 * np.array(scores) - 1) < 0.3


@pytest.mark.parametrize("rate", [-0.1, 1.5])
def test_invalid_rate(rate, rng):
    s = synthesize_signal(generate_pattern(2, rng), 10.0)
    with pytest.raises(InvalidRate):
        distort_signal(s, rate, rng)


def test_csv_round_trip(tmp_path, rng):
    p = generate_pattern(6, rng)
    s = synthesize_signal(p, 25.0, 1.5, rng=rng)
    write_signal_csv(s, tmp_path / "s.csv")
    write_pattern_csv(p, tmp_path / "p.csv")
    assert read_signal_csv(tmp_path / "s.csv").equals(s)
    assert read_pattern_csv(tmp_path / "p.csv") == p


def test_same_seed_same_pattern():
    assert generate_pattern(8, 99) == generate_pattern(8, 99)
