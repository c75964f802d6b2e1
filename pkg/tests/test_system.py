import numpy as np
import pytest

from lfmimo import (
    DimensionError,
    SeededRng,
    build_system_config,
    draw_channel,
)


def test_valid_miso_config():
    cfg = build_system_config(5, 5, [1] * 5, [1] * 5, 10)
    assert cfg.L == 5 and cfg.N == 5
    assert cfg.stream_user == (0, 1, 2, 3, 4)


def test_valid_mimo_config():
    cfg = build_system_config(4, 2, [3, 3], [2, 2], 12)
    assert cfg.L == 4
    assert cfg.stream_user == (0, 0, 1, 1)
    assert cfg.stream_within_user == (1, 2, 1, 2)
    assert cfg.user_stream_slice(1) == slice(2, 4)


def test_streams_exceeding_antennas_rejected():
    with pytest.raises(DimensionError):
        build_system_config(4, 1, [2], [3], 10)  # L_1 > N_1
    with pytest.raises(DimensionError):
        build_system_config(3, 2, [2, 2], [2, 2], 10)  # L > M
    with pytest.raises(DimensionError):
        build_system_config(4, 2, [2], [2], 10)  # wrong list length
    with pytest.raises(DimensionError):
        build_system_config(4, 1, [2], [1], -1)


def test_same_seed_identical_channels():
    cfg = build_system_config(4, 2, [2, 2], [1, 1], 4)
    a = draw_channel(cfg, SeededRng(123)).H
    b = draw_channel(cfg, SeededRng(123)).H
    assert np.array_equal(a, b)
    c = draw_channel(cfg, SeededRng(124)).H
    assert not np.array_equal(a, c)


def test_trial_seeding_order_independent():
    a = SeededRng.for_trial(9, 4).complex_gaussian(8)
    b = SeededRng.for_trial(9, 4).complex_gaussian(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, SeededRng.for_trial(9, 5).complex_gaussian(8))


def test_channel_shapes():
    cfg = build_system_config(4, 2, [3, 1], [1, 1], 4)
    ch = draw_channel(cfg, SeededRng(0))
    assert ch.user(0).shape == (4, 3)
    assert ch.user(1).shape == (4, 1)
    assert ch.H.shape == (4, 4)


def test_unit_entry_variance():
    # Sample-mean oracle: E|h|^2 = 1 over 1e5 draws.
    cfg = build_system_config(10, 1, [10], [1], 0)
    rng = SeededRng(77)
    samples = np.concatenate([draw_channel(cfg, rng).H.ravel() for _ in range(1000)])
    assert samples.size == 100_000
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(1.0, abs=0.01)


def test_real_imag_halves_of_variance():
    # Stacked re/im parts have covariance I/2 entrywise (checked at 1e5 samples).
    rng = SeededRng(78)
    z = rng.complex_gaussian(100_000)
    assert np.var(z.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(z.imag) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(z.real * z.imag)) < 0.01


def test_draws_ignore_non_dimension_fields():
    base = build_system_config(3, 2, [2, 1], [1, 1], 6, P_max=1.0, sigma2=1.0)
    other = build_system_config(3, 2, [2, 1], [1, 1], 12, P_max=7.0, sigma2=0.3)
    a = draw_channel(base, SeededRng(5)).H
    b = draw_channel(other, SeededRng(5)).H
    assert np.array_equal(a, b)
