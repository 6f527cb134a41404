import numpy as np
import pytest

from ghostkit import (
    ConfigError,
    InsufficientDataError,
    ShapeError,
    SourceConfig,
    exceedance_fraction,
    frame_statistics,
    generate_block,
    generate_frame,
    intensity_autocorrelation,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        SourceConfig(width=0)
    with pytest.raises(ConfigError):
        SourceConfig(height=-3)
    with pytest.raises(ConfigError):
        SourceConfig(speckle_radius=-1.0)
    with pytest.raises(ConfigError):
        SourceConfig(mean_intensity=0.0)
    with pytest.raises(ConfigError):
        SourceConfig(master_seed=-1)
    cfg = SourceConfig(width=5, height=3, speckle_radius=2.0)
    assert cfg.shape == (3, 5)
    assert cfg.coherence_area == pytest.approx(np.pi * 4.0)


def test_frame_is_float32_nonnegative():
    cfg = SourceConfig(width=24, height=10)
    f = generate_frame(cfg, 3)
    assert f.data.dtype == np.float32
    assert f.data.shape == (10, 24)
    assert f.index == 3
    assert np.all(f.data >= 0)


def test_default_frame_7_regenerates_bit_identical():
    cfg = SourceConfig()
    a = generate_frame(cfg, 7).data
    b = generate_frame(cfg, 7).data
    assert a.tobytes() == b.tobytes()


def test_order_and_workers_do_not_change_bytes():
    cfg = SourceConfig(width=32, height=32, master_seed=99)
    idx = np.arange(20)
    seq = generate_block(cfg, idx, workers=1)
    par = generate_block(cfg, idx[::-1], workers=3)[::-1]
    assert seq.tobytes() == par.tobytes()
    for m in (0, 13):
        assert generate_frame(cfg, m).data.tobytes() == seq[m].tobytes()


def test_seed_and_index_change_the_frame():
    a = generate_frame(SourceConfig(width=8, height=8, master_seed=1), 0).data
    b = generate_frame(SourceConfig(width=8, height=8, master_seed=2), 0).data
    c = generate_frame(SourceConfig(width=8, height=8, master_seed=1), 1).data
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_white_field_contrast_is_one():
    cfg = SourceConfig(width=8, height=8, speckle_radius=0.0, master_seed=3)
    stats = frame_statistics(generate_block(cfg, np.arange(10_000)))
    assert np.all(np.abs(stats.contrast - 1.0) < 0.05)


@pytest.mark.parametrize("radius,mean", [(0.0, 1.0), (2.0, 1.0), (1.5, 3.7)])
def test_sample_mean_matches_config(radius, mean):
    cfg = SourceConfig(width=16, height=16, speckle_radius=radius, mean_intensity=mean, master_seed=5)
    frames = generate_block(cfg, np.arange(10_000))
    assert abs(frames.mean(dtype=np.float64) / mean - 1.0) < 0.02


def test_statistics_of_identical_frames():
    f = np.full((3, 3), 2.0)
    assert frame_statistics([f, f]).pooled_contrast == 0.0


def test_statistics_two_constant_frames():
    c = 1.7
    stats = frame_statistics([np.full((2, 2), c), np.full((2, 2), 3 * c)])
    np.testing.assert_allclose(stats.mean, 2 * c)
    np.testing.assert_allclose(stats.contrast, np.sqrt(2) / 2, rtol=1e-12)
    assert stats.count == 2


def test_statistics_errors():
    with pytest.raises(InsufficientDataError):
        frame_statistics([np.ones((2, 2))])
    with pytest.raises(ShapeError):
        frame_statistics([np.ones((2, 2)), np.ones((2, 3))])


def test_fully_developed_speckle_statistics():
    cfg = SourceConfig(width=32, height=32, speckle_radius=2.0, master_seed=8)
    frames = generate_block(cfg, np.arange(10_000))
    stats = frame_statistics(frames)
    assert 0.9 <= stats.pooled_contrast <= 1.1
    frac = exceedance_fraction(frames, 3.0)
    assert abs(frac / np.exp(-3.0) - 1.0) < 0.3


@pytest.mark.parametrize("radius", [1.0, 2.0, 3.0])
def test_correlation_at_speckle_radius(radius):
    cfg = SourceConfig(width=64, height=64, speckle_radius=radius, master_seed=4)
    frames = generate_block(cfg, np.arange(200))
    c = intensity_autocorrelation(frames, int(radius), reference=cfg.mean_intensity)
    assert 0.2 <= c <= 0.6
