import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostkit import (
    DegenerateFrameError,
    MissingFramesError,
    PreconditionError,
    Registers,
    SourceConfig,
    ThresholdPair,
    TransmissionMask,
    balance_registers,
    builtin_mask,
    ci_registers,
    exact_mean_transmission,
    normalize_unit,
    partition_frames,
    reconstruct_ci,
    reconstruct_dgi,
    reconstruct_dttci,
    reconstruct_gi,
    reconstruct_ngi,
    run_acquisition,
    run_from_frames,
    select_count,
)
from ghostkit import _accel
from ghostkit.acquisition import AcquisitionRun

from conftest import frames_of, max_rel_err, random_run
from oracles import CountingArray, CountingSource, oracle_dgi, oracle_dttci, oracle_gi, oracle_ngi, rel_err


# ---------------------------------------------------------------- fixtures


def hand_run():
    frames = np.array([
        [[1.0, 2.0], [3.0, 4.0]],
        [[2.0, 0.5], [1.0, 3.0]],
        [[0.0, 1.0], [2.5, 1.5]],
    ], np.float32)
    return run_from_frames(frames, TransmissionMask(np.array([[1.0, 0.0], [0.5, 0.25]])))


def test_gi_hand_fixture():
    run = hand_run()
    img = reconstruct_gi(run, 3)
    assert img.method == "GI" and img.frames_used == 3
    assert rel_err(img, oracle_gi(run, 3)) < 1e-12


def test_ngi_hand_fixture():
    run = hand_run()
    assert rel_err(reconstruct_ngi(run, 3), oracle_ngi(run, 3)) < 1e-12


def test_dgi_hand_fixture():
    run = hand_run()
    assert rel_err(reconstruct_dgi(run, 3), oracle_dgi(run, 3)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(2, 16), h=st.integers(1, 4), w=st.integers(1, 4),
       data=st.data())
def test_estimators_match_literal_oracles(seed, M, h, w, data):
    run = random_run(np.random.default_rng(seed), M, h, w)
    n = data.draw(st.integers(2, M))
    assert rel_err(reconstruct_gi(run, n), oracle_gi(run, n)) < 1e-12
    assert rel_err(reconstruct_ngi(run, n), oracle_ngi(run, n)) < 1e-12
    assert rel_err(reconstruct_dgi(run, n), oracle_dgi(run, n)) < 1e-12
    t = exact_mean_transmission(run)
    dT = run.T - t
    kmax = min(int(np.sum(dT > 0)), int(np.sum(dT < 0)))
    if kmax >= 1:
        k = data.draw(st.integers(1, kmax))
        regs = select_count(run, k, t)
        img = reconstruct_dttci(run, regs)
        assert img.frames_used == 2 * k
        np.testing.assert_array_equal(img.data, oracle_dttci(run, regs.A, regs.B))


def test_identical_frames_give_zero_images():
    frames = np.repeat(np.arange(1, 10, dtype=np.float32).reshape(1, 3, 3), 8, axis=0)
    run = run_from_frames(frames, builtin_mask("uniform", (3, 3), t=0.4))
    for fn in (reconstruct_gi, reconstruct_ngi, reconstruct_dgi):
        assert np.all(fn(run, 8).data == 0.0)


def test_dttci_degenerate_and_k1():
    rng = np.random.default_rng(4)
    run = random_run(rng, 6, 2, 3)
    thr = ThresholdPair(0.5, 0.0, 0.0)
    same = Registers(np.array([1, 4]), np.array([1, 4]), thr, run.M)
    assert np.all(reconstruct_dttci(run, same).data == 0.0)
    one = Registers(np.array([2]), np.array([5]), thr, run.M)
    f = frames_of(run)
    np.testing.assert_array_equal(reconstruct_dttci(run, one).data, f[2] - f[5])


def test_dttci_rejects_unbalanced():
    run = random_run(np.random.default_rng(5), 6, 2, 2)
    regs = Registers(np.array([0, 1]), np.array([2]), ThresholdPair(0.5, 0.0, 0.0), run.M)
    with pytest.raises(PreconditionError):
        reconstruct_dttci(run, regs)


def test_limits_and_missing_frames():
    run = hand_run()
    with pytest.raises(PreconditionError):
        reconstruct_gi(run, 1)
    with pytest.raises(PreconditionError):
        reconstruct_ngi(run, 4)
    scalar = AcquisitionRun(run.config, run.mask, run.S, run.R, run.T)
    for fn in (reconstruct_gi, reconstruct_ngi, reconstruct_dgi, reconstruct_ci):
        with pytest.raises(MissingFramesError):
            fn(scalar, 3)


def test_zero_reference_total_is_degenerate():
    run = hand_run()
    bad = AcquisitionRun(run.config, run.mask, run.S, np.array([1.0, 0.0, 1.0]), run.T, run.frames)
    with pytest.raises(DegenerateFrameError):
        reconstruct_ngi(bad, 3)
    with pytest.raises(DegenerateFrameError):
        reconstruct_dgi(bad, 3)


def test_dgi_nulls_full_transmission():
    cfg = SourceConfig(width=8, height=8, master_seed=21)
    run = run_acquisition(cfg, builtin_mask("uniform", cfg.shape, t=1.0), 300, keep_frames=True)
    assert np.all(reconstruct_dgi(run, 300).data == 0.0)


def test_ci_is_zero_threshold_dttci(small_run):
    n = 400
    t = exact_mean_transmission(small_run, n)
    regs = balance_registers(partition_frames(small_run, ThresholdPair(t, 0.0, 0.0), pool=n), small_run)
    ci = reconstruct_ci(small_run, n)
    assert ci.method == "CI"
    assert ci.data.tobytes() == reconstruct_dttci(small_run, regs).data.tobytes()
    assert list(ci_registers(small_run, n).A) == list(regs.A)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_ci_registers_nonempty_on_default_runs(seed):
    cfg = SourceConfig(master_seed=seed)
    run = run_acquisition(cfg, builtin_mask("grayscale-chart", cfg.shape), 100)
    regs = ci_registers(run, 100)
    assert regs.k >= 1


@pytest.mark.parametrize("c", [4.0, 0.5])
def test_affine_scale_covariance(small_run, c):
    f = frames_of(small_run)
    scaled = run_from_frames((f * c).astype(np.float32), small_run.mask)
    n = 300
    t = exact_mean_transmission(small_run, n)
    regs = select_count(small_run, 100, t, pool=n)
    regs_s = select_count(scaled, 100, t, pool=n)
    assert list(regs.A) == list(regs_s.A)
    pairs = [
        (reconstruct_gi(small_run, n), reconstruct_gi(scaled, n), c * c),
        (reconstruct_dgi(small_run, n), reconstruct_dgi(scaled, n), c * c),
        (reconstruct_ngi(small_run, n), reconstruct_ngi(scaled, n), c),
        (reconstruct_dttci(small_run, regs), reconstruct_dttci(scaled, regs_s), c),
    ]
    for base, other, factor in pairs:
        assert max_rel_err(other.data, factor * base.data) < 1e-12
        assert np.max(np.abs(normalize_unit(other).data - normalize_unit(base).data)) < 1e-12


@pytest.fixture(scope="module")
def run20k():
    cfg = SourceConfig(width=32, height=32, speckle_radius=2.0, master_seed=77)
    return run_acquisition(cfg, builtin_mask("grayscale-chart", cfg.shape), 20000, keep_frames=True)


def test_ngi_forms_agree(run20k):
    a = reconstruct_ngi(run20k, 20000).data
    b = reconstruct_ngi(run20k, 20000, form="second").data
    rms = math.sqrt(float(np.mean(a * a)))
    assert np.max(np.abs(a - b)) / rms < 1e-2


def test_gi_of_uniform_scene_is_uncorrelated():
    cfg = SourceConfig(width=32, height=32, speckle_radius=2.0, master_seed=78)
    run = run_acquisition(cfg, builtin_mask("uniform", cfg.shape, t=0.4), 20000)
    img = reconstruct_gi(run, 20000).data
    chart = builtin_mask("grayscale-chart", cfg.shape).data
    assert abs(np.corrcoef(img.ravel(), chart.ravel())[0, 1]) < 0.05


def test_dttci_sign_structure(run20k):
    t = exact_mean_transmission(run20k)
    regs = select_count(run20k, 5000, t)
    img = reconstruct_dttci(run20k, regs).data
    dT = run20k.mask.data - run20k.mask.mean
    assert np.corrcoef(img.ravel(), dT.ravel())[0, 1] > 0.5


# ------------------------------------------------------- operation counting


@pytest.fixture
def counted(monkeypatch):
    monkeypatch.setattr(_accel, "kernels", _accel.numpy_kernels)
    run = random_run(np.random.default_rng(9), 40, 3, 3)
    src = CountingSource(frames_of(run).astype(np.float32))
    CountingArray.log = []
    return AcquisitionRun(run.config, run.mask, run.S, run.R, run.T, src), src


def test_dttci_uses_only_additions(counted):
    run, src = counted
    regs = select_count(run, 6, exact_mean_transmission(run))
    img = reconstruct_dttci(run, regs)
    assert sorted(src.reads) == sorted(np.concatenate([regs.A, regs.B]).tolist())
    assert set(CountingArray.log) == {"add"}
    assert len(CountingArray.log) == 12
    np.testing.assert_array_equal(img.data, oracle_dttci(run, regs.A, regs.B))


def test_counting_double_sees_correlator_arithmetic(counted):
    run, src = counted
    reconstruct_gi(run, 40)
    assert "multiply" in CountingArray.log and "subtract" in CountingArray.log
    # two passes over the prefix
    assert len(src.reads) == 80
