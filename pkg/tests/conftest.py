import numpy as np
import pytest

from ghostkit import SourceConfig, TransmissionMask, builtin_mask, run_acquisition, run_from_frames


def random_run(rng, M=12, h=3, w=4, mask=None):
    frames = rng.exponential(1.0, size=(M, h, w)).astype(np.float32)
    if mask is None:
        mask = TransmissionMask(rng.uniform(0.0, 1.0, size=(h, w)))
    return run_from_frames(frames, mask)


def frames_of(run):
    return run.frames.read(np.arange(run.M)).astype(np.float64)


def max_rel_err(a, b, scale=None):
    """Max-norm error of ``a`` relative to ``scale`` (default max |b|)."""
    scale = np.max(np.abs(b)) if scale is None else scale
    return float(np.max(np.abs(a - b)) / scale) if scale else float(np.max(np.abs(a)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_run():
    cfg = SourceConfig(width=16, height=16, speckle_radius=1.0, master_seed=11)
    mask = builtin_mask("grayscale-chart", cfg.shape)
    return run_acquisition(cfg, mask, 600, keep_frames=True)


# acceptance criteria append "PASS/FAIL ..." lines here; echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
