from pathlib import Path

import numpy as np
import pytest

from ghostkit import (
    AcquisitionRun,
    PreconditionError,
    SourceConfig,
    StoreCorruptionError,
    StoreFormatError,
    TransmissionMask,
    load_store,
    run_from_frames,
    save_store,
)
from ghostkit.store import HEADER, read_header, record_dtype

DATA = Path(__file__).parent / "data"

GOLDEN_FRAMES = np.array([
    [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    [3.0, 0.25, 0.0, 1.0, 0.75, 2.0],
    [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
], np.float32).reshape(3, 2, 3)
GOLDEN_MASK = np.array([1.0, 0.0, 0.5, 0.0, 1.0, 0.25]).reshape(2, 3)


def golden_run():
    cfg = SourceConfig(width=3, height=2, speckle_radius=1.5, mean_intensity=1.0, master_seed=7)
    return run_from_frames(GOLDEN_FRAMES, TransmissionMask(GOLDEN_MASK), cfg)


def test_header_is_48_bytes():
    assert HEADER.size == 48
    assert record_dtype(2, 3).itemsize == 32 + 24
    assert record_dtype(2, 3, frames=False).itemsize == 32


def test_golden_little_endian_decodes():
    run = load_store(DATA / "golden_le.gifs")
    assert run.M == 3
    assert run.shape == (2, 3)
    assert run.config == SourceConfig(3, 2, 1.5, 1.0, 7)
    np.testing.assert_array_equal(run.frames.read(np.arange(3)), GOLDEN_FRAMES)
    np.testing.assert_array_equal(run.S, [0.5 + 0.75 + 2.5 + 0.75, 3.0 + 0.75 + 0.5, 1.0 + 0.5 + 1.0 + 0.25])
    np.testing.assert_array_equal(run.R, [10.5, 7.0, 6.0])
    np.testing.assert_array_equal(run.T, run.S / run.R)


def test_library_writes_golden_bytes(tmp_path):
    run = golden_run()
    save_store(run, tmp_path / "a.gifs")
    assert (tmp_path / "a.gifs").read_bytes() == (DATA / "golden_le.gifs").read_bytes()
    save_store(run, tmp_path / "b.gifs", include_frames=False)
    assert (tmp_path / "b.gifs").read_bytes() == (DATA / "golden_le_scalars.gifs").read_bytes()


def test_big_endian_rejected():
    with pytest.raises(StoreFormatError, match="big-endian"):
        load_store(DATA / "golden_be.gifs")


def test_scalar_only_store():
    run = load_store(DATA / "golden_le_scalars.gifs")
    assert not run.has_frames
    assert run.M == 3
    assert read_header(DATA / "golden_le_scalars.gifs")["flags"] == 0


def test_round_trip_is_exact(tmp_path, small_run):
    save_store(small_run, tmp_path / "s.gifs", block=50)
    back = load_store(tmp_path / "s.gifs")
    assert back.config == small_run.config
    for name in "SRT":
        assert getattr(back, name).tobytes() == getattr(small_run, name).tobytes()
    idx = np.arange(small_run.M)
    assert back.frames.read(idx).tobytes() == small_run.frames.read(idx).tobytes()


def test_empty_run_rejected(tmp_path):
    empty = AcquisitionRun(SourceConfig(2, 2), None, np.empty(0), np.empty(0), np.empty(0))
    with pytest.raises(PreconditionError):
        save_store(empty, tmp_path / "e.gifs")
    assert not (tmp_path / "e.gifs").exists()


def test_bad_magic_and_version(tmp_path):
    raw = bytearray((DATA / "golden_le.gifs").read_bytes())
    bad = bytearray(raw)
    bad[:4] = b"GIFX"
    (tmp_path / "m.gifs").write_bytes(bytes(bad))
    with pytest.raises(StoreFormatError, match="magic"):
        load_store(tmp_path / "m.gifs")
    bad = bytearray(raw)
    bad[4:6] = (2).to_bytes(2, "little")
    (tmp_path / "v.gifs").write_bytes(bytes(bad))
    with pytest.raises(StoreFormatError, match="version"):
        load_store(tmp_path / "v.gifs")
    bad = bytearray(raw)
    bad[6:8] = (5).to_bytes(2, "little")
    (tmp_path / "f.gifs").write_bytes(bytes(bad))
    with pytest.raises(StoreFormatError, match="flag"):
        load_store(tmp_path / "f.gifs")


@pytest.mark.parametrize("cut,offset", [(48 + 56 + 10, 48 + 56), (48 + 2 * 56 + 55, 48 + 2 * 56), (48, 48)])
def test_truncation_reports_offset(tmp_path, cut, offset):
    raw = (DATA / "golden_le.gifs").read_bytes()
    (tmp_path / "t.gifs").write_bytes(raw[:cut])
    with pytest.raises(StoreCorruptionError) as exc:
        load_store(tmp_path / "t.gifs")
    assert exc.value.offset == offset
    assert str(offset) in str(exc.value)


def test_truncated_header(tmp_path):
    (tmp_path / "h.gifs").write_bytes(b"GIFS\x01\x00")
    with pytest.raises(StoreCorruptionError) as exc:
        load_store(tmp_path / "h.gifs")
    assert exc.value.offset == 6


def test_trailing_bytes_and_bad_index(tmp_path):
    raw = (DATA / "golden_le.gifs").read_bytes()
    (tmp_path / "x.gifs").write_bytes(raw + b"\x00")
    with pytest.raises(StoreCorruptionError):
        load_store(tmp_path / "x.gifs")
    bad = bytearray(raw)
    bad[48 + 56:48 + 56 + 8] = (9).to_bytes(8, "little")
    (tmp_path / "i.gifs").write_bytes(bytes(bad))
    with pytest.raises(StoreCorruptionError) as exc:
        load_store(tmp_path / "i.gifs")
    assert exc.value.offset == 48 + 56
