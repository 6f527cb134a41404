"""Object transmission masks: ground truth and the virtual object-arm mask."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, MaskFormatError, ShapeError

__all__ = ["TransmissionMask", "load_mask", "save_mask", "builtin_mask", "mask_from_spec"]


@dataclass(frozen=True)
class TransmissionMask:
    data: np.ndarray
    name: str = "mask"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise ConfigError("mask values must lie in [0, 1]")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def mean(self):
        return float(self.data.mean())


def load_mask(path, shape=None, name=None) -> TransmissionMask:
    """Read an 8-bit grayscale PGM (P5) or PNG into [0, 1] (value / 255).

    ``shape`` is ``(rows, cols)``; a mismatch raises ShapeError since masks are
    never resampled.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode != "L":
                raise MaskFormatError(f"{path}: expected 8-bit grayscale, got PIL mode {mode!r}")
            arr = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise MaskFormatError(f"{path}: not a PGM/PNG image") from exc
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ShapeError(f"{path}: mask is {arr.shape[1]}x{arr.shape[0]}, "
                         f"expected {shape[1]}x{shape[0]}")
    return TransmissionMask(arr.astype(np.float64) / 255.0, name or path.stem)


def save_mask(mask: TransmissionMask, path):
    """Write a mask as 8-bit grayscale; format follows the suffix (.pgm or .png)."""
    path = Path(path)
    u8 = np.round(mask.data * 255.0).astype(np.uint8)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".pnm") else "PNG"
    Image.fromarray(u8).save(path, format=fmt)


# 5x7 bitmap glyphs, '#' = transmitting
_GLYPHS = {
    "G": [" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ### "],
    "H": ["#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"],
    "O": [" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "],
    "S": [" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "],
    "T": ["#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "],
    "I": ["#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "#####"],
}


def _render_text(text, rows, cols):
    """Binary text rendered as large as fits in a rows x cols box, centered."""
    cells = np.array([[c == "#" for c in line] for line in _GLYPHS[text[0]]])
    for ch in text[1:]:
        gap = np.zeros((7, 1), bool)
        glyph = np.array([[c == "#" for c in line] for line in _GLYPHS[ch]])
        cells = np.hstack([cells, gap, glyph])
    gh, gw = cells.shape
    scale = max(1, min(rows // (gh + 2), cols // (gw + 2)))
    big = np.kron(cells, np.ones((scale, scale), bool))
    out = np.zeros((rows, cols), bool)
    bh, bw = min(big.shape[0], rows), min(big.shape[1], cols)
    r0, c0 = (rows - bh) // 2, (cols - bw) // 2
    out[r0:r0 + bh, c0:c0 + bw] = big[:bh, :bw]
    return out


def _wedge(rows, cols, steps, reverse=False):
    levels = np.linspace(0.0, 1.0, steps)
    if reverse:
        levels = levels[::-1]
    col_level = levels[np.minimum(np.arange(cols) * steps // cols, steps - 1)]
    return np.broadcast_to(col_level, (rows, cols)).copy()


def builtin_mask(kind, shape=(128, 128), t=None) -> TransmissionMask:
    """Generated test objects.

    ``grayscale-chart``: an 8-step gray wedge on top, a reversed wedge at the
    bottom and white glyphs on black in between. ``binary-letters``: white
    glyphs on black. ``uniform``: constant transmission ``t``.
    """
    rows, cols = (int(s) for s in shape)
    if rows < 1 or cols < 1:
        raise ConfigError(f"mask dimensions must be positive, got {shape}")
    if kind == "uniform":
        if t is None or not 0.0 <= t <= 1.0:
            raise ConfigError(f"uniform mask needs t in [0, 1], got {t}")
        return TransmissionMask(np.full((rows, cols), float(t)), f"uniform({t:g})")
    if rows < 8 or cols < 8:
        raise ConfigError(f"{kind} needs at least 8x8 pixels, got {cols}x{rows}")
    if kind == "binary-letters":
        return TransmissionMask(_render_text("GHOST", rows, cols).astype(np.float64), kind)
    if kind == "grayscale-chart":
        band = rows // 4
        data = np.zeros((rows, cols))
        data[:band] = _wedge(band, cols, 8)
        data[rows - band:] = _wedge(band, cols, 8, reverse=True)
        middle = rows - 2 * band
        data[band:rows - band] = _render_text("GI", middle, cols)
        return TransmissionMask(data, kind)
    raise ConfigError(f"unknown builtin mask kind {kind!r}")


def mask_from_spec(spec, shape) -> TransmissionMask:
    """Resolve a config string: a builtin kind, ``uniform:<t>`` or a file path."""
    spec = spec.strip()
    if spec.startswith("uniform"):
        _, _, value = spec.partition(":")
        try:
            t = float(value.strip("() "))
        except ValueError:
            raise ConfigError(f"bad uniform mask spec {spec!r}") from None
        return builtin_mask("uniform", shape, t)
    if spec in ("grayscale-chart", "binary-letters"):
        return builtin_mask(spec, shape)
    return load_mask(spec, shape)
