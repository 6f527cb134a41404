"""Hot per-frame kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``GHOSTKIT_BACKEND`` (``numba`` or
``numpy``; default ``numba`` when it imports). Both paths sum in the same
order (ascending frame, row-major pixel) with no fused multiply-add, so they
return bit-identical results.

Kernel signatures (``block`` is a C-contiguous ``(B, N)`` float32 array):

    frame_sums(block, mask)            -> (S, R) float64 arrays of length B
    add_rows(acc, block, rows)         -> acc[:] += block[r] for r in rows
    add_centered(acc, block, w, c)     -> acc[j] += w[j, b] * (block[b] - c)
"""
import os

import numpy as np

__all__ = ["BACKEND", "frame_sums", "add_rows", "add_centered", "kernels"]


# ----------------------------------------------------------------- numpy


def _np_frame_sums(block, mask):
    # cumsum is strictly sequential, unlike np.sum's pairwise reduction
    vals = block.astype(np.float64)
    S = np.cumsum(vals * mask, axis=1)[:, -1]
    R = np.cumsum(vals, axis=1)[:, -1]
    return np.ascontiguousarray(S), np.ascontiguousarray(R)


def _np_add_rows(acc, block, rows):
    for r in rows:
        np.add(acc, block[r], out=acc)


def _np_add_centered(acc, block, w, center):
    for b in range(block.shape[0]):
        d = block[b] - center
        for j in range(acc.shape[0]):
            acc[j] += w[j, b] * d


numpy_kernels = {
    "frame_sums": _np_frame_sums,
    "add_rows": _np_add_rows,
    "add_centered": _np_add_centered,
}


# ----------------------------------------------------------------- numba


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True, nogil=True)
    def frame_sums(block, mask):
        B, N = block.shape
        S = np.empty(B)
        R = np.empty(B)
        for b in range(B):
            s = 0.0
            r = 0.0
            for p in range(N):
                v = np.float64(block[b, p])
                s += v * mask[p]
                r += v
            S[b] = s
            R[b] = r
        return S, R

    @njit(cache=True, nogil=True)
    def add_rows(acc, block, rows):
        N = block.shape[1]
        for i in range(rows.shape[0]):
            r = rows[i]
            for p in range(N):
                acc[p] += np.float64(block[r, p])

    @njit(cache=True, nogil=True)
    def add_centered(acc, block, w, center):
        B, N = block.shape
        J = acc.shape[0]
        for b in range(B):
            for j in range(J):
                wj = w[j, b]
                for p in range(N):
                    acc[j, p] += wj * (np.float64(block[b, p]) - center[p])

    return {"frame_sums": frame_sums, "add_rows": add_rows, "add_centered": add_centered}


def _select_backend():
    requested = os.environ.get("GHOSTKIT_BACKEND", "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"GHOSTKIT_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba":
        try:
            return "numba", _build_numba_kernels()
        except ImportError:
            pass
    return "numpy", numpy_kernels


BACKEND, kernels = _select_backend()


def get_kernels(name=None):
    """Return the kernel table for ``name`` (defaults to the active backend)."""
    if name is None or name == BACKEND:
        return kernels
    if name == "numpy":
        return numpy_kernels
    if name == "numba":
        return _build_numba_kernels()
    raise ValueError(name)


# indirection so tests can monkeypatch ``kernels`` at runtime
def frame_sums(block, mask):
    return kernels["frame_sums"](block, mask)


def add_rows(acc, block, rows):
    kernels["add_rows"](acc, block, rows)


def add_centered(acc, block, w, center):
    kernels["add_centered"](acc, block, w, center)
