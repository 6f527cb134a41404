"""GI, NGI, DGI, CI and DTTCI reconstructions.

GI, NGI and DGI are all centered correlations ``<(a - <a>)(I - <I>)>`` of a
per-frame scalar ``a`` (S, T = S/R, R) with the reference frames, computed in
two passes: frame means first, then centered products. DTTCI only adds frames
into two register sums and subtracts the averages.

All summations run in ascending frame order with row-major pixels, so a
result does not depend on block size, thread count or the kernel backend.
``Plan`` batches several reconstructions of one run into shared passes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .acquisition import DEFAULT_BLOCK, AcquisitionRun, iter_frame_blocks
from .errors import DegenerateFrameError, PreconditionError
from .thresholding import Registers, ThresholdPair, balance_registers, exact_mean_transmission, partition_frames

__all__ = [
    "ReconImage",
    "Plan",
    "reconstruct_gi",
    "reconstruct_ngi",
    "reconstruct_dgi",
    "reconstruct_dttci",
    "reconstruct_ci",
    "ci_registers",
    "METHODS",
]

METHODS = ("GI", "NGI", "DGI", "DTTCI", "CI")


@dataclass(frozen=True)
class ReconImage:
    data: np.ndarray
    method: str
    frames_used: int


def _fmean(x):
    return math.fsum(x) / len(x)


def _check_limit(run, m_limit):
    n = run.M if m_limit is None else int(m_limit)
    if not 2 <= n <= run.M:
        raise PreconditionError(f"m_limit must be in [2, {run.M}], got {m_limit}")
    return n


class Plan:
    """Collects reconstructions of one run and evaluates them in shared passes.

    Pass 1 reads the correlation prefixes and the register frames; it
    accumulates frame sums (for the means) and register sums. Pass 2 re-reads
    the correlation prefixes for the centered products.
    """

    def __init__(self, run: AcquisitionRun, block=DEFAULT_BLOCK):
        self.run = run
        self.block = block
        self._prefix = {}      # n -> set of scalar names
        self._registers = []   # (key, Registers)

    def correlations(self, m_limit, *scalars):
        n = _check_limit(self.run, m_limit)
        if "T" in scalars or "R" in scalars:
            R = self.run.R[:n]
            bad = np.flatnonzero(~(R > 0))
            if len(bad):
                raise DegenerateFrameError(f"frame {bad[0]} has zero reference total", int(bad[0]))
        self._prefix.setdefault(n, set()).update(scalars)
        return n

    def registers(self, key, regs: Registers):
        if not regs.balanced or len(regs.A) < 1:
            raise PreconditionError(f"DTTCI needs balanced nonempty registers, got |A|={len(regs.A)}, |B|={len(regs.B)}")
        self._registers.append((key, regs))

    def execute(self):
        run = self.run
        source = run.require_frames()
        npix = int(np.prod(run.shape))
        limits = sorted(self._prefix)
        nmax = limits[-1] if limits else 0

        # -- pass 1: prefix frame sums and register sums
        M = run.M
        reg_acc = []
        need = np.zeros(M, bool)
        need[:nmax] = True
        for key, regs in self._registers:
            inA = np.zeros(M, bool)
            inA[regs.A] = True
            inB = np.zeros(M, bool)
            inB[regs.B] = True
            need |= inA | inB
            reg_acc.append((key, regs, inA, inB, np.zeros(npix), np.zeros(npix)))
        total = np.zeros(npix)
        means = {}
        pending = list(limits)
        for idx, frames in iter_frame_blocks(source, np.flatnonzero(need), self.block):
            if pending:
                # the running sum is snapshotted at each prefix boundary
                prefix_rows = int(np.searchsorted(idx, nmax))
                start = 0
                while pending and pending[0] - 1 <= idx[-1]:
                    n = pending.pop(0)
                    stop = int(np.searchsorted(idx, n))
                    _accel.add_rows(total, frames, np.arange(start, stop))
                    means[n] = total / n
                    start = stop
                _accel.add_rows(total, frames, np.arange(start, prefix_rows))
            for key, regs, inA, inB, sA, sB in reg_acc:
                _accel.add_rows(sA, frames, np.flatnonzero(inA[idx]))
                _accel.add_rows(sB, frames, np.flatnonzero(inB[idx]))

        # -- pass 2: centered products per prefix
        weights = {}
        accs = {}
        for n in limits:
            names = sorted(self._prefix[n])
            series = {"S": run.S[:n], "R": run.R[:n], "T": run.T[:n]}
            weights[n] = (names, np.stack([series[s] - _fmean(series[s]) for s in names]))
            accs[n] = np.zeros((len(names), npix))
        if limits:
            for idx, frames in iter_frame_blocks(source, np.arange(nmax), self.block):
                for n in limits:
                    if idx[0] >= n:
                        continue
                    rows = idx < n
                    names, w = weights[n]
                    block = frames if rows.all() else frames[rows]
                    _accel.add_centered(accs[n], block, np.ascontiguousarray(w[:, idx[rows]]), means[n])

        result = {"mean": means, "corr": {}, "registers": {}}
        for n in limits:
            names, _ = weights[n]
            for j, s in enumerate(names):
                result["corr"][(n, s)] = accs[n][j] / n
        for key, regs, _, _, sA, sB in reg_acc:
            result["registers"][key] = (sA, sB)
        return result

    # -- assembly of estimator images from executed moments

    def gi(self, result, n):
        return ReconImage(self._img(result["corr"][(n, "S")]), "GI", n)

    def ngi(self, result, n, form="first"):
        corr = result["corr"][(n, "T")]
        if form == "second":
            # <S I'> - (<S>/<R>) <R I'>, with I' = I/R
            run = self.run
            ratio = math.fsum(run.S[:n]) / math.fsum(run.R[:n])
            corr = corr + (_fmean(run.T[:n]) - ratio) * result["mean"][n]
        elif form != "first":
            raise ValueError(form)
        return ReconImage(self._img(corr), "NGI", n)

    def dgi(self, result, n):
        run = self.run
        ratio = _fmean(run.S[:n]) / _fmean(run.R[:n])
        img = result["corr"][(n, "S")] - ratio * result["corr"][(n, "R")]
        return ReconImage(self._img(img), "DGI", n)

    def dttci(self, result, key, method="DTTCI"):
        sA, sB = result["registers"][key]
        regs = dict(self._registers)[key]
        k = regs.k
        return ReconImage(self._img(sA / k - sB / k), method, 2 * k)

    def _img(self, flat):
        return flat.reshape(self.run.shape)


def reconstruct_gi(run: AcquisitionRun, m_limit=None) -> ReconImage:
    """(1/n) sum (S - <S>)(I - <I>) over the first ``m_limit`` frames."""
    plan = Plan(run)
    n = plan.correlations(m_limit, "S")
    return plan.gi(plan.execute(), n)


def reconstruct_ngi(run: AcquisitionRun, m_limit=None, form="first") -> ReconImage:
    """<S I / R> - <S/R><I>; ``form="second"`` gives <S I'> - (<S>/<R>)<R I'>."""
    plan = Plan(run)
    n = plan.correlations(m_limit, "T")
    return plan.ngi(plan.execute(), n, form)


def reconstruct_dgi(run: AcquisitionRun, m_limit=None) -> ReconImage:
    """<dS dI> - (<S>/<R>) <dR dI>."""
    plan = Plan(run)
    n = plan.correlations(m_limit, "S", "R")
    return plan.dgi(plan.execute(), n)


def reconstruct_dttci(run: AcquisitionRun, regs: Registers) -> ReconImage:
    """<I>_A - <I>_B from balanced registers, using frame additions only."""
    plan = Plan(run)
    plan.registers("dttci", regs)
    return plan.dttci(plan.execute(), "dttci")


def ci_registers(run: AcquisitionRun, m_limit=None, t_mean_est=None) -> Registers:
    """Zero-threshold split of the first ``m_limit`` frames, then balanced."""
    n = _check_limit(run, m_limit)
    if t_mean_est is None:
        t_mean_est = exact_mean_transmission(run, n)
    regs = partition_frames(run, ThresholdPair(t_mean_est, 0.0, 0.0), pool=n)
    return balance_registers(regs, run)


def reconstruct_ci(run: AcquisitionRun, m_limit=None, t_mean_est=None) -> ReconImage:
    plan = Plan(run)
    plan.registers("ci", ci_registers(run, m_limit, t_mean_est))
    return plan.dttci(plan.execute(), "ci", method="CI")
