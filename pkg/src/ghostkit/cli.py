"""ghostkit command line: simulate, reconstruct, sweep, report.

Exit codes: 0 success, 2 usage/config, 3 I/O, 4 data-content errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import errors
from .acquisition import relative_normalization_gap, run_acquisition
from .config import load_config
from .evaluation import CountPolicy, ExplicitPolicy, equalize_histogram, normalize_unit, save_image_png, sweep
from .recon import METHODS, reconstruct_ci, reconstruct_dgi, reconstruct_dttci, reconstruct_gi, reconstruct_ngi
from .scene import mask_from_spec
from .store import load_store, save_store
from .thresholding import (
    ThresholdPair,
    balance_registers,
    deviations,
    estimate_mean_transmission,
    exact_mean_transmission,
    partition_frames,
    select_count,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4

STORE_NAME = "store.gifs"


class UsageError(Exception):
    pass


def _out_dir(args, cfg=None):
    out = Path(args.out or (cfg.out_dir if cfg else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else None
    if seeds is None:
        seeds = cfg.seeds if len(cfg.seeds) > 1 else [cfg.source.master_seed]
    out = _out_dir(args, cfg)
    for seed in seeds:
        run_cfg = cfg.with_seed(seed)
        mask = mask_from_spec(run_cfg.mask, run_cfg.source.shape)
        run = run_acquisition(run_cfg.source, mask, run_cfg.frames,
                              keep_frames=False, detector_noise=run_cfg.detector_noise)
        name = STORE_NAME if len(seeds) == 1 else f"store_seed{seed}.gifs"
        save_store(run, out / name, include_frames=run_cfg.store_frames)
        run_cfg.write(out / (Path(name).stem + ".config.ini"))
        n_est = min(120, run.M)
        h, w = run.shape
        print(f"wrote {out / name}")
        print(f"M = {run.M}")
        print(f"dimensions = {w}x{h}")
        print(f"seed = {seed}")
        print(f"t_mean_estimate_{n_est} = {estimate_mean_transmission(run, n_est)!r}")
    return EXIT_OK


def _recon(run, args):
    method = args.method.upper()
    if method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}; choose from {', '.join(METHODS)}")
    n = args.frames
    if method in ("GI", "NGI", "DGI", "CI"):
        fn = {"GI": reconstruct_gi, "NGI": reconstruct_ngi, "DGI": reconstruct_dgi, "CI": reconstruct_ci}[method]
        return fn(run, n)
    n_est = min(args.n_est, run.M)
    t_mean = exact_mean_transmission(run) if args.exact_mean else estimate_mean_transmission(run, n_est)
    if args.t0_plus is not None or args.t0_minus is not None:
        if args.t0_plus is None or args.t0_minus is None:
            raise UsageError("--t0-plus and --t0-minus must be given together")
        regs = partition_frames(run, ThresholdPair(t_mean, args.t0_plus, args.t0_minus))
        regs = balance_registers(regs, run)
    else:
        k = args.k
        if k is None:
            if n is None:
                raise UsageError("DTTCI needs --k, --frames or explicit thresholds")
            if n % 2:
                raise UsageError("--frames must be even for DTTCI (k x 2 frames)")
            k = n // 2
        regs = select_count(run, k, t_mean)
    return reconstruct_dttci(run, regs)


def cmd_reconstruct(args):
    run = load_store(args.store)
    run.require_frames()
    img = _recon(run, args)
    out = _out_dir(args)
    stem = f"{img.method}_{img.frames_used}"
    np.save(out / f"{stem}.npy", img.data)
    norm = normalize_unit(img)
    save_image_png(norm, out / f"{stem}_norm.png")
    save_image_png(equalize_histogram(norm), out / f"{stem}_eq.png")
    print(f"wrote {out / stem}.npy, {stem}_norm.png, {stem}_eq.png")
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    run = load_store(args.store)
    run.require_frames()
    mask = mask_from_spec(cfg.mask, run.shape)
    methods = [args.method.upper()] if args.method else cfg.methods
    counts = [args.frames] if args.frames else cfg.frame_counts
    if not methods or not counts:
        raise UsageError("sweep needs at least one method and one frame count")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    policy = cfg.policy()
    if args.t0_plus is not None and args.t0_minus is not None:
        policy = ExplicitPolicy(args.t0_plus, args.t0_minus, cfg.mean_estimate_frames, cfg.exact_mean, cfg.pool)
    out = _out_dir(args, cfg)
    report = sweep(run, methods, counts, mask, policy, image_dir=out / "images")
    report.to_csv(out / "sweep.csv")
    for row in report.rows:
        print(f"{row.method:6s} {row.frames_used:8d}  SNR = {row.snr:.6g}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_report(args):
    run = load_store(args.store)
    n_est = min(args.n_est, run.M)
    t_full = exact_mean_transmission(run)
    t_est = estimate_mean_transmission(run, n_est)
    dT = deviations(run, t_est)
    h, w = run.shape
    print(f"M = {run.M}")
    print(f"dimensions = {w}x{h}")
    print(f"seed = {run.config.master_seed}")
    print(f"frames_stored = {str(run.has_frames).lower()}")
    print(f"t_mean = {t_full!r}")
    print(f"t_mean_estimate_{n_est} = {t_est!r}")
    print(f"ratio_of_means = {math.fsum(run.S) / math.fsum(run.R)!r}")
    print(f"normalization_gap = {relative_normalization_gap(run)!r}")
    print(f"frames_above = {int(np.count_nonzero(dT > 0))}")
    print(f"frames_below = {int(np.count_nonzero(dT < 0))}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ghostkit", description="Ghost-imaging simulation and reconstruction")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate an acquisition run and write a frame store")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="reconstruct one image from a store")
    r.add_argument("--store", required=True)
    r.add_argument("--method", required=True)
    r.add_argument("--frames", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--t0-plus", type=float)
    r.add_argument("--t0-minus", type=float)
    r.add_argument("--n-est", type=int, default=120)
    r.add_argument("--exact-mean", action="store_true")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    w = sub.add_parser("sweep", help="SNR vs frame count for several methods")
    w.add_argument("--store", required=True)
    w.add_argument("--config", required=True)
    w.add_argument("--method")
    w.add_argument("--frames", type=int)
    w.add_argument("--t0-plus", type=float)
    w.add_argument("--t0-minus", type=float)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    q = sub.add_parser("report", help="summarize a store")
    q.add_argument("--store", required=True)
    q.add_argument("--n-est", type=int, default=120)
    q.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, errors.ConfigError, errors.PreconditionError, errors.InsufficientFramesError,
            errors.EmptyRegisterError, errors.MaskFormatError, errors.ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, errors.StoreFormatError, errors.StoreCorruptionError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (errors.MissingFramesError, errors.DegenerateFrameError, errors.DegenerateImageError,
            errors.InsufficientDataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
