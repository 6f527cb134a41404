"""Plain-text experiment configuration (INI ``key = value`` with sections)."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .evaluation import CountPolicy, ExplicitPolicy
from .speckle import SourceConfig

__all__ = ["RunConfig", "load_config", "DEFAULT_CONFIG"]

DEFAULT_CONFIG = """\
[source]
width = 128
height = 128
speckle_radius = 2.0
mean_intensity = 1.0
master_seed = 42

[scene]
mask = grayscale-chart

[acquisition]
frames = 40000
store_frames = true
detector_noise = 0.0

[output]
dir = ghostkit-out

[sweep]
methods = GI, NGI, DGI, DTTCI
frame_counts = 4000, 10000, 20000
seeds = 42
threshold_policy = count
mean_estimate_frames = 120
exact_mean = false
"""


def _list(raw, conv):
    return [conv(v.strip()) for v in raw.replace(";", ",").split(",") if v.strip()]


@dataclass
class RunConfig:
    source: SourceConfig = field(default_factory=SourceConfig)
    mask: str = "grayscale-chart"
    frames: int = 40000
    store_frames: bool = True
    detector_noise: float = 0.0
    out_dir: str = "ghostkit-out"
    methods: list = field(default_factory=lambda: ["GI", "NGI", "DGI", "DTTCI"])
    frame_counts: list = field(default_factory=lambda: [4000, 10000, 20000])
    seeds: list = field(default_factory=lambda: [42])
    threshold_policy: str = "count"
    t0_plus: Optional[float] = None
    t0_minus: Optional[float] = None
    pool: Optional[int] = None
    mean_estimate_frames: int = 120
    exact_mean: bool = False

    def policy(self):
        if self.threshold_policy == "count":
            return CountPolicy(self.pool, self.mean_estimate_frames, self.exact_mean)
        return ExplicitPolicy(self.t0_plus, self.t0_minus, self.mean_estimate_frames, self.exact_mean, self.pool)

    def with_seed(self, seed):
        return replace(self, source=replace(self.source, master_seed=int(seed)))

    def to_ini(self):
        cp = configparser.ConfigParser()
        s = self.source
        cp["source"] = {"width": s.width, "height": s.height, "speckle_radius": repr(float(s.speckle_radius)),
                        "mean_intensity": repr(float(s.mean_intensity)), "master_seed": s.master_seed}
        cp["scene"] = {"mask": self.mask}
        cp["acquisition"] = {"frames": self.frames, "store_frames": str(self.store_frames).lower(),
                             "detector_noise": repr(float(self.detector_noise))}
        cp["output"] = {"dir": self.out_dir}
        sweep = {"methods": ", ".join(self.methods),
                 "frame_counts": ", ".join(str(n) for n in self.frame_counts),
                 "seeds": ", ".join(str(n) for n in self.seeds),
                 "threshold_policy": self.threshold_policy,
                 "mean_estimate_frames": self.mean_estimate_frames,
                 "exact_mean": str(self.exact_mean).lower()}
        for key in ("t0_plus", "t0_minus", "pool"):
            value = getattr(self, key)
            if value is not None:
                sweep[key] = repr(value)
        cp["sweep"] = sweep
        buf = []
        for section in cp.sections():
            buf.append(f"[{section}]")
            buf.extend(f"{k} = {v}" for k, v in cp[section].items())
            buf.append("")
        return "\n".join(buf)

    def write(self, path):
        Path(path).write_text(self.to_ini())


def _parse(cp):
    try:
        src = cp["source"] if cp.has_section("source") else {}
        source = SourceConfig(
            width=int(src.get("width", 128)),
            height=int(src.get("height", 128)),
            speckle_radius=float(src.get("speckle_radius", 2.0)),
            mean_intensity=float(src.get("mean_intensity", 1.0)),
            master_seed=int(src.get("master_seed", 42)),
        )
        get = lambda sec, key, fallback=None: cp.get(sec, key, fallback=fallback)  # noqa: E731
        cfg = RunConfig(source=source)
        cfg.mask = get("scene", "mask", cfg.mask)
        cfg.frames = int(get("acquisition", "frames", cfg.frames))
        cfg.store_frames = cp.getboolean("acquisition", "store_frames", fallback=True)
        cfg.detector_noise = float(get("acquisition", "detector_noise", 0.0))
        cfg.out_dir = get("output", "dir", cfg.out_dir)
        if cp.has_option("sweep", "methods"):
            cfg.methods = _list(get("sweep", "methods"), str.upper)
        if cp.has_option("sweep", "frame_counts"):
            cfg.frame_counts = _list(get("sweep", "frame_counts"), int)
        cfg.seeds = _list(get("sweep", "seeds", str(source.master_seed)), int)
        cfg.threshold_policy = get("sweep", "threshold_policy", "count").strip().lower()
        for key in ("t0_plus", "t0_minus"):
            raw = get("sweep", key)
            setattr(cfg, key, float(raw) if raw not in (None, "") else None)
        raw = get("sweep", "pool")
        cfg.pool = int(raw) if raw not in (None, "") else None
        cfg.mean_estimate_frames = int(get("sweep", "mean_estimate_frames", 120))
        cfg.exact_mean = cp.getboolean("sweep", "exact_mean", fallback=False)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if cfg.frames < 1:
        raise ConfigError("acquisition.frames must be >= 1")
    if cfg.threshold_policy not in ("count", "explicit"):
        raise ConfigError(f"threshold_policy must be 'count' or 'explicit', got {cfg.threshold_policy!r}")
    if cfg.threshold_policy == "explicit" and (cfg.t0_plus is None or cfg.t0_minus is None):
        raise ConfigError("explicit threshold policy needs t0_plus and t0_minus")
    if not cfg.detector_noise >= 0:
        raise ConfigError("detector_noise must be >= 0")
    return cfg


def load_config(path=None, text=None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        if text is not None:
            cp.read_string(text)
        else:
            with open(path) as fh:
                cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    return _parse(cp)
