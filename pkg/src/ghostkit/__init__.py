"""ghostkit: pseudothermal ghost-imaging simulation and reconstruction.

Synthesizes speckle frames, runs a virtual dual-arm acquisition against a
transmission mask, reconstructs images with GI, NGI, DGI, CI and the
double-threshold DTTCI estimator, and scores them by SNR.
"""
from ._accel import BACKEND
from .acquisition import (
    AcquisitionRun,
    ArrayFrames,
    FrameRecord,
    GeneratedFrames,
    bucket_signal,
    reference_total,
    relative_normalization_gap,
    run_acquisition,
    run_from_frames,
)
from .errors import *  # noqa: F401,F403
from .evaluation import (
    Cell,
    CountPolicy,
    ExplicitPolicy,
    SnrReport,
    SnrRow,
    equalize_histogram,
    evaluate,
    normalize_unit,
    score,
    snr,
    sweep,
)
from .recon import (
    METHODS,
    Plan,
    ReconImage,
    ci_registers,
    reconstruct_ci,
    reconstruct_dgi,
    reconstruct_dttci,
    reconstruct_gi,
    reconstruct_ngi,
)
from .scene import TransmissionMask, builtin_mask, load_mask, mask_from_spec, save_mask
from .speckle import (
    FrameStatistics,
    IntensityFrame,
    SourceConfig,
    exceedance_fraction,
    frame_statistics,
    generate_block,
    generate_frame,
    intensity_autocorrelation,
)
from .store import load_store, save_store
from .thresholding import (
    Registers,
    ThresholdPair,
    balance_registers,
    estimate_mean_transmission,
    exact_mean_transmission,
    partition_frames,
    register_dispersion,
    select_count,
    thresholds_for_count,
)

__version__ = "0.1.0"
