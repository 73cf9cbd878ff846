"""Cross-channel adversarial anomaly detection for surveillance video.

Two conditional generative adversarial networks are trained on normal-only
footage: one translates frames to optical flow, the other flow to frames.
At test time only the patch discriminators run; low patch-realness marks
unfamiliar appearance-motion combinations, which become abnormality maps
after fusion, per-video normalization, upsampling, and motion masking.
"""

from .data import (
    DEFAULT_MAX_DISPLACEMENT,
    DEFAULT_RESOLUTION,
    AbnormalityMap,
    Direction,
    FlowImage,
    Frame,
    GroundTruth,
    PairedSample,
    ScoreMap,
    build_pairs,
    decode_flow,
    encode_flow,
    rescale_frame,
)
from .errors import ConfigError, CrowdGANError, FormatError, InputError
from .flow import (
    DEFAULT_MOTION_EPSILON,
    FlowConfig,
    compute_flow,
    load_precomputed_flow,
    motion_mask,
    save_flow,
)
from .generator import UNetGenerator, generate, init_generator
from .discriminator import PatchDiscriminator, init_discriminator, score_grid, score_scalar
from .training import (
    TrainConfig,
    TrainedTask,
    discriminator_loss,
    generator_adversarial_loss,
    l1_loss,
    train_step,
    train_task,
)
from .checkpoint import load_model, load_task, save_model, save_task
from .detection import (
    VideoScores,
    abnormality_map,
    detect_video,
    frame_score_maps,
    fuse,
    normalize_video,
    upsample_grid,
)
from .baselines import (
    ReconstructionErrors,
    generator_baseline_map,
    reconstruct,
    reconstruction_errors,
    single_channel_map,
)
from .evaluation import (
    RocCurve,
    RocPoint,
    auc,
    eer,
    frame_level_eval,
    pixel_level_eval,
)
from .synthetic import (
    AnomalyKind,
    SceneSpec,
    generate_abnormal_video,
    generate_normal_video,
)
from .config import RunConfig, parse_config
from .viz import render_heatmap

__version__ = "0.1.0"
