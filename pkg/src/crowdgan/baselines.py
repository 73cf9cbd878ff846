"""Ablation detectors: generator reconstruction error and single-channel grids.

The generator baseline reconstructs each channel from the other, reduces the
absolute error over color channels, normalizes each channel by its own
per-video maximum, and fuses with double weight on the motion channel. High
error marks abnormality directly, so no inversion is applied. The
single-channel variants run the discriminator pipeline on one grid only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import AbnormalityMap, Direction, FlowImage, Frame, ScoreMap
from .detection import abnormality_map, normalize_video, upsample_grid
from .errors import ConfigError, InputError
from .flow import DEFAULT_MOTION_EPSILON, motion_mask
from .training import TrainedTask

CHANNELS = ("F", "O")
FUSION_WEIGHTS = (1.0, 2.0)  # (appearance, motion), normalized by their sum


@dataclass(frozen=True)
class ReconstructionErrors:
    """Per-pixel absolute reconstruction errors for both channels."""

    e_f: np.ndarray
    e_o: np.ndarray

    def __post_init__(self):
        for name, arr in (("e_f", self.e_f), ("e_o", self.e_o)):
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise InputError(f"{name} must be HxWx3, got shape {arr.shape}")
            if arr.min() < 0:
                raise InputError(f"{name} must be nonnegative")
        if self.e_f.shape != self.e_o.shape:
            raise InputError(
                f"error shape mismatch {self.e_f.shape} vs {self.e_o.shape}"
            )


def reconstruct(
    task_fo: TrainedTask, task_of: TrainedTask, frame: Frame, flow: FlowImage
) -> tuple[np.ndarray, np.ndarray]:
    """(r_O, r_F): each channel rendered from the other, dropout disabled."""
    for task in (task_fo, task_of):
        if task.generator.resolution != frame.resolution:
            raise ConfigError(
                f"checkpoint resolution {task.generator.resolution} "
                f"!= frame resolution {frame.resolution}"
            )
    r_o = task_fo.generator.generate(frame.pixels)
    r_f = task_of.generator.generate(flow.channels)
    return r_o, r_f


def reconstruction_errors(
    frame: Frame, flow: FlowImage, r_f: np.ndarray, r_o: np.ndarray
) -> ReconstructionErrors:
    """Elementwise |original - reconstruction| for both channels."""
    if frame.pixels.shape != r_f.shape:
        raise InputError(
            f"frame shape {frame.pixels.shape} != reconstruction shape {r_f.shape}"
        )
    if flow.channels.shape != r_o.shape:
        raise InputError(
            f"flow shape {flow.channels.shape} != reconstruction shape {r_o.shape}"
        )
    return ReconstructionErrors(
        e_f=np.abs(frame.pixels.astype(np.float64) - r_f),
        e_o=np.abs(flow.channels.astype(np.float64) - r_o),
    )


def _normalize_channel(maps: list[np.ndarray]) -> list[np.ndarray]:
    peak = max(float(m.max()) for m in maps)
    if peak == 0.0:
        return maps
    return [m / peak for m in maps]


def generator_baseline_map(
    errors: Sequence[ReconstructionErrors],
    flows: Sequence[FlowImage],
    motion_epsilon: float = DEFAULT_MOTION_EPSILON,
) -> list[AbnormalityMap]:
    """Reconstruction-error abnormality maps for one video.

    Each channel's color-mean error map is normalized by that channel's own
    per-video maximum; the fusion is (1 * e_f + 2 * e_o) / 3, gated by the
    motion mask without inversion.
    """
    if not errors:
        raise InputError("empty video: no reconstruction errors")
    if len(errors) != len(flows):
        raise InputError(
            f"need one flow per error pair: {len(errors)} errors vs {len(flows)} flows"
        )
    ef = _normalize_channel([e.e_f.mean(axis=2) for e in errors])
    eo = _normalize_channel([e.e_o.mean(axis=2) for e in errors])
    wf, wo = FUSION_WEIGHTS
    out = []
    for t, flow in enumerate(flows):
        fusedmap = (wf * ef[t] + wo * eo[t]) / (wf + wo)
        mask = motion_mask(flow, motion_epsilon)
        out.append(
            AbnormalityMap(
                values=np.where(mask, fusedmap, 0.0),
                video_id=flow.video_id,
                index=flow.index,
            )
        )
    return out


def single_channel_grid(task: TrainedTask, frame: Frame, flow: FlowImage) -> ScoreMap:
    """Score grid from one task only: D(flow, frame) for channel F (the
    flow-to-frames task), D(frame, flow) for channel O (frames-to-flow)."""
    if task.discriminator.resolution != frame.resolution:
        raise ConfigError(
            f"checkpoint resolution {task.discriminator.resolution} "
            f"!= frame resolution {frame.resolution}"
        )
    if task.direction is Direction.FLOW_TO_FRAME:
        grid = task.discriminator.score_grid(flow.channels, frame.pixels)
    else:
        grid = task.discriminator.score_grid(frame.pixels, flow.channels)
    return ScoreMap(grid=grid.grid, video_id=frame.video_id, index=frame.index)


def single_channel_map(
    task: TrainedTask,
    channel: str,
    frames: Sequence[Frame],
    flows: Sequence[FlowImage],
    motion_epsilon: float = DEFAULT_MOTION_EPSILON,
) -> list[AbnormalityMap]:
    """Detection pipeline with fusion replaced by one selected grid."""
    if channel not in CHANNELS:
        raise InputError(f"channel must be one of {CHANNELS}, got {channel!r}")
    wanted = Direction.FLOW_TO_FRAME if channel == "F" else Direction.FRAME_TO_FLOW
    if task.direction is not wanted:
        raise InputError(
            f"channel {channel} needs a {wanted.value} task, got {task.direction.value}"
        )
    if len(flows) != len(frames) - 1:
        raise InputError(
            f"need one flow per consecutive frame pair: "
            f"{len(frames)} frames vs {len(flows)} flows"
        )
    grids = [
        single_channel_grid(task, frames[t], flows[t]) for t in range(len(flows))
    ]
    normalized = normalize_video(grids)
    return [
        abnormality_map(
            upsample_grid(n.grid, frames[t].resolution), flows[t], motion_epsilon
        )
        for t, n in enumerate(normalized)
    ]
