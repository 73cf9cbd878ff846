"""Discriminator-only anomaly detection.

Per frame, both task discriminators score the (frame, flow) pair, the two
patch grids are summed, every grid in the video is divided by the single
per-video maximum, the result is upsampled to frame size, inverted, and
gated by the motion mask. Generators are never invoked here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import cv2
import numpy as np

from .data import AbnormalityMap, FlowImage, Frame, ScoreMap
from .errors import ConfigError, InputError
from .flow import DEFAULT_MOTION_EPSILON, motion_mask
from .training import TrainedTask


@dataclass(frozen=True)
class VideoScores:
    """Fused per-frame grids plus their video-wide maximum."""

    grids: tuple[np.ndarray, ...]
    per_video_max: float


def frame_score_maps(
    task_fo: TrainedTask, task_of: TrainedTask, frame: Frame, flow: FlowImage
) -> tuple[ScoreMap, ScoreMap]:
    """(S_F, S_O): realness grids for the appearance and the motion channel.

    S_O comes from the frames-to-flow discriminator applied to (frame, flow);
    S_F from the flow-to-frames discriminator applied to (flow, frame). The
    condition image always occupies the first three input channels.
    """
    for task in (task_fo, task_of):
        if task.discriminator.resolution != frame.resolution:
            raise ConfigError(
                f"checkpoint resolution {task.discriminator.resolution} "
                f"!= frame resolution {frame.resolution}"
            )
    s_o = task_fo.discriminator.score_grid(frame.pixels, flow.channels)
    s_f = task_of.discriminator.score_grid(flow.channels, frame.pixels)
    meta = {"video_id": frame.video_id, "index": frame.index}
    return (
        ScoreMap(grid=s_f.grid, **meta),
        ScoreMap(grid=s_o.grid, **meta),
    )


def fuse(s_f: ScoreMap, s_o: ScoreMap) -> ScoreMap:
    """Equal-weight cell-wise sum of the two channel grids."""
    if s_f.grid.shape != s_o.grid.shape:
        raise InputError(
            f"grid shape mismatch {s_f.grid.shape} vs {s_o.grid.shape}"
        )
    return ScoreMap(
        grid=s_f.grid + s_o.grid, video_id=s_f.video_id, index=s_f.index
    )


def video_scores(grids: Sequence[ScoreMap]) -> VideoScores:
    """Collect fused grids and the maximum cell value across the whole video."""
    if not grids:
        raise InputError("empty video: no score grids")
    return VideoScores(
        grids=tuple(g.grid for g in grids),
        per_video_max=max(float(g.grid.max()) for g in grids),
    )


def normalize_video(grids: Sequence[ScoreMap]) -> list[ScoreMap]:
    """Divide every cell of every grid by the single per-video maximum."""
    scores = video_scores(grids)
    m_s = scores.per_video_max
    return [
        ScoreMap(grid=g.grid / m_s, video_id=g.video_id, index=g.index)
        for g in grids
    ]


def upsample_grid(grid: np.ndarray, size: int) -> np.ndarray:
    """Bilinear upsampling of a score grid to size x size, clipped to [0, 1]."""
    up = cv2.resize(
        np.asarray(grid, dtype=np.float32), (size, size), interpolation=cv2.INTER_LINEAR
    )
    return np.clip(up.astype(np.float64), 0.0, 1.0)


def abnormality_map(
    upsampled: np.ndarray,
    flow: FlowImage,
    motion_epsilon: float = DEFAULT_MOTION_EPSILON,
) -> AbnormalityMap:
    """1 - normalized score on moving pixels, exactly 0 elsewhere."""
    values = np.asarray(upsampled, dtype=np.float64)
    if values.shape != flow.raw_u.shape:
        raise InputError(
            f"map shape {values.shape} != flow shape {flow.raw_u.shape}"
        )
    mask = motion_mask(flow, motion_epsilon)
    return AbnormalityMap(
        values=np.where(mask, 1.0 - values, 0.0),
        video_id=flow.video_id,
        index=flow.index,
    )


def detect_video(
    task_fo: TrainedTask,
    task_of: TrainedTask,
    frames: Sequence[Frame],
    flows: Sequence[FlowImage],
    motion_epsilon: float = DEFAULT_MOTION_EPSILON,
) -> list[AbnormalityMap]:
    """Full pipeline over one video; one map per (frame, flow) pair."""
    if len(flows) != len(frames) - 1:
        raise InputError(
            f"need one flow per consecutive frame pair: "
            f"{len(frames)} frames vs {len(flows)} flows"
        )
    fused = [
        fuse(*frame_score_maps(task_fo, task_of, frames[t], flows[t]))
        for t in range(len(flows))
    ]
    normalized = normalize_video(fused)
    return [
        abnormality_map(
            upsample_grid(n.grid, frames[t].resolution), flows[t], motion_epsilon
        )
        for t, n in enumerate(normalized)
    ]
