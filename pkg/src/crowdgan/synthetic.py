"""Deterministic toy crowd videos for desk-scale end-to-end runs.

A fixed textured background (one simulated camera, shared by every video)
carries a handful of colored blob agents drifting at a common speed with
reflective walls. Abnormal videos add one object that is either much faster
or much larger than the agents, entering a quarter of the way through and
staying visible. All randomness flows from numpy's default PCG64 generator
seeded by the scene spec, so generation is bit-identical across runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import cv2
import numpy as np

from .data import Frame, GroundTruth
from .errors import InputError

LARGE_OBJECT_SCALE = 3.0  # radius multiple for the large_object anomaly
BACKGROUND_SEED = 1234  # one fixed scene texture per resolution
ANOMALY_ENTRY_FRACTION = 0.25  # anomaly appears this far into the video


class AnomalyKind(enum.Enum):
    FAST_OBJECT = "fast_object"
    LARGE_OBJECT = "large_object"


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to regenerate a video bit-exactly."""

    resolution: int = 64
    agent_count: int = 4
    agent_size: float = 5.0
    normal_speed: float = 1.0
    anomaly_kind: AnomalyKind = AnomalyKind.FAST_OBJECT
    anomaly_speed_multiplier: float = 4.0
    frames_per_video: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 16:
            raise InputError(f"resolution must be >= 16, got {self.resolution}")
        if self.frames_per_video < 1:
            raise InputError(
                f"frames_per_video must be >= 1, got {self.frames_per_video}"
            )
        if self.agent_count < 0:
            raise InputError(f"agent_count must be >= 0, got {self.agent_count}")
        if self.agent_size <= 0:
            raise InputError(f"agent_size must be positive, got {self.agent_size}")
        if self.normal_speed < 0:
            raise InputError(
                f"normal_speed must be nonnegative, got {self.normal_speed}"
            )
        if self.anomaly_speed_multiplier <= 1:
            raise InputError(
                "anomaly_speed_multiplier must be > 1, got "
                f"{self.anomaly_speed_multiplier}"
            )


@dataclass(frozen=True)
class _Blob:
    x: float
    y: float
    vx: float
    vy: float
    radius: float
    color: tuple[float, float, float]


def background(resolution: int) -> np.ndarray:
    """Fixed gray texture; a function of the resolution only.

    High-contrast smooth patches keep the flow data term anchored in static
    areas, so estimated motion stays confined to the moving objects.
    """
    rng = np.random.default_rng(BACKGROUND_SEED)
    coarse = rng.uniform(0.1, 0.9, (8, 8))
    tex = cv2.resize(coarse, (resolution, resolution), interpolation=cv2.INTER_CUBIC)
    tex = tex + rng.uniform(-0.05, 0.05, (resolution, resolution))
    gray = np.clip(tex, 0.0, 1.0).astype(np.float32)
    return np.repeat(gray[:, :, None], 3, axis=2)


def _spawn(rng: np.random.Generator, spec: SceneSpec, radius: float, speed: float) -> _Blob:
    lo, hi = radius, spec.resolution - 1 - radius
    if hi <= lo:
        raise InputError(
            f"blob radius {radius} does not fit in a {spec.resolution}px scene"
        )
    x, y = rng.uniform(lo, hi, size=2)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    color = tuple(rng.uniform(0.0, 0.3, size=3))
    return _Blob(x, y, speed * np.cos(angle), speed * np.sin(angle), radius, color)


def _step(blob: _Blob, resolution: int) -> _Blob:
    """Advance one frame with reflective walls; speed magnitude is preserved."""
    lo, hi = blob.radius, resolution - 1 - blob.radius
    x, y = blob.x + blob.vx, blob.y + blob.vy
    vx, vy = blob.vx, blob.vy
    while not lo <= x <= hi:
        x = 2 * lo - x if x < lo else 2 * hi - x
        vx = -vx
    while not lo <= y <= hi:
        y = 2 * lo - y if y < lo else 2 * hi - y
        vy = -vy
    return replace(blob, x=x, y=y, vx=vx, vy=vy)


def _render(canvas: np.ndarray, blob: _Blob) -> np.ndarray:
    """Alpha-blend one blob: soft 1px edge, radial shading toward the rim."""
    res = canvas.shape[0]
    yy, xx = np.mgrid[0:res, 0:res]
    dist = np.hypot(xx - blob.x, yy - blob.y)
    alpha = np.clip(blob.radius + 0.5 - dist, 0.0, 1.0)[:, :, None]
    shade = 1.0 - 0.4 * np.clip(dist / blob.radius, 0.0, 1.0) ** 2
    paint = shade[:, :, None] * np.asarray(blob.color)[None, None, :]
    return (canvas * (1.0 - alpha) + paint * alpha).astype(np.float32)


def _footprint(blob: _Blob, resolution: int) -> np.ndarray:
    yy, xx = np.mgrid[0:resolution, 0:resolution]
    return np.hypot(xx - blob.x, yy - blob.y) <= blob.radius


def _anomaly_geometry(spec: SceneSpec) -> tuple[float, float]:
    """(radius, speed) of the anomalous object."""
    if spec.anomaly_kind is AnomalyKind.FAST_OBJECT:
        return spec.agent_size, spec.anomaly_speed_multiplier * spec.normal_speed
    return LARGE_OBJECT_SCALE * spec.agent_size, spec.normal_speed


def _simulate(
    spec: SceneSpec, with_anomaly: bool, video_id: str
) -> tuple[list[Frame], list[GroundTruth]]:
    rng = np.random.default_rng(spec.seed)
    agents = [
        _spawn(rng, spec, spec.agent_size, spec.normal_speed)
        for _ in range(spec.agent_count)
    ]
    anomaly: Optional[_Blob] = None
    entry = int(spec.frames_per_video * ANOMALY_ENTRY_FRACTION) if with_anomaly else -1

    bg = background(spec.resolution)
    frames: list[Frame] = []
    gts: list[GroundTruth] = []
    empty = np.zeros((spec.resolution, spec.resolution), dtype=bool)
    for t in range(spec.frames_per_video):
        if with_anomaly and t == entry:
            radius, speed = _anomaly_geometry(spec)
            anomaly = _spawn(rng, spec, radius, speed)
        canvas = bg
        for agent in agents:
            canvas = _render(canvas, agent)
        mask = empty
        if anomaly is not None:
            canvas = _render(canvas, anomaly)
            mask = _footprint(anomaly, spec.resolution)
        frames.append(Frame(pixels=canvas, index=t, video_id=video_id))
        gts.append(GroundTruth(frame_label=bool(mask.any()), pixel_mask=mask))
        agents = [_step(a, spec.resolution) for a in agents]
        if anomaly is not None:
            anomaly = _step(anomaly, spec.resolution)
    return frames, gts


def generate_normal_video(
    spec: SceneSpec, video_id: str = "normal"
) -> tuple[list[Frame], list[GroundTruth]]:
    """Agents only; every frame labeled normal with an empty mask."""
    return _simulate(spec, with_anomaly=False, video_id=video_id)


def agent_tracks(spec: SceneSpec) -> np.ndarray:
    """Per-frame agent centers of the normal scene, shape (frames, agents, 2).

    Replays the seeded trajectories behind generate_normal_video; the last
    axis holds (x, y).
    """
    rng = np.random.default_rng(spec.seed)
    agents = [
        _spawn(rng, spec, spec.agent_size, spec.normal_speed)
        for _ in range(spec.agent_count)
    ]
    out = np.empty((spec.frames_per_video, spec.agent_count, 2), dtype=np.float64)
    for t in range(spec.frames_per_video):
        for k, blob in enumerate(agents):
            out[t, k] = (blob.x, blob.y)
        agents = [_step(a, spec.resolution) for a in agents]
    return out


def generate_abnormal_video(
    spec: SceneSpec, video_id: str = "abnormal"
) -> tuple[list[Frame], list[GroundTruth]]:
    """Agents plus one anomalous object visible from a quarter of the way in."""
    return _simulate(spec, with_anomaly=True, video_id=video_id)


def default_train_spec(seed: int = 0) -> SceneSpec:
    """Desk-scale training scene: 64px, 4 agents, 400 normal frames."""
    return SceneSpec(frames_per_video=400, seed=seed)


def default_test_specs(seed: int = 0) -> list[SceneSpec]:
    """Two 200-frame abnormal scenes: one fast object, one large object."""
    return [
        SceneSpec(seed=seed + 1, anomaly_kind=AnomalyKind.FAST_OBJECT),
        SceneSpec(seed=seed + 2, anomaly_kind=AnomalyKind.LARGE_OBJECT),
    ]
