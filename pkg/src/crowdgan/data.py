"""Core value types: frames, optical-flow images, training pairs, score and abnormality maps.

All types are immutable after construction (array payloads are marked
read-only), so they can be shared freely across worker threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import cv2
import numpy as np

from .errors import InputError

DEFAULT_RESOLUTION = 256
# Symmetric clamp (in pixels/frame) applied to raw flow components before
# mapping them into unit-range image channels.
DEFAULT_MAX_DISPLACEMENT = 16.0


class Direction(enum.Enum):
    """Cross-channel translation task: appearance->motion or motion->appearance."""

    FRAME_TO_FLOW = "f2o"
    FLOW_TO_FRAME = "o2f"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_unit_range(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise InputError(f"{name} contains non-finite values")
    lo, hi = float(arr.min(initial=0.0)), float(arr.max(initial=0.0))
    if lo < 0.0 or hi > 1.0:
        raise InputError(f"{name} values must lie in [0, 1], got range [{lo}, {hi}]")


@dataclass(frozen=True)
class Frame:
    """One RGB video frame with unit-range pixels."""

    pixels: np.ndarray  # H x W x 3, float32 in [0, 1]
    index: int  # frame position t within its video
    video_id: str

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InputError(f"frame pixels must be HxWx3, got shape {px.shape}")
        _check_unit_range("frame pixels", px)
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def resolution(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class FlowImage:
    """Dense optical flow encoded as a 3-channel unit-range image.

    Channels are (horizontal u, vertical v, magnitude), each affinely mapped
    to [0, 1] from the clamped raw field; the unclamped raw components are
    kept alongside for motion masking.
    """

    channels: np.ndarray  # H x W x 3, float32 in [0, 1]
    raw_u: np.ndarray  # H x W, pixels/frame
    raw_v: np.ndarray  # H x W, pixels/frame
    index: int
    video_id: str
    max_displacement: float = DEFAULT_MAX_DISPLACEMENT

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float32)
        u = np.asarray(self.raw_u, dtype=np.float32)
        v = np.asarray(self.raw_v, dtype=np.float32)
        if ch.ndim != 3 or ch.shape[2] != 3:
            raise InputError(f"flow channels must be HxWx3, got shape {ch.shape}")
        if u.shape != ch.shape[:2] or v.shape != ch.shape[:2]:
            raise InputError(
                f"raw flow shape {u.shape}/{v.shape} does not match channels {ch.shape[:2]}"
            )
        _check_unit_range("flow channels", ch)
        object.__setattr__(self, "channels", _freeze(ch))
        object.__setattr__(self, "raw_u", _freeze(u))
        object.__setattr__(self, "raw_v", _freeze(v))

    @property
    def resolution(self) -> int:
        return self.channels.shape[0]

    def magnitude(self) -> np.ndarray:
        """Raw (unclamped) flow magnitude in pixels/frame."""
        return np.sqrt(self.raw_u.astype(np.float64) ** 2 + self.raw_v.astype(np.float64) ** 2)


Image = Union[Frame, FlowImage]


def image_array(image: Image) -> np.ndarray:
    """The 3-channel unit-range array behind a Frame or FlowImage."""
    return image.pixels if isinstance(image, Frame) else image.channels


@dataclass(frozen=True)
class PairedSample:
    """One (input, target) training pair for a cross-channel task."""

    input_image: Image
    target_image: Image
    direction: Direction

    def __post_init__(self):
        if self.input_image.video_id != self.target_image.video_id:
            raise InputError("paired images must come from the same video")
        if self.input_image.index != self.target_image.index:
            raise InputError("paired images must share the same frame index")
        want_in, want_out = (
            (Frame, FlowImage)
            if self.direction is Direction.FRAME_TO_FLOW
            else (FlowImage, Frame)
        )
        if not isinstance(self.input_image, want_in) or not isinstance(self.target_image, want_out):
            raise InputError(
                f"direction {self.direction.value} expects ({want_in.__name__} -> "
                f"{want_out.__name__}) pairs"
            )


@dataclass(frozen=True)
class ScoreMap:
    """Grid of patch-discriminator probabilities for one frame.

    Per-discriminator maps live in [0, 1]; the fused (summed) map of the two
    tasks can reach 2 before per-video normalization brings it back to [0, 1].
    """

    grid: np.ndarray  # G x G, float32
    video_id: str = ""
    index: int = -1

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float32)
        if g.ndim != 2:
            raise InputError(f"score grid must be 2-D, got shape {g.shape}")
        if not np.isfinite(g).all() or g.min() < 0.0 or g.max() > 2.0:
            raise InputError("score grid values must lie in [0, 2]")
        object.__setattr__(self, "grid", _freeze(g))


@dataclass(frozen=True)
class AbnormalityMap:
    """Full-resolution per-pixel abnormality in [0, 1]; exactly 0 off the motion mask."""

    values: np.ndarray  # H x W, float32 in [0, 1]
    video_id: str = ""
    index: int = -1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise InputError(f"abnormality map must be 2-D, got shape {v.shape}")
        _check_unit_range("abnormality map", v)
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame annotation: abnormal/normal label plus optional pixel mask."""

    frame_label: bool
    pixel_mask: Optional[np.ndarray] = None  # H x W bool, required for pixel-level eval

    def __post_init__(self):
        if self.pixel_mask is not None:
            m = np.asarray(self.pixel_mask, dtype=bool)
            if m.ndim != 2:
                raise InputError(f"pixel mask must be 2-D, got shape {m.shape}")
            if bool(m.any()) != self.frame_label:
                raise InputError("frame label must agree with the pixel mask (label <=> any pixel set)")
            object.__setattr__(self, "pixel_mask", _freeze(m))


def encode_flow(
    raw_u: np.ndarray,
    raw_v: np.ndarray,
    index: int = -1,
    video_id: str = "",
    max_displacement: float = DEFAULT_MAX_DISPLACEMENT,
) -> FlowImage:
    """Encode a raw (u, v) flow field as a 3-channel unit-range image.

    u and v are clamped to [-c, +c] (c = max_displacement) and mapped
    affinely to [0, 1]; the magnitude channel is the clamped components'
    magnitude scaled by its maximum c*sqrt(2). Zero flow encodes to
    (0.5, 0.5, 0.0).
    """
    u = np.asarray(raw_u, dtype=np.float32)
    v = np.asarray(raw_v, dtype=np.float32)
    if u.shape != v.shape:
        raise InputError(f"flow components must share a shape, got {u.shape} vs {v.shape}")
    if u.ndim != 2:
        raise InputError(f"flow components must be 2-D, got shape {u.shape}")
    c = float(max_displacement)
    if c <= 0:
        raise InputError("max_displacement must be positive")
    uc = np.clip(u, -c, c)
    vc = np.clip(v, -c, c)
    mag = np.sqrt(uc.astype(np.float64) ** 2 + vc.astype(np.float64) ** 2)
    channels = np.stack(
        [
            (uc + c) / (2.0 * c),
            (vc + c) / (2.0 * c),
            (mag / (c * np.sqrt(2.0))).astype(np.float32),
        ],
        axis=2,
    )
    return FlowImage(
        channels=channels,
        raw_u=u,
        raw_v=v,
        index=index,
        video_id=video_id,
        max_displacement=c,
    )


def decode_flow(
    channels: np.ndarray, max_displacement: float = DEFAULT_MAX_DISPLACEMENT
) -> tuple[np.ndarray, np.ndarray]:
    """Invert encode_flow's u/v channels back to clamped raw components."""
    ch = np.asarray(channels)
    if ch.ndim != 3 or ch.shape[2] != 3:
        raise InputError(f"encoded flow must be HxWx3, got shape {ch.shape}")
    c = float(max_displacement)
    u = ch[:, :, 0].astype(np.float64) * (2.0 * c) - c
    v = ch[:, :, 1].astype(np.float64) * (2.0 * c) - c
    return u, v


def build_pairs(
    frames: list[Frame], flows: list[FlowImage], direction: Direction
) -> list[PairedSample]:
    """Pair frame t with the flow computed from frames t and t+1.

    Expects len(flows) == len(frames) - 1; returns one sample per flow,
    ordered by frame index.
    """
    if len(frames) == 0:
        raise InputError("need at least one frame")
    if len(flows) != len(frames) - 1:
        raise InputError(
            f"expected {len(frames) - 1} flow images for {len(frames)} frames, got {len(flows)}"
        )
    pairs = []
    for frame, flow in zip(frames, flows):
        if direction is Direction.FRAME_TO_FLOW:
            pairs.append(PairedSample(frame, flow, direction))
        else:
            pairs.append(PairedSample(flow, frame, direction))
    return pairs


def rescale_frame(
    image: np.ndarray,
    index: int = -1,
    video_id: str = "",
    resolution: int = DEFAULT_RESOLUTION,
) -> Frame:
    """Bilinearly rescale an HxWx3 unit-range array to the working resolution.

    Grayscale (HxW or HxWx1) input is replicated to 3 channels first.
    """
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError(f"expected a nonempty HxWx3 (or HxW) image, got shape {arr.shape}")
    if arr.shape[0] != resolution or arr.shape[1] != resolution:
        arr = cv2.resize(arr, (resolution, resolution), interpolation=cv2.INTER_LINEAR)
    return Frame(pixels=np.clip(arr, 0.0, 1.0), index=index, video_id=video_id)
