"""Dense optical flow between consecutive frames.

A pyramidal Horn-Schunck solver provides a self-contained dense flow
estimate; higher-quality precomputed flow can be substituted through the
standard two-channel .flo file format (little-endian magic 202021.25).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy.ndimage import convolve as _convolve
from scipy.ndimage import correlate as _correlate
from scipy.ndimage import median_filter as _median_filter

from .data import DEFAULT_MAX_DISPLACEMENT, FlowImage, Frame, encode_flow
from .errors import ConfigError, FormatError, InputError

FLO_MAGIC = 202021.25
DEFAULT_MOTION_EPSILON = 0.1  # pixels/frame below which a pixel counts as static

# Weighted neighbour average used by the Horn-Schunck update.
_AVG_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]], dtype=np.float32
)
_KX = np.array([[-1, 1], [-1, 1]], dtype=np.float32) * 0.25
_KY = np.array([[-1, -1], [1, 1]], dtype=np.float32) * 0.25
_KT = np.ones((2, 2), dtype=np.float32) * 0.25


@dataclass(frozen=True)
class FlowConfig:
    """Solver settings for the pyramidal Horn-Schunck estimator."""

    pyramid_levels: int = 3
    iterations_per_level: int = 80
    smoothness_weight: float = 0.02
    median_size: int = 5
    motion_epsilon: float = DEFAULT_MOTION_EPSILON
    max_displacement: float = DEFAULT_MAX_DISPLACEMENT

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ConfigError("pyramid_levels must be >= 1")
        if self.iterations_per_level < 1:
            raise ConfigError("iterations_per_level must be >= 1")
        if self.smoothness_weight <= 0:
            raise ConfigError("smoothness_weight must be positive")
        if self.median_size < 0 or (self.median_size > 0 and self.median_size % 2 == 0):
            raise ConfigError("median_size must be 0 (off) or an odd positive size")
        if self.motion_epsilon <= 0:
            raise ConfigError("motion_epsilon must be positive")
        if self.max_displacement <= 0:
            raise ConfigError("max_displacement must be positive")


def _to_gray(frame: Frame) -> np.ndarray:
    return frame.pixels.mean(axis=2, dtype=np.float32)


def _derivatives(a: np.ndarray, b: np.ndarray):
    # 2x2x2-cube estimates; the stencils are correlation kernels, so use
    # correlate (convolve would mirror them and flip the derivative sign).
    fx = _correlate(a, _KX, mode="nearest") + _correlate(b, _KX, mode="nearest")
    fy = _correlate(a, _KY, mode="nearest") + _correlate(b, _KY, mode="nearest")
    ft = _correlate(b, _KT, mode="nearest") - _correlate(a, _KT, mode="nearest")
    return fx, fy, ft


def _horn_schunck(a: np.ndarray, b: np.ndarray, alpha: float, iterations: int):
    """Classic Horn-Schunck iteration for the residual flow between a and b."""
    fx, fy, ft = _derivatives(a, b)
    denom = alpha**2 + fx**2 + fy**2
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    for _ in range(iterations):
        u_avg = _convolve(u, _AVG_KERNEL, mode="nearest")
        v_avg = _convolve(v, _AVG_KERNEL, mode="nearest")
        shared = (fx * u_avg + fy * v_avg + ft) / denom
        u = u_avg - fx * shared
        v = v_avg - fy * shared
    return u, v


def _warp(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = image.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
    return cv2.remap(
        image,
        xs + u,
        ys + v,
        interpolation=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_REPLICATE,
    )


def compute_flow(a: Frame, b: Frame, cfg: FlowConfig = FlowConfig()) -> FlowImage:
    """Estimate the dense flow carrying frame a onto frame b.

    Coarse-to-fine: at each pyramid level the accumulated flow warps b toward
    a and a Horn-Schunck pass estimates the residual; the result is encoded
    via the unit-range flow mapping.
    """
    if a.pixels.shape != b.pixels.shape:
        raise InputError(
            f"frames must share a shape, got {a.pixels.shape} vs {b.pixels.shape}"
        )
    ga, gb = _to_gray(a), _to_gray(b)

    levels = [(ga, gb)]
    for _ in range(cfg.pyramid_levels - 1):
        pa, pb = levels[-1]
        if min(pa.shape) < 16:
            break
        levels.append((cv2.pyrDown(pa), cv2.pyrDown(pb)))

    u = np.zeros_like(levels[-1][0])
    v = np.zeros_like(levels[-1][0])
    for i, (la, lb) in enumerate(reversed(levels)):
        if i > 0:
            h, w = la.shape
            u = cv2.resize(u, (w, h), interpolation=cv2.INTER_LINEAR) * 2.0
            v = cv2.resize(v, (w, h), interpolation=cv2.INTER_LINEAR) * 2.0
        warped = _warp(lb, u, v)
        du, dv = _horn_schunck(la, warped, cfg.smoothness_weight, cfg.iterations_per_level)
        u = u + du
        v = v + dv
        if cfg.median_size:
            # Knock out isolated leaks the smoothness term spreads into
            # weakly textured areas; true motion regions survive the median.
            u = _median_filter(u, size=cfg.median_size, mode="nearest")
            v = _median_filter(v, size=cfg.median_size, mode="nearest")

    return encode_flow(
        u, v, index=a.index, video_id=a.video_id, max_displacement=cfg.max_displacement
    )


def motion_mask(flow: FlowImage, motion_epsilon: float = DEFAULT_MOTION_EPSILON) -> np.ndarray:
    """Boolean mask of pixels whose raw flow magnitude exceeds motion_epsilon."""
    return flow.magnitude() > motion_epsilon


def save_flow(path, flow: FlowImage) -> None:
    """Write raw flow components in the two-channel .flo format."""
    u = flow.raw_u.astype("<f4")
    v = flow.raw_v.astype("<f4")
    h, w = u.shape
    interleaved = np.empty((h, w, 2), dtype="<f4")
    interleaved[:, :, 0] = u
    interleaved[:, :, 1] = v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", FLO_MAGIC))
        fh.write(struct.pack("<ii", w, h))
        fh.write(interleaved.tobytes())


def load_precomputed_flow(
    path,
    index: int = -1,
    video_id: str = "",
    max_displacement: float = DEFAULT_MAX_DISPLACEMENT,
) -> FlowImage:
    """Read a .flo file and encode it as a FlowImage."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated flow file header")
    (magic,) = struct.unpack_from("<f", raw, 0)
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad flow file magic {magic!r}")
    w, h = struct.unpack_from("<ii", raw, 4)
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: invalid flow dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2)
    return encode_flow(
        data[:, :, 0],
        data[:, :, 1],
        index=index,
        video_id=video_id,
        max_displacement=max_displacement,
    )
