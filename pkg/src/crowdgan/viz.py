"""Heat-map overlays for abnormality maps.

The colormap is a fixed piecewise-linear ramp over five stops:
blue (0.0), cyan (0.25), green (0.5), yellow (0.75), red (1.0).
Each pixel is blended over the frame with opacity 0.5 * A, so zero-score
pixels show the frame untouched and full-score pixels mix the frame equally
with pure red.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from .data import AbnormalityMap, Frame
from .errors import InputError

COLOR_STOPS = (
    (0.00, (0.0, 0.0, 1.0)),
    (0.25, (0.0, 1.0, 1.0)),
    (0.50, (0.0, 1.0, 0.0)),
    (0.75, (1.0, 1.0, 0.0)),
    (1.00, (1.0, 0.0, 0.0)),
)
OVERLAY_ALPHA = 0.5


def colormap(values: np.ndarray) -> np.ndarray:
    """Map HxW values in [0,1] to HxWx3 colors along the fixed ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    xs = np.array([s for s, _ in COLOR_STOPS])
    channels = [
        np.interp(v, xs, np.array([c[k] for _, c in COLOR_STOPS])) for k in range(3)
    ]
    return np.stack(channels, axis=-1)


def render_heatmap(
    amap: Union[AbnormalityMap, np.ndarray], frame: Union[Frame, np.ndarray]
) -> np.ndarray:
    """Frame with the abnormality map blended on top; unit-range HxWx3 output."""
    values = amap.values if isinstance(amap, AbnormalityMap) else np.asarray(amap, dtype=np.float64)
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if values.shape != pixels.shape[:2]:
        raise InputError(
            f"map shape {values.shape} does not match frame shape {pixels.shape[:2]}"
        )
    alpha = (OVERLAY_ALPHA * values)[:, :, None]
    blended = pixels.astype(np.float64) * (1.0 - alpha) + colormap(values) * alpha
    return np.clip(blended, 0.0, 1.0)
