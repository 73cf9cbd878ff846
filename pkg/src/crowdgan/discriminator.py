"""Patch-based conditional discriminator over a concatenated 6-channel input.

Five 4x4 convolutions (strides 2,2,2,1,1) map a 256px input to a 30x30 grid
of patch-realness probabilities; each grid cell sees a 70x70 input patch.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .data import ScoreMap
from .errors import ConfigError, InputError
from .generator import gaussian_init_

PROB_EPS = 1e-7  # keep probabilities away from {0, 1} for the log losses

# (channel multiple, stride, batch norm) per hidden stage; kernels are 4x4, padding 1.
CANONICAL_PLAN = ((1, 2, False), (2, 2, True), (4, 2, True), (8, 1, True))
KERNEL = 4
PADDING = 1


def _conv_out(size: int, stride: int) -> int:
    return (size + 2 * PADDING - KERNEL) // stride + 1


class _DiscStage(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int, use_bn: bool):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, KERNEL, stride, PADDING)
        self.bn = nn.BatchNorm2d(out_ch) if use_bn else None

    def forward(self, x):
        x = self.conv(x)
        if self.bn is not None:
            x = self.bn(x)
        return F.leaky_relu(x, 0.2)


class PatchDiscriminator(nn.Module):
    """Fully-convolutional realness scorer for (condition, candidate) image pairs."""

    def __init__(
        self,
        resolution: int = 256,
        base_filters: int = 64,
        in_channels: int = 6,
        plan=CANONICAL_PLAN,
    ):
        super().__init__()
        self.resolution = resolution
        self.base_filters = base_filters
        self.in_channels = in_channels
        self.plan = tuple((int(m), int(s), bool(b)) for m, s, b in plan)
        self.grid_size = self._grid_size(resolution)
        if self.grid_size < 1:
            raise ConfigError(
                f"resolution {resolution} is too small for the discriminator stage plan"
            )

        stages = []
        ch = in_channels
        for mult, stride, use_bn in self.plan:
            stages.append(_DiscStage(ch, base_filters * mult, stride, use_bn))
            ch = base_filters * mult
        self.stages = nn.ModuleList(stages)
        self.head = nn.Conv2d(ch, 1, KERNEL, 1, PADDING)  # logit head

    def _strides(self) -> list[int]:
        return [s for _, s, _ in self.plan] + [1]

    def _grid_size(self, resolution: int) -> int:
        size = resolution
        for stride in self._strides():
            size = _conv_out(size, stride)
        return size

    def receptive_field(self) -> int:
        """Input-pixel extent seen by one output cell."""
        rf = 1
        for stride in reversed(self._strides()):
            rf = (rf - 1) * stride + KERNEL
        return rf

    def receptive_field_bounds(self, row: int, col: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Inclusive input-pixel window (rows, cols) feeding grid cell (row, col), clipped."""
        if not (0 <= row < self.grid_size and 0 <= col < self.grid_size):
            raise InputError(f"cell ({row}, {col}) outside the {self.grid_size}^2 grid")
        bounds = []
        for idx in (row, col):
            lo = hi = idx
            for stride in reversed(self._strides()):
                lo = lo * stride - PADDING
                hi = hi * stride - PADDING + KERNEL - 1
            bounds.append((max(lo, 0), min(hi, self.resolution - 1)))
        return bounds[0], bounds[1]

    def forward(self, xu: torch.Tensor) -> torch.Tensor:
        """Probability grid (B, 1, G, G) for a concatenated 6-channel input in [-1, 1]."""
        if xu.shape[-3:] != (self.in_channels, self.resolution, self.resolution):
            raise InputError(
                f"expected {self.in_channels}x{self.resolution}x{self.resolution} input, "
                f"got {tuple(xu.shape)}"
            )
        h = xu
        for stage in self.stages:
            h = stage(h)
        return torch.sigmoid(self.head(h))

    def mean_score(self, x: torch.Tensor, u: torch.Tensor) -> torch.Tensor:
        """Average patch probability for a (condition, candidate) tensor pair in [-1, 1]."""
        return self.forward(torch.cat([x, u], dim=1)).mean()

    def _score_tensor(self, x: np.ndarray, u: np.ndarray) -> torch.Tensor:
        for name, arr in (("condition", x), ("candidate", u)):
            if arr.shape != (self.resolution, self.resolution, 3):
                raise InputError(
                    f"{name} image must be {self.resolution}x{self.resolution}x3, "
                    f"got shape {arr.shape}"
                )
        xu = np.concatenate([x, u], axis=2).astype(np.float32) * 2.0 - 1.0
        t = torch.from_numpy(xu).permute(2, 0, 1).unsqueeze(0)
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                grid = self.forward(t)
        finally:
            self.train(was_training)
        return grid[0, 0]

    def score_grid(self, x: np.ndarray, u: np.ndarray) -> ScoreMap:
        """Patch probabilities over the grid; condition image first, candidate second."""
        grid = self._score_tensor(x, u).numpy()
        return ScoreMap(grid=np.clip(grid, PROB_EPS, 1.0 - PROB_EPS))

    def score_scalar(self, x: np.ndarray, u: np.ndarray) -> float:
        """Arithmetic mean of the score grid."""
        return float(self.score_grid(x, u).grid.astype(np.float64).mean())

    def manifest(self) -> dict:
        return {
            "kind": "discriminator",
            "resolution": self.resolution,
            "base_filters": self.base_filters,
            "in_channels": self.in_channels,
            "plan": [list(p) for p in self.plan],
        }

    @classmethod
    def from_manifest(cls, m: dict) -> "PatchDiscriminator":
        return cls(
            resolution=m["resolution"],
            base_filters=m["base_filters"],
            in_channels=m["in_channels"],
            plan=tuple(tuple(p) for p in m["plan"]),
        )


def init_discriminator(
    seed: int, resolution: int, base_filters: int = 64
) -> PatchDiscriminator:
    """Freshly initialized discriminator; identical seeds yield identical parameters."""
    net = PatchDiscriminator(resolution=resolution, base_filters=base_filters)
    gaussian_init_(net, seed)
    return net


def score_grid(params: PatchDiscriminator, x: np.ndarray, u: np.ndarray) -> ScoreMap:
    """Function-call form of PatchDiscriminator.score_grid."""
    return params.score_grid(x, u)


def score_scalar(params: PatchDiscriminator, x: np.ndarray, u: np.ndarray) -> float:
    """Function-call form of PatchDiscriminator.score_scalar."""
    return params.score_scalar(x, u)
