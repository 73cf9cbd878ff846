"""Conditional U-Net generator: strided conv encoder to a bottleneck, mirrored
transposed-conv decoder, skip connections between symmetric stages.

Noise enters through dropout on the decoder stages nearest the bottleneck,
driven by an explicit torch.Generator so every sample is reproducible.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, InputError

MAX_STAGES = 8
DROPOUT_RATE = 0.5
DROPOUT_STAGES = 3  # decoder stages nearest the bottleneck carry dropout


def stage_filters(base_filters: int, stages: int) -> list[int]:
    """Per-stage encoder channel counts: doubling from base, capped at 8x."""
    return [min(2**k, 8) * base_filters for k in range(stages)]


def default_stages(resolution: int) -> int:
    """Stage count downsampling the given resolution to a 1x1 bottleneck, capped at 8."""
    return min(int(math.log2(resolution)), MAX_STAGES)


def _seeded_dropout(x: torch.Tensor, rate: float, gen: torch.Generator) -> torch.Tensor:
    keep = 1.0 - rate
    mask = (torch.rand(x.shape, generator=gen, dtype=x.dtype) < keep).to(x.dtype)
    return x * mask / keep


class _EncoderStage(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, use_bn: bool):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1)
        self.bn = nn.BatchNorm2d(out_ch) if use_bn else None

    def forward(self, x):
        x = self.conv(x)
        if self.bn is not None:
            x = self.bn(x)
        return F.leaky_relu(x, 0.2)


class _DecoderStage(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, use_bn: bool, use_dropout: bool, final: bool):
        super().__init__()
        self.deconv = nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1)
        self.bn = nn.BatchNorm2d(out_ch) if use_bn else None
        self.use_dropout = use_dropout
        self.final = final

    def forward(self, x, noise: Optional[torch.Generator]):
        x = self.deconv(x)
        if self.final:
            return torch.tanh(x)
        if self.bn is not None:
            x = self.bn(x)
        if self.use_dropout and noise is not None:
            x = _seeded_dropout(x, DROPOUT_RATE, noise)
        return F.relu(x)


class UNetGenerator(nn.Module):
    """Same-size cross-channel image translator operating in [-1, 1] space."""

    def __init__(
        self,
        resolution: int = 256,
        base_filters: int = 64,
        stages: Optional[int] = None,
        in_channels: int = 3,
        out_channels: int = 3,
    ):
        super().__init__()
        if resolution < 2 or resolution & (resolution - 1) != 0:
            raise ConfigError(f"resolution must be a power of two, got {resolution}")
        stages = default_stages(resolution) if stages is None else stages
        if stages < 2:
            raise ConfigError(f"need at least 2 stages, got {stages}")
        if 2**stages > resolution:
            raise ConfigError(
                f"resolution {resolution} cannot be downsampled through {stages} stages"
            )
        self.resolution = resolution
        self.base_filters = base_filters
        self.stages = stages
        self.in_channels = in_channels
        self.out_channels = out_channels

        f = stage_filters(base_filters, stages)
        enc = []
        ch = in_channels
        for k in range(stages):
            # no BN on the outermost stage nor on the bottleneck
            enc.append(_EncoderStage(ch, f[k], use_bn=0 < k < stages - 1))
            ch = f[k]
        self.enc = nn.ModuleList(enc)

        dec = []
        for i in range(stages):
            in_ch = f[stages - 1] if i == 0 else 2 * f[stages - 1 - i]
            final = i == stages - 1
            out_ch = out_channels if final else f[stages - 2 - i]
            dec.append(
                _DecoderStage(
                    in_ch,
                    out_ch,
                    use_bn=not final,
                    use_dropout=(i < DROPOUT_STAGES) and not final,
                    final=final,
                )
            )
        self.dec = nn.ModuleList(dec)

    def forward(self, x: torch.Tensor, noise: Optional[torch.Generator] = None) -> torch.Tensor:
        if x.shape[-2:] != (self.resolution, self.resolution) or x.shape[-3] != self.in_channels:
            raise InputError(
                f"expected {self.in_channels}x{self.resolution}x{self.resolution} input, "
                f"got {tuple(x.shape)}"
            )
        skips = []
        h = x
        for stage in self.enc:
            h = stage(h)
            skips.append(h)
        for i, stage in enumerate(self.dec):
            if i > 0:
                h = torch.cat([h, skips[self.stages - 1 - i]], dim=1)
            h = stage(h, noise)
        return h

    def generate(self, x: np.ndarray, noise_seed: Optional[int] = None) -> np.ndarray:
        """Translate one unit-range HxWx3 image; dropout is active iff noise_seed is given."""
        arr = np.asarray(x, dtype=np.float32)
        if arr.shape != (self.resolution, self.resolution, 3):
            raise InputError(
                f"expected {self.resolution}x{self.resolution}x3 input, got shape {arr.shape}"
            )
        t = torch.from_numpy(arr * 2.0 - 1.0).permute(2, 0, 1).unsqueeze(0)
        gen = None
        if noise_seed is not None:
            gen = torch.Generator()
            gen.manual_seed(int(noise_seed))
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                out = self.forward(t, noise=gen)
        finally:
            self.train(was_training)
        out01 = (out[0].permute(1, 2, 0).numpy() + 1.0) / 2.0
        return np.clip(out01, 0.0, 1.0).astype(np.float32)

    def manifest(self) -> dict:
        return {
            "kind": "generator",
            "resolution": self.resolution,
            "base_filters": self.base_filters,
            "stages": self.stages,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_manifest(cls, m: dict) -> "UNetGenerator":
        return cls(
            resolution=m["resolution"],
            base_filters=m["base_filters"],
            stages=m["stages"],
            in_channels=m["in_channels"],
            out_channels=m["out_channels"],
        )


def gaussian_init_(module: nn.Module, seed: int) -> None:
    """Seeded init: conv kernels ~ N(0, 0.02^2), BN scales ~ N(1, 0.02^2), biases 0."""
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * 0.02)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.BatchNorm2d):
                m.weight.copy_(1.0 + torch.randn(m.weight.shape, generator=gen) * 0.02)
                m.bias.zero_()


def init_generator(
    seed: int,
    resolution: int,
    base_filters: int = 64,
    stages: Optional[int] = None,
) -> UNetGenerator:
    """Freshly initialized generator; identical seeds yield identical parameters."""
    net = UNetGenerator(resolution=resolution, base_filters=base_filters, stages=stages)
    gaussian_init_(net, seed)
    return net


def generate(
    params: UNetGenerator, x: np.ndarray, noise_seed: Optional[int] = None
) -> np.ndarray:
    """Function-call form of UNetGenerator.generate."""
    return params.generate(x, noise_seed=noise_seed)
