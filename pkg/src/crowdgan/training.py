"""Adversarial training of the two cross-channel translation tasks.

Each sample triggers one discriminator update followed by one generator
update (batch size 1). The discriminator minimizes
-[log d(real) + log(1 - d(fake))] over its mean patch score; the generator
minimizes -log d(fake) plus a weighted L1 reconstruction term.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
import torch

from .data import Direction, PairedSample, image_array
from .discriminator import PROB_EPS, PatchDiscriminator, init_discriminator
from .errors import ConfigError, InputError
from .generator import UNetGenerator, init_generator

OPTIMIZERS = ("momentum", "adaptive-moments")

Real = Union[float, torch.Tensor]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters. Defaults: 10 epochs, batch 1, SGD with
    momentum 0.5, learning rate 2e-4, L1 weight 100."""

    epochs: int = 10
    batch_size: int = 1
    optimizer: str = "momentum"
    momentum_or_beta1: float = 0.5
    learning_rate: float = 2e-4
    l1_weight: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size != 1:
            raise ConfigError(
                f"batch_size: only 1 is supported, got {self.batch_size}"
            )
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(
                f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}"
            )
        if not 0.0 <= self.momentum_or_beta1 < 1.0:
            raise ConfigError(
                f"momentum_or_beta1 must be in [0, 1), got {self.momentum_or_beta1}"
            )
        if self.learning_rate <= 0.0:
            raise ConfigError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        if self.l1_weight < 0.0:
            raise ConfigError(f"l1_weight must be >= 0, got {self.l1_weight}")


class LossRecord(NamedTuple):
    l1: float
    d_loss: float
    g_adv: float


def _clamp_prob(p: Real) -> Real:
    if isinstance(p, torch.Tensor):
        return torch.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    return min(max(float(p), PROB_EPS), 1.0 - PROB_EPS)


def l1_loss(y, r) -> Real:
    """Mean absolute difference between target y and rendering r."""
    if isinstance(y, torch.Tensor) or isinstance(r, torch.Tensor):
        if y.shape != r.shape:
            raise InputError(f"shape mismatch {tuple(y.shape)} vs {tuple(r.shape)}")
        return (y - r).abs().mean()
    ya = np.asarray(y, dtype=np.float64)
    ra = np.asarray(r, dtype=np.float64)
    if ya.shape != ra.shape:
        raise InputError(f"shape mismatch {ya.shape} vs {ra.shape}")
    return float(np.abs(ya - ra).mean())


def discriminator_loss(d_real: Real, d_fake: Real) -> Real:
    """-[log d_real + log(1 - d_fake)], probabilities clamped away from {0, 1}."""
    dr, df = _clamp_prob(d_real), _clamp_prob(d_fake)
    if isinstance(dr, torch.Tensor) or isinstance(df, torch.Tensor):
        return -(torch.log(dr) + torch.log1p(-df))
    return -(math.log(dr) + math.log1p(-df))


def generator_adversarial_loss(d_fake: Real) -> Real:
    """Non-saturating adversarial term -log d_fake."""
    df = _clamp_prob(d_fake)
    if isinstance(df, torch.Tensor):
        return -torch.log(df)
    return -math.log(df)


def _make_optimizer(params, cfg: TrainConfig) -> torch.optim.Optimizer:
    if cfg.optimizer == "momentum":
        return torch.optim.SGD(
            params, lr=cfg.learning_rate, momentum=cfg.momentum_or_beta1
        )
    return torch.optim.Adam(
        params, lr=cfg.learning_rate, betas=(cfg.momentum_or_beta1, 0.999)
    )


@dataclass
class TaskState:
    """Mutable training state for one translation direction."""

    direction: Direction
    generator: UNetGenerator
    discriminator: PatchDiscriminator
    g_opt: torch.optim.Optimizer
    d_opt: torch.optim.Optimizer
    noise: torch.Generator
    step_count: int = 0


@dataclass
class TrainedTask:
    """Final parameters of one direction plus the per-iteration loss history."""

    direction: Direction
    generator: UNetGenerator
    discriminator: PatchDiscriminator
    loss_history: list[LossRecord] = field(default_factory=list)


def init_task(
    direction: Direction,
    cfg: TrainConfig,
    resolution: int,
    base_filters: int = 64,
) -> TaskState:
    """Fresh networks and optimizers; fully determined by (direction, cfg, shape)."""
    base = 4 * int(cfg.seed) + (0 if direction is Direction.FRAME_TO_FLOW else 2)
    generator = init_generator(base, resolution, base_filters=base_filters)
    discriminator = init_discriminator(base + 1, resolution, base_filters=base_filters)
    generator.train()
    discriminator.train()
    noise = torch.Generator()
    noise.manual_seed(base + 3)
    return TaskState(
        direction=direction,
        generator=generator,
        discriminator=discriminator,
        g_opt=_make_optimizer(generator.parameters(), cfg),
        d_opt=_make_optimizer(discriminator.parameters(), cfg),
        noise=noise,
    )


def _to_tensor(image01: np.ndarray) -> torch.Tensor:
    """HxWx3 unit-range array to a (1,3,H,W) float32 tensor in [-1, 1]."""
    arr = np.asarray(image01, dtype=np.float32) * 2.0 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def train_step(state: TaskState, sample: PairedSample, cfg: TrainConfig) -> LossRecord:
    """One discriminator update then one generator update on a single pair."""
    if sample.direction != state.direction:
        raise InputError(
            f"sample direction {sample.direction} does not match task {state.direction}"
        )
    x = _to_tensor(image_array(sample.input_image))
    y = _to_tensor(image_array(sample.target_image))
    g, d = state.generator, state.discriminator

    fake = g(x, noise=state.noise)

    d_loss = discriminator_loss(d.mean_score(x, y), d.mean_score(x, fake.detach()))
    state.d_opt.zero_grad()
    d_loss.backward()
    state.d_opt.step()

    l1 = l1_loss(y, fake)
    g_adv = generator_adversarial_loss(d.mean_score(x, fake))
    g_loss = g_adv + cfg.l1_weight * l1
    state.g_opt.zero_grad()
    g_loss.backward()
    state.g_opt.step()

    state.step_count += 1
    return LossRecord(float(l1.detach()), float(d_loss.detach()), float(g_adv.detach()))


def train_task(
    pairs: Sequence[PairedSample],
    cfg: TrainConfig,
    base_filters: int = 64,
    log_path: Optional[str] = None,
) -> TrainedTask:
    """Full training run: `epochs` seeded-shuffle passes over the pairs."""
    if not pairs:
        raise InputError("cannot train on an empty pair list")
    direction = pairs[0].direction
    for p in pairs:
        if p.direction != direction:
            raise InputError("all pairs must share one direction")
    resolution = image_array(pairs[0].input_image).shape[0]

    state = init_task(direction, cfg, resolution, base_filters=base_filters)
    rng = np.random.default_rng(cfg.seed)
    history: list[LossRecord] = []
    for _ in range(cfg.epochs):
        for idx in rng.permutation(len(pairs)):
            history.append(train_step(state, pairs[idx], cfg))
    if log_path is not None:
        write_loss_log(log_path, history)
    state.generator.eval()
    state.discriminator.eval()
    return TrainedTask(direction, state.generator, state.discriminator, history)


def write_loss_log(path: str, history: Sequence[LossRecord]) -> None:
    """Loss history as CSV with columns (iter, l1, d_loss, g_adv)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "l1", "d_loss", "g_adv"])
        for k, rec in enumerate(history):
            writer.writerow([k, repr(rec.l1), repr(rec.d_loss), repr(rec.g_adv)])
