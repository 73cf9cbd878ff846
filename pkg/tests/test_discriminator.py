"""Patch discriminator: grid arithmetic, receptive field, scoring, gradients."""

import numpy as np
import pytest
import torch

from crowdgan.discriminator import (
    CANONICAL_PLAN,
    PROB_EPS,
    PatchDiscriminator,
    init_discriminator,
    score_grid,
    score_scalar,
)
from crowdgan.errors import ConfigError, InputError
from crowdgan.training import discriminator_loss, generator_adversarial_loss

from fdcheck import max_relative_gradient_error

MINIATURE_PLAN = ((1, 2, False), (2, 1, True))


def random_pair(res, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (res, res, 3)).astype(np.float32)
    u = rng.uniform(0, 1, (res, res, 3)).astype(np.float32)
    return x, u


class TestGridArithmetic:
    @pytest.mark.parametrize("resolution,expected", [(256, 30), (64, 6), (32, 2)])
    def test_grid_sizes(self, resolution, expected):
        net = PatchDiscriminator(resolution=resolution, base_filters=2)
        assert net.grid_size == expected

    def test_grid_shape_from_forward(self):
        net = PatchDiscriminator(resolution=64, base_filters=2)
        out = net(torch.zeros(1, 6, 64, 64))
        assert out.shape == (1, 1, 6, 6)

    def test_too_small_resolution_rejected(self):
        with pytest.raises(ConfigError):
            PatchDiscriminator(resolution=16, base_filters=2)

    def test_six_channel_input_required(self):
        net = PatchDiscriminator(resolution=32, base_filters=2)
        with pytest.raises(InputError):
            net(torch.zeros(1, 3, 32, 32))

    def test_same_seed_identical_parameters(self):
        a = init_discriminator(5, resolution=32, base_filters=2)
        b = init_discriminator(5, resolution=32, base_filters=2)
        for pa, pb in zip(a.state_dict().values(), b.state_dict().values()):
            assert torch.equal(pa, pb)


class TestReceptiveField:
    def test_canonical_extent(self):
        net = PatchDiscriminator(resolution=256, base_filters=2)
        assert net.receptive_field() == 70

    def test_bounds_clip_to_image(self):
        net = PatchDiscriminator(resolution=256, base_filters=2)
        (r0, r1), (c0, c1) = net.receptive_field_bounds(0, 0)
        assert r0 == 0 and c0 == 0
        assert r1 - r0 + 1 <= 70
        (r0, r1), (c0, c1) = net.receptive_field_bounds(15, 15)
        assert r1 - r0 + 1 == 70
        assert c1 - c0 + 1 == 70

    def test_out_of_grid_cell_rejected(self):
        net = PatchDiscriminator(resolution=64, base_filters=2)
        with pytest.raises(InputError):
            net.receptive_field_bounds(6, 0)

    def test_distant_perturbation_leaves_cell_unchanged(self):
        net = init_discriminator(3, resolution=64, base_filters=2)
        net.eval()
        x, u = random_pair(64, seed=1)
        base = net.score_grid(x, u).grid
        cell = (0, 0)
        (r0, r1), (c0, c1) = net.receptive_field_bounds(*cell)
        u2 = u.copy()
        # flip a pixel well outside the cell's input window
        u2[r1 + 5, c1 + 5] = 1.0 - u2[r1 + 5, c1 + 5]
        after = net.score_grid(x, u2).grid
        assert abs(float(after[cell]) - float(base[cell])) < 1e-7

    def test_inside_perturbation_moves_cell(self):
        net = init_discriminator(3, resolution=64, base_filters=2)
        net.eval()
        x, u = random_pair(64, seed=2)
        base = net.score_grid(x, u).grid
        u2 = u.copy()
        u2[1, 1] = 1.0 - u2[1, 1]
        after = net.score_grid(x, u2).grid
        assert abs(float(after[0, 0]) - float(base[0, 0])) > 1e-9


class TestScoring:
    def test_grid_cells_are_probabilities(self):
        net = init_discriminator(0, resolution=32, base_filters=2)
        x, u = random_pair(32)
        grid = net.score_grid(x, u).grid
        assert grid.min() >= PROB_EPS
        assert grid.max() <= 1.0 - PROB_EPS

    def test_scalar_is_brute_force_mean(self):
        net = init_discriminator(0, resolution=64, base_filters=2)
        x, u = random_pair(64, seed=3)
        grid = net.score_grid(x, u).grid
        total = 0.0
        count = 0
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                total += float(grid[r, c])
                count += 1
        assert abs(net.score_scalar(x, u) - total / count) < 1e-7

    def test_scalar_bounded_by_grid(self):
        net = init_discriminator(1, resolution=32, base_filters=2)
        x, u = random_pair(32, seed=4)
        grid = net.score_grid(x, u).grid
        s = net.score_scalar(x, u)
        assert float(grid.min()) <= s <= float(grid.max())

    def test_condition_order_matters(self):
        net = init_discriminator(2, resolution=32, base_filters=2)
        x, u = random_pair(32, seed=5)
        forward = net.score_grid(x, u).grid
        swapped = net.score_grid(u, x).grid
        assert not np.array_equal(forward, swapped)

    def test_deterministic(self):
        net = init_discriminator(2, resolution=32, base_filters=2)
        x, u = random_pair(32, seed=6)
        np.testing.assert_array_equal(
            net.score_grid(x, u).grid, net.score_grid(x, u).grid
        )

    def test_function_forms_delegate(self):
        net = init_discriminator(2, resolution=32, base_filters=2)
        x, u = random_pair(32, seed=7)
        np.testing.assert_array_equal(
            score_grid(net, x, u).grid, net.score_grid(x, u).grid
        )
        assert score_scalar(net, x, u) == net.score_scalar(x, u)

    def test_shape_mismatch_rejected(self):
        net = init_discriminator(0, resolution=32, base_filters=2)
        x, _ = random_pair(32)
        with pytest.raises(InputError):
            net.score_grid(x, np.zeros((16, 16, 3), dtype=np.float32))


class TestManifest:
    def test_round_trip(self):
        net = PatchDiscriminator(resolution=64, base_filters=4)
        clone = PatchDiscriminator.from_manifest(net.manifest())
        assert clone.manifest() == net.manifest()
        assert clone.plan == CANONICAL_PLAN


class TestGradients:
    def test_discriminator_loss_gradients(self):
        torch.manual_seed(1)
        net = PatchDiscriminator(
            resolution=8, base_filters=2, plan=MINIATURE_PLAN
        ).double()
        net.train()
        x = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        real = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        fake = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1

        def loss_fn():
            return discriminator_loss(
                net.mean_score(x, real), net.mean_score(x, fake)
            )

        worst = max_relative_gradient_error(net, loss_fn, coords_per_tensor=3)
        assert worst <= 1e-3

    def test_adversarial_loss_gradients(self):
        torch.manual_seed(2)
        net = PatchDiscriminator(
            resolution=8, base_filters=2, plan=MINIATURE_PLAN
        ).double()
        net.train()
        x = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1
        fake = torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1

        def loss_fn():
            return generator_adversarial_loss(net.mean_score(x, fake))

        worst = max_relative_gradient_error(net, loss_fn, coords_per_tensor=3)
        assert worst <= 1e-3
