"""Central finite-difference gradient checking for the network tests."""

import numpy as np
import torch


def max_relative_gradient_error(
    model, loss_fn, coords_per_tensor=4, eps=1e-5, seed=0
):
    """Worst relative error between backprop and central finite differences.

    loss_fn() must rebuild the scalar loss from the model's current
    parameters. The model should be in double precision; batch-norm running
    stats do not disturb the check because train-mode normalization uses
    batch statistics only.
    """
    loss = loss_fn()
    model.zero_grad()
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _, param in model.named_parameters():
        flat = param.data.view(-1)
        grad = param.grad.view(-1)
        n = min(coords_per_tensor, flat.numel())
        for i in rng.choice(flat.numel(), size=n, replace=False):
            original = flat[i].item()
            flat[i] = original + eps
            plus = float(loss_fn().detach())
            flat[i] = original - eps
            minus = float(loss_fn().detach())
            flat[i] = original
            fd = (plus - minus) / (2.0 * eps)
            analytic = grad[i].item()
            scale = max(abs(fd), abs(analytic), 1e-4)
            worst = max(worst, abs(fd - analytic) / scale)
    return worst
