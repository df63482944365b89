"""Global response normalization: norm-based channel recalibration."""

import torch
from torch import nn

from ..errors import ConfigurationError


def grn(x, gamma, beta, eps=1e-6):
    """Recalibrate channels by their relative L2 norms.

    Per batch item, each channel's spatial L2 norm is divided by the mean
    norm across channels to give a per-channel coefficient ``n``; the result
    is ``gamma * (x * n) + beta + x``. With zero ``gamma``/``beta`` this is
    the identity. ``eps`` guards the all-zero input.
    """
    if x.ndim != 4:
        raise ConfigurationError(f"expected a 4-d feature tensor, got shape {tuple(x.shape)}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ConfigurationError(
            f"gamma/beta of lengths {tuple(gamma.shape)}/{tuple(beta.shape)} "
            f"do not match {channels} channels"
        )
    g = torch.linalg.vector_norm(x, dim=(2, 3), keepdim=True)
    n = g / (g.mean(dim=1, keepdim=True) + eps)
    return gamma.view(1, -1, 1, 1) * (x * n) + beta.view(1, -1, 1, 1) + x


class GRN(nn.Module):
    """Learnable GRN layer; ``gamma`` and ``beta`` start at zero (identity)."""

    def __init__(self, channels, eps=1e-6):
        super().__init__()
        self.gamma = nn.Parameter(torch.zeros(channels))
        self.beta = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        return grn(x, self.gamma, self.beta, self.eps)
