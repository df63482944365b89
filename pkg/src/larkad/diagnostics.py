"""Analysis instruments: normalized feature variance, feature entropy, ERF maps."""

from dataclasses import dataclass

import numpy as np
import torch

from .errors import ContractError


@dataclass(frozen=True)
class DiagnosticsConfig:
    entropy_bins: int = 256
    entropy_epsilon: float = 1e-12

    def __post_init__(self):
        if self.entropy_bins < 2:
            raise ContractError(f"entropy needs at least 2 bins, got {self.entropy_bins}")
        if self.entropy_epsilon <= 0:
            raise ContractError("entropy epsilon must be positive")


def feature_variance(pyramid, eps=1e-12):
    """Mean over levels of the element variance after global L2 normalization.

    Invariant under positive per-level scaling; a constant map contributes 0.
    """
    total = 0.0
    for level in pyramid.levels:
        x = level.detach().double()
        normalized = x / (torch.linalg.vector_norm(x) + eps)
        total += float(normalized.var(unbiased=False))
    return total / len(pyramid.levels)


def feature_entropy(pyramid, cfg: DiagnosticsConfig = None):
    """Mean over levels of the binned entropy (bits) of the normalized values.

    Each level is divided by its global L2 norm, quantized into uniform bins
    over its own [min, max] range and the bin frequencies p enter
    ``-sum(p * log2(p + eps))``. A degenerate range collapses to one bin.
    """
    cfg = cfg or DiagnosticsConfig()
    total = 0.0
    for level in pyramid.levels:
        x = level.detach().double()
        normalized = (x / (torch.linalg.vector_norm(x) + 1e-12)).cpu().numpy().ravel()
        lo, hi = float(normalized.min()), float(normalized.max())
        if hi == lo:
            counts = np.array([normalized.size], dtype=np.float64)
        else:
            counts, _ = np.histogram(normalized, bins=cfg.entropy_bins, range=(lo, hi))
            counts = counts.astype(np.float64)
        p = counts / normalized.size
        occupied = p > 0
        total += float(-(p[occupied] * np.log2(p[occupied] + cfg.entropy_epsilon)).sum())
    return total / len(pyramid.levels)


def erf_map(model, image):
    """Effective receptive field of the deepest encoder level's center unit.

    Backpropagates the channel-summed center activation to the input and
    returns the per-pixel absolute gradient (summed over input channels),
    normalized to [0, 1] by its maximum.
    """
    if image.ndim == 3:
        image = image.unsqueeze(0)
    if image.shape[0] != 1:
        raise ContractError("ERF probes a single image")
    x = image.detach().clone().requires_grad_(True)
    was_training = model.training
    model.eval()
    try:
        pyramid = model.encode(x) if hasattr(model, "encode") else model(x)
        deepest = pyramid.levels[-1]
        h, w = deepest.shape[2] // 2, deepest.shape[3] // 2
        target = deepest[:, :, h, w].sum()
        (grad,) = torch.autograd.grad(target, x)
    finally:
        if was_training:
            model.train()
    heat = grad.abs().sum(dim=1)[0]
    peak = heat.max()
    if peak > 0:
        heat = heat / peak
    return heat.cpu().numpy()


def theoretical_receptive_field(config, include_depthwise=True):
    """Receptive-field extent (pixels) of one deepest-level unit, from the geometry.

    Accumulates ``(k_eff - 1) * jump`` over the stem, stage blocks and
    downsamples; ``include_depthwise=False`` gives the footprint of the
    pointwise-only path (all depthwise kernels zeroed).
    """
    extent = 1
    jump = 1

    def grow(kernel, stride=1):
        nonlocal extent, jump
        extent += (kernel - 1) * jump
        jump *= stride

    grow(3, 2)  # stem
    grow(3, 2)
    for i, (lark, smak) in enumerate(config.stage_depths):
        if include_depthwise:
            for _ in range(lark):
                grow(config.lark_kernel)
            for _ in range(smak):
                grow(config.smak_kernel)
        if i < 2:
            grow(3, 2)  # downsample
    return extent
