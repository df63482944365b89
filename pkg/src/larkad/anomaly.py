"""Anomaly maps: per-level cosine discrepancies, aggregation and image scores."""

import json
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import ContractError

# PNG export maps scores linearly from [0, SCORE_CEIL] onto 16-bit gray:
#   png_value = round(clip(score, 0, SCORE_CEIL) / SCORE_CEIL * 65535)
# and the sidecar JSON records the inverse scale.
SCORE_CEIL = 6.0
PNG_MAX = 65535


@dataclass
class AnomalyMap:
    """Per-level maps, their aggregated pixel map and an optional smoothed copy."""

    per_level: list
    aggregated: torch.Tensor
    smoothed: np.ndarray = None


def level_map(f_e, f_d, eps=1e-8):
    """Per-pixel cosine distance between matching feature maps; values in [0, 2].

    The denominator is ``sqrt(|e|^2 * |d|^2)``, so identical feature maps give
    an exactly zero map.
    """
    if f_e.shape != f_d.shape:
        raise ContractError(f"feature shapes differ: {tuple(f_e.shape)} vs {tuple(f_d.shape)}")
    num = (f_e * f_d).sum(dim=1)
    den = torch.sqrt((f_e * f_e).sum(dim=1) * (f_d * f_d).sum(dim=1)).clamp_min(eps * eps)
    return (1.0 - num / den).clamp(0.0, 2.0)


def aggregate(per_level, target):
    """Sum the per-level maps after bilinear upsampling to the target size."""
    h, w = target
    total = None
    for m in per_level:
        up = F.interpolate(m.unsqueeze(1), size=(h, w), mode="bilinear", align_corners=False)
        up = up.squeeze(1)
        total = up if total is None else total + up
    return total


def build_anomaly_map(enc, dec, target, eps=1e-8):
    """Full map construction from an encoder/decoder pyramid pair."""
    maps = [level_map(fe, fd, eps) for fe, fd in zip(enc.levels, dec.levels)]
    return AnomalyMap(per_level=maps, aggregated=aggregate(maps, target))


def smooth(s, sigma):
    """Gaussian-smooth a batch of maps (reflective padding); sigma 0 disables."""
    arr = s.detach().cpu().numpy() if isinstance(s, torch.Tensor) else np.asarray(s)
    if sigma <= 0:
        return arr.astype(np.float64, copy=True)
    return gaussian_filter(arr.astype(np.float64), sigma=(0.0, sigma, sigma), mode="reflect")


def image_score(s, smoothing_sigma=4.0):
    """Per-image score: maximum of the Gaussian-smoothed map."""
    smoothed = smooth(s, smoothing_sigma)
    return smoothed.reshape(smoothed.shape[0], -1).max(axis=1)


def write_anomaly_png(score_map, path):
    """Export one map as 16-bit grayscale PNG plus a sidecar JSON scale."""
    arr = np.asarray(score_map, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"one 2-d map per file, got shape {arr.shape}")
    quantized = np.round(np.clip(arr, 0.0, SCORE_CEIL) / SCORE_CEIL * PNG_MAX).astype(np.uint16)
    image = Image.fromarray(quantized)
    image.save(path, format="PNG")
    sidecar = {"score_ceil": SCORE_CEIL, "png_max": PNG_MAX, "shape": list(arr.shape)}
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh)
    return quantized


def read_anomaly_png(path):
    """Inverse of ``write_anomaly_png``; returns the reconstructed score map."""
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    quantized = np.array(Image.open(path), dtype=np.uint16)
    return quantized.astype(np.float64) / sidecar["png_max"] * sidecar["score_ceil"]
