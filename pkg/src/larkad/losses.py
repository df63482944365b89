"""Training objectives: global cosine, local, fixed-mining and adaptive-contraction losses.

The mining losses optimize a masked mean of squared anomaly scores. Masks and
their thresholds are derived from detached batch statistics, so excluded
pixels contribute no gradient and thresholds act as constants.
"""

import math
from dataclasses import dataclass

import torch

from .errors import ContractError

ALPHA_BRANCH = "alpha"
BETA_BRANCH = "beta"


@dataclass(frozen=True)
class MiningConfig:
    """Primary (p_hard) and lower-bound (p_lim) mining factors."""

    p_hard: float = 0.9999
    p_lim: float = 0.9995

    def __post_init__(self):
        if not 0.0 < self.p_hard <= 1.0:
            raise ContractError(f"p_hard must lie in (0, 1], got {self.p_hard}")
        if not 0.0 < self.p_lim <= 1.0:
            raise ContractError(f"p_lim must lie in (0, 1], got {self.p_lim}")


@dataclass
class AdcDiagnostics:
    """Derived quantities of one adaptive-contraction evaluation."""

    alpha: float
    beta_q: float
    sigma: float
    count_a: int
    count_b: float
    branch: str
    threshold: float
    active_fraction: float

    def to_json_dict(self):
        return {
            "branch": self.branch,
            "threshold": self.threshold,
            "active_fraction": self.active_fraction,
            "alpha": self.alpha,
            "beta_q": self.beta_q,
            "sigma": self.sigma,
        }


def quantile(values, p):
    """Linear-interpolation quantile between closest order statistics.

    Uses the zero-based position ``p * (n - 1)``; ``p == 1`` returns the
    maximum. Works on tensors of any shape (flattened first).
    """
    if not 0.0 < p <= 1.0:
        raise ContractError(f"quantile level must lie in (0, 1], got {p}")
    flat = values.reshape(-1)
    n = flat.numel()
    if n == 0:
        raise ContractError("quantile of an empty array is undefined")
    ordered = torch.sort(flat).values
    pos = p * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return ordered[lo] + (ordered[hi] - ordered[lo]) * frac


def global_cosine_loss(enc, dec, eps=1e-8):
    """Sum over levels of one minus the cosine of the flattened feature pair.

    Computed per batch item, then averaged over the batch; each level
    contributes at most 2, so the value lies in [0, 6].
    """
    if len(enc.levels) != len(dec.levels):
        raise ContractError("pyramids have different level counts")
    total = None
    for fe, fd in zip(enc.levels, dec.levels):
        if fe.shape != fd.shape:
            raise ContractError(f"level shapes differ: {tuple(fe.shape)} vs {tuple(fd.shape)}")
        e = fe.reshape(fe.shape[0], -1)
        d = fd.reshape(fd.shape[0], -1)
        dot = (e * d).sum(dim=1)
        denom = torch.sqrt((e * e).sum(dim=1) * (d * d).sum(dim=1)).clamp_min(eps * eps)
        term = 1.0 - dot / denom
        total = term if total is None else total + term
    return total.mean()


def local_loss(s):
    """Mean squared anomaly score over every pixel."""
    return (s * s).mean()


def _masked_mean_sq(s, threshold):
    """Mean of squared scores over pixels with s^2 >= threshold (detached mask)."""
    mask = (s.detach() * s.detach()) >= threshold
    active = int(mask.sum())
    if active == 0:
        return s.new_zeros(()), 0
    return (s * s)[mask].mean(), active


def hard_mined_loss(s, p_lim):
    """Fixed mining: masked mean of s^2 above its p_lim quantile."""
    s_det = s.detach()
    beta = quantile(s_det * s_det, p_lim)
    loss, _ = _masked_mean_sq(s, beta)
    return loss


def adc_loss(s, cfg: MiningConfig):
    """Adaptive-contraction mining loss with branch diagnostics.

    Statistics over the flattened batch tensor: ``alpha`` is the p_hard
    quantile of the scores, ``beta_q`` the p_lim quantile of the squared
    scores and ``sigma`` their (population) standard deviation. The count of
    pixels with ``s^2 >= alpha - sigma^2`` is compared against the pixel
    budget ``B * H * W * (1 - p_lim)`` to pick the threshold branch; the loss
    is the masked mean of ``s^2`` above it. An empty active set yields zero.
    """
    if s.ndim != 3:
        raise ContractError(f"expected batch x H x W scores, got shape {tuple(s.shape)}")
    s_det = s.detach()
    sq_det = s_det * s_det
    alpha = quantile(s_det, cfg.p_hard)
    beta_q = quantile(sq_det, cfg.p_lim)
    sigma = s_det.std(unbiased=False)

    batch, height, width = s.shape
    count_b = batch * height * width * (1.0 - cfg.p_lim)
    alpha_threshold = alpha - sigma * sigma
    count_a = int((sq_det >= alpha_threshold).sum())

    if count_a >= count_b:
        branch = ALPHA_BRANCH
        threshold = alpha_threshold
    else:
        branch = BETA_BRANCH
        threshold = beta_q - sigma * sigma

    loss, active = _masked_mean_sq(s, threshold)
    diagnostics = AdcDiagnostics(
        alpha=float(alpha),
        beta_q=float(beta_q),
        sigma=float(sigma),
        count_a=count_a,
        count_b=count_b,
        branch=branch,
        threshold=float(threshold),
        active_fraction=active / (batch * height * width),
    )
    return loss, diagnostics
