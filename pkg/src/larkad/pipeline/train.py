"""Training loop: frozen teacher, AdamW student updates, JSON-line logging."""

import json
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from ..anomaly import build_anomaly_map
from ..diagnostics import feature_entropy, feature_variance
from ..errors import ContractError, TrainingDivergedError
from ..losses import MiningConfig, adc_loss, global_cosine_loss, hard_mined_loss, local_loss

LOSS_MODES = ("global", "local", "local_hm", "adc")

# Preset loss modes for the two dataset regimes: feature-rich sets train with
# the adaptive-contraction loss, feature-poor sets with the global loss.
PRESET_LOSS_MODES = {"fr": "adc", "fp": "global"}


@dataclass
class TrainConfig:
    lr: float = 0.005
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 5e-5
    scheduler_gamma: float = 0.995
    batch_size: int = 16
    epochs: int = 30
    loss_mode: str = "adc"
    mining: MiningConfig = field(default_factory=MiningConfig)
    seed: int = 0
    device: str = "cpu"
    deterministic: bool = True
    log_diagnostics: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ContractError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch size and epochs must be at least 1")
        if self.loss_mode not in LOSS_MODES:
            raise ContractError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.loss_mode == "adc" and self.mining is None:
            raise ContractError("loss_mode 'adc' requires a MiningConfig")


@dataclass
class TrainResult:
    model: object
    history: list
    final_loss: float


def seed_everything(seed, deterministic=True):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(deterministic)


def _batches(n, batch_size, order):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _compute_loss(enc, dec, images, cfg):
    if cfg.loss_mode == "global":
        return global_cosine_loss(enc, dec), {}
    s = build_anomaly_map(enc, dec, images.shape[2:]).aggregated
    if cfg.loss_mode == "local":
        return local_loss(s), {}
    if cfg.loss_mode == "local_hm":
        return hard_mined_loss(s, cfg.mining.p_lim), {}
    loss, diag = adc_loss(s, cfg.mining)
    return loss, diag.to_json_dict()


def train(model, dataset, cfg: TrainConfig, log_path=None):
    """Train bottleneck and decoder against the frozen encoder.

    Emits exactly one ``kind == "step"`` JSON record per optimizer step (plus
    per-epoch ``kind == "diagnostics"`` records when enabled) and returns the
    trained model with the full record history.
    """
    seed_everything(cfg.seed, cfg.deterministic)
    device = torch.device(cfg.device)
    model.to(device)
    model.train()
    model.freeze_encoder()
    optimizer = torch.optim.AdamW(
        model.trainable_parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=cfg.scheduler_gamma)

    history = []
    log_fh = open(log_path, "w") if log_path is not None else None

    def emit(record):
        history.append(record)
        if log_fh is not None:
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()

    step = 0
    final_loss = float("nan")
    try:
        for epoch in range(cfg.epochs):
            order = np.random.default_rng([cfg.seed, epoch]).permutation(len(dataset))
            last_pyramids = None
            for batch_idx in _batches(len(dataset), cfg.batch_size, order):
                images = torch.stack([dataset[int(i)][0] for i in batch_idx]).to(device)
                with torch.no_grad():
                    enc = model.encode(images)
                dec = model.reconstruct(enc)
                loss, extra = _compute_loss(enc, dec, images, cfg)
                if not torch.isfinite(loss):
                    emit({"kind": "abort", "step": step, "epoch": epoch, "loss": float(loss)})
                    raise TrainingDivergedError(step, float(loss))
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                final_loss = float(loss.detach())
                emit(
                    {
                        "kind": "step",
                        "step": step,
                        "epoch": epoch,
                        "loss": final_loss,
                        "lr": optimizer.param_groups[0]["lr"],
                        **extra,
                    }
                )
                step += 1
                last_pyramids = (enc, dec)
            if cfg.log_diagnostics and last_pyramids is not None:
                enc, dec = last_pyramids
                with torch.no_grad():
                    emit(
                        {
                            "kind": "diagnostics",
                            "step": step,
                            "epoch": epoch,
                            "encoder_variance": feature_variance(enc),
                            "decoder_variance": feature_variance(dec.detach()),
                            "encoder_entropy": feature_entropy(enc),
                            "decoder_entropy": feature_entropy(dec.detach()),
                        }
                    )
            scheduler.step()
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model=model, history=history, final_loss=final_loss)
