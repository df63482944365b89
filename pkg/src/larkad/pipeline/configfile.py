"""TOML run configuration mirroring the model / train / eval dataclasses.

Schema (all keys optional, defaults in the dataclasses):

    [model]
    preset = "desk"              # or explicit geometry below
    stage_depths = [[0,1],[1,0],[2,0]]
    stage_channels = [32, 64, 128]
    bottleneck_depth = 2
    resolution = 64
    lark_kernel = 13
    smak_kernel = 3

    [train]
    lr = 0.005
    betas = [0.9, 0.999]
    weight_decay = 5e-5
    scheduler_gamma = 0.995
    batch_size = 16
    epochs = 30
    loss_mode = "adc"            # global | local | local_hm | adc
    p_hard = 0.9999
    p_lim = 0.9995
    seed = 0
    device = "cpu"
    deterministic = true
    log_diagnostics = true

    [eval]
    smoothing_sigma = 4.0
    fpr_cap = 0.3
    connectivity = 8
    batch_size = 16
"""

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ContractError
from ..losses import MiningConfig
from ..model import ModelConfig, preset
from .evaluate import EvalConfig
from .train import TrainConfig


def _model_from_table(table):
    if "preset" in table:
        base = preset(table["preset"])
        if len(table) == 1:
            return base
        raw = {
            "stage_depths": base.stage_depths,
            "stage_channels": base.stage_channels,
            "bottleneck_depth": base.bottleneck_depth,
            "input_resolution": base.input_resolution,
            "lark_kernel": base.lark_kernel,
            "smak_kernel": base.smak_kernel,
        }
    else:
        raw = {}
    for key in ("stage_depths", "stage_channels", "bottleneck_depth", "lark_kernel", "smak_kernel"):
        if key in table:
            raw[key] = table[key]
    if "resolution" in table:
        res = table["resolution"]
        raw["input_resolution"] = (res, res) if isinstance(res, int) else tuple(res)
    if "stage_depths" in raw:
        raw["stage_depths"] = tuple(tuple(d) for d in raw["stage_depths"])
    if "stage_channels" in raw:
        raw["stage_channels"] = tuple(raw["stage_channels"])
    return ModelConfig(**raw)


def _train_from_table(table):
    kwargs = {}
    for key in (
        "lr",
        "weight_decay",
        "scheduler_gamma",
        "batch_size",
        "epochs",
        "loss_mode",
        "seed",
        "device",
        "deterministic",
        "log_diagnostics",
    ):
        if key in table:
            kwargs[key] = table[key]
    if "betas" in table:
        kwargs["betas"] = tuple(table["betas"])
    mining_keys = {k: table[k] for k in ("p_hard", "p_lim") if k in table}
    if mining_keys:
        kwargs["mining"] = MiningConfig(**mining_keys)
    return TrainConfig(**kwargs)


def _eval_from_table(table):
    kwargs = {
        k: table[k]
        for k in ("smoothing_sigma", "fpr_cap", "connectivity", "batch_size", "device")
        if k in table
    }
    return EvalConfig(**kwargs)


def load_config_file(path):
    """Parse a TOML run config into (ModelConfig, TrainConfig, EvalConfig)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ContractError(f"malformed config file {path}: {exc}") from exc
    unknown = set(data) - {"model", "train", "eval"}
    if unknown:
        raise ContractError(f"unknown config sections {sorted(unknown)} in {path}")
    model = _model_from_table(data.get("model", {}))
    train = _train_from_table(data.get("train", {}))
    eval_cfg = _eval_from_table(data.get("eval", {}))
    return model, train, eval_cfg
