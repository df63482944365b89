"""Checkpoints: the weight archive plus the model geometry needed to rebuild it."""

import dataclasses
import json
import os

from ..model import ModelConfig, ReverseDistillationModel, load_weights, save_weights

CONFIG_NAME = "config.json"


def save_checkpoint(model: ReverseDistillationModel, directory):
    save_weights(model, directory)
    with open(os.path.join(directory, CONFIG_NAME), "w") as fh:
        json.dump(dataclasses.asdict(model.config), fh, indent=2)


def load_checkpoint(directory):
    with open(os.path.join(directory, CONFIG_NAME)) as fh:
        raw = json.load(fh)
    raw["stage_depths"] = tuple(tuple(d) for d in raw["stage_depths"])
    raw["stage_channels"] = tuple(raw["stage_channels"])
    raw["input_resolution"] = tuple(raw["input_resolution"])
    model = ReverseDistillationModel(ModelConfig(**raw))
    model.load_state_dict(load_weights(directory))
    return model
