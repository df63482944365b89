from .checkpoint import load_checkpoint, save_checkpoint
from .data import IMAGENET_MEAN, IMAGENET_STD, DatasetSpec, FolderDataset, load_dataset
from .evaluate import EvalConfig, evaluate, score_dataset
from .synth import synth_dataset
from .train import LOSS_MODES, PRESET_LOSS_MODES, TrainConfig, TrainResult, seed_everything, train

__all__ = [
    "load_checkpoint",
    "save_checkpoint",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "DatasetSpec",
    "FolderDataset",
    "load_dataset",
    "EvalConfig",
    "evaluate",
    "score_dataset",
    "synth_dataset",
    "LOSS_MODES",
    "PRESET_LOSS_MODES",
    "TrainConfig",
    "TrainResult",
    "seed_everything",
    "train",
]
