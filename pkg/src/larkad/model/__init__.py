from .blocks import (
    LARK,
    SMAK,
    BlockSpec,
    ConvBlock,
    DilatedReparamConv,
    LayerNorm2d,
    default_branches,
    merge_dilated_branches,
)
from .config import DEFAULT_CHANNELS, DEFAULT_DEPTHS, PRESETS, ModelConfig, preset
from .grn import GRN, grn
from .network import (
    DECODER,
    ENCODER,
    Bottleneck,
    Decoder,
    Encoder,
    FeaturePyramid,
    ReverseDistillationModel,
)
from .weights import load_weights, save_weights

__all__ = [
    "LARK",
    "SMAK",
    "BlockSpec",
    "ConvBlock",
    "DilatedReparamConv",
    "LayerNorm2d",
    "default_branches",
    "merge_dilated_branches",
    "DEFAULT_CHANNELS",
    "DEFAULT_DEPTHS",
    "PRESETS",
    "ModelConfig",
    "preset",
    "GRN",
    "grn",
    "DECODER",
    "ENCODER",
    "Bottleneck",
    "Decoder",
    "Encoder",
    "FeaturePyramid",
    "ReverseDistillationModel",
    "load_weights",
    "save_weights",
]
