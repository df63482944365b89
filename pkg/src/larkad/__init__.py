"""Large-kernel reverse-distillation anomaly detection.

A frozen multi-scale encoder (teacher), a fusing bottleneck and a mirrored
decoder (student) are trained to reconstruct normal-image features; per-pixel
cosine discrepancies between the two pyramids form the anomaly map. Training
can use the global cosine objective or quantile-thresholded hard-mining
losses, including the adaptive-contraction variant.
"""

from . import anomaly, diagnostics, losses, metrics, model, pipeline
from .errors import (
    ConfigurationError,
    ContractError,
    DatasetError,
    TrainingDivergedError,
    UndefinedMetricError,
)

__version__ = "0.1.0"

__all__ = [
    "anomaly",
    "diagnostics",
    "losses",
    "metrics",
    "model",
    "pipeline",
    "ConfigurationError",
    "ContractError",
    "DatasetError",
    "TrainingDivergedError",
    "UndefinedMetricError",
    "__version__",
]
