import numpy as np
import pytest
import torch

from larkad.model import ModelConfig, ReverseDistillationModel


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)


@pytest.fixture
def tiny_config():
    """Smallest legal geometry; fast enough for shape and gradient tests."""
    return ModelConfig(
        stage_depths=((0, 1), (1, 0), (1, 0)),
        stage_channels=(4, 8, 16),
        input_resolution=(32, 32),
        lark_kernel=5,
    )


@pytest.fixture
def tiny_model(tiny_config):
    return ReverseDistillationModel(tiny_config)


def random_pyramid(rng, batch=2, channels=(3, 5, 7), base=8, origin="encoder", dtype=torch.float64):
    """Random well-formed pyramid for loss and diagnostics tests."""
    from larkad.model import FeaturePyramid

    levels = [
        torch.tensor(rng.standard_normal((batch, c, base // 2**k, base // 2**k)), dtype=dtype)
        for k, c in enumerate(channels)
    ]
    return FeaturePyramid(levels, origin)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """The seed-locked synthetic dataset shared by pipeline and acceptance tests."""
    from larkad.pipeline import synth_dataset

    root = tmp_path_factory.mktemp("synth") / "frad"
    synth_dataset(root, seed=7, categories=5, normals_per_cat=20, anomalies_per_cat=10, resolution=64)
    return root


def assert_close(actual, expected, tol, label=""):
    actual = float(actual)
    expected = float(expected)
    scale = max(1.0, abs(expected))
    assert abs(actual - expected) <= tol * scale, f"{label}: {actual} vs {expected} (tol {tol})"
