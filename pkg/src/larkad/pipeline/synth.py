"""Deterministic synthetic datasets: procedural textures with inserted defects.

Each category is one procedural texture family with its own palette; anomalous
test images carry a contrasting square / ellipse / scratch patch together with
its exact rasterized mask. Multi-category roots emulate feature-rich training
sets, single-category roots feature-poor ones.
"""

import colorsys
import os

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, zoom

from ..errors import ContractError

FAMILIES = ("stripes", "checker", "blobs", "plasma")
DEFECTS = ("square", "ellipse", "scratch")

_TRAIN, _TEST_GOOD, _TEST_DEFECT = 0, 1, 2


def _rng(*key):
    return np.random.default_rng(list(key))


def _palette(rng):
    """Two contrasting category colors plus a defect color far from both."""
    hue = rng.uniform()
    sat = rng.uniform(0.55, 0.9)
    c0 = np.array(colorsys.hsv_to_rgb(hue, sat, 0.85))
    c1 = np.array(colorsys.hsv_to_rgb((hue + 0.38) % 1.0, sat, 0.45))
    candidates = [
        np.array(colorsys.hsv_to_rgb((hue + 0.5) % 1.0, 1.0, 1.0)),
        1.0 - (c0 + c1) / 2.0,
        np.zeros(3),
        np.ones(3),
    ]
    defect = max(candidates, key=lambda c: min(np.abs(c - c0).sum(), np.abs(c - c1).sum()))
    return c0, c1, defect


def category_params(family, rng):
    """Base texture parameters of one category; images jitter around these."""
    if family == "stripes":
        return {"theta": rng.uniform(0.0, np.pi), "freq": rng.uniform(2.0, 4.0)}
    if family == "checker":
        return {"cell": int(rng.integers(12, 22))}
    if family == "blobs":
        return {"sigma": rng.uniform(4.0, 7.0)}
    return {"cells": (2, 4)}


def _stripes(rng, res, params):
    theta = params["theta"] + rng.uniform(-0.25, 0.25)
    freq = params["freq"] * rng.uniform(0.85, 1.15)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:res, 0:res] / res
    wave = np.sin(2.0 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    return 0.5 * (wave + 1.0)


def _checker(rng, res, params):
    cell = params["cell"] + int(rng.integers(-1, 2))
    ox, oy = int(rng.integers(0, cell)), int(rng.integers(0, cell))
    yy, xx = np.mgrid[0:res, 0:res]
    return (((xx + ox) // cell + (yy + oy) // cell) % 2).astype(np.float64)


def _blobs(rng, res, params):
    noise = rng.normal(size=(res, res))
    soft = gaussian_filter(noise, sigma=params["sigma"] * rng.uniform(0.9, 1.1), mode="reflect")
    return gaussian_filter((soft > np.median(soft)).astype(np.float64), sigma=1.5, mode="reflect")


def _plasma(rng, res, params):
    field = np.zeros((res, res))
    for i, cells in enumerate(params["cells"]):
        coarse = rng.normal(size=(cells, cells))
        field += zoom(coarse, res / cells, order=1) / (2.0**i)
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)


_RENDERERS = {"stripes": _stripes, "checker": _checker, "blobs": _blobs, "plasma": _plasma}


def render_texture(family, rng, res, palette, params=None):
    """One normal image of a family in [0, 1]^3, lightly noised."""
    params = params or category_params(family, np.random.default_rng(0))
    t = _RENDERERS[family](rng, res, params)[..., None]
    c0, c1, _ = palette
    image = c0 * (1.0 - t) + c1 * t
    image = image + rng.normal(scale=0.02, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def render_defect_mask(rng, res):
    """Exact rasterized mask of one random square / ellipse / scratch."""
    kind = DEFECTS[int(rng.integers(len(DEFECTS)))]
    yy, xx = np.mgrid[0:res, 0:res]
    if kind == "square":
        side = int(rng.integers(res // 6, res // 3))
        top = int(rng.integers(2, res - side - 2))
        left = int(rng.integers(2, res - side - 2))
        mask = (yy >= top) & (yy < top + side) & (xx >= left) & (xx < left + side)
    elif kind == "ellipse":
        a = rng.uniform(res / 10, res / 5)
        b = rng.uniform(res / 10, res / 5)
        cy = rng.uniform(a + 2, res - a - 2)
        cx = rng.uniform(b + 2, res - b - 2)
        mask = ((yy - cy) / a) ** 2 + ((xx - cx) / b) ** 2 <= 1.0
    else:
        p0 = rng.uniform(res * 0.15, res * 0.85, size=2)
        angle = rng.uniform(0.0, np.pi)
        length = rng.uniform(res * 0.35, res * 0.7)
        p1 = p0 + length * np.array([np.sin(angle), np.cos(angle)])
        half_width = rng.uniform(1.5, 3.0)
        d = p1 - p0
        tt = np.clip(((yy - p0[0]) * d[0] + (xx - p0[1]) * d[1]) / (d @ d), 0.0, 1.0)
        dist2 = (yy - (p0[0] + tt * d[0])) ** 2 + (xx - (p0[1] + tt * d[1])) ** 2
        mask = dist2 <= half_width**2
    if not mask.any():
        mask[res // 2, res // 2] = True
    return mask


def render_anomalous(family, rng, res, palette, params=None):
    """An anomalous image and its exact ground-truth mask."""
    image = render_texture(family, rng, res, palette, params)
    mask = render_defect_mask(rng, res)
    defect = palette[2] + rng.normal(scale=0.03, size=3)
    image[mask] = np.clip(defect, 0.0, 1.0)
    return image, mask


def _save_image(array01, path):
    Image.fromarray((array01 * 255.0).round().astype(np.uint8)).save(path)


def _save_mask(mask, path):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)


def synth_dataset(
    root,
    seed,
    categories=5,
    normals_per_cat=20,
    anomalies_per_cat=10,
    resolution=64,
    test_normals_per_cat=None,
):
    """Write a deterministic multi-category dataset tree and return its root.

    Layout per category: ``train/good``, ``test/good``, ``test/defect`` and
    ``ground_truth/defect`` with ``*_mask.png`` files. Identical arguments
    produce byte-identical trees.
    """
    if resolution % 32 != 0:
        raise ContractError(f"resolution {resolution} must be divisible by 32")
    if categories < 1 or normals_per_cat < 1 or anomalies_per_cat < 0:
        raise ContractError("need at least one category and one normal image")
    if test_normals_per_cat is None:
        test_normals_per_cat = anomalies_per_cat
    root = str(root)
    os.makedirs(root, exist_ok=True)
    for cat in range(categories):
        family = FAMILIES[cat % len(FAMILIES)]
        name = f"tex{cat:02d}_{family}"
        cat_rng = _rng(seed, cat, 99)
        palette = _palette(cat_rng)
        params = category_params(family, cat_rng)
        base = os.path.join(root, name)
        for sub in ("train/good", "test/good", "test/defect", "ground_truth/defect"):
            os.makedirs(os.path.join(base, sub), exist_ok=True)
        for j in range(normals_per_cat):
            image = render_texture(family, _rng(seed, cat, _TRAIN, j), resolution, palette, params)
            _save_image(image, os.path.join(base, "train/good", f"{j:03d}.png"))
        for j in range(test_normals_per_cat):
            image = render_texture(family, _rng(seed, cat, _TEST_GOOD, j), resolution, palette, params)
            _save_image(image, os.path.join(base, "test/good", f"{j:03d}.png"))
        for j in range(anomalies_per_cat):
            image, mask = render_anomalous(
                family, _rng(seed, cat, _TEST_DEFECT, j), resolution, palette, params
            )
            _save_image(image, os.path.join(base, "test/defect", f"{j:03d}.png"))
            _save_mask(mask, os.path.join(base, "ground_truth/defect", f"{j:03d}_mask.png"))
    return root
