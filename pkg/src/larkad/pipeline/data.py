"""Folder datasets: MVTec-style layout, deterministic ordering, normalization."""

import os
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from ..errors import DatasetError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset lives and how its images are prepared."""

    root: str
    split: str = TRAIN
    resolution: int = 64
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD
    category: str = None

    def __post_init__(self):
        if self.split not in (TRAIN, TEST):
            raise DatasetError(f"unknown split {self.split!r}")


@dataclass
class Item:
    path: str
    category: str
    label: int
    mask_path: str = None


def _category_roots(root):
    """A root either holds train/test directly or one subdirectory per category."""
    root = str(root)
    if os.path.isdir(os.path.join(root, TRAIN)):
        return [(os.path.basename(os.path.normpath(root)), root)]
    pairs = []
    for name in sorted(os.listdir(root)):
        candidate = os.path.join(root, name)
        if os.path.isdir(os.path.join(candidate, TRAIN)):
            pairs.append((name, candidate))
    if not pairs:
        raise DatasetError(f"no dataset layout found under {root}")
    return pairs


def _image_files(directory):
    if not os.path.isdir(directory):
        return []
    return sorted(
        os.path.join(directory, f)
        for f in os.listdir(directory)
        if f.lower().endswith((".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"))
    )


def _scan(spec: DatasetSpec):
    items = []
    for category, base in _category_roots(spec.root):
        if spec.category is not None and category != spec.category:
            continue
        if spec.split == TRAIN:
            for path in _image_files(os.path.join(base, TRAIN, "good")):
                items.append(Item(path=path, category=category, label=0))
            continue
        test_dir = os.path.join(base, TEST)
        if not os.path.isdir(test_dir):
            raise DatasetError(f"missing test split under {base}")
        for defect in sorted(os.listdir(test_dir)):
            for path in _image_files(os.path.join(test_dir, defect)):
                if defect == "good":
                    items.append(Item(path=path, category=category, label=0))
                else:
                    stem = os.path.splitext(os.path.basename(path))[0]
                    mask_path = os.path.join(base, "ground_truth", defect, stem + "_mask.png")
                    if not os.path.isfile(mask_path):
                        raise DatasetError(f"missing ground-truth mask {mask_path} for {path}")
                    items.append(Item(path=path, category=category, label=1, mask_path=mask_path))
    if not items:
        raise DatasetError(f"no images found for split {spec.split!r} under {spec.root}")
    return items


def load_image(path, resolution):
    """RGB image as float array in [0, 1]; native-resolution loads skip resizing."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        if img.size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.BILINEAR)
        return np.asarray(img, dtype=np.float64) / 255.0


def load_mask(path, resolution):
    """Binary mask (H, W) in {0, 1}, binarized at 0.5 after resizing."""
    with Image.open(path) as img:
        img = img.convert("L")
        if img.size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.BILINEAR)
        return (np.asarray(img, dtype=np.float64) / 255.0 >= 0.5).astype(np.uint8)


class FolderDataset:
    """Deterministic (lexicographic) folder dataset yielding normalized tensors."""

    def __init__(self, spec: DatasetSpec, cache=True):
        self.spec = spec
        self.items = _scan(spec)
        self._cache = {} if cache else None

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        item = self.items[index]
        raw = load_image(item.path, self.spec.resolution)
        mean = np.asarray(self.spec.mean)
        std = np.asarray(self.spec.std)
        image = torch.from_numpy(((raw - mean) / std).transpose(2, 0, 1).copy()).float()
        if item.mask_path is not None:
            mask = torch.from_numpy(load_mask(item.mask_path, self.spec.resolution))
        elif self.spec.split == TEST:
            mask = torch.zeros(self.spec.resolution, self.spec.resolution, dtype=torch.uint8)
        else:
            mask = None
        value = (image, item.label, mask)
        if self._cache is not None:
            self._cache[index] = value
        return value

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def categories(self):
        return sorted({item.category for item in self.items})


def load_dataset(spec: DatasetSpec, cache=True):
    return FolderDataset(spec, cache=cache)
