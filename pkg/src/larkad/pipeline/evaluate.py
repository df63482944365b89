"""Evaluation: anomaly maps per test image, the metric battery, report files."""

import json
import os
from dataclasses import dataclass

import numpy as np
import torch

from ..anomaly import build_anomaly_map, smooth, write_anomaly_png
from ..metrics import EvalSet, MetricReport, compute_report, write_report


@dataclass
class EvalConfig:
    smoothing_sigma: float = 4.0
    fpr_cap: float = 0.3
    connectivity: int = 8
    batch_size: int = 16
    device: str = "cpu"


def score_dataset(model, dataset, cfg: EvalConfig):
    """Smoothed anomaly maps, per-image scores, labels and masks, in dataset order."""
    device = torch.device(cfg.device)
    model.to(device)
    model.eval()
    maps = []
    labels = []
    masks = []
    with torch.no_grad():
        for start in range(0, len(dataset), cfg.batch_size):
            batch = [dataset[i] for i in range(start, min(start + cfg.batch_size, len(dataset)))]
            images = torch.stack([b[0] for b in batch]).to(device)
            enc, dec = model(images)
            s = build_anomaly_map(enc, dec, images.shape[2:]).aggregated
            maps.append(smooth(s, cfg.smoothing_sigma))
            labels.extend(b[1] for b in batch)
            masks.extend(b[2].numpy() if b[2] is not None else None for b in batch)
    pixel_scores = np.concatenate(maps, axis=0)
    image_scores = pixel_scores.reshape(pixel_scores.shape[0], -1).max(axis=1)
    pixel_masks = np.stack([m if m is not None else np.zeros(pixel_scores.shape[1:], np.uint8) for m in masks])
    return pixel_scores, image_scores, np.asarray(labels), pixel_masks


def evaluate(model, dataset, cfg: EvalConfig = None, out_dir=None, save_maps=False):
    """Run the full seven-metric protocol; optionally write reports and maps."""
    cfg = cfg or EvalConfig()
    pixel_scores, image_scores, labels, pixel_masks = score_dataset(model, dataset, cfg)
    report = compute_report(
        EvalSet(
            image_scores=image_scores,
            image_labels=labels,
            pixel_scores=pixel_scores,
            pixel_masks=pixel_masks,
        ),
        fpr_cap=cfg.fpr_cap,
        connectivity=cfg.connectivity,
    )
    artifacts = []
    for i, item in enumerate(dataset.items):
        artifacts.append(
            {
                "path": item.path,
                "category": item.category,
                "label": int(labels[i]),
                "score": float(image_scores[i]),
            }
        )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        label = getattr(dataset.spec, "category", None) or os.path.basename(
            os.path.normpath(dataset.spec.root)
        )
        write_report(
            report,
            json_path=os.path.join(out_dir, "report.json"),
            csv_path=os.path.join(out_dir, "report.csv"),
            row_label=label,
        )
        with open(os.path.join(out_dir, "scores.json"), "w") as fh:
            json.dump(artifacts, fh, indent=2)
        if save_maps:
            maps_dir = os.path.join(out_dir, "maps")
            os.makedirs(maps_dir, exist_ok=True)
            for i, item in enumerate(dataset.items):
                stem = os.path.splitext(os.path.basename(item.path))[0]
                name = f"{item.category}_{os.path.basename(os.path.dirname(item.path))}_{stem}"
                write_anomaly_png(pixel_scores[i], os.path.join(maps_dir, name + ".png"))
                _write_heatmap(pixel_scores[i], os.path.join(maps_dir, name + "_heat.png"))
    return report, artifacts


def _write_heatmap(score_map, path):
    """Small self-contained jet-style colormap for quick visual inspection."""
    from PIL import Image

    t = np.clip(np.asarray(score_map, dtype=np.float64) / 6.0, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    rgb = (np.stack([r, g, b], axis=-1) * 255.0).round().astype(np.uint8)
    Image.fromarray(rgb).save(path)


def checkpoint_roundtrip_report(report: MetricReport, other: MetricReport):
    """True when two reports agree exactly, field by field."""
    return report.to_json_dict() == other.to_json_dict()
