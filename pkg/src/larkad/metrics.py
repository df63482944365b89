"""Evaluation battery: image/pixel AUROC, AP, F1_max, AUPRO and their mAD mean."""

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

from .errors import ContractError, UndefinedMetricError

CSV_COLUMNS = ["I-AUROC", "I-AP", "I-F1max", "P-AUROC", "P-AP", "P-F1max", "AUPRO", "mAD"]


@dataclass
class EvalSet:
    """Scores and ground truth for one evaluation run."""

    image_scores: np.ndarray
    image_labels: np.ndarray
    pixel_scores: np.ndarray
    pixel_masks: np.ndarray


@dataclass
class MetricReport:
    """The seven metrics plus their arithmetic mean, all in [0, 1]."""

    i_auroc: float = None
    i_ap: float = None
    i_f1max: float = None
    p_auroc: float = None
    p_ap: float = None
    p_f1max: float = None
    aupro: float = None
    mad: float = None

    FIELDS = ("i_auroc", "i_ap", "i_f1max", "p_auroc", "p_ap", "p_f1max", "aupro")

    def values(self):
        return [getattr(self, name) for name in self.FIELDS]

    def to_json_dict(self):
        payload = {name: getattr(self, name) for name in self.FIELDS}
        payload["mad"] = self.mad
        return payload

    def to_csv_row(self):
        """Values scaled x100 and rendered to one decimal, table order."""
        return [f"{100.0 * v:.1f}" for v in self.values() + [self.mad]]


def mad(report: MetricReport):
    """Arithmetic mean of the seven metric fields."""
    values = report.values()
    if any(v is None for v in values):
        missing = [n for n, v in zip(MetricReport.FIELDS, values) if v is None]
        raise ContractError(f"metric report is missing fields: {missing}")
    return float(np.mean(values))


def _validate_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ContractError(f"scores and labels differ in length: {scores.shape} vs {labels.shape}")
    if scores.size == 0:
        raise ContractError("empty score array")
    if not np.isin(labels, (0, 1)).all():
        raise ContractError("labels must be 0/1")
    return scores, labels


def auroc(scores, labels):
    """Mann-Whitney ranking statistic; ties count one half."""
    scores, labels = _validate_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _descending_sweep(scores, labels):
    """Cumulative tp/fp at each distinct threshold of a descending sweep."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    ends = np.nonzero(np.r_[np.diff(sorted_scores) != 0, True])[0]
    return tp[ends], fp[ends]


def average_precision(scores, labels):
    """Step-wise AP over the descending-score sweep."""
    scores, labels = _validate_binary(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    tp, fp = _descending_sweep(scores, labels)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def f1_max(scores, labels):
    """Best F1 over thresholds drawn from the unique score values (predict >= t)."""
    scores, labels = _validate_binary(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("F1_max needs at least one positive")
    tp, fp = _descending_sweep(scores, labels)
    fn = n_pos - tp
    f1 = 2.0 * tp / (2.0 * tp + fp + fn)
    return float(f1.max())


def _label_regions(masks, connectivity):
    """Global connected-component labelling across a stack of masks."""
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=int)
    elif connectivity == 4:
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    else:
        raise ContractError(f"connectivity must be 4 or 8, got {connectivity}")
    region_map = np.zeros(masks.shape, dtype=np.int64)
    total = 0
    for i, mask in enumerate(masks):
        labelled, count = ndimage.label(mask, structure=structure)
        region_map[i] = np.where(labelled > 0, labelled + total, 0)
        total += count
    return region_map, total


def aupro(pixel_scores, pixel_masks, fpr_cap=0.3, connectivity=8, max_thresholds=500):
    """Area under the per-region-overlap curve up to an FPR cap, normalized by the cap.

    Thresholds sweep the unique score values (quantile-spaced subset above
    ``max_thresholds``), predicting anomalous where ``score >= t``. At each
    threshold PRO averages per-region recall over 8-connected mask
    components and FPR counts false positives over all normal pixels; the
    (FPR, PRO) curve starting at the origin is integrated by trapezoid.
    """
    scores = np.asarray(pixel_scores, dtype=np.float64)
    masks = (np.asarray(pixel_masks) > 0).astype(np.uint8)
    if scores.shape != masks.shape:
        raise ContractError(f"score/mask shapes differ: {scores.shape} vs {masks.shape}")
    if scores.ndim == 2:
        scores = scores[None]
        masks = masks[None]
    if not 0.0 < fpr_cap <= 1.0:
        raise ContractError(f"fpr_cap must lie in (0, 1], got {fpr_cap}")

    region_map, n_regions = _label_regions(masks, connectivity)
    if n_regions == 0:
        raise UndefinedMetricError("AUPRO needs at least one anomalous region")
    n_normal = int((masks == 0).sum())
    if n_normal == 0:
        raise UndefinedMetricError("AUPRO needs at least one normal pixel")

    flat_scores = scores.ravel()
    flat_regions = region_map.ravel()
    region_sizes = np.bincount(flat_regions, minlength=n_regions + 1)[1:].astype(np.float64)

    thresholds = np.unique(flat_scores)
    if thresholds.size > max_thresholds:
        qs = np.quantile(flat_scores, np.linspace(0.0, 1.0, max_thresholds))
        thresholds = np.unique(qs)
    thresholds = thresholds[::-1]

    order = np.argsort(-flat_scores, kind="stable")
    sorted_scores = flat_scores[order]
    sorted_regions = flat_regions[order]
    sorted_normal = sorted_regions == 0

    fprs = [0.0]
    pros = [0.0]
    hits = np.zeros(n_regions + 1, dtype=np.float64)
    fp = 0
    ptr = 0
    n = sorted_scores.size
    for t in thresholds:
        while ptr < n and sorted_scores[ptr] >= t:
            r = sorted_regions[ptr]
            if r == 0:
                fp += 1
            else:
                hits[r] += 1.0
            ptr += 1
        fprs.append(fp / n_normal)
        pros.append(float(np.mean(hits[1:] / region_sizes)))

    area = 0.0
    for (x0, y0), (x1, y1) in zip(zip(fprs, pros), zip(fprs[1:], pros[1:])):
        if x1 <= fpr_cap:
            area += (x1 - x0) * (y0 + y1) / 2.0
        elif x0 < fpr_cap:
            y_cap = y0 + (y1 - y0) * (fpr_cap - x0) / (x1 - x0)
            area += (fpr_cap - x0) * (y0 + y_cap) / 2.0
            break
        else:
            break
    return float(area / fpr_cap)


def compute_report(eval_set: EvalSet, fpr_cap=0.3, connectivity=8):
    """Fill a MetricReport from image- and pixel-level scores."""
    report = MetricReport(
        i_auroc=auroc(eval_set.image_scores, eval_set.image_labels),
        i_ap=average_precision(eval_set.image_scores, eval_set.image_labels),
        i_f1max=f1_max(eval_set.image_scores, eval_set.image_labels),
        p_auroc=auroc(eval_set.pixel_scores.ravel(), eval_set.pixel_masks.ravel()),
        p_ap=average_precision(eval_set.pixel_scores.ravel(), eval_set.pixel_masks.ravel()),
        p_f1max=f1_max(eval_set.pixel_scores.ravel(), eval_set.pixel_masks.ravel()),
        aupro=aupro(eval_set.pixel_scores, eval_set.pixel_masks, fpr_cap=fpr_cap, connectivity=connectivity),
    )
    report.mad = mad(report)
    return report


def write_report(report: MetricReport, json_path=None, csv_path=None, row_label=None):
    """Write the report as full-precision JSON and/or the x100 one-decimal CSV."""
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
            fh.write("\n")
    if csv_path is not None:
        header = CSV_COLUMNS if row_label is None else ["category"] + CSV_COLUMNS
        row = report.to_csv_row() if row_label is None else [row_label] + report.to_csv_row()
        with open(csv_path, "w") as fh:
            fh.write(",".join(header) + "\n")
            fh.write(",".join(row) + "\n")
