import numpy as np
import pytest

from larkad.errors import ContractError, UndefinedMetricError
from larkad.metrics import (
    CSV_COLUMNS,
    EvalSet,
    MetricReport,
    aupro,
    auroc,
    average_precision,
    compute_report,
    f1_max,
    mad,
    write_report,
)
from oracles import auroc_oracle, average_precision_oracle, f1_max_oracle, aupro_oracle


def _random_masks(rng, n=2, side=16):
    masks = np.zeros((n, side, side), dtype=np.uint8)
    for i in range(n):
        for _ in range(int(rng.integers(1, 3))):
            top, left = rng.integers(0, side - 4, size=2)
            h, w = rng.integers(2, 5, size=2)
            masks[i, top : top + h, left : left + w] = 1
    return masks


class TestAuroc:
    def test_perfect_ranking(self):
        assert auroc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0

    def test_inverted_ranking(self):
        assert auroc([0.9, 0.8, 0.3, 0.1], [0, 0, 1, 1]) == 0.0

    def test_three_of_four_pairs(self):
        assert auroc([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0]) == 0.75

    def test_ties_count_half(self):
        assert auroc([0.5, 0.5], [1, 0]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auroc([0.1, 0.2], [1, 1])

    def test_complement_under_negation(self):
        rng = np.random.default_rng(0)
        scores = rng.permutation(20) / 20.0  # tie-free
        labels = rng.integers(0, 2, 20)
        labels[:2] = [0, 1]
        assert abs(auroc(scores, labels) + auroc(-scores, labels) - 1.0) < 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_pairwise_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 60))
        scores = rng.choice([0.1, 0.25, 0.5, 0.7, 0.9], size=n) if seed % 2 else rng.uniform(size=n)
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        assert abs(auroc(scores, labels) - auroc_oracle(scores, labels)) <= 1e-12


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert average_precision([0.9, 0.8, 0.3], [1, 1, 0]) == 1.0

    def test_middle_positive(self):
        assert abs(average_precision([0.9, 0.6, 0.4], [0, 1, 0]) - 0.5) < 1e-12

    def test_one_positive_above_one_negative(self):
        assert average_precision([0.8, 0.2], [1, 0]) == 1.0

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            average_precision([0.1, 0.2], [0, 0])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_sweep_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(4, 80))
        scores = rng.choice([0.2, 0.4, 0.6, 0.8], size=n) if seed % 2 else rng.uniform(size=n)
        labels = rng.integers(0, 2, n)
        labels[0] = 1
        assert abs(average_precision(scores, labels) - average_precision_oracle(scores, labels)) <= 1e-12


class TestF1Max:
    def test_perfect_separation(self):
        assert f1_max([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_hand_computed_example(self):
        # best threshold 0.4: precision 2/3, recall 1 -> F1 = 0.8
        assert abs(f1_max([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0]) - 0.8) < 1e-12

    def test_all_positives(self):
        assert f1_max([0.3, 0.1, 0.9], [1, 1, 1]) == 1.0

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            f1_max([0.5], [0])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(200 + seed)
        n = int(rng.integers(3, 60))
        scores = rng.choice([0.25, 0.5, 0.75], size=n) if seed % 2 else rng.uniform(size=n)
        labels = rng.integers(0, 2, n)
        labels[0] = 1
        assert abs(f1_max(scores, labels) - f1_max_oracle(scores, labels)) <= 1e-12


class TestMonotoneTransformInvariance:
    @pytest.mark.parametrize("transform", [np.exp, lambda s: 3.0 * s + 2.0, lambda s: s**3 + s])
    def test_all_ranking_metrics(self, transform):
        rng = np.random.default_rng(3)
        scores = rng.standard_normal(40)
        labels = rng.integers(0, 2, 40)
        labels[:2] = [0, 1]
        for metric in (auroc, average_precision, f1_max):
            assert abs(metric(scores, labels) - metric(transform(scores), labels)) < 1e-12


class TestAupro:
    def test_perfect_localization(self):
        rng = np.random.default_rng(4)
        masks = _random_masks(rng)
        assert aupro(masks.astype(np.float64), masks) == 1.0

    def test_constant_scores_two_point_curve(self):
        # the curve holds only (0,0) and (1,1); with the cap at 1 the
        # trapezoid over the diagonal gives one half
        rng = np.random.default_rng(5)
        masks = _random_masks(rng)
        scores = np.full(masks.shape, 0.42)
        assert aupro(scores, masks, fpr_cap=1.0) == 0.5
        # capped at 0.3 the same diagonal integrates to 0.15
        assert abs(aupro(scores, masks, fpr_cap=0.3) - 0.15) < 1e-12

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(300 + seed)
        masks = _random_masks(rng, n=1)
        scores = rng.uniform(size=masks.shape) + masks * rng.uniform(0.0, 1.0)
        expected = aupro_oracle(scores, masks, fpr_cap=0.3)
        assert abs(aupro(scores, masks, fpr_cap=0.3) - expected) <= 1e-9

    def test_multi_image_exact_when_thresholds_uncapped(self):
        rng = np.random.default_rng(42)
        masks = _random_masks(rng, n=3)
        scores = rng.uniform(size=masks.shape) + masks
        expected = aupro_oracle(scores, masks, fpr_cap=0.3)
        assert abs(aupro(scores, masks, fpr_cap=0.3, max_thresholds=10**9) - expected) <= 1e-9

    def test_single_pixel_region_degenerates_to_roc(self):
        rng = np.random.default_rng(6)
        masks = np.zeros((1, 8, 8), dtype=np.uint8)
        masks[0, 3, 4] = 1
        scores = rng.permutation(64).reshape(1, 8, 8) / 64.0  # tie-free
        value = aupro(scores, masks, fpr_cap=1.0)
        assert abs(value - auroc(scores.ravel(), masks.ravel())) <= 1e-9

    def test_no_regions_rejected(self):
        with pytest.raises(UndefinedMetricError):
            aupro(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)))

    def test_threshold_subsampling_close_to_exact(self):
        rng = np.random.default_rng(7)
        masks = _random_masks(rng, n=2, side=20)
        scores = rng.uniform(size=masks.shape) + masks
        exact = aupro(scores, masks, max_thresholds=10**9)
        approx = aupro(scores, masks, max_thresholds=200)
        assert abs(exact - approx) < 0.02

    def test_four_connectivity_splits_diagonal(self):
        # diagonal neighbours plus a tail: one 8-connected region of size 3,
        # or a singleton plus a pair under 4-connectivity
        masks = np.zeros((1, 4, 4), dtype=np.uint8)
        masks[0, 0, 0] = 1
        masks[0, 1, 1] = 1
        masks[0, 1, 2] = 1
        scores = np.zeros((1, 4, 4))
        scores[0, 0, 0] = 1.0
        eight = aupro(scores, masks, fpr_cap=1.0, connectivity=8)
        four = aupro(scores, masks, fpr_cap=1.0, connectivity=4)
        assert eight != four
        # at the top threshold: PRO is 1/3 of the single region vs the mean of (1, 0)
        assert four > eight


class TestMad:
    def test_paper_table_row(self):
        report = MetricReport(98.8, 99.6, 97.7, 96.1, 58.5, 59.5, 92.2)
        assert f"{mad(report):.1f}" == "86.1"

    def test_all_ones(self):
        assert mad(MetricReport(1, 1, 1, 1, 1, 1, 1)) == 1.0

    def test_single_seven(self):
        assert mad(MetricReport(0, 0, 0, 0, 0, 0, 7)) == 1.0

    def test_missing_field_rejected(self):
        with pytest.raises(ContractError):
            mad(MetricReport(i_auroc=1.0))

    def test_linearity(self):
        rng = np.random.default_rng(8)
        values = rng.uniform(size=7)
        base = mad(MetricReport(*values))
        scaled = mad(MetricReport(*(3.0 * values)))
        assert abs(scaled - 3.0 * base) < 1e-12


class TestReportPlumbing:
    def _sample_report(self):
        rng = np.random.default_rng(9)
        masks = _random_masks(rng, n=4)
        pixel_scores = rng.uniform(size=masks.shape) + 2.0 * masks
        labels = np.array([1, 1, 0, 0])
        image_scores = pixel_scores.reshape(4, -1).max(axis=1) * (labels + 0.5)
        return compute_report(EvalSet(image_scores, labels, pixel_scores, masks))

    def test_mad_consistent(self):
        report = self._sample_report()
        assert report.mad == pytest.approx(np.mean(report.values()))

    def test_csv_layout(self, tmp_path):
        report = self._sample_report()
        write_report(report, csv_path=tmp_path / "r.csv", row_label="texA")
        lines = (tmp_path / "r.csv").read_text().strip().splitlines()
        assert lines[0] == "category," + ",".join(CSV_COLUMNS)
        cells = lines[1].split(",")
        assert cells[0] == "texA"
        assert cells[1] == f"{100 * report.i_auroc:.1f}"
        assert len(cells) == 9

    def test_json_full_precision(self, tmp_path):
        import json

        report = self._sample_report()
        write_report(report, json_path=tmp_path / "r.json")
        payload = json.loads((tmp_path / "r.json").read_text())
        assert payload["i_auroc"] == report.i_auroc
        assert payload["mad"] == report.mad
