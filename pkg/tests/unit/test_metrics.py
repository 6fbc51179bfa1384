"""Unit tests for the segmentation metrics.

Edit, F1 and Top-k are checked against the slow reference implementations in
``tests.helpers.oracles`` on random instances.
"""

import numpy as np
import pytest

from actiongraph.core import MetricsError
from actiongraph.core.metrics import (
    MetricsReport,
    Segment,
    SegmentList,
    edit_score,
    extract_segments,
    f1_at,
    frame_accuracy,
    full_report,
    mean_report,
    top_k,
)
from tests.helpers.oracles import (
    greedy_tp,
    levenshtein,
    max_matching_tp,
    scan_runs,
    sorted_topk_hit,
)


def _random_labels(rng, length, classes=3):
    return rng.integers(0, classes, size=length).tolist()


class TestFrameAccuracy:
    """Test frame accuracy."""

    def test_identical(self):
        """Test identical sequences score 100."""
        assert frame_accuracy([0, 1, 2], [0, 1, 2]) == 100.0

    def test_partial(self):
        """Test one wrong frame in four."""
        assert frame_accuracy([0, 1, 1, 1], [0, 0, 1, 1]) == 75.0

    def test_all_wrong(self):
        """Test no correct frames score 0."""
        assert frame_accuracy([1, 1], [0, 0]) == 0.0

    def test_background_excluded(self):
        """Test background frames are not counted."""
        assert frame_accuracy([1, 1, 0, 0], [1, 0, 0, 2], background=0) == 50.0

    def test_length_mismatch(self):
        """Test sequences must have equal length."""
        with pytest.raises(MetricsError):
            frame_accuracy([0, 1], [0])


class TestSegments:
    """Test segment extraction."""

    def test_extract(self):
        """Test the seven-frame example."""
        segments = extract_segments([0, 0, 0, 0, 1, 1, 2])
        assert list(segments) == [Segment(0, 0, 3), Segment(1, 4, 5), Segment(2, 6, 6)]
        assert segments.labels == [0, 1, 2]

    def test_matches_scan(self, rng):
        """Test segments agree with a predecessor scan."""
        for _ in range(20):
            labels = _random_labels(rng, 30)
            assert [tuple(s) for s in extract_segments(labels)] == scan_runs(labels)

    def test_gap_rejected(self):
        """Test segments must be contiguous."""
        with pytest.raises(MetricsError):
            SegmentList(((0, 0, 2), (1, 4, 5)))

    def test_equal_neighbours_rejected(self):
        """Test neighbouring segments must differ in class."""
        with pytest.raises(MetricsError):
            SegmentList(((0, 0, 2), (0, 3, 5)))


class TestEditScore:
    """Test the segmental edit score."""

    def test_identical(self):
        """Test identical segmentations score 100."""
        segments = extract_segments([0, 0, 1, 2, 2])
        assert edit_score(segments, segments) == 100.0

    def test_extra_segment(self):
        """Test one inserted segment out of three."""
        pred = extract_segments([0, 1, 1, 0])
        gt = extract_segments([0, 0, 1, 1])
        assert edit_score(pred, gt) == pytest.approx(100.0 * (1 - 1 / 3))

    def test_both_empty(self):
        """Test two empty segmentations agree fully."""
        assert edit_score(SegmentList(), SegmentList()) == 100.0

    def test_one_empty(self):
        """Test one empty segmentation scores 0."""
        assert edit_score(SegmentList(), extract_segments([0, 1])) == 0.0

    def test_background_only(self):
        """Test excluding the only class leaves two empty sequences."""
        segments = extract_segments([0, 0])
        assert edit_score(segments, segments, background=0) == 100.0

    def test_matches_dp_oracle(self, rng):
        """Test 500 random pairs against the DP Levenshtein."""
        for _ in range(500):
            pred = extract_segments(_random_labels(rng, int(rng.integers(1, 25))))
            gt = extract_segments(_random_labels(rng, int(rng.integers(1, 25))))
            distance = levenshtein(pred.labels, gt.labels)
            expected = 100.0 * (1 - distance / max(len(pred), len(gt)))
            assert edit_score(pred, gt) == pytest.approx(expected, abs=1e-12)


class TestF1:
    """Test overlap F1."""

    @pytest.mark.parametrize("threshold", [0.10, 0.25, 0.50])
    def test_perfect(self, threshold):
        """Test a perfect prediction scores 100 everywhere."""
        segments = extract_segments([0, 0, 1, 1, 2])
        result = f1_at(segments, segments, threshold)

        assert (result.precision, result.recall, result.f1) == (100.0, 100.0, 100.0)
        assert (result.tp, result.fp, result.fn) == (3, 0, 0)

    def test_split_segment(self):
        """Test a segment split in two at 0.5."""
        gt = extract_segments([0] * 10)
        pred = extract_segments([0] * 6 + [1] * 4)
        result = f1_at(pred, gt, 0.5)

        assert (result.tp, result.fp, result.fn) == (1, 1, 0)
        assert result.precision == pytest.approx(50.0)
        assert result.recall == pytest.approx(100.0)
        assert result.f1 == pytest.approx(200.0 / 3)

    def test_no_true_positive(self):
        """Test F1 is 0 when nothing matches."""
        result = f1_at(extract_segments([1, 1]), extract_segments([0, 0]), 0.1)
        assert result.f1 == 0.0
        assert (result.tp, result.fp, result.fn) == (0, 1, 1)

    def test_both_empty(self):
        """Test two empty segmentations score 100."""
        assert f1_at(SegmentList(), SegmentList(), 0.5).f1 == 100.0

    def test_background_excluded(self):
        """Test background segments neither match nor count."""
        pred = extract_segments([0, 0, 1, 1])
        gt = extract_segments([0, 1, 1, 1])
        result = f1_at(pred, gt, 0.5, background=0)

        assert (result.tp, result.fp, result.fn) == (1, 0, 0)

    def test_threshold_range(self):
        """Test thresholds outside (0, 1] are rejected."""
        segments = extract_segments([0])
        with pytest.raises(MetricsError):
            f1_at(segments, segments, 0.0)

    def test_matches_matching_oracles(self, rng):
        """Test greedy TP on 500 small random pairs.

        The count equals an independent greedy matcher and never exceeds the
        best one-to-one matching.
        """
        for _ in range(500):
            length = int(rng.integers(2, 16))
            pred = extract_segments(_random_labels(rng, length, 2))
            gt = extract_segments(_random_labels(rng, length, 2))
            if len(pred) > 8 or len(gt) > 8:
                continue
            threshold = float(rng.choice([0.1, 0.25, 0.5]))
            result = f1_at(pred, gt, threshold)
            pred_runs, gt_runs = [tuple(s) for s in pred], [tuple(s) for s in gt]

            assert result.tp == greedy_tp(pred_runs, gt_runs, threshold)
            assert result.tp <= max_matching_tp(pred_runs, gt_runs, threshold)
            assert result.tp + result.fp == len(pred)
            assert result.tp + result.fn == len(gt)

    def test_non_increasing_in_threshold(self, rng):
        """Test F1 never rises as the IoU threshold tightens."""
        thresholds = (0.1, 0.25, 0.5, 0.75, 1.0)
        for _ in range(300):
            length = int(rng.integers(2, 40))
            pred = extract_segments(_random_labels(rng, length, 3))
            gt = extract_segments(_random_labels(rng, length, 3))
            scores = [f1_at(pred, gt, t).f1 for t in thresholds]

            assert all(a >= b for a, b in zip(scores, scores[1:]))


class TestTopK:
    """Test Top-k accuracy."""

    def test_k_at_least_classes(self, rng):
        """Test k >= C always scores 100."""
        scores = rng.normal(size=(6, 4))
        assert top_k(scores, [0, 1, 2, 3, 0, 1], 4) == 100.0

    def test_top1_is_argmax_accuracy(self, rng):
        """Test k=1 equals argmax accuracy."""
        scores = rng.normal(size=(20, 4))
        gt = rng.integers(0, 4, size=20)
        expected = frame_accuracy(np.argmax(scores, axis=1), gt)

        assert top_k(scores, gt, 1) == pytest.approx(expected)

    def test_ties_favour_smaller_id(self):
        """Test equal scores rank the smaller class id first."""
        scores = np.zeros((2, 3))
        assert top_k(scores, [0, 2], 1) == 50.0
        assert top_k(scores, [1, 2], 2) == 50.0

    def test_matches_sort_oracle(self, rng):
        """Test random score matrices against a full sort."""
        for _ in range(50):
            scores = np.round(rng.normal(size=(6, 4)), 1)
            gt = rng.integers(0, 4, size=6)
            for k in (1, 2, 3):
                hits = sum(sorted_topk_hit(scores[t].tolist(), int(gt[t]), k) for t in range(6))
                assert top_k(scores, gt, k) == pytest.approx(100.0 * hits / 6)

    def test_invalid_k(self, rng):
        """Test k must be positive."""
        with pytest.raises(MetricsError):
            top_k(rng.normal(size=(2, 3)), [0, 1], 0)


class TestReports:
    """Test aggregated reports."""

    def test_single_perfect_video(self):
        """Test a perfect video scores 100 everywhere."""
        gt = [0, 0, 1, 1, 2]
        log_probs = np.log(np.eye(3)[gt] * 0.98 + 0.01)
        report = full_report(gt, log_probs, gt)

        assert report.accuracy == report.edit == report.top1 == report.top5 == 100.0
        assert all(v == 100.0 for v in report.f1.values())
        assert report.videos == 1
        assert report.frames == 5

    def test_two_video_aggregation(self):
        """Test frames pool for accuracy while edit averages per video."""
        gt = {"a": [0, 0, 1, 1], "b": [0, 1]}
        pred = {"a": [0, 0, 1, 1], "b": [1, 0]}
        log_probs = {v: np.log(np.eye(2)[p] * 0.9 + 0.05) for v, p in pred.items()}
        report = full_report(pred, log_probs, gt)

        assert report.accuracy == pytest.approx(100.0 * 4 / 6)
        assert report.edit == pytest.approx((100.0 + 0.0) / 2)
        assert report.top1 == pytest.approx(report.accuracy)
        assert set(report.per_video) == {"a", "b"}
        assert report.per_video["b"].accuracy == 0.0

    def test_order_independent(self):
        """Test the mapping order does not change the report."""
        gt = {"a": [0, 1, 1], "b": [1, 1, 0]}
        pred = {"a": [0, 0, 1], "b": [1, 0, 0]}
        scores = {v: np.log(np.eye(2)[p] * 0.8 + 0.1) for v, p in pred.items()}
        forward = full_report(pred, scores, gt)
        backward = full_report(dict(reversed(pred.items())), scores, dict(reversed(gt.items())))

        assert forward.to_dict() == backward.to_dict()

    def test_missing_prediction(self):
        """Test every ground-truth video needs a prediction."""
        with pytest.raises(MetricsError):
            full_report({"a": [0]}, {"a": np.zeros((1, 2))}, {"a": [0], "b": [1]})

    def test_dict_round_trip(self):
        """Test reports survive their JSON form."""
        gt = [0, 0, 1]
        report = full_report(gt, np.log(np.eye(2)[gt] * 0.9 + 0.05), gt)
        data = report.to_dict()

        assert set(data["f1"]) == {"0.10", "0.25", "0.50"}
        assert MetricsReport.from_dict(data) == report

    def test_mean_report(self):
        """Test fold reports are averaged and counts summed."""
        gt = [0, 0, 1]
        good = full_report(gt, np.log(np.eye(2)[gt] * 0.9 + 0.05), gt)
        bad = full_report([1, 1, 0], np.log(np.eye(2)[[1, 1, 0]] * 0.9 + 0.05), gt)
        mean = mean_report([good, bad])

        assert mean.accuracy == pytest.approx(50.0)
        assert mean.counts[0.5]["tp"] == good.counts[0.5]["tp"] + bad.counts[0.5]["tp"]
        with pytest.raises(MetricsError):
            mean_report([])


class TestRelabelling:
    """Test segment metrics depend on where labels change, not on class ids."""

    def test_consistent_permutation(self, rng):
        """Test Edit and F1 are unchanged when both sides share a class permutation."""
        for _ in range(200):
            length = int(rng.integers(1, 40))
            pred_labels = _random_labels(rng, length, 5)
            gt_labels = _random_labels(rng, length, 5)
            mapping = rng.permutation(5)
            pred, gt = extract_segments(pred_labels), extract_segments(gt_labels)
            pred_moved = extract_segments([int(mapping[c]) for c in pred_labels])
            gt_moved = extract_segments([int(mapping[c]) for c in gt_labels])

            assert edit_score(pred_moved, gt_moved) == pytest.approx(edit_score(pred, gt))
            for threshold in (0.1, 0.25, 0.5):
                assert f1_at(pred_moved, gt_moved, threshold) == f1_at(pred, gt, threshold)
