"""core/metrics.py

Action segmentation metrics.

Frame accuracy and Top-k are pooled over frames; the segmental edit score
and overlap F1 are computed per video and averaged. Every score is a
percentage in [0, 100]. An optional background class id can be excluded
from every metric.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MetricsError
from .graph import segment_runs

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.10, 0.25, 0.50)


class Segment(NamedTuple):
    label: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class SegmentList:
    """Contiguous, non-overlapping segments; neighbours differ in class."""

    segments: Tuple[Segment, ...] = ()

    def __post_init__(self):
        segments = tuple(Segment(int(s[0]), int(s[1]), int(s[2])) for s in self.segments)
        object.__setattr__(self, "segments", segments)
        expected = 0
        for i, segment in enumerate(segments):
            if segment.start != expected or segment.end < segment.start:
                raise MetricsError(f"segment {i} does not continue at frame {expected}")
            if i and segment.label == segments[i - 1].label:
                raise MetricsError(f"segments {i - 1} and {i} share class {segment.label}")
            expected = segment.end + 1

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __getitem__(self, index: int) -> Segment:
        return self.segments[index]

    @property
    def labels(self) -> List[int]:
        return [s.label for s in self.segments]

    def without(self, background: Optional[int]) -> List[Segment]:
        if background is None:
            return list(self.segments)
        return [s for s in self.segments if s.label != background]


def _check_lengths(pred: Sequence[int], gt: Sequence[int]) -> None:
    if len(pred) != len(gt):
        raise MetricsError(f"prediction has {len(pred)} frames, ground truth has {len(gt)}")
    if len(gt) == 0:
        raise MetricsError("cannot score an empty sequence")


def _frame_counts(pred, gt, background: Optional[int]) -> Tuple[int, int]:
    _check_lengths(pred, gt)
    pred, gt = np.asarray(pred), np.asarray(gt)
    counted = gt != background if background is not None else np.ones(len(gt), dtype=bool)
    return int((pred[counted] == gt[counted]).sum()), int(counted.sum())


def frame_accuracy(
    pred: Sequence[int], gt: Sequence[int], background: Optional[int] = None
) -> float:
    """Percentage of frames labelled correctly.

    >>> frame_accuracy([0, 0, 1, 1], [0, 1, 1, 1])
    75.0
    """
    correct, counted = _frame_counts(pred, gt, background)
    if counted == 0:
        raise MetricsError("no frames left after excluding the background class")
    return 100.0 * correct / counted


def extract_segments(labels: Sequence[int]) -> SegmentList:
    return SegmentList(tuple(Segment(*run) for run in segment_runs(labels)))


def _levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    row = np.arange(len(b) + 1)
    for i, x in enumerate(a, start=1):
        previous, row[0] = row[0], i
        for j, y in enumerate(b, start=1):
            previous, row[j] = row[j], min(row[j] + 1, row[j - 1] + 1, previous + (x != y))
    return int(row[-1])


def edit_score(pred: SegmentList, gt: SegmentList, background: Optional[int] = None) -> float:
    """Normalised Levenshtein similarity of the segment class sequences."""
    p = [s.label for s in pred.without(background)]
    g = [s.label for s in gt.without(background)]
    if not p and not g:
        return 100.0
    return 100.0 * (1.0 - _levenshtein(p, g) / max(len(p), len(g)))


def segment_iou(a: Segment, b: Segment) -> float:
    """Frame IoU of two segments with inclusive ends."""
    intersection = max(0, min(a.end, b.end) - max(a.start, b.start) + 1)
    return intersection / (a.length + b.length - intersection)


class F1Result(NamedTuple):
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _percentages(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    if tp == 0:
        empty = fp == 0 and fn == 0
        return (100.0, 100.0, 100.0) if empty else (0.0, 0.0, 0.0)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 100.0 * precision, 100.0 * recall, 100.0 * 2 * precision * recall / (precision + recall)


def f1_at(
    pred: SegmentList, gt: SegmentList, threshold: float, background: Optional[int] = None
) -> F1Result:
    """Overlap F1 at an IoU threshold.

    Predicted segments are visited in order; each claims the unmatched
    same-class ground-truth segment of highest IoU if that IoU reaches
    ``threshold`` (ties go to the earlier segment), otherwise it is a false
    positive. Unclaimed ground-truth segments are false negatives.
    """
    if not 0.0 < threshold <= 1.0:
        raise MetricsError(f"threshold must lie in (0, 1], got {threshold}")
    predicted = pred.without(background)
    truth = gt.without(background)
    matched = [False] * len(truth)
    tp = fp = 0
    for segment in predicted:
        best, best_index = -1.0, None
        for index, candidate in enumerate(truth):
            if matched[index] or candidate.label != segment.label:
                continue
            iou = segment_iou(segment, candidate)
            if iou > best:
                best, best_index = iou, index
        if best_index is not None and best >= threshold:
            tp += 1
            matched[best_index] = True
        else:
            fp += 1
    fn = matched.count(False)
    return F1Result(*_percentages(tp, fp, fn), tp, fp, fn)


def _topk_counts(log_probs, gt, k: int, background: Optional[int]) -> Tuple[int, int]:
    if k < 1:
        raise MetricsError(f"k must be at least 1, got {k}")
    scores = np.asarray(log_probs)
    gt = np.asarray(gt, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != len(gt):
        raise MetricsError(f"score matrix of shape {scores.shape} for {len(gt)} frames")
    counted = gt != background if background is not None else np.ones(len(gt), dtype=bool)
    if k >= scores.shape[1]:
        return int(counted.sum()), int(counted.sum())
    true_scores = scores[np.arange(len(gt)), gt][:, None]
    ids = np.arange(scores.shape[1])[None, :]
    rank = (scores > true_scores).sum(axis=1) + (
        (scores == true_scores) & (ids < gt[:, None])
    ).sum(axis=1)
    return int(((rank < k) & counted).sum()), int(counted.sum())


def top_k(
    log_probs: np.ndarray, gt: Sequence[int], k: int, background: Optional[int] = None
) -> float:
    """Percentage of frames whose true class ranks among the ``k`` best.

    Equal scores rank the smaller class id first.
    """
    hits, counted = _topk_counts(log_probs, gt, k, background)
    if counted == 0:
        raise MetricsError("no frames left after excluding the background class")
    return 100.0 * hits / counted


@dataclass
class MetricsReport:
    """Scores of one evaluation, optionally with a per-video breakdown."""

    accuracy: float
    edit: float
    f1: Dict[float, float]
    top1: float
    top5: float
    counts: Dict[float, Dict[str, int]]
    frames: int = 0
    videos: int = 0
    per_video: Dict[str, "MetricsReport"] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["f1"] = {f"{t:.2f}": v for t, v in self.f1.items()}
        data["counts"] = {f"{t:.2f}": dict(c) for t, c in self.counts.items()}
        data["per_video"] = {vid: report.to_dict() for vid, report in self.per_video.items()}
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricsReport":
        return cls(
            accuracy=float(data["accuracy"]),
            edit=float(data["edit"]),
            f1={float(t): float(v) for t, v in data["f1"].items()},
            top1=float(data["top1"]),
            top5=float(data["top5"]),
            counts={float(t): {k: int(n) for k, n in c.items()} for t, c in data["counts"].items()},
            frames=int(data.get("frames", 0)),
            videos=int(data.get("videos", 0)),
            per_video={v: cls.from_dict(r) for v, r in data.get("per_video", {}).items()},
        )


def mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Unweighted mean of several reports, e.g. over cross-validation folds.

    Counts are summed; the per-video breakdowns are merged.
    """
    if not reports:
        raise MetricsError("cannot average zero reports")
    thresholds = list(reports[0].f1)
    merged: Dict[str, MetricsReport] = {}
    for report in reports:
        merged.update(report.per_video)
    return MetricsReport(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        edit=float(np.mean([r.edit for r in reports])),
        f1={t: float(np.mean([r.f1[t] for r in reports])) for t in thresholds},
        top1=float(np.mean([r.top1 for r in reports])),
        top5=float(np.mean([r.top5 for r in reports])),
        counts={
            t: {key: sum(r.counts[t][key] for r in reports) for key in ("tp", "fp", "fn")}
            for t in thresholds
        },
        frames=sum(r.frames for r in reports),
        videos=sum(r.videos for r in reports),
        per_video=dict(sorted(merged.items())),
    )


Labels = Union[Sequence[int], np.ndarray]


def full_report(
    pred: Union[Labels, Mapping[str, Labels]],
    log_probs: Union[np.ndarray, Mapping[str, np.ndarray]],
    gt: Union[Labels, Mapping[str, Labels]],
    background: Optional[int] = None,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> MetricsReport:
    """Score one video, or several given as mappings keyed by video id.

    Accuracy and Top-k pool the frames of every video; Edit and F1 are the
    unweighted mean of the per-video scores. Videos are processed in sorted
    id order so the result does not depend on mapping order.
    """
    if not isinstance(gt, Mapping):
        pred, log_probs, gt = {"video": pred}, {"video": log_probs}, {"video": gt}
    if not gt:
        raise MetricsError("no videos to score")
    missing = set(gt) - set(pred)
    if missing:
        raise MetricsError(f"no prediction for videos: {', '.join(sorted(missing))}")

    pooled = {"correct": 0, "counted": 0, "top1": 0, "top5": 0}
    edits: List[float] = []
    f1s: Dict[float, List[float]] = {t: [] for t in thresholds}
    counts = {t: {"tp": 0, "fp": 0, "fn": 0} for t in thresholds}
    per_video: Dict[str, MetricsReport] = {}

    for video_id in sorted(gt):
        p, g, scores = pred[video_id], gt[video_id], log_probs[video_id]
        correct, counted = _frame_counts(p, g, background)
        top1, _ = _topk_counts(scores, g, 1, background)
        top5, _ = _topk_counts(scores, g, 5, background)
        pred_segments, gt_segments = extract_segments(p), extract_segments(g)
        edit = edit_score(pred_segments, gt_segments, background)
        video_f1, video_counts = {}, {}
        for t in thresholds:
            result = f1_at(pred_segments, gt_segments, t, background)
            video_f1[t] = result.f1
            video_counts[t] = {"tp": result.tp, "fp": result.fp, "fn": result.fn}
            f1s[t].append(result.f1)
            for key in ("tp", "fp", "fn"):
                counts[t][key] += video_counts[t][key]
        edits.append(edit)
        pooled["correct"] += correct
        pooled["counted"] += counted
        pooled["top1"] += top1
        pooled["top5"] += top5
        per_video[video_id] = MetricsReport(
            accuracy=100.0 * correct / counted if counted else 0.0,
            edit=edit,
            f1=video_f1,
            top1=100.0 * top1 / counted if counted else 0.0,
            top5=100.0 * top5 / counted if counted else 0.0,
            counts=video_counts,
            frames=len(g),
            videos=1,
        )

    counted = pooled["counted"]
    if counted == 0:
        raise MetricsError("no frames left after excluding the background class")
    report = MetricsReport(
        accuracy=100.0 * pooled["correct"] / counted,
        edit=float(np.mean(edits)),
        f1={t: float(np.mean(f1s[t])) for t in thresholds},
        top1=100.0 * pooled["top1"] / counted,
        top5=100.0 * pooled["top5"] / counted,
        counts=counts,
        frames=sum(len(gt[v]) for v in gt),
        videos=len(gt),
        per_video=per_video,
    )
    logger.debug(
        "Scored videos",
        extra={"videos": report.videos, "accuracy": report.accuracy, "edit": report.edit},
    )
    return report
