"""runtime/synthetic.py

Desk-scale synthetic action segmentation datasets.

Every class owns a Gaussian cluster centre in visual-feature space; a video
is a sequence of runs with uniformly drawn lengths, consecutive runs of
different classes, and frame features scattered around the centre of their
class. Test videos also receive pseudo-labels: the ground truth with some
whole runs relabelled and run boundaries jittered, standing in for the
predictions of an external frame classifier.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..adapters.formats import write_json, write_matrix
from ..config.labels import LabelFiles
from ..config.settings import DataConfig, SyntheticConfig
from ..core.graph import LabelMap, segment_runs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    labels: np.ndarray
    features: np.ndarray
    pseudo_labels: Optional[np.ndarray] = None


def synthetic_label_map(num_classes: int) -> LabelMap:
    return LabelMap(tuple((f"action{c:02d}", c) for c in range(num_classes)))


def _labels(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    labels: List[int] = []
    previous = -1
    while len(labels) < config.frames:
        label = int(rng.integers(config.num_classes))
        if label == previous:
            label = (label + 1) % config.num_classes
        labels.extend([label] * int(rng.integers(config.min_run, config.max_run + 1)))
        previous = label
    return np.asarray(labels[: config.frames], dtype=np.int64)


def corrupt_labels(
    labels: np.ndarray,
    num_classes: int,
    relabel_probability: float,
    jitter: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pseudo-labels from ground truth.

    Each boundary moves by up to ``jitter`` frames (staying inside its two runs),
    then each run is relabelled to another class with ``relabel_probability``.
    """
    pseudo = np.array(labels, dtype=np.int64)
    runs = segment_runs(labels.tolist())
    for left, right in zip(runs, runs[1:]):
        shift = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
        boundary = min(max(right.start + shift, left.start + 1), right.end)
        if boundary < right.start:
            pseudo[boundary : right.start] = right.label
        else:
            pseudo[right.start : boundary] = left.label
    for run in segment_runs(pseudo.tolist()):
        if rng.random() < relabel_probability:
            shift = int(rng.integers(1, num_classes))
            pseudo[run.start : run.end + 1] = (run.label + shift) % num_classes
    return pseudo


def generate_videos(config: SyntheticConfig, seed: int = 0) -> Dict[str, List[SyntheticVideo]]:
    """Videos of the "train" and "test" splits, fully determined by ``seed``."""
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(config.num_classes, config.visual_dim)) * config.cluster_scale
    splits: Dict[str, List[SyntheticVideo]] = {"train": [], "test": []}
    counts = {"train": config.train_videos, "test": config.test_videos}
    for split, count in counts.items():
        for index in range(count):
            labels = _labels(config, rng)
            noise = rng.normal(size=(len(labels), config.visual_dim))
            features = centres[labels] + config.noise * noise
            pseudo = None
            if split == "test":
                pseudo = corrupt_labels(
                    labels,
                    config.num_classes,
                    config.relabel_probability,
                    config.boundary_jitter,
                    rng,
                )
            splits[split].append(SyntheticVideo(f"{split}_{index:03d}", labels, features, pseudo))
    return splits


def write_dataset(
    directory: Union[str, Path], config: SyntheticConfig, seed: int = 0
) -> DataConfig:
    """Generate a dataset and lay it out on disk.

    Writes ``labels/``, ``features/``, ``pseudo/``, ``mapping.txt``,
    ``splits/split1.json`` and ``synthetic.json`` (the generator settings)
    below ``directory`` and returns the matching data section.
    """
    root = Path(directory)
    label_map = synthetic_label_map(config.num_classes)
    splits = generate_videos(config, seed)
    LabelFiles.write_label_map(root / "mapping.txt", label_map)
    for videos in splits.values():
        for video in videos:
            name = f"{video.video_id}.txt"
            LabelFiles.write_labels(root / "labels" / name, video.labels, label_map)
            write_matrix(root / "features" / f"{video.video_id}.bin", video.features)
            if video.pseudo_labels is not None:
                LabelFiles.write_labels(root / "pseudo" / name, video.pseudo_labels, label_map)
    split_file = write_json(
        root / "splits" / "split1.json",
        {name: [v.video_id for v in videos] for name, videos in splits.items()},
    )
    write_json(root / "synthetic.json", {"seed": seed, **asdict(config)})
    (root / "pseudo").mkdir(parents=True, exist_ok=True)
    logger.info(
        "Synthetic dataset written",
        extra={"path": str(root), "train": len(splits["train"]), "test": len(splits["test"])},
    )
    return DataConfig(
        labels_dir=str(root / "labels"),
        features_dir=str(root / "features"),
        label_map=str(root / "mapping.txt"),
        pseudo_labels_dir=str(root / "pseudo"),
        splits=(str(split_file),),
    )
