"""runtime/pipeline.py

End-to-end runs: ingestion, training, evaluation and ablations.

A run goes through the stages ingest, graph, structure, semantic, fuse,
train, eval and visualize. Every failure escaping a stage is re-raised as a
``StageError`` naming it. Graph, structure and semantic outputs are cached on
disk under ``<output_dir>/cache`` keyed by a hash of their inputs; a value is
always read back from its cache file, so a cache hit and a recomputation
produce the same numbers. The run manifest records the resolved config, the
content hash and wall-clock time of every stage and the BLAS thread count.
"""

import csv
import hashlib
import json
import logging
import os
import time
import zlib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..adapters.formats import (
    GraphCodec,
    content_hash,
    load_checkpoint,
    read_json,
    read_matrix,
    save_checkpoint,
    write_json,
    write_loss_log,
    write_matrix,
    write_report,
)
from ..config.labels import LabelFiles
from ..config.settings import RunConfig, config_to_dict
from ..core.errors import (
    ActionGraphError,
    DataError,
    ErrorMapper,
    MissingFile,
    RowCountMismatch,
    ShapeMismatch,
)
from ..core.graph import (
    SEMANTIC_KINDS,
    EdgeKind,
    FrameSequence,
    LabelMap,
    VideoGraph,
    build_graph,
    chunk,
    drop_edges,
    filter_edges,
)
from ..core.metrics import MetricsReport, full_report, mean_report
from ..core.model import ModelParams
from ..core.semantic import SemanticEncoder, embed_semantic, fuse_features, zero_semantic
from ..core.structure import embed_structure
from ..core.switches import Switches
from ..core.training import GraphExample, TrainState, node_accuracy, predict, train
from .factory import EncoderFactory
from .visualize import render_segmentation

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
STAGES = ("ingest", "graph", "structure", "semantic", "fuse", "train", "eval", "visualize")


def _version() -> str:
    from .. import __version__

    return __version__


def thread_count() -> Union[int, str]:
    """Thread count pinned through the BLAS environment, else ``unset/cpu_count=N``."""
    for name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        value = os.environ.get(name)
        if value and value.isdigit():
            return int(value)
    return f"unset/cpu_count={os.cpu_count() or 1}"


@dataclass
class RunManifest:
    """Everything needed to reproduce a run."""

    config: Dict[str, Any]
    seed: int
    version: str
    threads: Union[int, str]
    stages: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def for_config(cls, config: RunConfig) -> "RunManifest":
        return cls(config_to_dict(config), config.seed, _version(), thread_count())

    def record(
        self, stage: str, seconds: Optional[float] = None, digest: Optional[str] = None
    ) -> None:
        entry = self.stages.setdefault(stage, {"hash": None, "seconds": 0.0})
        if seconds is not None:
            entry["seconds"] = round(entry["seconds"] + seconds, 6)
        if digest is not None:
            entry["hash"] = digest

    def to_dict(self) -> Dict[str, Any]:
        return {"schema": MANIFEST_SCHEMA, **asdict(self)}

    def write(self, path) -> Path:
        return write_json(path, self.to_dict())


@contextmanager
def stage(name: str, manifest: Optional[RunManifest] = None) -> Iterator[None]:
    """Time a stage and attribute any failure to it."""
    start = time.perf_counter()
    try:
        yield
    except Exception as e:
        error = ErrorMapper.map_stage_error(name, e)
        if error is e:
            raise
        logger.error(f"Stage failed: {error.message}", extra={"stage": name})
        raise error from e
    finally:
        if manifest is not None:
            manifest.record(name, seconds=time.perf_counter() - start)


@dataclass(frozen=True)
class Video:
    """Ground truth, visual features and (optional) pseudo-labels of one video."""

    video_id: str
    labels: FrameSequence
    features: np.ndarray
    pseudo: Optional[FrameSequence] = None


@dataclass(frozen=True)
class Fold:
    name: str
    train: Tuple[str, ...]
    test: Tuple[str, ...]


@dataclass
class Dataset:
    label_map: LabelMap
    videos: Dict[str, Video]
    folds: List[Fold]


def _features_path(directory: Path, video_id: str) -> Path:
    for suffix in (".bin", ".tsv"):
        path = directory / f"{video_id}{suffix}"
        if path.is_file():
            return path
    raise MissingFile(
        f"no feature file for video '{video_id}' in {directory}", {"video_id": video_id}
    )


def read_folds(split_files: Sequence[str], video_ids: Sequence[str]) -> List[Fold]:
    """Folds from split files; no files means one fold using every video twice."""
    if not split_files:
        everything = tuple(sorted(video_ids))
        return [Fold("all", everything, everything)]
    folds = []
    for path in split_files:
        data = read_json(path)
        if not isinstance(data, dict) or "train" not in data or "test" not in data:
            raise DataError(f"split file {path} needs 'train' and 'test' lists", {"path": path})
        unknown = (set(data["train"]) | set(data["test"])) - set(video_ids)
        if unknown:
            raise DataError(f"split file {path} names unknown videos: {', '.join(sorted(unknown))}")
        folds.append(Fold(Path(path).stem, tuple(data["train"]), tuple(data["test"])))
    return folds


def ingest(config: RunConfig, manifest: Optional[RunManifest] = None) -> Dataset:
    """Load and validate every video of the configured dataset.

    Raises:
        StageError: with stage "ingest" for missing files, unknown label
            tokens or feature/label row mismatches
    """
    with stage("ingest", manifest):
        data = config.data
        data.check_paths()
        label_map = LabelFiles.load_label_map(data.label_map, data.background)
        labels_dir, features_dir = Path(data.labels_dir), Path(data.features_dir)
        pseudo_dir = Path(data.pseudo_labels_dir) if data.pseudo_labels_dir else None
        digest = hashlib.sha256()
        videos: Dict[str, Video] = {}
        for path in sorted(labels_dir.glob("*.txt")):
            sequence = LabelFiles.read_labels(path, label_map)
            video_id = sequence.video_id
            features = read_matrix(_features_path(features_dir, video_id))
            if features.shape[0] != len(sequence):
                raise RowCountMismatch(
                    f"video '{video_id}' has {len(sequence)} labels "
                    f"but {features.shape[0]} feature rows",
                    {"video_id": video_id},
                )
            pseudo = None
            if pseudo_dir is not None and (pseudo_dir / path.name).is_file():
                pseudo = LabelFiles.read_labels(
                    pseudo_dir / path.name, label_map, video_id, is_pseudo=True
                )
                if len(pseudo) != len(sequence):
                    raise RowCountMismatch(
                        f"video '{video_id}' has {len(pseudo)} pseudo-labels "
                        f"for {len(sequence)} frames",
                        {"video_id": video_id},
                    )
            videos[video_id] = Video(video_id, sequence, features, pseudo)
            digest.update(video_id.encode())
            digest.update(np.asarray(sequence.labels, dtype="<i8").tobytes())
            digest.update(np.ascontiguousarray(features, dtype="<f8").tobytes())
        if not videos:
            raise DataError(f"no label files found in {labels_dir}", {"path": str(labels_dir)})
        folds = read_folds(data.splits, list(videos))
    if manifest is not None:
        manifest.record("ingest", digest=digest.hexdigest())
    logger.info("Dataset ingested", extra={"videos": len(videos), "folds": len(folds)})
    return Dataset(label_map, videos, folds)


def _key(payload: Dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


class StageCache:
    """Content-addressed files of the graph, structure and semantic stages."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0

    def graph(self, key: str, build: Callable[[], VideoGraph]) -> VideoGraph:
        if self.root is None:
            return build()
        path = self.root / "graph" / f"{key}.json"
        if path.is_file():
            self.hits += 1
        else:
            self.misses += 1
            GraphCodec.write(path, build())
        return GraphCodec.read(path)

    def matrix(self, stage_name: str, key: str, compute: Callable[[], np.ndarray]) -> np.ndarray:
        if self.root is None:
            # same f32 rounding as a cache file
            return np.asarray(compute(), dtype=np.float32).astype(np.float64)
        path = self.root / stage_name / f"{key}.bin"
        if path.is_file():
            self.hits += 1
        else:
            self.misses += 1
            write_matrix(path, compute())
        return read_matrix(path)


def _labels_hash(sequence: FrameSequence) -> str:
    return hashlib.sha256(np.asarray(sequence.labels, dtype="<i8").tobytes()).hexdigest()


def prepare_examples(
    dataset: Dataset,
    video_ids: Sequence[str],
    config: RunConfig,
    role: str,
    encoder: Optional[SemanticEncoder],
    cache: StageCache,
    manifest: Optional[RunManifest] = None,
) -> List[GraphExample]:
    """Chunk-graphs with fused features for the given videos.

    Training graphs are built from ground truth. Test graphs are built from
    pseudo-labels when a video has them (unless oracle test labels are
    switched on), and lose their semantic edges and semantic block when
    test-time semantic information is switched off. Node labels of every
    example are always the ground truth.
    """
    ablation = config.ablation
    preset = Switches.edge_preset(ablation.edges)
    modality = Switches.modality_preset(ablation.modalities)
    drop_probability = preset.drop_probability
    if ablation.drop_probability is not None:
        drop_probability = ablation.drop_probability
    drop_kinds = preset.drop_kinds or SEMANTIC_KINDS
    strip_semantic = role == "test" and not ablation.test_semantic
    semantic_dim = encoder.dimension if encoder is not None else config.prompt.dimension
    digests = {name: hashlib.sha256() for name in ("graph", "structure", "semantic", "fuse")}
    examples: List[GraphExample] = []

    for video_id in video_ids:
        video = dataset.videos[video_id]
        graph_sequence = video.labels
        if role == "test" and not ablation.oracle_test_labels:
            if video.pseudo is not None:
                graph_sequence = video.pseudo
            else:
                logger.warning(
                    "Test video has no pseudo-labels, using ground truth",
                    extra={"video_id": video_id},
                )
        gt_chunks = chunk(video.labels, (video.features,), config.graph.chunk_size)
        graph_chunks = chunk(graph_sequence, (), config.graph.chunk_size)

        for gt_piece, piece in zip(gt_chunks, graph_chunks):
            seq = piece.sequence
            graph_key = _key(
                {
                    "video_id": video_id,
                    "chunk": piece.index,
                    "labels": _labels_hash(seq),
                    "gamma": config.graph.gamma,
                    "edges": preset.name,
                    "drop": drop_probability,
                    "strip_semantic": strip_semantic,
                    "seed": config.seed,
                }
            )

            def build(seq=seq, index=piece.index) -> VideoGraph:
                graph = build_graph(seq, config.graph.gamma, chunk=index)
                graph = filter_edges(graph, preset.kinds)
                if drop_probability > 0:
                    rng = np.random.default_rng([config.seed, zlib.crc32(video_id.encode()), index])
                    graph = drop_edges(graph, drop_probability, rng, drop_kinds)
                if strip_semantic:
                    graph = filter_edges(graph, set(EdgeKind) - SEMANTIC_KINDS)
                return graph

            with stage("graph", manifest):
                graph = cache.graph(graph_key, build)
                digests["graph"].update(json.dumps(GraphCodec.to_dict(graph)).encode())

            with stage("structure", manifest):
                structural = cache.matrix(
                    "structure",
                    _key({"graph": graph_key, "walk": asdict(config.walk)}),
                    lambda g=graph: embed_structure(g, config.walk).matrix,
                )
                digests["structure"].update(structural.tobytes())

            with stage("semantic", manifest):
                if encoder is None or strip_semantic:
                    semantic = zero_semantic(len(seq), semantic_dim).matrix
                else:
                    semantic_key = _key(
                        {
                            "labels": _labels_hash(seq),
                            "encoder": str(encoder),
                            "prompt": asdict(config.prompt),
                            "table": config.data.embedding_table,
                        }
                    )
                    semantic = cache.matrix(
                        "semantic",
                        semantic_key,
                        lambda s=seq: embed_semantic(s, dataset.label_map, encoder).matrix,
                    )
                digests["semantic"].update(semantic.tobytes())

            with stage("fuse", manifest):
                bundle = fuse_features(gt_piece.features[0], structural, semantic)
                features = bundle.select(modality.blocks)
                example = GraphExample.from_graph(graph, features, labels=gt_piece.sequence.labels)
                digests["fuse"].update(np.ascontiguousarray(features, dtype="<f8").tobytes())
            examples.append(example)
            logger.debug(
                "Prepared chunk",
                extra={
                    "video_id": video_id,
                    "chunk": piece.index,
                    "role": role,
                    **graph.kind_counts(),
                },
            )

    if manifest is not None:
        for name, digest in digests.items():
            manifest.record(name, digest=digest.hexdigest())
    return examples


def _encoder(config: RunConfig) -> Optional[SemanticEncoder]:
    return EncoderFactory.from_config(
        config.prompt, config.ablation.semantic, config.data.embedding_table
    )


@dataclass
class TrainOutcome:
    params: ModelParams
    state: TrainState
    checkpoint: Path
    manifest: RunManifest
    train_accuracy: float


@dataclass
class EvalOutcome:
    report: MetricsReport
    predictions: Dict[str, np.ndarray]
    manifest: RunManifest


def run_train(
    config: RunConfig, dataset: Optional[Dataset] = None, fold: Optional[Fold] = None
) -> TrainOutcome:
    """Train on the training videos of ``fold`` (default: the first fold).

    Writes ``checkpoint/``, ``loss_log.csv`` and ``train_manifest.json`` to
    the output directory.
    """
    out = Path(config.output_dir)
    manifest = RunManifest.for_config(config)
    dataset = dataset or ingest(config, manifest)
    fold = fold or dataset.folds[0]
    cache = StageCache(out / "cache")
    logger.info(
        "Training run started",
        extra={"fold": fold.name, "videos": len(fold.train), "output": str(out)},
    )

    examples = prepare_examples(
        dataset, fold.train, config, "train", _encoder(config), cache, manifest
    )
    with stage("train", manifest):
        params, state = train(examples, config.hyper, config.seed, dataset.label_map.num_classes)
        accuracy = node_accuracy(examples, params, config.hyper)
        checkpoint = save_checkpoint(
            out / "checkpoint",
            params,
            config.hyper,
            config.seed,
            state,
            extra={"modalities": config.ablation.modalities, "fold": fold.name},
        )
        write_loss_log(out / "loss_log.csv", state.log)
    manifest.record("train", digest=content_hash(checkpoint))
    manifest.extra.update({"fold": fold.name, "train_accuracy": accuracy, "cache_hits": cache.hits})
    manifest.write(out / "train_manifest.json")
    logger.info("Training run finished", extra={"fold": fold.name, "train_accuracy": accuracy})
    return TrainOutcome(params, state, checkpoint, manifest, accuracy)


def run_eval(
    config: RunConfig,
    checkpoint: Optional[Path] = None,
    dataset: Optional[Dataset] = None,
    fold: Optional[Fold] = None,
) -> EvalOutcome:
    """Evaluate a checkpoint on the test videos of ``fold``.

    Writes ``predictions/<video>.txt``, ``figures/<video>.svg``,
    ``report.json`` and ``eval_manifest.json`` to the output directory.

    The forward pass uses the hyperparameters stored with the checkpoint,
    not ``config.hyper``.

    Raises:
        StageError: with stage "eval" wrapping ``ShapeMismatch`` when the
            checkpoint was trained on other modalities or does not fit the
            configured features or classes
    """
    out = Path(config.output_dir)
    checkpoint = Path(checkpoint) if checkpoint is not None else out / "checkpoint"
    manifest = RunManifest.for_config(config)
    dataset = dataset or ingest(config, manifest)
    fold = fold or dataset.folds[0]
    label_map = dataset.label_map
    with stage("eval", manifest):
        stored = load_checkpoint(checkpoint)
        params, hyper = stored.params, stored.hyper
        trained_on = stored.manifest.get("modalities")
        if trained_on is not None and trained_on != config.ablation.modalities:
            raise ShapeMismatch(
                f"checkpoint was trained on modalities {trained_on!r}, "
                f"run selects {config.ablation.modalities!r}"
            )

    examples = prepare_examples(
        dataset, fold.test, config, "test", _encoder(config), StageCache(out / "cache"), manifest
    )

    with stage("eval", manifest):
        width = examples[0].features.shape[1] if examples else params.input_dim
        if width != params.input_dim or params.num_classes != label_map.num_classes:
            raise ShapeMismatch(
                f"checkpoint expects {params.input_dim} features and {params.num_classes} classes, "
                f"run provides {width} and {label_map.num_classes}"
            )
        chunks: Dict[str, List[Tuple[int, np.ndarray]]] = {}
        for example in examples:
            log_probs = predict(example, params, hyper).log_probs
            chunks.setdefault(example.video_id, []).append((example.chunk, log_probs))
        scores = {
            video_id: np.concatenate([lp for _, lp in sorted(parts, key=lambda p: p[0])])
            for video_id, parts in chunks.items()
        }
        predictions = {video_id: np.argmax(lp, axis=1) for video_id, lp in scores.items()}
        gt = {video_id: np.asarray(dataset.videos[video_id].labels.labels) for video_id in scores}
        background = label_map.background if config.data.exclude_background else None
        report = full_report(predictions, scores, gt, background=background)
        for video_id, labels in predictions.items():
            LabelFiles.write_labels(out / "predictions" / f"{video_id}.txt", labels, label_map)
        report_path = write_report(out / "report.json", report)
    manifest.record("eval", digest=content_hash(report_path))

    with stage("visualize", manifest):
        for video_id, labels in sorted(predictions.items()):
            figure = out / "figures" / f"{video_id}.svg"
            render_segmentation(gt[video_id], labels, label_map, figure, title=video_id)
    manifest.record("visualize", digest=content_hash(out / "figures"))
    manifest.extra.update({"fold": fold.name, "checkpoint": str(checkpoint)})
    manifest.write(out / "eval_manifest.json")
    logger.info(
        "Evaluation finished",
        extra={"fold": fold.name, "accuracy": report.accuracy, "edit": report.edit},
    )
    return EvalOutcome(report, predictions, manifest)


def run_folds(config: RunConfig, dataset: Optional[Dataset] = None) -> MetricsReport:
    """Train and evaluate every fold; the report is the mean over folds."""
    dataset = dataset or ingest(config)
    reports = []
    for fold in dataset.folds:
        fold_config = config
        if len(dataset.folds) > 1:
            fold_config = replace(config, output_dir=str(Path(config.output_dir) / fold.name))
        run_train(fold_config, dataset, fold)
        reports.append(run_eval(fold_config, dataset=dataset, fold=fold).report)
    report = mean_report(reports)
    write_report(Path(config.output_dir) / "report.json", report)
    return report


@dataclass
class AblationRow:
    grid: str
    setting: str
    report: Optional[MetricsReport] = None
    error: Optional[str] = None

    @property
    def status(self) -> str:
        return "ok" if self.error is None else "failed"

    def values(self) -> List[Any]:
        r = self.report
        scores: List[Any] = [""] * 7
        if r is not None:
            scores = [r.accuracy, r.edit, r.f1[0.10], r.f1[0.25], r.f1[0.50], r.top1, r.top5]
            scores = [round(s, 4) for s in scores]
        return [self.grid, self.setting, self.status, *scores, self.error or ""]


ABLATION_COLUMNS = (
    "grid", "setting", "status", "accuracy", "edit",
    "f1@10", "f1@25", "f1@50", "top1", "top5", "error",
)  # fmt: skip


def _switch(config: RunConfig, **changes: Any) -> RunConfig:
    return replace(config, ablation=replace(config.ablation, **changes))


def ablation_cells(config: RunConfig) -> List[Tuple[str, str, RunConfig]]:
    """Every (grid, setting, config) cell of the configured ablation grids."""
    ablation = config.ablation
    cells = []
    for grid in ablation.grids:
        if grid == "edges":
            cells += [(grid, name, _switch(config, edges=name)) for name in ablation.edge_grid]
        elif grid == "modalities":
            cells += [
                (grid, name, _switch(config, modalities=name)) for name in ablation.modality_grid
            ]
        elif grid == "hops":
            cells += [
                (grid, str(hops), replace(config, walk=replace(config.walk, hops=hops)))
                for hops in ablation.hop_grid
            ]
        elif grid == "semantic":
            cells += [
                (grid, mode, _switch(config, semantic=mode)) for mode in ablation.semantic_grid
            ]
        elif grid == "test_semantic":
            cells += [
                ("test_semantic", "with", _switch(config, test_semantic=True)),
                ("test_semantic", "without", _switch(config, test_semantic=False)),
            ]
    return cells


def write_ablation_table(directory: Path, rows: Sequence[AblationRow]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "ablation.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ABLATION_COLUMNS)
        for row in rows:
            writer.writerow(row.values())
    write_json(
        directory / "ablation.json",
        [
            {
                "grid": row.grid,
                "setting": row.setting,
                "status": row.status,
                "error": row.error,
                "report": row.report.to_dict() if row.report else None,
            }
            for row in rows
        ],
    )
    return path


def run_ablation(config: RunConfig, dataset: Optional[Dataset] = None) -> List[AblationRow]:
    """Train and evaluate every ablation cell with the shared seed.

    A failing cell is logged and recorded in the table; the others still run.
    Writes ``ablation.csv`` and ``ablation.json`` to the output directory.
    """
    out = Path(config.output_dir)
    dataset = dataset or ingest(config)
    rows = []
    for grid, setting, cell_config in ablation_cells(config):
        cell_config = replace(cell_config, output_dir=str(out / "ablation" / grid / setting))
        logger.info("Ablation cell started", extra={"grid": grid, "setting": setting})
        try:
            rows.append(AblationRow(grid, setting, report=run_folds(cell_config, dataset)))
        except ActionGraphError as e:
            logger.warning(
                f"Ablation cell failed: {e.message}", extra={"grid": grid, "setting": setting}
            )
            rows.append(AblationRow(grid, setting, error=e.message))
    write_ablation_table(out, rows)
    return rows
