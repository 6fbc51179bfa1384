"""adapters/formats.py

On-disk formats of actiongraph.

This module translates between the in-memory types of ``core`` and the files
a run reads and writes: graph JSON, feature matrices (binary with a JSON
manifest, or TSV), embedding tables, checkpoints, loss logs and metric
reports. Every writer is deterministic: the same object always produces the
same bytes, which is what the run manifest hashes rely on.
"""

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from ..core.errors import FormatError, MissingFile
from ..core.graph import Edge, EdgeKind, VideoGraph
from ..core.metrics import MetricsReport
from ..core.model import BUFFER_NAMES, TRAINABLE_NAMES, HyperParams, ModelParams
from ..core.training import LossRecord, TrainState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHECKPOINT_FORMAT = 1
LOSS_LOG_HEADER = ("epoch", "batch", "loss_cls", "loss_edge", "loss_total")
_DTYPE_CODES = {"float32": ("f32", "<f4"), "float64": ("f64", "<f8")}
_CODE_DTYPES = {code: np.dtype(little) for code, little in _DTYPE_CODES.values()}


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"file not found: {path}", {"path": str(path)})
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e.msg}", {"path": str(path)}) from e


def content_hash(path: PathLike) -> str:
    """SHA-256 of a file, or of every file below a directory in sorted order."""
    path = Path(path)
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for file in files:
        if path.is_dir():
            digest.update(file.relative_to(path).as_posix().encode())
        digest.update(file.read_bytes())
    return digest.hexdigest()


class GraphCodec:
    """Conversion between ``VideoGraph`` and its JSON object.

    Keys are written in the fixed order video_id, chunk, T, labels, gamma,
    edges; every edge is ``[src, dst, kind_code, weight]`` and edges keep
    the (src, dst, kind) order of the graph.
    """

    @staticmethod
    def to_dict(graph: VideoGraph) -> Dict[str, Any]:
        return {
            "video_id": graph.video_id,
            "chunk": graph.chunk,
            "T": graph.num_nodes,
            "labels": list(graph.labels),
            "gamma": graph.gamma,
            "edges": [[e.src, e.dst, int(e.kind), e.weight] for e in graph.edges],
        }

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> VideoGraph:
        """Rebuild a graph; its invariants are re-checked on construction.

        Raises:
            FormatError: missing keys, bad edge rows or T disagreeing with labels
        """
        try:
            labels = [int(label) for label in data["labels"]]
            if int(data["T"]) != len(labels):
                raise FormatError(f"graph declares T={data['T']} but has {len(labels)} labels")
            edges = tuple(
                Edge(int(src), int(dst), EdgeKind(int(kind)), float(weight))
                for src, dst, kind, weight in data["edges"]
            )
            return VideoGraph(
                str(data["video_id"]),
                int(data["chunk"]),
                tuple(labels),
                float(data["gamma"]),
                edges,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed graph object: {e}") from e

    @staticmethod
    def write(path: PathLike, graph: VideoGraph) -> Path:
        return write_json(path, GraphCodec.to_dict(graph))

    @staticmethod
    def read(path: PathLike) -> VideoGraph:
        return GraphCodec.from_dict(read_json(path))


def _manifest_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """Write ``matrix`` as row-major little-endian f32 plus its JSON manifest.

    ``path`` is the binary file; the manifest sits next to it with a .json
    suffix.
    """
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
    manifest = {
        "rows": int(matrix.shape[0]),
        "cols": int(matrix.shape[1]),
        "dtype": "f32",
        "endianness": "little",
    }
    write_json(_manifest_path(path), manifest)
    return path


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a matrix file as float64.

    Files ending in .tsv are parsed as text, one row per line; anything else
    is the binary format with its manifest.

    Raises:
        MissingFile: file or manifest absent
        FormatError: size or manifest does not match the data
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"matrix file not found: {path}", {"path": str(path)})
    if path.suffix == ".tsv":
        rows = [line.split("\t") for line in path.read_text().splitlines() if line.strip()]
        try:
            matrix = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
        except ValueError as e:
            raise FormatError(f"{path} has a non-numeric entry: {e}", {"path": str(path)}) from e
        if matrix.ndim != 2:
            raise FormatError(f"{path} has rows of different lengths", {"path": str(path)})
        return matrix
    manifest = read_json(_manifest_path(path))
    try:
        rows, cols = int(manifest["rows"]), int(manifest["cols"])
        dtype = _CODE_DTYPES[manifest.get("dtype", "f32")]
    except (KeyError, ValueError) as e:
        raise FormatError(f"bad matrix manifest for {path}: {e}", {"path": str(path)}) from e
    if manifest.get("endianness", "little") != "little":
        raise FormatError(f"{path} is not little-endian", {"path": str(path)})
    data = np.frombuffer(path.read_bytes(), dtype=dtype)
    if data.size != rows * cols:
        raise FormatError(
            f"{path} holds {data.size} values, manifest declares {rows}x{cols}", {"path": str(path)}
        )
    return data.reshape(rows, cols).astype(np.float64)


def write_embedding_table(path: PathLike, table: Mapping[str, Sequence[float]]) -> Path:
    return write_json(path, {token: [float(v) for v in vector] for token, vector in table.items()})


def write_loss_log(path: PathLike, records: Sequence[LossRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOSS_LOG_HEADER)
        for r in records:
            losses = (r.loss_cls, r.loss_edge, r.loss_total)
            writer.writerow([r.epoch, r.batch, *(repr(v) for v in losses)])
    return path


def read_loss_log(path: PathLike) -> List[LossRecord]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"loss log not found: {path}", {"path": str(path)})
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != LOSS_LOG_HEADER:
            raise FormatError(f"{path} does not start with {','.join(LOSS_LOG_HEADER)}")
        return [
            LossRecord(
                int(row["epoch"]),
                int(row["batch"]),
                float(row["loss_cls"]),
                float(row["loss_edge"]),
                float(row["loss_total"]),
            )
            for row in reader
        ]


def write_report(path: PathLike, report: MetricsReport) -> Path:
    return write_json(path, report.to_dict())


def read_report(path: PathLike) -> MetricsReport:
    return MetricsReport.from_dict(read_json(path))


@dataclass
class Checkpoint:
    params: ModelParams
    hyper: HyperParams
    state: Optional[TrainState]
    seed: int
    manifest: Dict[str, Any]


def _write_blob(path: Path, tensor: np.ndarray, little: str) -> Dict[str, Any]:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(tensor, dtype=little).tobytes())
    return {"shape": list(tensor.shape), "file": path.name}


def _read_blob(directory: Path, entry: Mapping[str, Any], dtype: np.dtype) -> np.ndarray:
    path = directory / entry["file"]
    if not path.is_file():
        raise MissingFile(f"checkpoint tensor missing: {path}", {"path": str(path)})
    shape = tuple(int(n) for n in entry["shape"])
    data = np.frombuffer(path.read_bytes(), dtype=dtype)
    if data.size != int(np.prod(shape)):
        raise FormatError(f"{path} holds {data.size} values, expected shape {shape}")
    return data.reshape(shape).astype(dtype.newbyteorder("="))


def save_checkpoint(
    directory: PathLike,
    params: ModelParams,
    hyper: HyperParams,
    seed: int,
    state: Optional[TrainState] = None,
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write parameters (and Adam state) as one blob per tensor plus manifest.json.

    Blobs use the dtype of the run (f32 or f64), little-endian, row-major.
    """
    directory = Path(directory)
    code, little = _DTYPE_CODES[hyper.dtype]
    tensors = {
        name: _write_blob(directory / "tensors" / f"{name}.bin", tensor, little)
        for name, tensor in params.tensors().items()
    }
    manifest: Dict[str, Any] = {
        "format": CHECKPOINT_FORMAT,
        "dtype": code,
        "endianness": "little",
        "seed": seed,
        "epoch": state.epoch if state else None,
        "hyperparameters": asdict(hyper),
        "input_dim": params.input_dim,
        "num_classes": params.num_classes,
        "tensors": tensors,
        "adam": None,
    }
    if state is not None:
        manifest["adam"] = {
            "step": state.step,
            "first_moment": {
                n: _write_blob(directory / "adam" / f"m_{n}.bin", t, little)
                for n, t in state.first_moment.items()
            },
            "second_moment": {
                n: _write_blob(directory / "adam" / f"v_{n}.bin", t, little)
                for n, t in state.second_moment.items()
            },
        }
    manifest.update(extra or {})
    write_json(directory / "manifest.json", manifest)
    logger.debug("Saved checkpoint", extra={"path": str(directory), "tensors": len(tensors)})
    return directory


def load_checkpoint(directory: PathLike) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        MissingFile: manifest or a tensor blob is absent
        FormatError: unknown format version or inconsistent blobs
    """
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"unsupported checkpoint format {manifest.get('format')!r}")
    dtype = _CODE_DTYPES[manifest["dtype"]]
    entries = manifest["tensors"]
    missing = [n for n in TRAINABLE_NAMES + BUFFER_NAMES if n not in entries]
    if missing:
        raise FormatError(f"checkpoint lacks tensors: {', '.join(missing)}")
    tensors = {name: _read_blob(directory / "tensors", entries[name], dtype) for name in entries}
    params = ModelParams(**tensors)
    hyper = HyperParams(**manifest["hyperparameters"])

    state = None
    adam = manifest.get("adam")
    if adam:
        state = TrainState(
            {n: _read_blob(directory / "adam", e, dtype) for n, e in adam["first_moment"].items()},
            {n: _read_blob(directory / "adam", e, dtype) for n, e in adam["second_moment"].items()},
            step=int(adam["step"]),
            epoch=int(manifest["epoch"] or 0),
        )
    params.validate()
    return Checkpoint(params, hyper, state, int(manifest["seed"]), manifest)
