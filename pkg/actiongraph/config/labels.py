"""config/labels.py

Label maps and per-frame label files.

This module handles:
- Parsing label map files ("token<TAB>id" per line)
- Reading label files (one token per line, line n = frame n)
- Writing predicted label sequences back as token files
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..core.errors import FormatError, LabelMapError, MissingFile
from ..core.graph import FrameSequence, LabelMap

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class LabelFiles:
    """Reader and writer for the plain-text label formats.

    A label map file lists one ``token<TAB>id`` pair per line; blank lines are
    skipped there. A label file lists one token per line for every frame of a
    video, and blank lines are forbidden since they would shift every later
    frame. The video id of a label file defaults to its file stem.
    """

    @staticmethod
    def parse_label_map(lines: Sequence[str], background: Optional[str] = None) -> LabelMap:
        """Build a ``LabelMap`` from ``token<TAB>id`` lines.

        Raises:
            FormatError: a line is not a token and an integer id
            LabelMapError: duplicate tokens, id gaps or unknown background token
        """
        entries = []
        for number, line in enumerate(lines, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"label map line {number} is not 'token<TAB>id': {line!r}")
            token, raw_id = parts[0].strip(), parts[1].strip()
            try:
                class_id = int(raw_id)
            except ValueError:
                raise FormatError(
                    f"label map line {number} has non-integer id {raw_id!r}"
                ) from None
            entries.append((token, class_id))
        background_id = None
        if background is not None:
            known = dict(entries)
            if background not in known:
                raise LabelMapError(f"background token '{background}' is not in the label map")
            background_id = known[background]
        return LabelMap(tuple(entries), background_id)

    @staticmethod
    def load_label_map(path: PathLike, background: Optional[str] = None) -> LabelMap:
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"label map not found: {path}", {"path": str(path)})
        label_map = LabelFiles.parse_label_map(path.read_text().splitlines(), background)
        logger.debug(
            "Loaded label map", extra={"path": str(path), "classes": label_map.num_classes}
        )
        return label_map

    @staticmethod
    def parse_labels(
        lines: Sequence[str], label_map: LabelMap, video_id: str, is_pseudo: bool = False
    ) -> FrameSequence:
        """Turn token lines into a ``FrameSequence``.

        Raises:
            FormatError: blank line
            UnknownLabel: token missing from ``label_map``
            EmptySequence: no frames at all
        """
        labels = []
        for number, line in enumerate(lines, start=1):
            token = line.strip()
            if not token:
                raise FormatError(
                    f"blank line {number} in label file of '{video_id}'", {"video_id": video_id}
                )
            labels.append(label_map.id_of(token))
        return FrameSequence(video_id, tuple(labels), is_pseudo)

    @staticmethod
    def read_labels(
        path: PathLike, label_map: LabelMap, video_id: Optional[str] = None, is_pseudo: bool = False
    ) -> FrameSequence:
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"label file not found: {path}", {"path": str(path)})
        lines = path.read_text().splitlines()
        # a single trailing newline is not a blank frame
        return LabelFiles.parse_labels(lines, label_map, video_id or path.stem, is_pseudo)

    @staticmethod
    def write_labels(path: PathLike, labels: Sequence[int], label_map: LabelMap) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tokens = [label_map.token_of(int(label)) for label in labels]
        path.write_text("\n".join(tokens) + "\n")
        return path

    @staticmethod
    def write_label_map(path: PathLike, label_map: LabelMap) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines: List[str] = [
            f"{token}\t{class_id}" for class_id, token in enumerate(label_map.tokens)
        ]
        path.write_text("\n".join(lines) + "\n")
        return path


def load_label_map(path: PathLike, background: Optional[str] = None) -> LabelMap:
    return LabelFiles.load_label_map(path, background)


def read_label_file(
    path: PathLike, label_map: LabelMap, video_id: Optional[str] = None, is_pseudo: bool = False
) -> FrameSequence:
    return LabelFiles.read_labels(path, label_map, video_id, is_pseudo)


def write_label_file(path: PathLike, labels: Sequence[int], label_map: LabelMap) -> Path:
    return LabelFiles.write_labels(path, labels, label_map)
