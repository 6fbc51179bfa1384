"""runtime/visualize.py

Segmentation bar charts.

Ground truth and prediction are drawn as two horizontal bars, one coloured
rectangle per segment with a width proportional to its duration. Colours are
keyed by class id, and the legend lists the label tokens of every class
shown. The SVG output is byte-identical across runs.
"""

import logging
from pathlib import Path
from typing import List, NamedTuple, Sequence, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib import colormaps, rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from ..core.errors import DataError  # noqa: E402
from ..core.graph import LabelMap, segment_runs  # noqa: E402

logger = logging.getLogger(__name__)

_SVG_PARAMS = {
    "svg.hashsalt": "actiongraph",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
}


class Rectangle(NamedTuple):
    label: int
    start: int
    width: int


def segment_rectangles(labels: Sequence[int]) -> List[Rectangle]:
    """One rectangle per segment, in frame units."""
    return [Rectangle(run.label, run.start, run.length) for run in segment_runs(labels)]


def class_color(class_id: int):
    palette = colormaps["tab20"]
    return palette(int(class_id) % palette.N)


def render_segmentation(
    gt: Sequence[int],
    pred: Sequence[int],
    label_map: LabelMap,
    out_path: Union[str, Path],
    title: str = "",
) -> Path:
    """Write the ground-truth / prediction bar chart of one video as SVG.

    Raises:
        DataError: sequences of different lengths
    """
    if len(gt) != len(pred):
        raise DataError(f"ground truth has {len(gt)} frames, prediction has {len(pred)}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = (("Ground truth", segment_rectangles(gt)), ("Prediction", segment_rectangles(pred)))

    with rc_context(_SVG_PARAMS):
        figure = Figure(figsize=(8.0, 2.2))
        axes = figure.add_axes((0.14, 0.3, 0.84, 0.55))
        for row, (_, rectangles) in enumerate(rows):
            y = len(rows) - 1 - row
            for rect in rectangles:
                axes.broken_barh(
                    [(rect.start, rect.width)], (y + 0.1, 0.8), facecolors=class_color(rect.label)
                )
        axes.set_xlim(0, len(gt))
        axes.set_ylim(0, len(rows))
        axes.set_yticks([len(rows) - 0.5 - i for i in range(len(rows))])
        axes.set_yticklabels([name for name, _ in rows])
        axes.set_xlabel("frame")
        if title:
            axes.set_title(title)

        shown = sorted(set(int(label) for label in gt) | set(int(label) for label in pred))
        handles = [Patch(facecolor=class_color(c), label=label_map.token_of(c)) for c in shown]
        figure.legend(handles=handles, loc="lower center", ncol=min(len(handles), 6), frameon=False)
        figure.savefig(out_path, format="svg", metadata={"Date": None})

    logger.debug("Rendered segmentation", extra={"path": str(out_path), "frames": len(gt)})
    return out_path
