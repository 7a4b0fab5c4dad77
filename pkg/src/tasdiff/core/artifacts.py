"""CSV tables and SVG segment timelines written by the commands."""

from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Patch, Rectangle  # noqa: E402

from ..evaluation.metrics import segments_from_labels  # noqa: E402
from ..utils.logging import get_logger  # noqa: E402


logger = get_logger(__name__)

PathLike = Union[str, Path]


def write_csv(path: PathLike, rows: Iterable[Mapping], columns: Sequence[str]) -> Path:
    """Write ``rows`` with exactly ``columns`` in that order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False)
    logger.debug("CSV written", path=str(path), rows=len(frame))
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def class_colors(num_classes: int) -> List[tuple]:
    cmap = plt.get_cmap("tab20" if num_classes > 10 else "tab10")
    return [cmap(i % cmap.N) for i in range(num_classes)]


def render_timeline_svg(
    path: PathLike,
    ground_truth: Sequence[int],
    prediction: Sequence[int],
    class_names: Sequence[str],
    title: Optional[str] = None,
) -> Path:
    """Ground-truth row above the prediction row, one rectangle per segment.

    Each rectangle carries the SVG id ``segment-<row>-<index>`` with row ``gt`` or ``pred``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    colors = class_colors(len(class_names))
    length = len(ground_truth)

    fig, ax = plt.subplots(figsize=(12, 2.2))
    rows = [("gt", np.asarray(ground_truth), 1.0), ("pred", np.asarray(prediction), 0.0)]
    for row_name, labels, y in rows:
        for index, segment in enumerate(segments_from_labels(labels)):
            patch = Rectangle(
                (segment.start, y + 0.1),
                segment.length,
                0.8,
                facecolor=colors[segment.label],
                edgecolor="none",
            )
            patch.set_gid(f"segment-{row_name}-{index}")
            ax.add_patch(patch)

    ax.set_xlim(0, length)
    ax.set_ylim(0, 2)
    ax.set_yticks([0.5, 1.5])
    ax.set_yticklabels(["Prediction", "Ground truth"])
    ax.set_xlabel("Frame")
    for spine in ax.spines.values():
        spine.set_visible(False)
    if title:
        ax.set_title(title)

    present = sorted(set(np.asarray(ground_truth).tolist()) | set(np.asarray(prediction).tolist()))
    ax.legend(
        handles=[Patch(color=colors[c], label=class_names[c]) for c in present],
        loc="center left",
        bbox_to_anchor=(1.01, 0.5),
        frameon=False,
        fontsize=8,
    )

    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Timeline written", path=str(path))
    return path
