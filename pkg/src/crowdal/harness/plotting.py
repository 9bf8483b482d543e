"""Learning-curve figures, rendered off-screen."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..metrics import LearningCurve  # noqa: E402


def plot_curves(
    curves: Mapping[str, LearningCurve],
    path: str | Path,
    metric: str,
    log_x: bool = False,
    title: str = "",
) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    for name in sorted(curves):
        c = curves[name]
        ax.plot(c.x, c.q, marker="o", markersize=3, label=name)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel("questions asked" + (" (log scale)" if log_x else ""))
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if curves:
        ax.legend(loc="lower right")
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path
