"""Heatmaps of matrices as deterministic SVG files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_SALT = "permdag"


def shared_scale(mats: Sequence[ArrayLike]) -> float:
    """Upper end of the common color scale: max ``|value|`` over all inputs."""
    top = max((float(np.abs(np.asarray(m)).max()) for m in mats), default=0.0)
    return top if top > 0 else 1.0


def write_heatmap(path: str | Path, A: ArrayLike, vmax: float, title: str | None = None) -> None:
    """Cells colored by ``|A_ij|`` on ``[0, vmax]``, row 1 at the top."""
    A = np.abs(np.asarray(A, dtype=float))
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path", "svg.image_inline": True}):
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        # vector cells rather than an embedded raster image
        mesh = ax.pcolormesh(A, cmap="Greys", vmin=0.0, vmax=vmax, edgecolors="none")
        ax.set_xlim(0, A.shape[1])
        ax.set_ylim(A.shape[0], 0)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        cbar = fig.colorbar(mesh, ax=ax)
        cbar.solids.set_rasterized(False)
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)


def write_heatmaps(paths: Sequence[str | Path], mats: Sequence[ArrayLike],
                   titles: Sequence[str | None] | None = None) -> float:
    """One image per matrix on a common scale; returns the scale maximum."""
    vmax = shared_scale(mats)
    titles = titles or [None] * len(mats)
    for path, A, title in zip(paths, mats, titles):
        write_heatmap(path, A, vmax, title)
    return vmax
