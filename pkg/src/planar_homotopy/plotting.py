"""PNG figures for the CLI reports, drawn with matplotlib's Agg backend.

Images are rasters shown pixel-for-pixel in unit-square coordinates (row 0 at the top),
so overlays line up with the text reports.  PNG metadata is stripped to keep reruns
byte-identical.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.patches import Polygon, Rectangle  # noqa: E402

from .raster import Raster  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.titlesize": 9,
    "axes.linewidth": 0.6,
    "savefig.dpi": 150,
    "figure.figsize": (4.5, 4.5),
}
_SAVE = {"metadata": {"Software": None}, "bbox_inches": "tight", "pad_inches": 0.05}


def _new(title: str):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    ax.set_title(title)
    ax.set_xlim(0, 1)
    ax.set_ylim(1, 0)
    ax.set_aspect("equal")
    ax.set_xticks([0, 0.5, 1])
    ax.set_yticks([0, 0.5, 1])
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.savefig(path, format="png", **_SAVE)
    plt.close(fig)
    return path


def _show(ax, mask: np.ndarray, colour: str, alpha: float = 1.0, z: int = 1):
    rgba = np.zeros(mask.shape + (4,))
    rgba[mask] = matplotlib.colors.to_rgba(colour, alpha)
    ax.imshow(rgba, extent=(0, 1, 1, 0), interpolation="nearest", zorder=z)


def _punctures(ax, points, k: int | None = None):
    if not len(points):
        return
    pts = np.asarray(points, dtype=float)
    ax.scatter(pts[:, 0], pts[:, 1], s=6, c="tab:red", linewidths=0, zorder=5)


def plot_scene(scene, path, title: str | None = None) -> Path:
    fig, ax = _new(title or f"{scene.name}  k={scene.finest}")
    _show(ax, scene.bad[scene.finest].cells, "black")
    _punctures(ax, [(float(x), float(y)) for x, y in scene.puncture_points()])
    return _save(fig, path)


def plot_check(scene, verdict, path) -> Path:
    """Bad set, punctures, and boxes around the witnesses of each failed condition."""
    fig, ax = _new(f"{scene.name}  {verdict.verdict}")
    k = scene.finest
    n = 1 << k
    _show(ax, scene.bad[k].cells, "black")
    _punctures(ax, [(float(x), float(y)) for x, y in scene.puncture_points()])
    boxes = [(w, "tab:orange") for w in verdict.cond1.witnesses]
    for w in verdict.cond2.witnesses:
        boxes += [(m, "tab:blue") for m in w.get("members", [])]
    for w, colour in boxes:
        r0, r1, c0, c1 = w["bbox"]
        ax.add_patch(Rectangle((c0 / n, r0 / n), (c1 - c0 + 1) / n, (r1 - r0 + 1) / n,
                               fill=False, edgecolor=colour, linewidth=0.8, zorder=4))
    return _save(fig, path)


def plot_tiling(tiling, scene, path, spines: Sequence | None = None) -> Path:
    """Domains in a repeating palette over the bad set; spine cells in dark grey."""
    fig, ax = _new(f"{scene.name}  {len(tiling.domains)} domains")
    labels = tiling.label_map()
    palette = plt.get_cmap("tab20").colors
    cmap = ListedColormap([(1, 1, 1, 0)] + [c + (0.85,) for c in palette])
    idx = np.where(labels >= 0, labels % len(palette) + 1, 0)
    ax.imshow(idx, cmap=cmap, vmin=0, vmax=len(palette), extent=(0, 1, 1, 0),
              interpolation="nearest", zorder=1)
    if spines:
        skel = np.zeros_like(labels, dtype=bool)
        for s in spines:
            if s is not None:
                skel |= s.skeleton.cells
        _show(ax, skel, "dimgray", 0.9, z=2)
    _show(ax, scene.bad_at(tiling.k).cells, "black", z=3)
    _punctures(ax, [(float(x), float(y)) for x, y in scene.puncture_points()])
    return _save(fig, path)


def plot_raster(r: Raster, path, title: str = "", loops: Sequence = ()) -> Path:
    """A raster with optional cell-path loops drawn through cell centers."""
    fig, ax = _new(title or f"k={r.k}")
    _show(ax, r.cells, "silver")
    n = r.n
    colours = plt.get_cmap("tab10").colors
    for i, loop in enumerate(loops):
        pts = np.array(list(loop) + [loop[0]], dtype=float)
        ax.plot((pts[:, 1] + 0.5) / n, (pts[:, 0] + 0.5) / n, lw=0.8, color=colours[i % 10], zorder=3)
    return _save(fig, path)


def plot_triangulation(tri, path) -> Path:
    """Unit circle with the triangulation's triangles (circle coordinates, y up)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    ax.set_aspect("equal")
    ax.set_title(f"{len(tri.params)} points, {len(tri.triangles)} triangles")
    th = np.linspace(0, 2 * np.pi, 361)
    ax.plot(np.cos(th), np.sin(th), color="black", lw=0.6)
    pts = np.array([[float(x), float(y)] for x, y in tri.points()])
    colours = plt.get_cmap("tab20").colors
    for i, t in enumerate(tri.triangles):
        ax.add_patch(Polygon(pts[list(t)], closed=True, facecolor=colours[i % 20], alpha=0.6,
                             edgecolor="black", linewidth=0.4))
    ax.scatter(pts[:, 0], pts[:, 1], s=8, c="tab:red", zorder=3)
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_axis_off()
    return _save(fig, path)
