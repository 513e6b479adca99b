"""Time-space-diagram rendering of field files.

Fields render as raster images with time on the horizontal axis and the
grid's spatial coordinate on the vertical axis (top = downstream by
default, configurable). Low speeds map to the warm end of a fixed
colormap; empty cells get a distinct sentinel color. Each cell becomes a
``scale`` x ``scale`` pixel block, so images are a deterministic function
of the field values and render byte-identically on re-runs.

Trajectory overlays are drawn as polylines in the same cell coordinates,
with positions sheared to match the grid (vertical axis is x' = x -
c_wave*(t - t0); identical to real position on unsheared grids).

A ``<image>.legend.txt`` sidecar documents the value-to-color scale.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib import colormaps
from PIL import Image

from .edie import GridSpec

SPEED_COLORMAP = "RdYlGn"  # low = red/warm, high = green
EMPTY_RGBA = (130, 130, 130, 255)
TRAJECTORY_RGBA = (0, 0, 0, 255)


def field_to_rgba(
    values: np.ndarray,
    vmin: float | None = None,
    vmax: float | None = None,
    scale: int = 4,
    flip_position: bool = True,
) -> np.ndarray:
    """Map an nt-by-nx field to an RGBA pixel array (one block per cell).

    Rows of the output are space (by default largest x at the top), columns
    are time. NaN cells render as the sentinel gray.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    if vmin is None:
        vmin = float(values[finite].min()) if finite.any() else 0.0
    if vmax is None:
        vmax = float(values[finite].max()) if finite.any() else 1.0
    if vmax <= vmin:
        vmax = vmin + 1.0
    norm = np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0)
    cmap = colormaps[SPEED_COLORMAP]
    rgba = (cmap(norm) * 255).astype(np.uint8)
    rgba[~finite] = EMPTY_RGBA
    # (nt, nx) -> image rows = space, columns = time
    img = np.transpose(rgba, (1, 0, 2))
    if flip_position:
        img = img[::-1]
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    return np.ascontiguousarray(img)


def _cell_to_pixel(grid: GridSpec, t, x, scale: int, flip_position: bool, height: int):
    """Continuous pixel coordinates (col, row) of a real-space point."""
    xs = x - grid.c_wave * (t - grid.t0)
    col = (t - grid.t0) / grid.dt * scale
    row_up = (xs - grid.x0) / grid.dx * scale
    row = height - row_up if flip_position else row_up
    return col, row


def _draw_polyline(img: np.ndarray, cols: np.ndarray, rows: np.ndarray, rgba) -> None:
    """Rasterize line segments by dense sampling (deterministic)."""
    h, w = img.shape[:2]
    for c0, r0, c1, r1 in zip(cols[:-1], rows[:-1], cols[1:], rows[1:]):
        n = int(max(abs(c1 - c0), abs(r1 - r0))) + 1
        cs = np.rint(np.linspace(c0, c1, n + 1)).astype(np.int64)
        rs = np.rint(np.linspace(r0, r1, n + 1)).astype(np.int64)
        keep = (cs >= 0) & (cs < w) & (rs >= 0) & (rs < h)
        img[rs[keep], cs[keep]] = rgba


def render_field_image(
    grid: GridSpec,
    values: np.ndarray,
    out_path,
    *,
    kind: str = "smoothed",
    trajectories=None,
    vmin: float | None = None,
    vmax: float | None = None,
    scale: int = 4,
    flip_position: bool = True,
) -> Path:
    """Write the PNG and its legend sidecar; returns the image path.

    ``trajectories`` is an iterable of (t_array, x_array) pairs drawn as
    black polylines over the field.
    """
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    lo = float(values[finite].min()) if finite.any() else 0.0
    hi = float(values[finite].max()) if finite.any() else 1.0
    vmin_eff = lo if vmin is None else float(vmin)
    vmax_eff = hi if vmax is None else float(vmax)
    img = field_to_rgba(values, vmin_eff, vmax_eff, scale, flip_position)
    if trajectories is not None:
        height = img.shape[0]
        for t_arr, x_arr in trajectories:
            col, row = _cell_to_pixel(grid, np.asarray(t_arr), np.asarray(x_arr), scale, flip_position, height)
            _draw_polyline(img, col, row, TRAJECTORY_RGBA)

    out_path = Path(out_path)
    tmp = out_path.with_name(out_path.name + ".tmp")
    Image.fromarray(img, mode="RGBA").save(tmp, format="PNG")
    tmp.replace(out_path)

    legend = out_path.with_name(out_path.name + ".legend.txt")
    tmp_leg = legend.with_name(legend.name + ".tmp")
    cmap = colormaps[SPEED_COLORMAP]
    anchors = []
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        val = vmin_eff + frac * (vmax_eff - vmin_eff)
        r, g, b, a = (np.array(cmap(frac)) * 255).astype(int)
        anchors.append(f"  {val:.3f} m/s -> rgba({r},{g},{b},{a})")
    tmp_leg.write_text(
        "\n".join(
            [
                f"kind: {kind}",
                f"colormap: {SPEED_COLORMAP} (low speeds warm/red, high speeds green)",
                f"value range: [{vmin_eff!r}, {vmax_eff!r}] m/s",
                "anchors:",
                *anchors,
                f"empty cells: rgba{EMPTY_RGBA}",
                f"trajectory overlay: rgba{TRAJECTORY_RGBA}",
                f"axes: time left->right from t0={grid.t0!r} (dt={grid.dt!r} s/cell), "
                f"vertical = sheared position x' = x - ({grid.c_wave!r})*(t - t0) "
                f"from x0={grid.x0!r} (dx={grid.dx!r} m/cell), "
                + ("downstream at the top" if flip_position else "downstream at the bottom"),
                f"pixels per cell: {scale}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    tmp_leg.replace(legend)
    return out_path
