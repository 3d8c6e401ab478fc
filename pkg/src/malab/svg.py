"""Minimal standalone SVG emission for grid heatmaps with node overlays.

Plots here are diagnostics (function slices, flag overlays), so this
sticks to one picture: a colored cell grid with optional markers, a
colorbar, and a title.  Output is a single self-contained SVG document
with all numbers formatted to fixed precision, so identical inputs give
identical bytes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["heatmap_svg"]

# coarse perceptual ramp, dark violet to yellow, interpolated per channel
_STOPS = np.array([
    [68, 1, 84], [71, 44, 122], [59, 81, 139], [44, 113, 142],
    [33, 144, 141], [39, 173, 129], [92, 200, 99], [170, 220, 50],
    [253, 231, 37],
], float)
_POS = np.linspace(0.0, 1.0, len(_STOPS))


def _hex(rgb: np.ndarray) -> str:
    r, g, b = (int(round(c)) for c in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def _colors(t: np.ndarray) -> list[str]:
    t = np.clip(t, 0.0, 1.0)
    chans = [np.interp(t, _POS, _STOPS[:, k]) for k in range(3)]
    return [_hex(np.array([r, g, b])) for r, g, b in zip(*chans)]


def heatmap_svg(
    path: str,
    Z: np.ndarray,
    extent: tuple[float, float, float, float] | None = None,
    overlay: np.ndarray | None = None,
    title: str = "",
    overlay_label: str = "flat",
    cell_px: int | None = None,
) -> None:
    """Write a heatmap of a 2D array with an optional marker overlay.

    ``Z[i, j]`` is drawn with i increasing rightward and j increasing
    upward, matching ``meshgrid(..., indexing="ij")`` slices.  ``extent``
    = (x_lo, x_hi, y_lo, y_hi) only feeds the corner labels.  ``overlay``
    is a boolean mask of the same shape; marked cells get a dot and the
    legend gets a row.  NaNs render light gray.
    """
    Z = np.asarray(Z, float)
    if Z.ndim != 2:
        raise ValueError("heatmap needs a 2D array")
    nx, ny = Z.shape
    if overlay is not None:
        overlay = np.asarray(overlay, bool)
        if overlay.shape != Z.shape:
            raise ValueError("overlay shape must match Z")
    if cell_px is None:
        cell_px = max(4, int(round(440.0 / max(nx, ny))))
    pad_l, pad_t, pad_b = 16, 34 if title else 16, 30
    bar_w, bar_gap = 18, 14
    w_plot, h_plot = nx * cell_px, ny * cell_px
    width = pad_l + w_plot + bar_gap + bar_w + 64
    height = pad_t + h_plot + pad_b

    finite = np.isfinite(Z)
    if np.any(finite):
        vmin = float(np.min(Z[finite]))
        vmax = float(np.max(Z[finite]))
    else:
        vmin, vmax = 0.0, 1.0
    span = vmax - vmin
    tnorm = (Z - vmin) / span if span > 0 else np.full_like(Z, 0.5)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{pad_l}" y="20" font-family="monospace" '
            f'font-size="13" fill="#222">{title}</text>'
        )
    cols = _colors(tnorm.ravel())
    for i in range(nx):
        for j in range(ny):
            x = pad_l + i * cell_px
            y = pad_t + (ny - 1 - j) * cell_px
            fill = "#dddddd" if not finite[i, j] else cols[i * ny + j]
            out.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" '
                f'height="{cell_px}" fill="{fill}"/>'
            )
    if overlay is not None and np.any(overlay):
        r = max(1.5, cell_px * 0.22)
        for i, j in np.argwhere(overlay):
            cx = pad_l + i * cell_px + cell_px / 2.0
            cy = pad_t + (ny - 1 - j) * cell_px + cell_px / 2.0
            out.append(
                f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="{r:.1f}" '
                f'fill="none" stroke="#ff3333" stroke-width="1.2"/>'
            )
        out.append(
            f'<circle cx="{pad_l + 6}" cy="{height - 10}" r="{r:.1f}" '
            f'fill="none" stroke="#ff3333" stroke-width="1.2"/>'
        )
        out.append(
            f'<text x="{pad_l + 14}" y="{height - 6}" font-family="monospace" '
            f'font-size="11" fill="#222">{overlay_label}</text>'
        )
    # colorbar, drawn top (vmax) to bottom (vmin)
    bx = pad_l + w_plot + bar_gap
    nseg = 32
    seg_h = h_plot / nseg
    seg_cols = _colors(np.linspace(1.0, 0.0, nseg))
    for k in range(nseg):
        out.append(
            f'<rect x="{bx}" y="{pad_t + k * seg_h:.2f}" width="{bar_w}" '
            f'height="{seg_h + 0.5:.2f}" fill="{seg_cols[k]}"/>'
        )
    out.append(
        f'<text x="{bx + bar_w + 4}" y="{pad_t + 10}" font-family="monospace" '
        f'font-size="11" fill="#222">{vmax:.6g}</text>'
    )
    out.append(
        f'<text x="{bx + bar_w + 4}" y="{pad_t + h_plot}" '
        f'font-family="monospace" font-size="11" fill="#222">{vmin:.6g}</text>'
    )
    if extent is not None:
        x_lo, x_hi, y_lo, y_hi = extent
        out.append(
            f'<text x="{pad_l}" y="{pad_t + h_plot + 14}" '
            f'font-family="monospace" font-size="10" fill="#555">'
            f'x: {x_lo:.6g} .. {x_hi:.6g}, y: {y_lo:.6g} .. {y_hi:.6g}</text>'
        )
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
