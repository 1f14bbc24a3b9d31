"""Minimal SVG heatmap writer (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _diverging(v: float) -> str:
    """Blue (-1) through white (0) to red (+1)."""
    v = float(np.clip(v, -1.0, 1.0))
    if v >= 0:
        r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
    else:
        r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def write_heatmap(path, data, t, x, title: str = "", cell: float = 2.0, max_cells: int = 200) -> None:
    """Heatmap of ``data[t, x]`` with time upward, symmetric color scale.

    Rows/columns are subsampled to at most ``max_cells`` each.
    """
    data = np.asarray(data, dtype=float)
    ti = np.unique(np.linspace(0, data.shape[0] - 1, min(max_cells, data.shape[0])).round().astype(int))
    xi = np.unique(np.linspace(0, data.shape[1] - 1, min(max_cells, data.shape[1])).round().astype(int))
    D = data[np.ix_(ti, xi)]
    scale = float(np.max(np.abs(D))) or 1.0
    m, pad = 40, 10
    w, h = len(xi) * cell, len(ti) * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + m + pad}" height="{h + m + pad}">',
        f'<text x="{m}" y="{pad + 4}" font-size="10">{title} (|max| = {scale:.3g})</text>',
    ]
    for r in range(len(ti)):
        y = pad + 10 + h - (r + 1) * cell
        for c in range(len(xi)):
            parts.append(
                f'<rect x="{m + c * cell:.1f}" y="{y:.1f}" width="{cell}" height="{cell}" '
                f'fill="{_diverging(D[r, c] / scale)}"/>'
            )
    parts.append(f'<text x="{m}" y="{h + m}" font-size="10">x: 0 .. {x[-1]:.4g} m</text>')
    parts.append(
        f'<text x="2" y="{pad + 20}" font-size="10" transform="rotate(90 2 {pad + 20})">'
        f"t: 0 .. {t[-1]:.4g} s</text>"
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
