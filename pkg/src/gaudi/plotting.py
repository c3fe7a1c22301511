"""Self-contained SVG scatter plots of the latent PCA plane.

No graphics dependency: the SVG is assembled as text with fixed-precision
coordinates, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .metrics import pca

WIDTH, HEIGHT = 640, 480
MARGIN = 56
LEGEND_WIDTH = 120

_COLOR_ANCHORS = [
    (68, 1, 84),
    (59, 82, 139),
    (33, 145, 140),
    (94, 201, 98),
    (253, 231, 37),
]

_SHAPES = ("circle", "square", "triangle", "diamond")


def _color(t):
    """Perceptual-ish gradient lookup, t in [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    pos = t * (len(_COLOR_ANCHORS) - 1)
    i = min(int(pos), len(_COLOR_ANCHORS) - 2)
    frac = pos - i
    a, b = _COLOR_ANCHORS[i], _COLOR_ANCHORS[i + 1]
    rgb = tuple(round(a[c] + frac * (b[c] - a[c])) for c in range(3))
    return "#%02x%02x%02x" % rgb


def _marker(shape, x, y, fill):
    s = 4.5
    if shape == "circle":
        return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{s:.2f}" fill="{fill}"/>'
    if shape == "square":
        return (
            f'<rect x="{x - s:.2f}" y="{y - s:.2f}" width="{2 * s:.2f}" '
            f'height="{2 * s:.2f}" fill="{fill}"/>'
        )
    if shape == "triangle":
        pts = f"{x:.2f},{y - s:.2f} {x - s:.2f},{y + s:.2f} {x + s:.2f},{y + s:.2f}"
        return f'<polygon points="{pts}" fill="{fill}"/>'
    pts = f"{x:.2f},{y - s:.2f} {x + s:.2f},{y:.2f} {x:.2f},{y + s:.2f} {x - s:.2f},{y:.2f}"
    return f'<polygon points="{pts}" fill="{fill}"/>'


def _scale(values, lo, hi):
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin
    if span == 0.0:
        return np.full_like(values, 0.5 * (lo + hi))
    return lo + (values - vmin) * (hi - lo) / span


def plot_embeddings(records, class_key=None, continuous_key=None):
    """SVG scatter of PC1 vs PC2; marker shape by class, color by the
    continuous label (or by class when no continuous key applies)."""
    if not records:
        raise ContractError("no records to plot")
    for key in (class_key, continuous_key):
        if key is not None:
            for r in records:
                if key not in r.labels:
                    raise ContractError(f"records lack the label '{key}'")
    latents = np.vstack([r.latent for r in records])
    if len(records) >= 2:
        plane, _ = pca(latents, out_dim=2)
    else:
        plane = np.zeros((1, 2))
    xs = _scale(plane[:, 0], MARGIN, WIDTH - MARGIN - LEGEND_WIDTH)
    ys = _scale(-plane[:, 1], MARGIN, HEIGHT - MARGIN)

    if class_key is not None:
        class_values = sorted({r.labels[class_key] for r in records}, key=str)
        shape_of = {v: _SHAPES[i % len(_SHAPES)] for i, v in enumerate(class_values)}
    else:
        class_values = []
        shape_of = {}

    if continuous_key is not None:
        cont = np.array([float(r.labels[continuous_key]) for r in records])
        tints = _scale(cont, 0.0, 1.0)
    elif class_values:
        index = {v: i for i, v in enumerate(class_values)}
        tints = np.array(
            [index[r.labels[class_key]] / max(len(class_values) - 1, 1) for r in records]
        )
    else:
        tints = np.full(len(records), 0.5)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{(WIDTH - LEGEND_WIDTH) / 2:.0f}" y="{HEIGHT - 14}" '
        'text-anchor="middle" font-size="14">PC1</text>',
        f'<text x="18" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {HEIGHT / 2:.0f})">PC2</text>',
    ]
    for i, r in enumerate(records):
        shape = shape_of.get(r.labels.get(class_key), "circle") if class_key else "circle"
        parts.append(_marker(shape, xs[i], ys[i], _color(tints[i])))

    legend_x = WIDTH - LEGEND_WIDTH + 8
    y = MARGIN
    for v in class_values:
        parts.append(_marker(shape_of[v], legend_x + 6, y, "#444444"))
        parts.append(
            f'<text x="{legend_x + 18}" y="{y + 4}" font-size="12">'
            f"{class_key}={v}</text>"
        )
        y += 22
    if continuous_key is not None:
        bar_top = y + 10
        bar_h = 120
        for step in range(bar_h):
            t = 1.0 - step / (bar_h - 1)
            parts.append(
                f'<rect x="{legend_x}" y="{bar_top + step}" width="14" height="1.5" '
                f'fill="{_color(t)}"/>'
            )
        cont = np.array([float(r.labels[continuous_key]) for r in records])
        parts.append(
            f'<text x="{legend_x + 18}" y="{bar_top + 8}" font-size="11">'
            f"{cont.max():.3g}</text>"
        )
        parts.append(
            f'<text x="{legend_x + 18}" y="{bar_top + bar_h}" font-size="11">'
            f"{cont.min():.3g}</text>"
        )
        parts.append(
            f'<text x="{legend_x}" y="{bar_top - 8}" font-size="12">'
            f"{continuous_key}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


PRESET_STYLES = {
    "watts-strogatz": ("C", "p"),
    "smlm": ("shape_class", None),
    "vicsek": ("R_f", "eta"),
    "brain": (None, "age"),
}
