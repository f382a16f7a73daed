"""Overlay renderings for the ``--viz`` command-line option."""

from __future__ import annotations

import colorsys

import numpy as np
from PIL import Image, ImageDraw


def _rgb(img: np.ndarray) -> Image.Image:
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8))


def _palette(i: int) -> tuple[int, int, int]:
    # golden-ratio hue walk: neighbouring indices get well separated colors
    r, g, b = colorsys.hsv_to_rgb((i * 0.618033988749895) % 1.0, 0.9, 1.0)
    return int(r * 255), int(g * 255), int(b * 255)


def _circle(draw, p, color):
    r = max(2.0, 2.0 * p.scale)
    draw.ellipse((p.x - r, p.y - r, p.x + r, p.y + r), outline=color)


def draw_keypoints(img: np.ndarray, points) -> np.ndarray:
    """Circle each point with radius proportional to its scale.

    Bright-on-dark blobs (negative Laplacian) are drawn red, dark-on-bright
    ones blue.
    """
    canvas = _rgb(img)
    draw = ImageDraw.Draw(canvas)
    for p in points:
        _circle(draw, p, (255, 40, 40) if p.laplacian_sign < 0 else (40, 120, 255))
    return np.asarray(canvas)


def draw_matches(img_a: np.ndarray, points_a, img_b: np.ndarray, points_b, matches) -> np.ndarray:
    """Place the two frames side by side and join matched points with lines."""
    a, b = _rgb(img_a), _rgb(img_b)
    canvas = Image.new("RGB", (a.width + b.width, max(a.height, b.height)))
    canvas.paste(a, (0, 0))
    canvas.paste(b, (a.width, 0))
    draw = ImageDraw.Draw(canvas)
    for i, m in enumerate(matches):
        pa, pb = points_a[m.query_index], points_b[m.train_index]
        color = _palette(i)
        draw.line((pa.x, pa.y, pb.x + a.width, pb.y), fill=color)
        _circle(draw, pa, color)
        draw.ellipse((pb.x + a.width - 2, pb.y - 2, pb.x + a.width + 2, pb.y + 2), outline=color)
    return np.asarray(canvas)
