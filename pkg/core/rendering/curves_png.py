"""
Training curves (return vs offline epoch) as PNG.
"""
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from core.eval import OFFLINE_EPOCHS

logger = logging.getLogger('pobench.rendering')

PALETTE = [(230, 85, 70), (70, 150, 230), (250, 200, 60), (110, 200, 120), (190, 120, 220), (240, 140, 60)]
BACKGROUND = (255, 255, 255)
AXIS_COLOR = (60, 60, 60)
MARGIN = 40


def load_font(size: int = 10):
    try:
        return ImageFont.truetype("DejaVuSans.ttf", size)
    except OSError:
        return ImageFont.load_default()


def mean_curves(points: Sequence[Dict], group_by: Sequence[str]) -> Dict[str, List[Tuple[float, float]]]:
    """Seed-averaged (offline epoch, return) series per group label."""
    grouped: Dict[str, Dict[float, List[float]]] = {}
    for point in points:
        label = "/".join(str(point[k]) for k in group_by if k in point)
        grouped.setdefault(label, {}).setdefault(round(point["offline_epoch"], 6), []).append(point["return"])
    return {label: [(epoch, float(np.mean(values))) for epoch, values in sorted(series.items())]
            for label, series in sorted(grouped.items())}


def render_curves(series: Dict[str, List[Tuple[float, float]]], max_return: float = 1000.0,
                  width: int = 480, height: int = 320, title: str = "") -> Image.Image:
    """
    Plot one line per series on [0, 1000] offline epochs x [0, max_return].

    Returns:
        PIL Image (RGB mode)
    """
    img = Image.new("RGB", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    font = load_font()
    left, top, right, bottom = MARGIN, MARGIN // 2, width - MARGIN // 2, height - MARGIN

    def to_xy(epoch: float, value: float) -> Tuple[float, float]:
        x = left + (right - left) * epoch / OFFLINE_EPOCHS
        y = bottom - (bottom - top) * min(max(value / max_return, 0.0), 1.0)
        return x, y

    draw.line([(left, top), (left, bottom), (right, bottom)], fill=AXIS_COLOR, width=1)
    draw.text((left, bottom + 4), "0", fill=AXIS_COLOR, font=font)
    draw.text((right - 24, bottom + 4), f"{OFFLINE_EPOCHS:g}", fill=AXIS_COLOR, font=font)
    draw.text((4, top), f"{max_return:g}", fill=AXIS_COLOR, font=font)
    draw.text(((left + right) // 2 - 30, bottom + 16), "offline epoch", fill=AXIS_COLOR, font=font)
    if title:
        draw.text((left + 4, 2), title, fill=AXIS_COLOR, font=font)

    for i, (label, points) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        xy = [to_xy(epoch, value) for epoch, value in points]
        if len(xy) > 1:
            draw.line(xy, fill=color, width=2)
        for x, y in xy:
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], fill=color)
        draw.text((left + 8, top + 4 + 12 * i), label, fill=color, font=font)
    return img
