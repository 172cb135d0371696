"""
Frame rendering with Pillow.

Sprites are drawn at 4x supersampling onto a black colour canvas and a
coverage mask, box-filtered down to the render size (giving premultiplied
colour and fractional coverage), and composited over the possibly distracted
background. Output frames are float64 RGB in [0, 1].
"""
from typing import Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from .distractors import Distraction, background
from .tasks import ProprioState, Task

SUPERSAMPLE = 4

TARGET_COLOR = (235, 70, 60)
AGENT_COLOR = (250, 215, 60)
LINK_COLOR = (70, 170, 240)
BASE_COLOR = (30, 30, 40)


def _to_pixels(task: Task, canvas: int):
    half = canvas / 2.0
    ppu = half / task.extent

    def convert(point: np.ndarray) -> Tuple[float, float]:
        # world y points up, image rows point down
        return (half + float(point[0]) * ppu, half - float(point[1]) * ppu)

    return convert, ppu


def sprite_layer(task: Task, state: ProprioState, scale: float, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Premultiplied sprite colour (size, size, 3) and coverage (size, size, 1)."""
    canvas = size * SUPERSAMPLE
    color = Image.new("RGB", (canvas, canvas), (0, 0, 0))
    mask = Image.new("L", (canvas, canvas), 0)
    layers = (ImageDraw.Draw(color), ImageDraw.Draw(mask))
    to_px, ppu = _to_pixels(task, canvas)
    geometry = task.sprites(state, scale)

    def paint(shape: str, xy, fill, width: int = 0):
        for draw, value in zip(layers, (fill, 255)):
            if shape == "polygon":
                draw.polygon(xy, fill=value)
            elif shape == "line":
                draw.line(xy, fill=value, width=width)
            else:
                draw.ellipse(xy, fill=value)

    tx, ty = to_px(geometry["target"])
    r = 0.07 * ppu
    paint("polygon", [(tx, ty - r), (tx + r, ty), (tx, ty + r), (tx - r, ty)], TARGET_COLOR)

    width = max(1, int(round(0.06 * ppu)))
    for start, end in geometry["links"]:
        paint("line", [to_px(start), to_px(end)], LINK_COLOR, width)
    if geometry["links"]:
        bx, by = to_px(geometry["links"][0][0])
        rb = 0.05 * ppu
        paint("ellipse", [bx - rb, by - rb, bx + rb, by + rb], BASE_COLOR)

    radius = geometry["point_radius"] * ppu
    for point in geometry["points"]:
        px, py = to_px(point)
        paint("ellipse", [px - radius, py - radius, px + radius, py + radius], AGENT_COLOR)

    rgb = np.asarray(color.resize((size, size), Image.BOX), dtype=np.float64) / 255.0
    alpha = np.asarray(mask.resize((size, size), Image.BOX), dtype=np.float64)[..., None] / 255.0
    return rgb, alpha


def render(task: Task, state: ProprioState, scale: float, size: int,
           distraction: Optional[Distraction] = None, step_index: int = 0) -> np.ndarray:
    """Composite the sprites over the background for one step."""
    rgb, alpha = sprite_layer(task, state, scale, size)
    frame = background(size, distraction, step_index) * (1.0 - alpha) + rgb
    return np.clip(frame, 0.0, 1.0)


def quantize(frame: np.ndarray) -> np.ndarray:
    """Float frame in [0, 1] to uint8 (round(255 * pixel))."""
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def dequantize(frames: np.ndarray) -> np.ndarray:
    return frames.astype(np.float64) / 255.0
