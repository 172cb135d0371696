"""
Frame strips as PNG: environment frames in one row, or ground truth above
world model reconstruction.
"""
import logging
from typing import Sequence

import numpy as np
from PIL import Image

logger = logging.getLogger('pobench.rendering')

GAP_COLOR = (20, 20, 20)


def _to_image(frame: np.ndarray, scale: int) -> Image.Image:
    pixels = np.asarray(frame)
    if pixels.dtype != np.uint8:
        pixels = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    img = Image.fromarray(pixels).convert("RGB")
    if scale > 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    return img


def render_rows(rows: Sequence[Sequence[np.ndarray]], scale: int = 2, gap: int = 1) -> Image.Image:
    """
    Tile rows of equally sized frames into one image.

    Args:
        rows: one sequence of (S, S, 3) frames per row, float in [0, 1] or uint8
        scale: nearest-neighbour upscaling factor
        gap: separator width in output pixels

    Returns:
        PIL Image (RGB mode)
    """
    if not rows or not rows[0]:
        raise ValueError("render_rows needs at least one frame")
    tile = _to_image(rows[0][0], scale).size[0]
    columns = max(len(row) for row in rows)
    width = columns * tile + (columns + 1) * gap
    height = len(rows) * tile + (len(rows) + 1) * gap
    img = Image.new("RGB", (width, height), GAP_COLOR)
    for r, row in enumerate(rows):
        for c, frame in enumerate(row):
            img.paste(_to_image(frame, scale), (gap + c * (tile + gap), gap + r * (tile + gap)))
    return img


def render_frame_strip(frames: Sequence[np.ndarray], every: int = 1, scale: int = 2) -> Image.Image:
    """One row of frames, keeping every `every`-th."""
    return render_rows([list(frames)[::max(1, every)]], scale=scale)


def render_reconstruction_strip(truth: Sequence[np.ndarray], decoded: Sequence[np.ndarray],
                                scale: int = 2) -> Image.Image:
    """Ground-truth row above the decoded row; both rows hold the same timesteps."""
    if len(truth) != len(decoded):
        raise ValueError(f"{len(truth)} ground-truth frames but {len(decoded)} reconstructions")
    return render_rows([list(truth), list(decoded)], scale=scale)
