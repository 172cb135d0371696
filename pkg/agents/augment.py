"""
Random shift augmentation: each sample's frames are translated by a random
sub-pixel offset of up to `pad` pixels and resampled bilinearly. Pixels read
from outside the frame take the value of the nearest edge, which matches
replicate padding followed by bilinear sampling. Only frames change; actions
and rewards of a batch are untouched.
"""
import numpy as np


def shift_frames(obs: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """
    Translate each sample of (B, H, W, C) by its (dy, dx) offset.

    Output pixel (i, j) of sample b is the bilinear sample of the input at
    (i + dy_b, j + dx_b), with coordinates clamped to the frame.
    """
    b, h, w, _ = obs.shape
    offsets = np.asarray(offsets, dtype=np.float64).reshape(b, 2)
    ys = np.clip(np.arange(h)[None, :] + offsets[:, :1], 0.0, h - 1)
    xs = np.clip(np.arange(w)[None, :] + offsets[:, 1:], 0.0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, :, None, None]
    fx = (xs - x0)[:, None, :, None]

    index = np.arange(b)[:, None, None]

    def gather(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return obs[index, rows[:, :, None], cols[:, None, :]]

    top = gather(y0, x0) * (1.0 - fx) + gather(y0, x1) * fx
    bottom = gather(y1, x0) * (1.0 - fx) + gather(y1, x1) * fx
    return (top * (1.0 - fy) + bottom * fy).astype(obs.dtype, copy=False)


def random_shift(obs: np.ndarray, pad: int, rng: np.random.Generator) -> np.ndarray:
    """(B, H, W, C) -> (B, H, W, C), each sample shifted by up to `pad` pixels."""
    if pad <= 0:
        return obs
    offsets = rng.uniform(-pad, pad, size=(obs.shape[0], 2))
    return shift_frames(obs, offsets)
