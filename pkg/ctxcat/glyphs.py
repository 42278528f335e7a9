"""Glyph masks shared by the image generator and the encoder stem."""

from __future__ import annotations

import numpy as np

from .exceptions import PlacementError

SHAPE_NAMES = (
    "circle",
    "square",
    "diamond",
    "triangle",
    "plus",
    "ring",
    "hbar",
    "vbar",
    "xcross",
    "hourglass",
    "semicircle",
    "frame",
)


def default_glyph_size(image_size: int) -> int:
    return max(3, image_size // 5)


def glyph_mask(shape: str, size: int) -> np.ndarray:
    """Boolean size x size mask of one glyph."""
    centers = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    v, u = np.meshgrid(-centers, centers, indexing="ij")
    r2 = u * u + v * v
    box = np.maximum(np.abs(u), np.abs(v))

    if shape == "circle":
        mask = r2 <= 0.9
    elif shape == "square":
        mask = box <= 0.8
    elif shape == "diamond":
        mask = np.abs(u) + np.abs(v) <= 0.9
    elif shape == "triangle":
        mask = (v <= 0.95) & (np.abs(u) <= (0.95 - v) / 1.9 * 0.95 + 0.05)
    elif shape == "plus":
        mask = ((np.abs(u) <= 0.3) | (np.abs(v) <= 0.3)) & (box <= 0.95)
    elif shape == "ring":
        mask = (r2 >= 0.45) & (r2 <= 1.0)
    elif shape == "hbar":
        mask = (np.abs(v) <= 0.35) & (np.abs(u) <= 0.95)
    elif shape == "vbar":
        mask = (np.abs(u) <= 0.35) & (np.abs(v) <= 0.95)
    elif shape == "xcross":
        mask = ((np.abs(u - v) <= 0.4) | (np.abs(u + v) <= 0.4)) & (box <= 0.95)
    elif shape == "hourglass":
        mask = (np.abs(u) <= np.abs(v) + 0.15) & (np.abs(v) <= 0.95)
    elif shape == "semicircle":
        mask = (r2 <= 0.95) & (v >= 0.0)
    elif shape == "frame":
        mask = (box <= 0.95) & (box >= 0.55)
    else:
        raise PlacementError(f"unknown shape '{shape}'")
    return mask


__all__ = ["SHAPE_NAMES", "default_glyph_size", "glyph_mask"]
