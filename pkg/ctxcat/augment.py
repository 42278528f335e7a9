"""Two-view image augmentation: random resized crop, horizontal flip and color jitter."""

from __future__ import annotations

import math

import numpy as np
import torch
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from .backbone import to_model_input


class AugmentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    crop_scale_min: float = Field(default=0.75, gt=0.0, le=1.0)
    flip_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    hue_jitter: float = Field(default=0.02, ge=0.0, le=0.5)
    brightness_jitter: float = Field(default=0.1, ge=0.0, lt=1.0)


def hue_rotation(turns: float) -> np.ndarray:
    """RGB rotation about the gray axis by a fraction of a full hue turn."""
    theta = 2.0 * math.pi * turns
    k = np.full(3, 1.0 / math.sqrt(3.0))
    cross = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return math.cos(theta) * np.eye(3) + math.sin(theta) * cross + (1.0 - math.cos(theta)) * np.outer(k, k)


def augment_image(pixels: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    """One random view of an (H, W, 3) uint8 image, as float64 in [0, 255]."""
    h, w = pixels.shape[:2]
    scale = rng.uniform(cfg.crop_scale_min, 1.0)
    side = max(1, int(round(min(h, w) * math.sqrt(scale))))
    top = int(rng.integers(h - side + 1))
    left = int(rng.integers(w - side + 1))
    crop = Image.fromarray(np.ascontiguousarray(pixels[top : top + side, left : left + side]))
    view = np.asarray(crop.resize((w, h), Image.BILINEAR), dtype=np.float64)

    if rng.random() < cfg.flip_prob:
        view = view[:, ::-1]
    if cfg.hue_jitter > 0:
        view = view @ hue_rotation(rng.uniform(-cfg.hue_jitter, cfg.hue_jitter)).T
    if cfg.brightness_jitter > 0:
        view = view * rng.uniform(1.0 - cfg.brightness_jitter, 1.0 + cfg.brightness_jitter)
    return np.clip(view, 0.0, 255.0)


def two_views(
    pixels: np.ndarray,
    rng: np.random.Generator,
    cfg: AugmentConfig = AugmentConfig(),
) -> torch.Tensor:
    """
    Stack two augmented views of every image.

    Returns:
        (2n, 3, H, W) model input; row i and row i + n are views of item i
    """
    first = [augment_image(image, rng, cfg) for image in pixels]
    second = [augment_image(image, rng, cfg) for image in pixels]
    return to_model_input(np.stack(first + second))


__all__ = ["AugmentConfig", "augment_image", "hue_rotation", "two_views"]
