"""
Fixed attribute stem and channel layout of the calibrated encoder.

The stem turns every patch into a short vector of hand-set attribute
responses: opponent color, glyph template matches, glyph mass and background
edge energies. The calibrated encoder routes each attribute group through
its own attention head. Patches and the class token leave the per-head key
channels empty, so a context token whose key lines up with a head's query
draws that head's attention away from the patches and mutes the group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .glyphs import SHAPE_NAMES, glyph_mask

GROUPS = ("color", "shape", "count", "texture")
EDGE_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))
EDGE_STEPS = (1, 2, 4)

GROUP_SIZES: Dict[str, int] = {
    "color": 2,
    "shape": len(SHAPE_NAMES),
    "count": 3,
    "texture": 1 + len(EDGE_DIRECTIONS) * len(EDGE_STEPS),
}
N_FEATURES = sum(GROUP_SIZES.values())

MATCH_THRESHOLD = 0.5
CHROMA_PRIOR = 0.5
EDGE_PRIOR = 1.0
EDGE_SCALE = 120.0 / 255.0
COUNT_BIAS = 0.25
ANCHOR = 4.0
SINK_LOGIT = 8.0


def group_slices() -> Dict[str, slice]:
    """Feature-axis slice of every group, in stem order."""
    slices = {}
    start = 0
    for group in GROUPS:
        slices[group] = slice(start, start + GROUP_SIZES[group])
        start += GROUP_SIZES[group]
    return slices


def calibrated_width() -> int:
    """Channels used by the layout: query, anchor, one key per head, features; all in +/- pairs."""
    return 2 * (2 + len(GROUPS) + N_FEATURES)


def _shift(t: torch.Tensor, dy: int, dx: int) -> torch.Tensor:
    """out[y, x] = t[y + dy, x + dx], zero outside the image."""
    pad = max(abs(dy), abs(dx))
    h, w = t.shape[-2:]
    padded = F.pad(t, (pad, pad, pad, pad))
    return padded[..., pad + dy : pad + dy + h, pad + dx : pad + dx + w]


class AttributeStem(nn.Module):
    """Parameter-free (B, 3, H, W) -> (B, P, N_FEATURES) patch features."""

    def __init__(self, image_size: int, patch_size: int, glyph_size: int):
        super().__init__()
        self.image_size = image_size
        self.patch_size = patch_size
        self.glyph_size = glyph_size
        masks = np.stack([glyph_mask(shape, glyph_size) for shape in SHAPE_NAMES]).astype(np.float32)
        # exact match of a glyph scores 1
        templates = (2.0 * masks - 1.0) / np.maximum(masks.sum(axis=(1, 2), keepdims=True), 1.0)
        self.register_buffer("templates", torch.from_numpy(templates).unsqueeze(1), persistent=True)

    def _patch_sum(self, t: torch.Tensor) -> torch.Tensor:
        b, h, w = t.shape
        p = self.patch_size
        return t.reshape(b, h // p, p, w // p, p).sum(dim=(2, 4)).reshape(b, -1)

    def _patch_max(self, t: torch.Tensor) -> torch.Tensor:
        b, k, h, w = t.shape
        p = self.patch_size
        pooled = t.reshape(b, k, h // p, p, w // p, p).amax(dim=(3, 5))
        return pooled.reshape(b, k, -1).transpose(1, 2)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        u = ((images + 1.0) / 2.0).clamp(0.0, 1.0)
        red, green, blue = u[:, 0], u[:, 1], u[:, 2]
        saturation = (u.amax(dim=1) - u.amin(dim=1)).clamp(0.0, 1.0)
        luminance = u.mean(dim=1)
        background = (1.0 - 2.0 * saturation).clamp(min=0.0)
        area = self._patch_sum(saturation)

        chroma_a = self._patch_sum(red - (green + blue) / 2.0) / (area + CHROMA_PRIOR)
        chroma_b = self._patch_sum(math.sqrt(3.0) / 2.0 * (green - blue)) / (area + CHROMA_PRIOR)
        color = torch.stack([chroma_a, chroma_b], dim=-1)

        # template top-left corners; responses past the last valid corner are zero
        h, w = saturation.shape[-2:]
        response = F.conv2d(saturation.unsqueeze(1), self.templates.to(saturation.dtype))
        response = F.pad(response, (0, w - response.shape[-1], 0, h - response.shape[-2]))
        matches = torch.relu(response - MATCH_THRESHOLD) / (1.0 - MATCH_THRESHOLD)
        shape = self._patch_max(matches)

        peaks = self._patch_max(matches.amax(dim=1, keepdim=True))[..., 0]
        count = torch.stack(
            [torch.full_like(peaks, COUNT_BIAS), peaks, area / float(self.patch_size**2)],
            dim=-1,
        )

        edges = [0.5 * self._patch_sum(background) / float(self.patch_size**2)]
        for dy, dx in EDGE_DIRECTIONS:
            for step in EDGE_STEPS:
                weight = background * _shift(background, dy * step, dx * step)
                energy = (luminance - _shift(luminance, dy * step, dx * step)).abs() * weight
                edges.append(self._patch_sum(energy) / (self._patch_sum(weight) + EDGE_PRIOR) / EDGE_SCALE)
        texture = torch.stack(edges, dim=-1)

        return torch.cat([color, shape, count, texture], dim=-1)


@dataclass(frozen=True)
class ChannelLayout:
    """Seeded placement of the calibrated channel pairs inside the encoder width."""

    query: Tuple[int, int]
    anchor: Tuple[int, int]
    keys: Tuple[Tuple[int, int], ...]
    features: Tuple[Tuple[int, int], ...]

    @classmethod
    def build(cls, width: int, seed: int) -> "ChannelLayout":
        order = np.random.default_rng(seed).permutation(width)[: calibrated_width()].tolist()
        pairs: List[Tuple[int, int]] = [(order[i], order[i + 1]) for i in range(0, len(order), 2)]
        n_keys = len(GROUPS)
        return cls(
            query=pairs[0],
            anchor=pairs[1],
            keys=tuple(pairs[2 : 2 + n_keys]),
            features=tuple(pairs[2 + n_keys :]),
        )

    def group_features(self, group: str) -> Tuple[Tuple[int, int], ...]:
        return self.features[group_slices()[group]]

    def readout(self, x: torch.Tensor, group: str) -> torch.Tensor:
        """Signed group features from (..., width) activations."""
        plus = [pair[0] for pair in self.group_features(group)]
        minus = [pair[1] for pair in self.group_features(group)]
        return (x[..., plus] - x[..., minus]) / 2.0


__all__ = [
    "GROUPS",
    "GROUP_SIZES",
    "N_FEATURES",
    "AttributeStem",
    "ChannelLayout",
    "calibrated_width",
    "group_slices",
]
