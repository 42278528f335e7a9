"""Gradient-weighted attention rollout over the frozen encoder."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image

from .backbone import ContextTokens, EncoderPair, Lexicon, to_model_input
from .exceptions import LexiconLookupError, NumericError

PathLike = Union[str, Path]

HEATMAP_FILENAME = "heatmap.pgm"
WEIGHTS_FILENAME = "weights.txt"


@dataclass(frozen=True, eq=False)
class RelevanceMap:
    """Per-patch nonnegative weights on the encoder's patch grid."""

    weights: np.ndarray
    normalized: bool = True

    @property
    def grid(self) -> Tuple[int, int]:
        return self.weights.shape

    def upsample(self, size: int) -> np.ndarray:
        factor = size // self.weights.shape[0]
        return np.kron(self.weights, np.ones((factor, factor)))


def grad_rollout(
    attentions: Sequence[torch.Tensor],
    gradients: Sequence[torch.Tensor],
    n_patches: int,
) -> np.ndarray:
    """
    Roll relevance through the layers and read the class-token row.

    Args:
        attentions: Per layer (heads, N, N) or (1, heads, N, N) attention probabilities
        gradients: Matching gradients of the target scalar
        n_patches: Patch columns after the class token; trailing columns are context tokens

    Returns:
        (n_patches,) weights summing to 1
    """
    first = attentions[0]
    size = first.shape[-1]
    result = torch.eye(size, dtype=torch.float64)
    eye = torch.eye(size, dtype=torch.float64)
    with torch.no_grad():
        for attention, grad in zip(attentions, gradients):
            cam = attention.reshape(-1, size, size).double()
            weights = grad.reshape(-1, size, size).double()
            fused = (weights * cam).clamp(min=0).mean(dim=0)
            a = (fused + eye) / 2.0
            a = a / a.sum(dim=-1, keepdim=True)
            result = a @ result

    mask = result[0, 1 : 1 + n_patches].numpy()
    total = mask.sum()
    if not np.isfinite(total) or total <= 0:
        return np.full(n_patches, 1.0 / n_patches)
    return mask / total


def _target_scalar(
    encoder: EncoderPair,
    images: torch.Tensor,
    tokens: Optional[torch.Tensor],
    target: str,
    lexicon: Lexicon,
) -> torch.Tensor:
    if target:
        text = torch.from_numpy(lexicon.vector(target)).to(images.dtype)
        return (encoder.image_encoder(images, tokens)[0] * text).sum()
    return encoder.image_encoder.forward_features(images, tokens)[0, 0].norm()


def relevance_map(
    x: np.ndarray,
    z: Optional[ContextTokens],
    target: str,
    encoder: EncoderPair,
    lexicon: Optional[Lexicon] = None,
) -> RelevanceMap:
    """
    Relevance of each patch for the cosine between the image embedding and
    the target's lexicon vector; an empty target uses the class token's norm.

    Raises:
        LexiconLookupError: target is not in the lexicon
    """
    lexicon = lexicon if lexicon is not None else encoder.lexicon
    if target and target not in lexicon:
        raise LexiconLookupError(f"target '{target}' is not in the lexicon")

    cfg = encoder.config
    images = to_model_input(x).requires_grad_(True)
    tokens = z.as_tensor() if z is not None else None
    model = encoder.image_encoder
    model.record_attention(True)
    try:
        scalar = _target_scalar(encoder, images, tokens, target, lexicon)
        scalar.backward()
        probs = model.attention_probs()
        attentions: List[torch.Tensor] = [p.detach() for p in probs]
        gradients = [p.grad.detach() if p.grad is not None else torch.zeros_like(p) for p in probs]
    finally:
        model.record_attention(False)

    weights = grad_rollout(attentions, gradients, cfg.n_patches)
    if not np.all(np.isfinite(weights)):
        raise NumericError("non-finite relevance weights")
    return RelevanceMap(weights.reshape(cfg.grid, cfg.grid), normalized=True)


def write_pgm(relevance: RelevanceMap, path: PathLike, image_size: Optional[int] = None) -> Path:
    """Binary 8-bit graymap, nearest-neighbor upsampled and scaled so the maximum is 255."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    grid = relevance.weights
    full = relevance.upsample(image_size) if image_size else grid
    peak = full.max()
    scaled = np.zeros_like(full) if peak <= 0 else full / peak * 255.0
    Image.fromarray(np.round(scaled).astype(np.uint8)).save(target, format="PPM")
    return target


def write_weights(relevance: RelevanceMap, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    rows = [" ".join(f"{value:.8f}" for value in row) for row in relevance.weights]
    target.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return target


__all__ = [
    "RelevanceMap",
    "grad_rollout",
    "relevance_map",
    "write_pgm",
    "write_weights",
    "HEATMAP_FILENAME",
    "WEIGHTS_FILENAME",
]
