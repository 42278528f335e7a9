"""
Frozen patch-transformer encoder with per-context token injection.

The image encoder runs on ``[cls, patches, context tokens]``. Context tokens
carry no positional embedding, attend to and are attended by every token, and
their output slots are discarded: only the class-token output is pooled. All
encoder weights are frozen and covered by a SHA-256 digest.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .containers import read_matrix, write_matrix
from .exceptions import CheckpointError, ConfigError, IntegrityError, LexiconLookupError, NumericError
from .glyphs import default_glyph_size
from .settings import validate_config
from .stem import ANCHOR, GROUP_SIZES, GROUPS, N_FEATURES, SINK_LOGIT, AttributeStem, ChannelLayout, calibrated_width
from .tracing import emit_event

logger = logging.getLogger("ctxcat.backbone")

DEFAULT_TOKEN_COUNT = 50
TOKEN_INIT_STD = 0.02
UNIT_NORM_TOLERANCE = 1e-5

BACKBONE_FILENAME = "backbone.yaml"
LEXICON_FILENAME = "lexicon.emb"

PathLike = Union[str, Path]


class BackboneConfig(BaseModel):
    """
    Desk-scale patch transformer shape.

    ``init="calibrated"`` embeds patches through the fixed attribute stem and
    sets the weights so each attention head carries one attribute group;
    ``init="random"`` is a plain pixel-patch ViT with seeded Gaussian weights.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    image_size: int = Field(default=32, ge=4)
    patch_size: int = Field(default=8, ge=1)
    depth: int = Field(default=1, ge=1)
    width: int = Field(default=96, ge=2)
    heads: int = Field(default=4, ge=1)
    mlp_ratio: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)
    init: Literal["calibrated", "random"] = "calibrated"
    glyph_size: Optional[int] = Field(default=None, ge=2)
    group_gains: Optional[Dict[str, float]] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "BackboneConfig":
        if self.image_size % self.patch_size:
            raise ValueError("image_size must be divisible by patch_size")
        if self.width % self.heads:
            raise ValueError("width must be divisible by heads")
        if self.init == "calibrated":
            if self.heads != len(GROUPS):
                raise ValueError(f"calibrated init needs one head per group ({len(GROUPS)})")
            if self.width < calibrated_width():
                raise ValueError(f"calibrated init needs width >= {calibrated_width()}")
            if self.width // self.heads < max(GROUP_SIZES.values()):
                raise ValueError(f"calibrated init needs head width >= {max(GROUP_SIZES.values())}")
            if self.resolved_glyph_size > self.image_size:
                raise ValueError("glyph_size exceeds image_size")
        if self.group_gains is not None:
            unknown = sorted(set(self.group_gains) - set(GROUPS))
            if unknown:
                raise ValueError(f"group_gains has unknown groups {unknown}")
            if any(not gain > 0.0 or not math.isfinite(gain) for gain in self.group_gains.values()):
                raise ValueError("group_gains must be positive and finite")
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid * self.grid

    @property
    def resolved_glyph_size(self) -> int:
        return self.glyph_size or default_glyph_size(self.image_size)

    def gain(self, group: str) -> float:
        return float((self.group_gains or {}).get(group, 1.0))


class Attention(nn.Module):
    """Multi-head self-attention that can keep its probabilities for relevance maps."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (width // heads) ** -0.5
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)
        self.record = False
        self.probs: Optional[torch.Tensor] = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, d // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        probs = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        if self.record:
            if probs.requires_grad:
                probs.retain_grad()
            self.probs = probs
        out = (probs @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class Block(nn.Module):
    def __init__(self, width: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = Attention(width, heads)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, width * mlp_ratio),
            nn.GELU(),
            nn.Linear(width * mlp_ratio, width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class PatchTransformer(nn.Module):
    """Pre-norm ViT with a class token; every parameter is frozen at construction."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        self.stem: Optional[AttributeStem] = None
        self.layout: Optional[ChannelLayout] = None
        if cfg.init == "calibrated":
            self.stem = AttributeStem(cfg.image_size, cfg.patch_size, cfg.resolved_glyph_size)
            self.layout = ChannelLayout.build(cfg.width, cfg.seed)
            patch_dim = N_FEATURES
        else:
            patch_dim = 3 * cfg.patch_size * cfg.patch_size
        self.patch_embed = nn.Linear(patch_dim, cfg.width)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, cfg.width))
        self.pos_embed = nn.Parameter(torch.zeros(1, 1 + cfg.n_patches, cfg.width))
        self.blocks = nn.ModuleList(
            Block(cfg.width, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.width)
        if self.layout is not None:
            self._init_calibrated(self.layout)
        else:
            self._init_weights()
        self.requires_grad_(False)
        self.eval()

    def _init_weights(self) -> None:
        generator = torch.Generator().manual_seed(self.cfg.seed)
        with torch.no_grad():
            for name, param in self.named_parameters():
                if name in ("cls_token", "pos_embed"):
                    param.normal_(0.0, 0.02, generator=generator)
                elif name.endswith("bias"):
                    param.zero_()
                elif param.ndim == 2:
                    param.normal_(0.0, 1.0 / math.sqrt(param.shape[1]), generator=generator)
                else:
                    # layer-norm gains
                    param.fill_(1.0)

    def _init_calibrated(self, layout: ChannelLayout) -> None:
        """
        Head h of the first block reads attribute group GROUPS[h].

        The class token queries every head through the query pair; patches
        and the class token have empty key channels, so their logits are 0
        and a context token reaches SINK_LOGIT when it sits on the head's
        key pair. Values copy the group's stem features back into their
        channels of the class token. Later blocks and every MLP add nothing.
        """
        width = self.cfg.width
        head_dim = width // self.cfg.heads
        # a lone +/- pair of magnitude a normalizes to +/- sqrt(width / 2)
        pair_span = math.sqrt(2.0 * width)
        q_scale = 1.0 / pair_span
        k_scale = SINK_LOGIT * math.sqrt(head_dim) / pair_span

        with torch.no_grad():
            for param in self.parameters():
                param.zero_()
            for module in self.modules():
                if isinstance(module, nn.LayerNorm) and module is not self.norm:
                    module.weight.fill_(1.0)

            for j, (plus, minus) in enumerate(layout.features):
                self.patch_embed.weight[plus, j] = 1.0
                self.patch_embed.weight[minus, j] = -1.0
            self.patch_embed.bias[layout.anchor[0]] = ANCHOR
            self.patch_embed.bias[layout.anchor[1]] = -ANCHOR
            self.cls_token[0, 0, layout.query[0]] = 1.0
            self.cls_token[0, 0, layout.query[1]] = -1.0

            attn = self.blocks[0].attn
            for h, group in enumerate(GROUPS):
                row = h * head_dim
                attn.qkv.weight[row, layout.query[0]] = q_scale
                attn.qkv.weight[row, layout.query[1]] = -q_scale
                key_plus, key_minus = layout.keys[h]
                attn.qkv.weight[width + row, key_plus] = k_scale
                attn.qkv.weight[width + row, key_minus] = -k_scale
                for j, (plus, minus) in enumerate(layout.group_features(group)):
                    attn.qkv.weight[2 * width + row + j, plus] = 0.5
                    attn.qkv.weight[2 * width + row + j, minus] = -0.5
                    attn.proj.weight[plus, row + j] = 1.0
                    attn.proj.weight[minus, row + j] = -1.0
                    self.norm.weight[plus] = self.cfg.gain(group)
                    self.norm.weight[minus] = self.cfg.gain(group)

    def embed_patches(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, P, width)."""
        h, w = images.shape[-2:]
        if h != self.cfg.image_size or w != self.cfg.image_size:
            raise ConfigError(
                f"image is {h}x{w}, encoder expects {self.cfg.image_size}x{self.cfg.image_size}"
            )
        if self.stem is not None:
            return self.patch_embed(self.stem(images))
        return self.patch_embed(self.patchify(images))

    def patchify(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, P, 3*p*p)."""
        b, c, h, w = images.shape
        p = self.cfg.patch_size
        x = images.reshape(b, c, h // p, p, w // p, p).permute(0, 2, 4, 1, 3, 5)
        return x.reshape(b, (h // p) * (w // p), c * p * p)

    def forward_features(self, images: torch.Tensor, tokens: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Token sequence after the last block: class token, patches, then context tokens."""
        b = images.shape[0]
        x = self.embed_patches(images)
        x = torch.cat([self.cls_token.expand(b, -1, -1), x], dim=1) + self.pos_embed
        if tokens is not None and tokens.shape[0] > 0:
            x = torch.cat([x, tokens.to(x.dtype).unsqueeze(0).expand(b, -1, -1)], dim=1)
        for block in self.blocks:
            x = block(x)
        return x

    def group_readout(self, images: torch.Tensor, tokens: Optional[torch.Tensor] = None) -> Dict[str, torch.Tensor]:
        """Per-group class-token features before the final norm (calibrated encoders only)."""
        if self.layout is None:
            raise ConfigError("group readout needs a calibrated encoder")
        pooled = self.forward_features(images, tokens)[:, 0]
        return {group: self.layout.readout(pooled, group) for group in GROUPS}

    def forward(self, images: torch.Tensor, tokens: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            images: (B, 3, H, W) normalized images
            tokens: (m, d) context tokens, shared by the whole batch

        Returns:
            (B, d) unit-norm class-token embeddings
        """
        pooled = self.norm(self.forward_features(images, tokens)[:, 0])
        if not torch.isfinite(pooled).all():
            raise NumericError("non-finite activations in image encoder")
        return F.normalize(pooled, dim=-1)

    def record_attention(self, enabled: bool) -> None:
        for block in self.blocks:
            block.attn.record = enabled
            block.attn.probs = None

    def attention_probs(self) -> List[torch.Tensor]:
        return [block.attn.probs for block in self.blocks]


def to_model_input(pixels: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """uint8 (n, H, W, 3) or (H, W, 3) -> normalized (n, 3, H, W) tensor."""
    array = np.asarray(pixels)
    if array.ndim == 3:
        array = array[None]
    x = torch.from_numpy(np.ascontiguousarray(array)).to(dtype) / 255.0
    return ((x - 0.5) / 0.5).permute(0, 3, 1, 2).contiguous()


@dataclass(frozen=True, eq=False)
class Lexicon:
    """Ordered map from class name to unit vector; the frozen text side."""

    names: Tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        names = tuple(self.names)
        matrix = np.array(self.matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != len(names):
            raise ConfigError(f"lexicon has {len(names)} names for matrix {matrix.shape}")
        if len(set(names)) != len(names):
            raise ConfigError("lexicon names must be unique")
        if len(names):
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOLERANCE):
                raise NumericError("lexicon vectors must be unit norm")
        matrix.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "matrix", matrix)

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.matrix, other.matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LexiconLookupError(f"'{name}' is not in the lexicon") from None

    def vector(self, name: str) -> np.ndarray:
        return self.matrix[self.index(name)].copy()

    def subset(self, names: Iterable[str]) -> "Lexicon":
        wanted = tuple(names)
        rows = [self.index(name) for name in wanted]
        return Lexicon(wanted, self.matrix[rows] if rows else np.zeros((0, self.dim), np.float32))

    def digest(self) -> str:
        sha = hashlib.sha256()
        for name in self.names:
            sha.update(name.encode("utf-8") + b"\x00")
        sha.update(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())
        return sha.hexdigest()

    def save(self, path: PathLike) -> Path:
        return write_matrix(path, self.matrix, names=self.names)

    @classmethod
    def load(cls, path: PathLike) -> "Lexicon":
        decoded = read_matrix(path)
        if decoded.names is None:
            raise CheckpointError(f"{path}: lexicon file has no name table")
        return cls(decoded.names, decoded.matrix)


def weights_digest(module: nn.Module) -> str:
    """SHA-256 over parameter names, shapes and bytes in registration order."""
    sha = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        array = tensor.detach().cpu().contiguous().numpy()
        sha.update(name.encode("utf-8"))
        sha.update(str(tuple(array.shape)).encode("ascii"))
        sha.update(array.tobytes())
    return sha.hexdigest()


@dataclass(eq=False)
class EncoderPair:
    """Frozen image encoder plus lexicon sharing one embedding space."""

    image_encoder: PatchTransformer
    lexicon: Lexicon
    digest: str = field(init=False)

    def __post_init__(self) -> None:
        self.digest = weights_digest(self.image_encoder)

    @property
    def config(self) -> BackboneConfig:
        return self.image_encoder.cfg

    @property
    def dim(self) -> int:
        return self.config.width

    def verify(self, expected: Optional[str] = None) -> str:
        """Recompute the weight digest; raise IntegrityError if it moved."""
        current = weights_digest(self.image_encoder)
        reference = expected or self.digest
        if current != reference:
            raise IntegrityError(
                f"backbone digest {current[:12]} does not match recorded {reference[:12]}"
            )
        return current

    def with_lexicon(self, lexicon: Lexicon) -> "EncoderPair":
        if len(lexicon) and lexicon.dim != self.dim:
            raise ConfigError(f"lexicon dimension {lexicon.dim} != encoder width {self.dim}")
        return EncoderPair(self.image_encoder, lexicon)


def build_encoder(cfg: Optional[BackboneConfig] = None, lexicon: Optional[Lexicon] = None) -> EncoderPair:
    cfg = cfg or BackboneConfig()
    encoder = PatchTransformer(cfg)
    empty = Lexicon((), np.zeros((0, cfg.width), dtype=np.float32))
    pair = EncoderPair(encoder, empty)
    return pair.with_lexicon(lexicon) if lexicon is not None else pair


GAIN_VARIANCE_FLOOR = 1e-6


def calibrate_group_gains(encoder: EncoderPair, pixels: np.ndarray, batch_size: int = 256) -> Dict[str, float]:
    """
    Final-norm gain of every attribute group from zero-token images.

    Each group's class-token features are scaled by the inverse square root
    of their total variance over ``pixels``, so no group dominates the
    zero-token embedding.
    """
    model = encoder.image_encoder
    pixels = np.asarray(pixels)
    readouts: Dict[str, List[np.ndarray]] = {group: [] for group in GROUPS}
    with torch.no_grad():
        for start in range(0, len(pixels), batch_size):
            chunk = model.group_readout(to_model_input(pixels[start : start + batch_size]))
            for group, values in chunk.items():
                readouts[group].append(values.double().numpy())
    gains = {}
    for group, chunks in readouts.items():
        if not chunks:
            raise ConfigError("gain calibration needs at least one image")
        values = np.concatenate(chunks)
        variance = float(values.var(axis=0).sum())
        gains[group] = float(1.0 / math.sqrt(max(variance, GAIN_VARIANCE_FLOOR)))
    emit_event(logger, "backbone.gains_calibrated", images=len(pixels), gains={g: round(v, 4) for g, v in gains.items()})
    return gains


def save_encoder(pair: EncoderPair, directory: PathLike) -> Path:
    """Write backbone.yaml (config + digest) and lexicon.emb."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    record = {
        "config": pair.config.model_dump(),
        "digest": pair.digest,
        "lexicon_digest": pair.lexicon.digest(),
    }
    with open(target / BACKBONE_FILENAME, "w", encoding="utf-8") as f:
        yaml.safe_dump(record, f, default_flow_style=False, sort_keys=True)
    pair.lexicon.save(target / LEXICON_FILENAME)
    return target


def load_encoder(directory: PathLike) -> EncoderPair:
    """Rebuild the frozen encoder from its seed and check both digests."""
    source = Path(directory)
    try:
        record = yaml.safe_load((source / BACKBONE_FILENAME).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise CheckpointError(f"cannot read {source / BACKBONE_FILENAME}: {exc}") from exc

    cfg = validate_config(BackboneConfig, record.get("config"))
    lexicon = Lexicon.load(source / LEXICON_FILENAME)
    pair = build_encoder(cfg, lexicon)
    if record.get("digest"):
        pair.verify(record["digest"])
    if record.get("lexicon_digest") and record["lexicon_digest"] != lexicon.digest():
        raise IntegrityError(f"{source / LEXICON_FILENAME}: lexicon digest mismatch")
    return pair


@dataclass(frozen=True, eq=False)
class ContextTokens:
    """Trainable m x d token matrix of one context."""

    context_id: str
    tokens: np.ndarray

    def __post_init__(self) -> None:
        tokens = np.array(self.tokens, dtype=np.float32)
        if tokens.ndim != 2:
            raise ConfigError(f"context tokens must be 2-D, got shape {tokens.shape}")
        if not np.all(np.isfinite(tokens)):
            raise NumericError(f"context '{self.context_id}': non-finite token entries")
        tokens.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)

    @property
    def m(self) -> int:
        return self.tokens.shape[0]

    @property
    def d(self) -> int:
        return self.tokens.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContextTokens):
            return NotImplemented
        return (
            self.context_id == other.context_id
            and self.tokens.shape == other.tokens.shape
            and self.tokens.tobytes() == other.tokens.tobytes()
        )

    def as_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return torch.from_numpy(self.tokens.copy()).to(dtype)

    def save(self, path: PathLike) -> Path:
        return write_matrix(path, self.tokens, context_id=self.context_id)

    @classmethod
    def load(cls, path: PathLike) -> "ContextTokens":
        decoded = read_matrix(path)
        if decoded.context_id is None:
            raise CheckpointError(f"{path}: token file has no context id")
        return cls(decoded.context_id, decoded.matrix)


def init_context_tokens(
    context_id: str,
    m: int = DEFAULT_TOKEN_COUNT,
    d: int = 64,
    seed: Union[int, Sequence[int]] = 0,
) -> ContextTokens:
    """Gaussian(0, 0.02) tokens; m may be 0 for the no-token ablation."""
    if m < 0 or d <= 0:
        raise ConfigError(f"token shape must have m >= 0 and d > 0, got ({m}, {d})")
    rng = np.random.default_rng(seed)
    return ContextTokens(context_id, rng.normal(0.0, TOKEN_INIT_STD, size=(m, d)))


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    """Unit-norm embedding rows aligned with item ids."""

    matrix: np.ndarray
    item_ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float32)
        ids = tuple(self.item_ids)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise ConfigError(f"{len(ids)} item ids for embedding matrix {matrix.shape}")
        if len(ids):
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOLERANCE):
                raise NumericError("embedding rows must be unit norm")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "item_ids", ids)

    def __len__(self) -> int:
        return len(self.item_ids)

    def rows(self, item_ids: Sequence[str]) -> np.ndarray:
        position = {item_id: i for i, item_id in enumerate(self.item_ids)}
        return self.matrix[[position[item_id] for item_id in item_ids]]

    def select(self, item_ids: Sequence[str]) -> "EmbeddingBatch":
        return EmbeddingBatch(self.rows(item_ids), tuple(item_ids))


def _token_tensor(tokens: Optional[Union[ContextTokens, torch.Tensor]]) -> Optional[torch.Tensor]:
    if tokens is None:
        return None
    if isinstance(tokens, ContextTokens):
        return tokens.as_tensor()
    return tokens


def encode_image(
    encoder: EncoderPair,
    x: np.ndarray,
    z: Optional[Union[ContextTokens, torch.Tensor]] = None,
) -> np.ndarray:
    """Unit embedding of one (H, W, 3) uint8 image under context tokens z."""
    with torch.no_grad():
        out = encoder.image_encoder(to_model_input(x), _token_tensor(z))
    return out[0].numpy().astype(np.float32)


def encode_images(
    encoder: EncoderPair,
    pixels: np.ndarray,
    tokens: Optional[Union[ContextTokens, torch.Tensor]] = None,
    item_ids: Optional[Sequence[str]] = None,
    batch_size: int = 256,
) -> EmbeddingBatch:
    """Batched no-grad encoding; rows follow the input order."""
    pixels = np.asarray(pixels)
    ids = tuple(item_ids) if item_ids is not None else tuple(str(i) for i in range(len(pixels)))
    z = _token_tensor(tokens)
    chunks = []
    with torch.no_grad():
        for start in range(0, len(pixels), batch_size):
            chunk = to_model_input(pixels[start : start + batch_size])
            chunks.append(encoder.image_encoder(chunk, z).numpy())
    if not chunks:
        return EmbeddingBatch(np.zeros((0, encoder.dim), dtype=np.float32), ids)
    return EmbeddingBatch(np.concatenate(chunks).astype(np.float32), ids)


def encode_text(name: str, lexicon: Lexicon) -> np.ndarray:
    return lexicon.vector(name)


def load_backbone_config(data: Optional[Dict] = None) -> BackboneConfig:
    return validate_config(BackboneConfig, data)


__all__ = [
    "BackboneConfig",
    "PatchTransformer",
    "Lexicon",
    "EncoderPair",
    "ContextTokens",
    "EmbeddingBatch",
    "build_encoder",
    "calibrate_group_gains",
    "save_encoder",
    "load_encoder",
    "weights_digest",
    "init_context_tokens",
    "encode_image",
    "encode_images",
    "encode_text",
    "to_model_input",
    "load_backbone_config",
]
