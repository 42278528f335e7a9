"""
Procedural multi-context image generator.

Every image shows one or more glyphs on a grayscale background. Four
attributes are rendered independently:

- color: fill hue of the glyphs (fully saturated)
- shape: glyph mask
- count: number of disjoint glyphs
- texture: background pattern

Each dataset context is one attribute restricted to a prefix of its value
pool; pool values the dataset does not use become distractor names in the
candidate vocabularies. The lexicon is calibrated from held-out probe images
encoded by the frozen backbone with no context tokens.
"""

from __future__ import annotations

import colorsys
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage

from .backbone import (
    BackboneConfig,
    EncoderPair,
    Lexicon,
    build_encoder,
    calibrate_group_gains,
    encode_images,
    save_encoder,
)
from .datamodel import (
    MISSING,
    ContextSpec,
    Item,
    MultiContextDataset,
    SplitConfig,
    sample_labeled,
    save_dataset,
    split_known_novel,
    stable_key,
    write_vocab,
)
from .exceptions import DegenerateLexiconError, PlacementError
from .glyphs import SHAPE_NAMES, default_glyph_size, glyph_mask
from .settings import resolve_runtime_settings
from .tracing import emit_event

logger = logging.getLogger("ctxcat.synthgen")

COLOR_HUES: Dict[str, float] = {
    "red": 0.0,
    "orange": 30.0,
    "yellow": 60.0,
    "lime": 90.0,
    "green": 120.0,
    "mint": 150.0,
    "cyan": 180.0,
    "azure": 210.0,
    "blue": 240.0,
    "violet": 270.0,
    "magenta": 300.0,
    "pink": 330.0,
}
COLOR_NAMES = tuple(COLOR_HUES)
TEXTURE_NAMES = (
    "plain",
    "stripes",
    "columns",
    "checker",
    "dots",
    "diagonal",
    "grid",
    "concentric",
    "blocks",
    "antidiagonal",
    "hgradient",
    "vgradient",
)
COUNT_NAMES = ("one", "two", "three", "four", "five", "six", "seven", "eight", "nine")

POOLS: Dict[str, Tuple[str, ...]] = {
    "color": COLOR_NAMES,
    "shape": SHAPE_NAMES,
    "count": COUNT_NAMES,
    "texture": TEXTURE_NAMES,
}

# defaults for attributes that are not a dataset context
BACKGROUND_CHOICES = 4
MAX_PLACEMENT_ATTEMPTS = 1000
GLYPH_GAP = 2
LEXICON_MIN_NORM = 1e-8

_TEXTURE_LO = 60
_TEXTURE_HI = 180

PathLike = Union[str, Path]


def color_rgb(name: str) -> Tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(COLOR_HUES[name] / 360.0, 1.0, 1.0)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def texture_pattern(name: str, size: int) -> np.ndarray:
    """Grayscale uint8 background pattern."""
    yy, xx = np.mgrid[0:size, 0:size]
    lo, hi = _TEXTURE_LO, _TEXTURE_HI

    if name == "plain":
        return np.full((size, size), 120, dtype=np.uint8)
    if name in ("hgradient", "vgradient"):
        axis = xx if name == "hgradient" else yy
        ramp = lo + (hi - lo) * axis / max(size - 1, 1)
        return np.round(ramp).astype(np.uint8)

    if name == "stripes":
        on = (yy // 2) % 2 == 0
    elif name == "columns":
        on = (xx // 2) % 2 == 0
    elif name == "checker":
        on = (yy // 4 + xx // 4) % 2 == 0
    elif name == "dots":
        on = (yy % 4 == 1) & (xx % 4 == 1)
    elif name == "diagonal":
        on = ((xx + yy) // 2) % 2 == 0
    elif name == "antidiagonal":
        on = ((xx - yy) // 2) % 2 == 0
    elif name == "grid":
        on = (yy % 6 == 0) | (xx % 6 == 0)
    elif name == "concentric":
        c = (size - 1) / 2.0
        on = (np.floor(np.hypot(yy - c, xx - c)) // 3) % 2 == 0
    elif name == "blocks":
        on = (yy // 8 + xx // 8) % 2 == 0
    else:
        raise PlacementError(f"unknown texture '{name}'")
    return np.where(on, hi, lo).astype(np.uint8)


def count_value(count: Union[int, str]) -> int:
    if isinstance(count, str):
        if count in COUNT_NAMES:
            return COUNT_NAMES.index(count) + 1
        return int(count)
    return int(count)


def packing_capacity(image_size: int, glyph_size: int, gap: int = GLYPH_GAP) -> int:
    per_side = (image_size + gap) // (glyph_size + gap)
    return per_side * per_side


def place_glyphs(
    count: int,
    image_size: int,
    glyph_size: int,
    rng: np.random.Generator,
    gap: int = GLYPH_GAP,
) -> List[Tuple[int, int]]:
    """
    Top-left corners of non-overlapping glyph boxes separated by at least gap pixels.

    Raises:
        PlacementError: Over capacity, or no placement within the attempt budget
    """
    if count < 1:
        raise PlacementError(f"glyph count must be positive, got {count}")
    if glyph_size > image_size or count > packing_capacity(image_size, glyph_size, gap):
        raise PlacementError(
            f"{count} glyphs of size {glyph_size} do not fit in a {image_size}px image"
        )
    if count == 1:
        corner = (image_size - glyph_size) // 2
        return [(corner, corner)]

    span = image_size - glyph_size + 1
    pitch = glyph_size + gap
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        placed: List[Tuple[int, int]] = []
        for _ in range(count):
            free = np.ones((span, span), dtype=bool)
            for y, x in placed:
                free[max(0, y - pitch + 1) : y + pitch, max(0, x - pitch + 1) : x + pitch] = False
            options = np.flatnonzero(free)
            if options.size == 0:
                break
            pick = int(options[rng.integers(options.size)])
            placed.append(divmod(pick, span))
        if len(placed) == count:
            return placed
    raise PlacementError(
        f"could not place {count} glyphs in {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def render_image(
    attrs: Mapping[str, Any],
    size: int,
    seed: Union[int, Sequence[int]],
    glyph_size: Optional[int] = None,
    glyph_attrs: Optional[Sequence[Mapping[str, str]]] = None,
) -> np.ndarray:
    """
    Render one (size, size, 3) uint8 image.

    Args:
        attrs: color, shape, count and texture values
        size: Pixels per side
        seed: Seed of the placement stream
        glyph_size: Glyph box size; defaults to size // 5
        glyph_attrs: Optional per-glyph color/shape overrides

    Raises:
        PlacementError: Unknown attribute value or glyphs that do not fit
    """
    g = glyph_size or default_glyph_size(size)
    count = count_value(attrs["count"])
    for key, pool in (("color", COLOR_NAMES), ("shape", SHAPE_NAMES), ("texture", TEXTURE_NAMES)):
        if attrs[key] not in pool:
            raise PlacementError(f"unknown {key} '{attrs[key]}'")

    rng = np.random.default_rng(seed)
    corners = place_glyphs(count, size, g, rng)
    canvas = np.repeat(texture_pattern(attrs["texture"], size)[:, :, None], 3, axis=2)
    for index, (y, x) in enumerate(corners):
        local = dict(attrs)
        if glyph_attrs is not None:
            local.update(glyph_attrs[index])
        mask = glyph_mask(local["shape"], g)
        region = canvas[y : y + g, x : x + g]
        region[mask] = color_rgb(local["color"])
    return canvas


def glyph_pixels(pixels: np.ndarray) -> np.ndarray:
    """Mask of saturated (glyph) pixels; backgrounds are pure gray."""
    rgb = np.asarray(pixels, dtype=np.int32)
    hi = rgb.max(axis=2)
    lo = rgb.min(axis=2)
    return (hi > 0) & ((hi - lo) * 2 > hi)


def oracle_count(pixels: np.ndarray) -> int:
    _, n = ndimage.label(glyph_pixels(pixels), structure=np.ones((3, 3), dtype=int))
    return int(n)


def oracle_color(pixels: np.ndarray, candidates: Sequence[str] = COLOR_NAMES) -> str:
    """Most frequent glyph color, snapped to the nearest candidate hue."""
    mask = glyph_pixels(pixels)
    if not mask.any():
        raise PlacementError("image has no glyph pixels")
    colors, counts = np.unique(np.asarray(pixels)[mask].reshape(-1, 3), axis=0, return_counts=True)
    dominant = colors[int(np.argmax(counts))].astype(np.float64)
    palette = np.array([color_rgb(name) for name in candidates], dtype=np.float64)
    return candidates[int(np.argmin(((palette - dominant) ** 2).sum(axis=1)))]


def oracle_texture(pixels: np.ndarray, candidates: Sequence[str] = TEXTURE_NAMES) -> str:
    """Regenerate every candidate pattern and keep the best match on background pixels."""
    array = np.asarray(pixels)
    background = ~glyph_pixels(array)
    gray = array[:, :, 0].astype(np.int32)
    errors = [
        np.abs(gray - texture_pattern(name, array.shape[0]).astype(np.int32))[background].mean()
        for name in candidates
    ]
    return candidates[int(np.argmin(errors))]


def oracle_shape(pixels: np.ndarray, glyph_size: int, candidates: Sequence[str] = SHAPE_NAMES) -> str:
    """Compare the first glyph's bounding box with every candidate mask."""
    mask = glyph_pixels(pixels)
    labeled, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        raise PlacementError("image has no glyph pixels")
    best, best_score = candidates[0], -1.0
    component = labeled == 1
    ys, xs = np.nonzero(component)
    for name in candidates:
        template = glyph_mask(name, glyph_size)
        ty, tx = np.nonzero(template)
        y0, x0 = ys.min() - ty.min(), xs.min() - tx.min()
        window = np.zeros_like(template)
        h = min(glyph_size, mask.shape[0] - y0)
        w = min(glyph_size, mask.shape[1] - x0)
        if y0 < 0 or x0 < 0 or h <= 0 or w <= 0:
            continue
        window[:h, :w] = component[y0 : y0 + h, x0 : x0 + w]
        score = float((window == template).mean())
        if score > best_score:
            best, best_score = name, score
    return best


class GenConfig(BaseModel):
    """Synthetic dataset settings."""

    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(default=32, ge=8)
    glyph_size: Optional[int] = Field(default=None, ge=3)
    contexts: Dict[str, List[str]] = Field(
        default_factory=lambda: {
            "color": list(COLOR_NAMES[:4]),
            "shape": list(SHAPE_NAMES[:4]),
            "count": list(COUNT_NAMES[:4]),
        }
    )
    n_images: int = Field(default=400, ge=1)
    probe_per_class: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)
    known_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    labeled_per_class: int = Field(default=16, ge=0)
    vocab_multiplier: int = Field(default=4, ge=1)
    vary_objects: bool = False
    missing_rate: float = Field(default=0.0, ge=0.0, lt=1.0)
    threads: Optional[int] = Field(default=None, ge=1)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)

    @field_validator("contexts", mode="before")
    @classmethod
    def _expand_prefix_counts(cls, value: Any) -> Any:
        # "color: 4" means the first four pool values
        if isinstance(value, Mapping):
            expanded = {}
            for attribute, classes in value.items():
                if isinstance(classes, int) and attribute in POOLS:
                    expanded[attribute] = list(POOLS[attribute][:classes])
                else:
                    expanded[attribute] = classes
            return expanded
        if isinstance(value, (list, tuple)):
            return {attribute: classes for attribute, classes in value}
        return value

    @field_validator("contexts")
    @classmethod
    def _check_contexts(cls, value: Dict[str, List[str]]) -> Dict[str, List[str]]:
        if not value:
            raise ValueError("at least one context is required")
        for attribute, classes in value.items():
            if attribute not in POOLS:
                raise ValueError(f"unknown attribute '{attribute}', expected one of {sorted(POOLS)}")
            unknown = [name for name in classes if name not in POOLS[attribute]]
            if unknown:
                raise ValueError(f"'{attribute}' has no values {unknown}")
            if len(set(classes)) != len(classes) or len(classes) < 2:
                raise ValueError(f"'{attribute}' needs at least 2 distinct classes")
        return value

    @model_validator(mode="after")
    def _check_sizes(self) -> "GenConfig":
        widest = max(len(classes) for classes in self.contexts.values())
        if self.n_images < widest:
            raise ValueError(f"n_images {self.n_images} is below the class count {widest}")
        if self.backbone.image_size != self.image_size:
            raise ValueError("backbone.image_size must equal image_size")
        if self.backbone.glyph_size is not None and self.backbone.glyph_size != self.resolved_glyph_size:
            raise ValueError("backbone.glyph_size must equal the rendered glyph size")
        return self

    @property
    def resolved_glyph_size(self) -> int:
        return self.glyph_size or default_glyph_size(self.image_size)


@dataclass(frozen=True)
class ProbeSet:
    """Held-out lexicon-calibration images, one attribute value per probe."""

    items: Tuple[Item, ...]
    attributes: Tuple[str, ...]
    values: Tuple[str, ...]

    def groups(self) -> Dict[str, List[int]]:
        """Class name -> probe indices, in first-seen order."""
        grouped: Dict[str, List[int]] = {}
        for index, name in enumerate(self.values):
            grouped.setdefault(name, []).append(index)
        return grouped

    def pixels(self) -> np.ndarray:
        return np.stack([item.pixels for item in self.items])


@dataclass
class SyntheticBundle:
    dataset: MultiContextDataset
    probes: ProbeSet
    encoder: EncoderPair
    attributes: List[Dict[str, str]] = field(default_factory=list)


def _balanced_labels(classes: Sequence[str], n: int, rng: np.random.Generator) -> List[str]:
    repeated = [classes[i % len(classes)] for i in range(n)]
    return [repeated[int(i)] for i in rng.permutation(n)]


def _background_value(attribute: str, rng: np.random.Generator) -> str:
    return POOLS[attribute][int(rng.integers(BACKGROUND_CHOICES))]


def _image_attributes(
    cfg: GenConfig,
    index: int,
    context_labels: Mapping[str, List[str]],
) -> Tuple[Dict[str, str], Optional[List[Dict[str, str]]], Tuple[int, ...]]:
    rng = np.random.default_rng([cfg.seed, 0, index])
    attrs: Dict[str, str] = {}
    for attribute in POOLS:
        if attribute in context_labels:
            attrs[attribute] = context_labels[attribute][index]
        elif attribute == "count":
            attrs[attribute] = COUNT_NAMES[int(rng.integers(3))]
        else:
            attrs[attribute] = _background_value(attribute, rng)

    per_glyph = None
    if cfg.vary_objects:
        per_glyph = []
        for _ in range(count_value(attrs["count"])):
            glyph = {}
            for attribute in ("color", "shape"):
                if attribute not in context_labels:
                    glyph[attribute] = _background_value(attribute, rng)
            per_glyph.append(glyph)
    return attrs, per_glyph, (cfg.seed, 1, index)


def _render_all(cfg: GenConfig, jobs: List[Tuple[Dict[str, str], Optional[List[Dict[str, str]]], Tuple[int, ...]]]) -> List[np.ndarray]:
    threads = cfg.threads or resolve_runtime_settings().threads

    def render(job: Tuple[Dict[str, str], Optional[List[Dict[str, str]]], Tuple[int, ...]]) -> np.ndarray:
        attrs, per_glyph, seed = job
        return render_image(attrs, cfg.image_size, seed, cfg.resolved_glyph_size, per_glyph)

    if threads <= 1:
        return [render(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(render, jobs))


def candidate_vocab(
    attribute: str,
    novel: Sequence[str],
    used: Sequence[str],
    multiplier: int,
    seed: int,
) -> Tuple[str, ...]:
    """Novel names plus unused pool values, up to multiplier x the novel count, shuffled."""
    distractors = [name for name in POOLS[attribute] if name not in used]
    room = max(0, multiplier * len(novel) - len(novel))
    names = list(novel) + distractors[:room]
    rng = np.random.default_rng([seed, stable_key(attribute), 2])
    return tuple(names[int(i)] for i in rng.permutation(len(names)))


def generate_probes(cfg: GenConfig) -> ProbeSet:
    """probe_per_class images for every pool value of every context attribute."""
    jobs = []
    attributes: List[str] = []
    values: List[str] = []
    index = 0
    for attribute in cfg.contexts:
        for value in POOLS[attribute]:
            for _ in range(cfg.probe_per_class):
                rng = np.random.default_rng([cfg.seed, 2, index])
                attrs = {}
                for other in POOLS:
                    if other == attribute:
                        attrs[other] = value
                    elif other in cfg.contexts:
                        pool = cfg.contexts[other]
                        attrs[other] = pool[int(rng.integers(len(pool)))]
                    elif other == "count":
                        attrs[other] = COUNT_NAMES[int(rng.integers(3))]
                    else:
                        attrs[other] = _background_value(other, rng)
                jobs.append((attrs, None, (cfg.seed, 3, index)))
                attributes.append(attribute)
                values.append(value)
                index += 1

    frames = _render_all(cfg, jobs)
    items = tuple(Item(f"probes/p{i:05d}.ppm", frame) for i, frame in enumerate(frames))
    return ProbeSet(items=items, attributes=tuple(attributes), values=tuple(values))


def generate_dataset(cfg: GenConfig) -> Tuple[MultiContextDataset, ProbeSet]:
    """
    Render the dataset and its probe set.

    The dataset comes back split (known/novel per context), with candidate
    vocabularies and a sampled labeled set.
    """
    n = cfg.n_images
    context_labels: Dict[str, List[str]] = {}
    for attribute, classes in cfg.contexts.items():
        rng = np.random.default_rng([cfg.seed, stable_key(attribute)])
        context_labels[attribute] = _balanced_labels(classes, n, rng)

    jobs = [_image_attributes(cfg, index, context_labels) for index in range(n)]
    frames = _render_all(cfg, jobs)
    items = tuple(Item(f"images/{i:05d}.ppm", frame) for i, frame in enumerate(frames))

    labels: Dict[str, Dict[str, str]] = {}
    for attribute, column in context_labels.items():
        hide = np.random.default_rng([cfg.seed, stable_key(attribute), 3]).random(n) < cfg.missing_rate
        labels[attribute] = {
            item.item_id: (MISSING if hide[i] else column[i]) for i, item in enumerate(items)
        }

    split_cfg = SplitConfig(
        known_fraction=cfg.known_fraction,
        labeled_per_class=cfg.labeled_per_class,
        seed=cfg.seed,
    )
    partitions = split_known_novel(cfg.contexts, split_cfg)
    specs = []
    for attribute, (known, novel) in partitions.items():
        specs.append(
            ContextSpec(
                context_id=attribute,
                known_classes=known,
                novel_class_count=len(novel),
                candidate_vocab=candidate_vocab(
                    attribute, novel, cfg.contexts[attribute], cfg.vocab_multiplier, cfg.seed
                ),
            )
        )

    ds = MultiContextDataset(items=items, labels=labels, contexts=tuple(specs), split_seed=cfg.seed)
    ds = sample_labeled(ds, split_cfg)
    probes = generate_probes(cfg)
    emit_event(logger, "synthgen.generated", items=len(items), probes=len(probes.items), contexts=len(specs))
    return ds, probes


def lexicon_from_embeddings(groups: Mapping[str, np.ndarray]) -> Lexicon:
    """Normalized per-name mean of embedding rows."""
    names = []
    rows = []
    for name, vectors in groups.items():
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise DegenerateLexiconError(f"'{name}' has no probe embeddings")
        mean = vectors.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < LEXICON_MIN_NORM:
            raise DegenerateLexiconError(f"probe mean of '{name}' has norm {norm:.3g}")
        names.append(name)
        rows.append(mean / norm)
    return Lexicon(tuple(names), np.asarray(rows, dtype=np.float32))


def calibrate_lexicon(encoder: EncoderPair, probes: ProbeSet) -> Lexicon:
    """Lexicon vector of each name = normalized mean zero-token embedding of its probes."""
    batch = encode_images(encoder, probes.pixels(), None, [item.item_id for item in probes.items])
    groups = {name: batch.matrix[indices] for name, indices in probes.groups().items()}
    return lexicon_from_embeddings(groups)


def resolve_backbone(cfg: GenConfig, calibration: ProbeSet) -> BackboneConfig:
    """Fill the calibrated backbone's glyph size and group gains from the generator."""
    backbone = cfg.backbone
    if backbone.init != "calibrated":
        return backbone
    values = backbone.model_dump()
    values["glyph_size"] = cfg.resolved_glyph_size
    if backbone.group_gains is None:
        values["group_gains"] = calibrate_group_gains(build_encoder(BackboneConfig(**values)), calibration.pixels())
    return BackboneConfig(**values)


def build_synthetic(cfg: GenConfig) -> SyntheticBundle:
    ds, probes = generate_dataset(cfg)
    encoder = build_encoder(resolve_backbone(cfg, probes))
    encoder = encoder.with_lexicon(calibrate_lexicon(encoder, probes))
    return SyntheticBundle(dataset=ds, probes=probes, encoder=encoder)


def _save_ppm(path: Path, pixels: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path, format="PPM")


def write_bundle(bundle: SyntheticBundle, directory: PathLike) -> Path:
    """Write images, manifest + split, probes, vocabularies, lexicon and backbone record."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for item in bundle.dataset.items:
        _save_ppm(root / item.item_id, item.pixels)
    save_dataset(bundle.dataset, root)

    probe_rows = ["item_id\tattribute\tvalue"]
    for item, attribute, value in zip(bundle.probes.items, bundle.probes.attributes, bundle.probes.values):
        _save_ppm(root / item.item_id, item.pixels)
        probe_rows.append(f"{item.item_id}\t{attribute}\t{value}")
    (root / "probes.tsv").write_text("\n".join(probe_rows) + "\n", encoding="utf-8")

    for spec in bundle.dataset.contexts:
        write_vocab(root / "vocab" / f"{spec.context_id}.txt", spec.known_classes, spec.candidate_vocab)
    save_encoder(bundle.encoder, root)
    return root


__all__ = [
    "COLOR_NAMES",
    "SHAPE_NAMES",
    "TEXTURE_NAMES",
    "COUNT_NAMES",
    "POOLS",
    "GenConfig",
    "ProbeSet",
    "SyntheticBundle",
    "glyph_mask",
    "texture_pattern",
    "place_glyphs",
    "render_image",
    "oracle_color",
    "oracle_count",
    "oracle_texture",
    "oracle_shape",
    "generate_dataset",
    "generate_probes",
    "lexicon_from_embeddings",
    "calibrate_lexicon",
    "resolve_backbone",
    "build_synthetic",
    "write_bundle",
]
