"""
Datasets, contexts, class splits and the manifest/vocabulary file formats.

A manifest is a tab-separated file. The first column holds the item id (a
path relative to the manifest's directory for image datasets), every further
column holds one context's class name, and ``-`` marks a missing label::

    item_id         color   shape
    images/0000.ppm red     circle
    images/0001.ppm blue    -

A vocabulary file lists known class names, one per line, then a blank line,
then candidate names for the novel classes.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import (
    DatasetValidationError,
    InsufficientItemsError,
    ManifestParseError,
    VocabularyError,
)
from .tracing import emit_event

logger = logging.getLogger("ctxcat.datamodel")

MISSING = "-"
MANIFEST_FILENAME = "manifest.tsv"
SPLIT_FILENAME = "split.yaml"

PathLike = Union[str, Path]


def stable_key(text: str) -> int:
    """Process-independent integer key for seeding per-name RNG streams."""
    return zlib.crc32(text.encode("utf-8"))


class SplitConfig(BaseModel):
    """Known/novel partition and labeled-sampling settings."""

    model_config = ConfigDict(frozen=True)

    known_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    labeled_per_class: int = Field(default=16, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)


@dataclass(frozen=True)
class ContextSpec:
    """Class structure of one latent context."""

    context_id: str
    known_classes: Tuple[str, ...]
    novel_class_count: int
    candidate_vocab: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "known_classes", tuple(self.known_classes))
        object.__setattr__(self, "candidate_vocab", tuple(self.candidate_vocab))

        if not self.known_classes:
            raise VocabularyError(f"context '{self.context_id}': known classes are empty")
        duplicates = _duplicates(self.known_classes)
        if duplicates:
            raise VocabularyError(
                f"context '{self.context_id}': duplicate known classes {duplicates}"
            )
        if self.novel_class_count < 1:
            raise VocabularyError(
                f"context '{self.context_id}': novel_class_count must be positive"
            )
        overlap = sorted(set(self.candidate_vocab) & set(self.known_classes))
        if overlap:
            raise VocabularyError(
                f"context '{self.context_id}': candidate vocabulary overlaps known classes {overlap}"
            )
        if len(self.candidate_vocab) < self.novel_class_count:
            raise VocabularyError(
                f"context '{self.context_id}': {len(self.candidate_vocab)} candidate names "
                f"for {self.novel_class_count} novel classes"
            )

    @property
    def total_classes(self) -> int:
        return len(self.known_classes) + self.novel_class_count

    @property
    def vocabulary(self) -> Tuple[str, ...]:
        """Known names followed by candidate names."""
        return self.known_classes + self.candidate_vocab


@dataclass(frozen=True)
class Item:
    """One dataset item; pixels are payload and do not take part in equality."""

    item_id: str
    pixels: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MultiContextDataset:
    """Items with one label per context and per-context labeled sets."""

    items: Tuple[Item, ...]
    labels: Mapping[str, Mapping[str, str]]
    labeled_mask: Mapping[str, FrozenSet[str]] = field(default_factory=dict)
    contexts: Tuple[ContextSpec, ...] = ()
    split_seed: Optional[int] = None
    root: Optional[Path] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        items = tuple(self.items)
        ids = [item.item_id for item in items]
        duplicates = _duplicates(ids)
        if duplicates:
            raise DatasetValidationError(f"duplicate item ids: {duplicates}")
        known_ids = set(ids)

        labels: Dict[str, Mapping[str, str]] = {}
        for context_id, column in self.labels.items():
            stray = sorted(set(column) - known_ids)
            if stray:
                raise DatasetValidationError(
                    f"context '{context_id}': labels for unknown items {stray[:5]}"
                )
            labels[context_id] = MappingProxyType(
                {item_id: column.get(item_id, MISSING) for item_id in ids}
            )

        specs = tuple(self.contexts)
        for spec in specs:
            if spec.context_id not in labels:
                raise DatasetValidationError(f"context '{spec.context_id}' has no label column")
        spec_by_id = {spec.context_id: spec for spec in specs}

        mask: Dict[str, FrozenSet[str]] = {}
        for context_id in labels:
            members = frozenset(self.labeled_mask.get(context_id, frozenset()))
            if members:
                _check_labeled(context_id, members, labels[context_id], spec_by_id.get(context_id))
            mask[context_id] = members
        stray_contexts = sorted(set(self.labeled_mask) - set(labels))
        if stray_contexts:
            raise DatasetValidationError(f"labeled mask for unknown contexts {stray_contexts}")

        object.__setattr__(self, "items", items)
        object.__setattr__(self, "labels", MappingProxyType(labels))
        object.__setattr__(self, "labeled_mask", MappingProxyType(mask))
        object.__setattr__(self, "contexts", specs)

    @property
    def item_ids(self) -> Tuple[str, ...]:
        return tuple(item.item_id for item in self.items)

    @property
    def context_ids(self) -> Tuple[str, ...]:
        return tuple(self.labels)

    def spec(self, context_id: str) -> ContextSpec:
        for spec in self.contexts:
            if spec.context_id == context_id:
                return spec
        raise DatasetValidationError(f"context '{context_id}' has no class specification")

    def label(self, context_id: str, item_id: str) -> str:
        return self._column(context_id)[item_id]

    def class_names(self, context_id: str) -> Tuple[str, ...]:
        column = self._column(context_id)
        return tuple(sorted({name for name in column.values() if name != MISSING}))

    def evaluable(self, context_id: str) -> Tuple[str, ...]:
        """Items with a label in this context, in item order."""
        column = self._column(context_id)
        return tuple(item_id for item_id in self.item_ids if column[item_id] != MISSING)

    def labeled(self, context_id: str) -> Tuple[str, ...]:
        members = self.labeled_mask.get(context_id, frozenset())
        return tuple(item_id for item_id in self.item_ids if item_id in members)

    def unlabeled(self, context_id: str) -> Tuple[str, ...]:
        members = self.labeled_mask.get(context_id, frozenset())
        return tuple(item_id for item_id in self.evaluable(context_id) if item_id not in members)

    def known_items(self, context_id: str) -> Tuple[str, ...]:
        """Unlabeled items whose class is known in this context."""
        known = set(self.spec(context_id).known_classes)
        column = self._column(context_id)
        return tuple(item_id for item_id in self.unlabeled(context_id) if column[item_id] in known)

    def novel_items(self, context_id: str) -> Tuple[str, ...]:
        known = set(self.spec(context_id).known_classes)
        column = self._column(context_id)
        return tuple(
            item_id for item_id in self.unlabeled(context_id) if column[item_id] not in known
        )

    def shared_unlabeled(self, context_ids: Sequence[str]) -> Tuple[str, ...]:
        """Items unlabeled and labeled-for-evaluation in every listed context."""
        pools = [set(self.unlabeled(context_id)) for context_id in context_ids]
        if not pools:
            return ()
        shared = set.intersection(*pools)
        return tuple(item_id for item_id in self.item_ids if item_id in shared)

    def with_contexts(self, specs: Iterable[ContextSpec]) -> "MultiContextDataset":
        merged = {spec.context_id: spec for spec in self.contexts}
        for spec in specs:
            merged[spec.context_id] = spec
        return replace(self, contexts=tuple(merged.values()))

    def pixels(self, item_ids: Sequence[str]) -> np.ndarray:
        """Stack item images as an (n, H, W, 3) uint8 array."""
        lookup = {item.item_id: item for item in self.items}
        frames = []
        for item_id in item_ids:
            item = lookup[item_id]
            if item.pixels is None:
                raise DatasetValidationError(f"item '{item_id}' has no image payload")
            frames.append(item.pixels)
        if not frames:
            return np.zeros((0, 0, 0, 3), dtype=np.uint8)
        return np.stack(frames)

    def _column(self, context_id: str) -> Mapping[str, str]:
        try:
            return self.labels[context_id]
        except KeyError:
            raise DatasetValidationError(f"unknown context '{context_id}'") from None


def _duplicates(values: Iterable[str]) -> List[str]:
    seen = set()
    dupes = []
    for value in values:
        if value in seen and value not in dupes:
            dupes.append(value)
        seen.add(value)
    return dupes


def _check_labeled(
    context_id: str,
    members: FrozenSet[str],
    column: Mapping[str, str],
    spec: Optional[ContextSpec],
) -> None:
    if spec is None:
        raise DatasetValidationError(
            f"context '{context_id}': labeled items without a class specification"
        )
    known = set(spec.known_classes)
    for item_id in sorted(members):
        if item_id not in column:
            raise DatasetValidationError(f"context '{context_id}': unknown labeled item '{item_id}'")
        name = column[item_id]
        if name == MISSING:
            raise DatasetValidationError(
                f"context '{context_id}': labeled item '{item_id}' has no label"
            )
        if name not in known:
            raise DatasetValidationError(
                f"context '{context_id}': labeled item '{item_id}' has novel class '{name}'"
            )


def read_image(path: PathLike) -> np.ndarray:
    """Read an image file as an (H, W, 3) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def load_manifest(
    path: PathLike,
    contexts: Optional[Sequence[str]] = None,
    *,
    closed_vocab: Optional[Mapping[str, Sequence[str]]] = None,
    load_images: bool = True,
) -> MultiContextDataset:
    """
    Load a manifest TSV.

    Args:
        path: Manifest file
        contexts: Context columns to load; None loads every column
        closed_vocab: Optional per-context closed vocabulary; other names are rejected
        load_images: Read item images that exist next to the manifest

    Returns:
        Dataset with no class specifications and an empty labeled mask

    Raises:
        ManifestParseError: Missing header columns or wrong column count
        DatasetValidationError: Duplicate ids or names outside a closed vocabulary
    """
    manifest = Path(path)
    try:
        text = manifest.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"cannot read {manifest}: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise ManifestParseError("manifest has no header row", line=1)

    header = lines[0].split("\t")
    columns = header[1:]
    requested = list(contexts) if contexts is not None else list(columns)
    absent = [context_id for context_id in requested if context_id not in columns]
    if absent:
        raise ManifestParseError(f"header does not name contexts {absent}", line=1)
    positions = {context_id: columns.index(context_id) + 1 for context_id in requested}

    vocab = {key: set(names) for key, names in (closed_vocab or {}).items()}
    root = manifest.parent
    items: List[Item] = []
    labels: Dict[str, Dict[str, str]] = {context_id: {} for context_id in requested}
    seen: Dict[str, int] = {}
    duplicates: List[str] = []

    for number, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.split("\t")
        if len(cells) != len(header):
            raise ManifestParseError(
                f"expected {len(header)} columns, found {len(cells)}", line=number
            )
        item_id = cells[0].strip()
        if item_id in seen:
            duplicates.append(item_id)
            continue
        seen[item_id] = number

        for context_id, position in positions.items():
            name = cells[position].strip()
            allowed = vocab.get(context_id)
            if allowed is not None and name != MISSING and name not in allowed:
                raise DatasetValidationError(
                    f"line {number}: class '{name}' is not in the vocabulary of '{context_id}'"
                )
            labels[context_id][item_id] = name

        pixels = None
        if load_images:
            image_path = root / item_id
            if image_path.is_file():
                pixels = read_image(image_path)
        items.append(Item(item_id=item_id, pixels=pixels))

    if duplicates:
        raise DatasetValidationError(f"duplicate item ids: {sorted(set(duplicates))}")

    return MultiContextDataset(items=tuple(items), labels=labels, root=root)


def save_manifest(ds: MultiContextDataset, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    rows = ["\t".join(("item_id",) + ds.context_ids)]
    for item_id in ds.item_ids:
        rows.append("\t".join([item_id] + [ds.labels[c][item_id] for c in ds.context_ids]))
    target.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return target


def save_dataset(ds: MultiContextDataset, directory: PathLike) -> Path:
    """Write manifest.tsv plus the split.yaml sidecar."""
    target = Path(directory)
    save_manifest(ds, target / MANIFEST_FILENAME)
    split = {
        "seed": ds.split_seed,
        "contexts": {
            spec.context_id: {
                "known": list(spec.known_classes),
                "novel_class_count": spec.novel_class_count,
                "candidate_vocab": list(spec.candidate_vocab),
                "labeled": sorted(ds.labeled_mask.get(spec.context_id, frozenset())),
            }
            for spec in ds.contexts
        },
    }
    with open(target / SPLIT_FILENAME, "w", encoding="utf-8") as f:
        yaml.safe_dump(split, f, default_flow_style=False, sort_keys=True, allow_unicode=True)
    return target


def load_split(path: PathLike) -> Tuple[Optional[int], List[ContextSpec], Dict[str, FrozenSet[str]]]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise DatasetValidationError(f"cannot read split file {path}: {exc}") from exc

    specs: List[ContextSpec] = []
    mask: Dict[str, FrozenSet[str]] = {}
    for context_id, entry in (data.get("contexts") or {}).items():
        specs.append(
            ContextSpec(
                context_id=context_id,
                known_classes=tuple(entry.get("known") or ()),
                novel_class_count=int(entry.get("novel_class_count", 0)),
                candidate_vocab=tuple(entry.get("candidate_vocab") or ()),
            )
        )
        mask[context_id] = frozenset(entry.get("labeled") or ())
    return data.get("seed"), specs, mask


def load_dataset(
    directory: PathLike,
    contexts: Optional[Sequence[str]] = None,
    *,
    load_images: bool = True,
) -> MultiContextDataset:
    """Inverse of save_dataset."""
    source = Path(directory)
    ds = load_manifest(source / MANIFEST_FILENAME, contexts, load_images=load_images)
    split_path = source / SPLIT_FILENAME
    if not split_path.exists():
        return ds
    seed, specs, mask = load_split(split_path)
    wanted = set(ds.context_ids)
    specs = [spec for spec in specs if spec.context_id in wanted]
    mask = {key: value for key, value in mask.items() if key in wanted}
    return replace(ds, contexts=tuple(specs), labeled_mask=mask, split_seed=seed)


def split_known_novel(
    labels: Mapping[str, Sequence[str]],
    cfg: SplitConfig,
) -> Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]]:
    """
    Partition each context's classes into known and novel sets.

    Args:
        labels: Per-context ordered class list
        cfg: Split settings; only known_fraction and seed are used

    Returns:
        Per-context (known, novel), both in the input's class order
    """
    partitions = {}
    for context_id, classes in labels.items():
        classes = tuple(classes)
        if _duplicates(classes):
            raise VocabularyError(f"context '{context_id}': duplicate class names")
        if len(classes) < 2:
            raise VocabularyError(f"context '{context_id}': at least 2 classes are required")

        n_known = int(math.floor(cfg.known_fraction * len(classes) + 0.5))
        if n_known < 1 or n_known >= len(classes):
            raise VocabularyError(
                f"context '{context_id}': known_fraction {cfg.known_fraction} of "
                f"{len(classes)} classes leaves no novel or no known class"
            )

        rng = np.random.default_rng([cfg.seed, stable_key(context_id)])
        chosen = set(int(i) for i in rng.permutation(len(classes))[:n_known])
        known = tuple(name for i, name in enumerate(classes) if i in chosen)
        novel = tuple(name for i, name in enumerate(classes) if i not in chosen)
        partitions[context_id] = (known, novel)
    return partitions


def sample_labeled(ds: MultiContextDataset, cfg: SplitConfig) -> MultiContextDataset:
    """Draw labeled_per_class items of every known class into the labeled mask."""
    mask: Dict[str, FrozenSet[str]] = {}
    for spec in ds.contexts:
        chosen: List[str] = []
        column = ds.labels[spec.context_id]
        evaluable = ds.evaluable(spec.context_id)
        for name in spec.known_classes:
            pool = [item_id for item_id in evaluable if column[item_id] == name]
            if len(pool) < cfg.labeled_per_class:
                raise InsufficientItemsError(
                    spec.context_id, name, len(pool), cfg.labeled_per_class
                )
            if cfg.labeled_per_class == 0:
                continue
            rng = np.random.default_rng(
                [cfg.seed, stable_key(spec.context_id), stable_key(name)]
            )
            picks = rng.choice(len(pool), size=cfg.labeled_per_class, replace=False)
            chosen.extend(pool[int(i)] for i in sorted(picks))
        mask[spec.context_id] = frozenset(chosen)
    return replace(ds, labeled_mask=mask, split_seed=cfg.seed)


def _clean_name(raw: str) -> str:
    name = raw.strip().rstrip(",").strip()
    while len(name) >= 2 and name[0] == name[-1] and name[0] in "\"'":
        name = name[1:-1].strip()
    return name


def load_vocab(path: PathLike) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """
    Read a vocabulary file.

    Returns:
        (known names, candidate names); duplicate candidates and candidates
        that repeat a known name are dropped with a warning
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise VocabularyError(f"cannot read vocabulary {path}: {exc}") from exc

    known: List[str] = []
    candidates: List[str] = []
    section = known
    for raw in text.splitlines():
        if not raw.strip():
            if section is known and known:
                section = candidates
            continue
        name = _clean_name(raw)
        if name:
            section.append(name)

    if not known:
        raise VocabularyError(f"vocabulary {path}: known section is empty")
    duplicates = _duplicates(known)
    if duplicates:
        raise VocabularyError(f"vocabulary {path}: duplicate known names {duplicates}")

    known_set = set(known)
    kept: List[str] = []
    dropped_duplicates = 0
    dropped_overlaps = 0
    for name in candidates:
        if name in known_set:
            dropped_overlaps += 1
        elif name in kept:
            dropped_duplicates += 1
        else:
            kept.append(name)

    if dropped_duplicates:
        emit_event(logger, "vocab.duplicates_dropped", logging.WARNING, path=str(path), count=dropped_duplicates)
    if dropped_overlaps:
        emit_event(logger, "vocab.known_overlap_dropped", logging.WARNING, path=str(path), count=dropped_overlaps)
    return tuple(known), tuple(kept)


def write_vocab(path: PathLike, known: Sequence[str], candidates: Sequence[str]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    body = "\n".join(known) + "\n\n" + "\n".join(candidates) + "\n"
    target.write_text(body, encoding="utf-8")
    return target


def load_prompt_template() -> str:
    with resources.files("ctxcat.prompts").joinpath("novel_vocab.txt").open(
        "r", encoding="utf-8"
    ) as template:
        return template.read().strip()


def render_vocab_prompt(known: Sequence[str], novel_count: int) -> str:
    """Fill the candidate-vocabulary request for an external language model."""
    if not known:
        raise VocabularyError("at least one known class is required")
    if novel_count < 1:
        raise VocabularyError("novel_count must be positive")
    names = ", ".join(f'"{name}"' for name in known)
    return (
        load_prompt_template()
        .replace("[KNOWN_CLASSES]", names)
        .replace("[NUMBER_OF_NOVEL_CLASSES]", str(novel_count))
    )


__all__ = [
    "MISSING",
    "SplitConfig",
    "ContextSpec",
    "Item",
    "MultiContextDataset",
    "read_image",
    "load_manifest",
    "save_manifest",
    "save_dataset",
    "load_dataset",
    "load_split",
    "split_known_novel",
    "sample_labeled",
    "load_vocab",
    "write_vocab",
    "render_vocab_prompt",
    "stable_key",
]
