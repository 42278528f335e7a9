"""
Per-context optimization of context tokens against a frozen encoder.

Each epoch embeds every evaluable item under the current tokens, refreshes
SS-KMeans clusters (and their names, when text guidance is on), then walks
minibatches that mix labeled and unlabeled items, two augmented views each,
stepping SGD on the tokens only.
"""

from __future__ import annotations

import logging
import math
import pickle
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .augment import AugmentConfig, two_views
from .backbone import ContextTokens, EmbeddingBatch, EncoderPair, encode_images, init_context_tokens
from .datamodel import MultiContextDataset, stable_key
from .discovery import ClusterModel, assign_pseudo_labels, ss_kmeans
from .evaluation import silhouette
from .exceptions import (
    CheckpointError,
    ConfigError,
    DatasetValidationError,
    EvaluationError,
    IntegrityError,
    TrainingDivergedError,
)
from .objectives import LossConfig, OakBatch, oak_loss_terms
from .settings import read_config_file, validate_config
from .tracing import emit_event

logger = logging.getLogger("ctxcat.train")

PathLike = Union[str, Path]

DESK_SCALE_ITEMS = 2000
DESK_BATCH_SIZE = 32
DESK_EPOCHS = 30


class TrainConfig(BaseModel):
    """Optimization settings; defaults are the full-scale values."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(default=128, ge=2)
    epochs: int = Field(default=50, ge=1)
    lr: float = Field(default=0.1, gt=0.0, allow_inf_nan=False)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=5e-5, ge=0.0, allow_inf_nan=False)
    min_lr_multiplier: float = Field(default=1e-3, gt=0.0, le=1.0)
    loss: LossConfig = Field(default_factory=LossConfig)
    use_context_tokens: bool = True
    use_text_guidance: bool = True
    seed: int = Field(default=0, ge=0)
    n_tokens: int = Field(default=50, ge=0)
    labeled_floor: int = Field(default=4, ge=0)
    kmeans_n_init: int = Field(default=10, ge=1)
    kmeans_tol: float = Field(default=1e-4, gt=0.0)
    kmeans_max_iter: int = Field(default=200, ge=1)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)

    @model_validator(mode="before")
    @classmethod
    def _route_loss_keys(cls, data: Any) -> Any:
        """Accept LossConfig fields at top level, as written in flat run configs."""
        if not isinstance(data, dict):
            return data
        flat = {key: data[key] for key in LossConfig.model_fields if key in data}
        if not flat:
            return data
        routed = {key: value for key, value in data.items() if key not in flat}
        loss = routed.get("loss") or {}
        if isinstance(loss, LossConfig):
            loss = loss.model_dump()
        routed["loss"] = {**loss, **flat}
        return routed


def load_train_config(path: Optional[PathLike] = None, **overrides: Any) -> TrainConfig:
    data = read_config_file(path) if path else {}
    data.update({key: value for key, value in overrides.items() if value is not None})
    return validate_config(TrainConfig, data)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Cosine schedule from lr down to lr * min_lr_multiplier."""
    if not 0 <= epoch < cfg.epochs:
        raise ConfigError(f"epoch {epoch} is outside [0, {cfg.epochs})")
    lr_min = cfg.lr * cfg.min_lr_multiplier
    return lr_min + (cfg.lr - lr_min) * (1.0 + math.cos(math.pi * epoch / cfg.epochs)) / 2.0


def resolve_desk_scale(cfg: TrainConfig, n_items: int) -> TrainConfig:
    """Shrink batch size and epochs for small datasets unless they were set explicitly."""
    if n_items >= DESK_SCALE_ITEMS:
        return cfg
    update = {}
    if "batch_size" not in cfg.model_fields_set:
        update["batch_size"] = DESK_BATCH_SIZE
    if "epochs" not in cfg.model_fields_set:
        update["epochs"] = DESK_EPOCHS
    return cfg.model_copy(update=update) if update else cfg


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    gcd: float
    text: float
    silhouette: Optional[float]
    steps: int


@dataclass
class Checkpoint:
    """Everything needed to continue a run exactly where it stopped."""

    context_id: str
    tokens: np.ndarray
    optimizer_state: Optional[Dict[str, Any]]
    epoch: int
    rng_state: Dict[str, Any]
    backbone_digest: str
    records: List[Dict[str, Any]] = field(default_factory=list)


def save_checkpoint(checkpoint: Checkpoint, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "context_id": checkpoint.context_id,
            "tokens": torch.from_numpy(np.array(checkpoint.tokens, dtype=np.float32)),
            "optimizer_state": checkpoint.optimizer_state,
            "epoch": checkpoint.epoch,
            "rng_state": checkpoint.rng_state,
            "backbone_digest": checkpoint.backbone_digest,
            "records": list(checkpoint.records),
        },
        target,
    )
    return target


def load_checkpoint(path: PathLike, expected_digest: Optional[str] = None) -> Checkpoint:
    """
    Raises:
        CheckpointError: Unreadable or incomplete file
        IntegrityError: Recorded backbone digest differs from expected_digest
    """
    source = Path(path)
    try:
        state = torch.load(source, map_location="cpu", weights_only=False)
        checkpoint = Checkpoint(
            context_id=state["context_id"],
            tokens=state["tokens"].numpy(),
            optimizer_state=state["optimizer_state"],
            epoch=int(state["epoch"]),
            rng_state=state["rng_state"],
            backbone_digest=state["backbone_digest"],
            records=list(state.get("records", [])),
        )
    except (OSError, EOFError, RuntimeError, KeyError, TypeError, AttributeError, pickle.UnpicklingError) as exc:
        raise CheckpointError(f"cannot load checkpoint {source}: {exc}") from exc
    if expected_digest is not None and checkpoint.backbone_digest != expected_digest:
        raise IntegrityError(
            f"{source}: checkpoint was taken against backbone {checkpoint.backbone_digest[:12]}, "
            f"current backbone is {expected_digest[:12]}"
        )
    return checkpoint


EpochSink = Callable[[EpochRecord], None]


class Trainer:
    """
    Trains one context's tokens.

    Only items with a label in the context take part; MISSING items stay out
    of this context's pools but remain available to other contexts.
    """

    def __init__(
        self,
        ds: MultiContextDataset,
        context_id: str,
        encoder: EncoderPair,
        cfg: Optional[TrainConfig] = None,
        *,
        event_sink: Optional[EpochSink] = None,
    ):
        if context_id not in ds.context_ids:
            raise DatasetValidationError(f"unknown context '{context_id}'")
        self.ds = ds
        self.context_id = context_id
        self.encoder = encoder
        self.spec = ds.spec(context_id)
        self.cfg = resolve_desk_scale(cfg or TrainConfig(), len(ds.item_ids))
        self.event_sink = event_sink
        self._key = stable_key(context_id)

        self.item_ids = ds.evaluable(context_id)
        if len(self.item_ids) < 2:
            raise DatasetValidationError(f"context '{context_id}' has fewer than 2 evaluable items")
        labeled = set(ds.labeled(context_id))
        self.labeled_ids = [item_id for item_id in self.item_ids if item_id in labeled]
        self.unlabeled_ids = [item_id for item_id in self.item_ids if item_id not in labeled]
        self.pins = {item_id: ds.label(context_id, item_id) for item_id in self.labeled_ids}
        self._row = {item_id: i for i, item_id in enumerate(self.item_ids)}
        self.pixels = ds.pixels(self.item_ids)

        self.vocab = encoder.lexicon.subset(self.spec.vocabulary)
        self.text_matrix = torch.from_numpy(self.vocab.matrix.copy())
        self.loss_cfg = self._effective_loss()

        m = self.cfg.n_tokens if self.cfg.use_context_tokens else 0
        initial = init_context_tokens(context_id, m, encoder.dim, seed=[self.cfg.seed, self._key])
        self.tokens = torch.nn.Parameter(initial.as_tensor())
        self.optimizer = (
            torch.optim.SGD(
                [self.tokens],
                lr=self.cfg.lr,
                momentum=self.cfg.momentum,
                weight_decay=self.cfg.weight_decay,
            )
            if m > 0
            else None
        )
        self.rng = np.random.default_rng([self.cfg.seed, self._key, 1])
        self.epoch = 0
        self.records: List[EpochRecord] = []
        self.initial_digest = encoder.verify()
        self.last_clusters: Optional[ClusterModel] = None

    def _effective_loss(self) -> LossConfig:
        update: Dict[str, float] = {}
        if not self.cfg.use_text_guidance:
            update.update(lambda_text_labeled=0.0, lambda_text_unlabeled=0.0)
        if not self.labeled_ids and self.cfg.loss.lambda_balance > 0:
            emit_event(
                logger,
                "train.no_labeled_items",
                logging.WARNING,
                context=self.context_id,
                lambda_balance=self.cfg.loss.lambda_balance,
            )
            update["lambda_balance"] = 0.0
        return self.cfg.loss.model_copy(update=update) if update else self.cfg.loss

    def context_tokens(self) -> ContextTokens:
        return ContextTokens(self.context_id, self.tokens.detach().numpy().copy())

    def embed(self) -> EmbeddingBatch:
        return encode_images(self.encoder, self.pixels, self.tokens.detach(), self.item_ids)

    def cluster(self, epoch: int, emb: Optional[EmbeddingBatch] = None) -> ClusterModel:
        return ss_kmeans(
            emb if emb is not None else self.embed(),
            self.pins,
            self.spec.total_classes,
            seed=[self.cfg.seed, self._key, epoch],
            n_init=self.cfg.kmeans_n_init,
            tol=self.cfg.kmeans_tol,
            max_iter=self.cfg.kmeans_max_iter,
            class_order=self.spec.known_classes,
        )

    def _batches(self) -> List[List[str]]:
        n = len(self.item_ids)
        n_batches = max(1, math.ceil(n / self.cfg.batch_size))
        unlabeled = [self.unlabeled_ids[i] for i in self.rng.permutation(len(self.unlabeled_ids))]
        chunks = [list(chunk) for chunk in np.array_split(np.array(unlabeled, dtype=object), n_batches)]

        n_labeled = len(self.labeled_ids)
        share = 0
        if n_labeled:
            share = min(n_labeled, max(self.cfg.labeled_floor, round(self.cfg.batch_size * n_labeled / n)))
        stream: List[str] = []
        batches: List[List[str]] = []
        for chunk in chunks:
            picked: List[str] = []
            while len(picked) < share:
                if not stream:
                    stream = [self.labeled_ids[i] for i in self.rng.permutation(n_labeled)]
                candidate = stream.pop(0)
                if candidate not in picked:
                    picked.append(candidate)
                else:
                    stream.append(candidate)
            batch = picked + chunk
            if len(batch) < 2 and batches:
                batches[-1].extend(item for item in batch if item not in batches[-1])
            elif batch:
                batches.append(batch)
        return batches

    def _targets(self, pseudo: Optional[Dict[str, str]]) -> Dict[str, int]:
        targets = {item_id: self.vocab.index(name) for item_id, name in self.pins.items()}
        if pseudo is not None:
            for item_id in self.unlabeled_ids:
                targets[item_id] = self.vocab.index(pseudo[item_id])
        return targets

    def run_epoch(self) -> EpochRecord:
        epoch = self.epoch
        lr = lr_at(epoch, self.cfg)
        for group in self.optimizer.param_groups:
            group["lr"] = lr

        emb = self.embed()
        clusters = self.cluster(epoch, emb)
        self.last_clusters = clusters
        try:
            score: Optional[float] = silhouette(emb, clusters.assignment)
        except EvaluationError:
            score = None
        pseudo = assign_pseudo_labels(clusters, self.vocab) if self.loss_cfg.uses_text else None
        targets = self._targets(pseudo)
        known_index = {name: i for i, name in enumerate(self.spec.known_classes)}

        totals = np.zeros(3)
        batches = self._batches()
        for step, batch_ids in enumerate(batches):
            rows = [self._row[item_id] for item_id in batch_ids]
            views = self.encoder.image_encoder(
                two_views(self.pixels[rows], self.rng, self.cfg.augment), self.tokens
            )
            labeled = torch.tensor([item_id in self.pins for item_id in batch_ids])
            class_ids = torch.tensor(
                [known_index[self.pins[item_id]] if item_id in self.pins else -1 for item_id in batch_ids]
            )
            batch = OakBatch(
                views=views,
                labeled=labeled,
                class_ids=class_ids,
                targets=torch.tensor([targets.get(item_id, -1) for item_id in batch_ids]),
                text_matrix=self.text_matrix,
            )
            terms = oak_loss_terms(batch, self.loss_cfg)
            value = float(terms.total.detach())
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, step, value)

            self.optimizer.zero_grad()
            terms.total.backward()
            self.optimizer.step()
            totals += (value, float(terms.gcd.detach()), float(terms.text.detach()))

        means = totals / max(1, len(batches))
        record = EpochRecord(
            epoch=epoch,
            lr=lr,
            loss=float(means[0]),
            gcd=float(means[1]),
            text=float(means[2]),
            silhouette=score,
            steps=len(batches),
        )
        self.records.append(record)
        self.epoch += 1
        emit_event(logger, "train.epoch", context=self.context_id, **asdict(record))
        if self.event_sink is not None:
            self.event_sink(record)
        return record

    def fit(self, stop_at: Optional[int] = None, checkpoint_path: Optional[PathLike] = None) -> ContextTokens:
        """
        Run epochs up to stop_at (default: all), checkpointing after each one
        when a path is given.

        Raises:
            TrainingDivergedError: Non-finite loss
            IntegrityError: Backbone weights changed
        """
        if self.optimizer is None:
            emit_event(logger, "train.skipped", context=self.context_id, reason="no context tokens")
            self.encoder.verify(self.initial_digest)
            return self.context_tokens()

        last = self.cfg.epochs if stop_at is None else min(stop_at, self.cfg.epochs)
        while self.epoch < last:
            self.run_epoch()
            if checkpoint_path is not None:
                save_checkpoint(self.checkpoint(), checkpoint_path)
        self.encoder.verify(self.initial_digest)
        return self.context_tokens()

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            context_id=self.context_id,
            tokens=self.tokens.detach().numpy().copy(),
            optimizer_state=self.optimizer.state_dict() if self.optimizer is not None else None,
            epoch=self.epoch,
            rng_state=self.rng.bit_generator.state,
            backbone_digest=self.initial_digest,
            records=[asdict(record) for record in self.records],
        )

    def restore(self, checkpoint: Checkpoint) -> None:
        """
        Raises:
            IntegrityError: Checkpoint belongs to a different backbone
            CheckpointError: Checkpoint belongs to another context or token shape
        """
        if checkpoint.backbone_digest != self.initial_digest:
            raise IntegrityError("checkpoint backbone digest does not match the encoder")
        if checkpoint.context_id != self.context_id:
            raise CheckpointError(
                f"checkpoint is for context '{checkpoint.context_id}', not '{self.context_id}'"
            )
        if tuple(checkpoint.tokens.shape) != tuple(self.tokens.shape):
            raise CheckpointError(
                f"checkpoint tokens {tuple(checkpoint.tokens.shape)} != {tuple(self.tokens.shape)}"
            )
        with torch.no_grad():
            self.tokens.copy_(torch.from_numpy(np.array(checkpoint.tokens, dtype=np.float32)))
        if self.optimizer is not None and checkpoint.optimizer_state is not None:
            self.optimizer.load_state_dict(checkpoint.optimizer_state)
        self.epoch = checkpoint.epoch
        self.rng.bit_generator.state = checkpoint.rng_state
        self.records = [EpochRecord(**record) for record in checkpoint.records]


def train_context(
    ds: MultiContextDataset,
    context_id: str,
    encoder: EncoderPair,
    cfg: Optional[TrainConfig] = None,
    *,
    event_sink: Optional[EpochSink] = None,
    checkpoint_path: Optional[PathLike] = None,
    resume: bool = False,
) -> ContextTokens:
    """Train one context's tokens, resuming from checkpoint_path when asked and present."""
    trainer = Trainer(ds, context_id, encoder, cfg, event_sink=event_sink)
    if resume and checkpoint_path is not None and Path(checkpoint_path).exists():
        trainer.restore(load_checkpoint(checkpoint_path, expected_digest=trainer.initial_digest))
    return trainer.fit(checkpoint_path=checkpoint_path)


__all__ = [
    "TrainConfig",
    "load_train_config",
    "lr_at",
    "resolve_desk_scale",
    "EpochRecord",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "Trainer",
    "train_context",
]
