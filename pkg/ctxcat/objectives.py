"""
Training objectives on unit-norm embeddings.

- self_con_loss: InfoNCE over two views per item
- sup_con_loss: supervised contrastive loss over labeled items
- gcd_loss: (1 - lambda) * self-con on every item + lambda * sup-con on labeled items
- text_guidance_loss: cross-entropy against frozen lexicon vectors, with true labels
  for labeled items and cluster pseudo-labels for unlabeled ones
- oak_loss: gcd_loss + text_guidance_loss
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, List, Optional, Sequence

import torch
from pydantic import BaseModel, ConfigDict, Field

from .backbone import Lexicon
from .exceptions import LexiconLookupError, LossUndefinedError


class LossConfig(BaseModel):
    """Loss weights and temperatures."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_balance: float = Field(default=0.35, ge=0.0, le=1.0, allow_inf_nan=False)
    lambda_text_labeled: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    lambda_text_unlabeled: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    tau_selfcon: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    logit_scale_text: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)

    @property
    def uses_text(self) -> bool:
        return self.lambda_text_labeled > 0 or self.lambda_text_unlabeled > 0


@dataclass
class OakBatch:
    """
    One minibatch of embedded views.

    views: (2n, d); rows i and i + n are the two views of item i
    labeled: (n,) bool
    class_ids: (n,) known-class index for labeled items, -1 otherwise
    targets: (n,) lexicon row of the label or pseudo-label, -1 when absent
    text_matrix: (V, d) lexicon vectors over known + candidate names
    """

    views: torch.Tensor
    labeled: torch.Tensor
    class_ids: torch.Tensor
    targets: Optional[torch.Tensor] = None
    text_matrix: Optional[torch.Tensor] = None

    @property
    def n_items(self) -> int:
        return self.views.shape[0] // 2


@dataclass
class LossTerms:
    total: torch.Tensor
    gcd: torch.Tensor
    text: torch.Tensor


def _pair_index(n_rows: int) -> torch.Tensor:
    n = n_rows // 2
    return torch.cat([torch.arange(n, n_rows), torch.arange(0, n)])


def self_con_loss(
    views: torch.Tensor,
    tau: float = 1.0,
    pairing: Optional[Sequence[int]] = None,
) -> torch.Tensor:
    """
    InfoNCE: each anchor's positive is its other view, the remaining 2n - 2 rows are negatives.

    Raises:
        LossUndefinedError: Fewer than two items
    """
    rows = views.shape[0]
    if rows % 2 or rows < 4:
        raise LossUndefinedError(f"self-con needs two views of at least 2 items, got {rows} rows")
    pair = torch.as_tensor(pairing, dtype=torch.long) if pairing is not None else _pair_index(rows)
    if pair.shape[0] != rows:
        raise LossUndefinedError("pairing must name one positive per row")

    sim = views @ views.T / tau
    eye = torch.eye(rows, dtype=torch.bool, device=views.device)
    denominator = torch.logsumexp(sim.masked_fill(eye, float("-inf")), dim=1)
    positives = sim[torch.arange(rows), pair]
    return (denominator - positives).mean()


def _class_codes(labels: Sequence[Hashable]) -> torch.Tensor:
    if isinstance(labels, torch.Tensor):
        return labels.long()
    codes = {}
    return torch.tensor([codes.setdefault(label, len(codes)) for label in labels], dtype=torch.long)


def sup_con_loss(embeddings: torch.Tensor, labels: Sequence[Hashable], tau: float = 1.0) -> torch.Tensor:
    """
    Supervised contrastive loss; anchors without a positive are left out of the mean.

    Raises:
        LossUndefinedError: No anchor has a positive
    """
    codes = _class_codes(labels).to(embeddings.device)
    n = embeddings.shape[0]
    if codes.shape[0] != n:
        raise LossUndefinedError(f"{codes.shape[0]} labels for {n} embeddings")

    sim = embeddings @ embeddings.T / tau
    eye = torch.eye(n, dtype=torch.bool, device=embeddings.device)
    log_prob = sim - torch.logsumexp(sim.masked_fill(eye, float("-inf")), dim=1, keepdim=True)
    positives = (codes[:, None] == codes[None, :]) & ~eye
    counts = positives.sum(dim=1)
    anchors = counts > 0
    if not bool(anchors.any()):
        raise LossUndefinedError("no anchor has a positive; supervised contrastive loss is undefined")

    summed = torch.where(positives, log_prob, torch.zeros_like(log_prob)).sum(dim=1)
    per_anchor = -summed[anchors] / counts[anchors].to(log_prob.dtype)
    return per_anchor.mean()


def mix_gcd(self_value: torch.Tensor, sup_value: torch.Tensor, lam: float) -> torch.Tensor:
    return (1.0 - lam) * self_value + lam * sup_value


def gcd_loss(batch: OakBatch, cfg: LossConfig) -> torch.Tensor:
    """Self-con over every item of the batch, sup-con over both views of its labeled items."""
    lam = cfg.lambda_balance
    n = batch.n_items
    zero = batch.views.new_zeros(())

    self_value = self_con_loss(batch.views, cfg.tau_selfcon) if lam < 1.0 else zero
    sup_value = zero
    if lam > 0.0:
        mask = batch.labeled.bool()
        embeddings = torch.cat([batch.views[:n][mask], batch.views[n:][mask]])
        labels = torch.cat([batch.class_ids[mask], batch.class_ids[mask]])
        sup_value = sup_con_loss(embeddings, labels, cfg.tau_selfcon)
    return mix_gcd(self_value, sup_value, lam)


def text_guidance_loss(
    embeddings: torch.Tensor,
    targets: torch.Tensor,
    text_matrix: torch.Tensor,
    labeled: torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    """
    Cross-entropy of softmax(s * cosine) over the full text matrix.

    Labeled and unlabeled rows are averaged separately and weighted by
    lambda_text_labeled / lambda_text_unlabeled; an empty pool contributes 0.
    Rows with target -1 are ignored.
    """
    targets = targets.long()
    logits = cfg.logit_scale_text * embeddings @ text_matrix.T
    valid = targets >= 0
    picked = logits.gather(1, targets.clamp(min=0)[:, None]).squeeze(1)
    per_item = torch.logsumexp(logits, dim=1) - picked

    total = embeddings.new_zeros(())
    for mask, weight in (
        (valid & labeled.bool(), cfg.lambda_text_labeled),
        (valid & ~labeled.bool(), cfg.lambda_text_unlabeled),
    ):
        if weight > 0 and bool(mask.any()):
            total = total + weight * per_item[mask].mean()
    return total


def lexicon_targets(names: Sequence[Optional[str]], lexicon: Lexicon) -> torch.Tensor:
    """Lexicon row per name, -1 for None."""
    rows: List[int] = []
    for name in names:
        if name is None:
            rows.append(-1)
            continue
        try:
            rows.append(lexicon.index(name))
        except LexiconLookupError:
            raise LexiconLookupError(f"label '{name}' has no lexicon entry") from None
    return torch.tensor(rows, dtype=torch.long)


def oak_loss_terms(batch: OakBatch, cfg: LossConfig) -> LossTerms:
    gcd = gcd_loss(batch, cfg)
    text = batch.views.new_zeros(())
    if cfg.uses_text and batch.targets is not None and batch.text_matrix is not None:
        targets = torch.cat([batch.targets, batch.targets])
        labeled = torch.cat([batch.labeled, batch.labeled]).bool()
        text = text_guidance_loss(batch.views, targets, batch.text_matrix, labeled, cfg)
    return LossTerms(total=gcd + text, gcd=gcd, text=text)


def oak_loss(batch: OakBatch, cfg: LossConfig) -> torch.Tensor:
    """gcd_loss + text_guidance_loss, with the text weights held in cfg."""
    return oak_loss_terms(batch, cfg).total


__all__ = [
    "LossConfig",
    "OakBatch",
    "LossTerms",
    "self_con_loss",
    "sup_con_loss",
    "mix_gcd",
    "gcd_loss",
    "text_guidance_loss",
    "lexicon_targets",
    "oak_loss",
    "oak_loss_terms",
]
