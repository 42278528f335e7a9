"""
Method tags and per-context prediction.

===================  ======  ====  ======  =======
tag                  tokens  text  trains  scoring
===================  ======  ====  ======  =======
oak                  yes     yes   yes     cluster
gcd                  yes     no    yes     cluster
ss-kmeans            no      no    no      cluster
zero-shot            no      no    no      name (known names only)
zero-shot-vocab      no      no    no      name (known + candidate names)
zero-shot-gt         no      no    no      name (known + true novel names)
===================  ======  ====  ======  =======
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .backbone import ContextTokens, EncoderPair, Lexicon, encode_images
from .datamodel import MultiContextDataset
from .discovery import ClusterModel, name_clusters, ss_kmeans, zero_shot_classify
from .evaluation import ContextResult, cluster_accuracy, match_clusters, name_accuracy
from .exceptions import AssignmentError, ConfigError
from .training import TrainConfig

CLUSTER = "cluster"
NAME = "name"


@dataclass(frozen=True)
class MethodFlags:
    use_context_tokens: bool
    use_text_guidance: bool
    trains: bool
    scoring: str
    lexicon: str = "vocabulary"


METHODS: Dict[str, MethodFlags] = {
    "oak": MethodFlags(True, True, True, CLUSTER),
    "gcd": MethodFlags(True, False, True, CLUSTER),
    "ss-kmeans": MethodFlags(False, False, False, CLUSTER),
    "zero-shot": MethodFlags(False, False, False, NAME, lexicon="known"),
    "zero-shot-vocab": MethodFlags(False, False, False, NAME, lexicon="vocabulary"),
    "zero-shot-gt": MethodFlags(False, False, False, NAME, lexicon="ground-truth"),
}


def flags_for(tag: str) -> MethodFlags:
    try:
        return METHODS[tag]
    except KeyError:
        raise ConfigError(f"unknown method '{tag}', expected one of {', '.join(METHODS)}") from None


def train_config_for(tag: str, cfg: Optional[TrainConfig] = None) -> TrainConfig:
    """Apply a method's ablation switches to a training config."""
    flags = flags_for(tag)
    if not flags.trains:
        raise ConfigError(f"method '{tag}' does not train context tokens")
    cfg = cfg or TrainConfig()
    update = {
        "use_context_tokens": flags.use_context_tokens,
        "use_text_guidance": flags.use_text_guidance,
    }
    # fields_set is preserved; desk-scale defaults still apply
    return cfg.model_copy(update=update)


def method_lexicon(tag: str, ds: MultiContextDataset, context_id: str, lexicon: Lexicon) -> Lexicon:
    """Names a method may predict in one context."""
    flags = flags_for(tag)
    spec = ds.spec(context_id)
    if flags.lexicon == "known":
        return lexicon.subset(spec.known_classes)
    if flags.lexicon == "ground-truth":
        novel = [name for name in ds.class_names(context_id) if name not in spec.known_classes]
        return lexicon.subset(spec.known_classes + tuple(novel))
    return lexicon.subset(spec.vocabulary)


@dataclass(frozen=True)
class ContextPrediction:
    """
    One method's output on one context.

    class_predictions maps each unlabeled item to a class name: the matched
    ground-truth class of its cluster for cluster methods, the predicted name
    for zero-shot methods. Unmatched clusters map to the empty string.
    """

    context_id: str
    method: str
    names: Dict[str, str]
    class_predictions: Dict[str, str]
    clusters: Optional[Dict[str, int]] = None
    cluster_names: Dict[int, str] = field(default_factory=dict)
    matched: Dict[int, str] = field(default_factory=dict)
    model: Optional[ClusterModel] = field(default=None, compare=False, repr=False)


def predict_context(
    ds: MultiContextDataset,
    context_id: str,
    encoder: EncoderPair,
    method: str,
    tokens: Optional[ContextTokens] = None,
    cfg: Optional[TrainConfig] = None,
) -> ContextPrediction:
    """
    Raises:
        ConfigError: Unknown method, or a token method without tokens
    """
    flags = flags_for(method)
    cfg = cfg or TrainConfig()
    spec = ds.spec(context_id)
    unlabeled = ds.unlabeled(context_id)
    gt = {item_id: ds.label(context_id, item_id) for item_id in unlabeled}

    if flags.use_context_tokens and tokens is None:
        raise ConfigError(f"method '{method}' needs trained tokens for context '{context_id}'")
    if tokens is not None and tokens.context_id != context_id:
        raise ConfigError(f"tokens belong to context '{tokens.context_id}', not '{context_id}'")
    z = tokens if flags.use_context_tokens else None

    if flags.scoring == NAME:
        emb = encode_images(encoder, ds.pixels(unlabeled), None, unlabeled)
        names = zero_shot_classify(emb, method_lexicon(method, ds, context_id, encoder.lexicon))
        return ContextPrediction(context_id, method, names=names, class_predictions=dict(names))

    evaluable = ds.evaluable(context_id)
    emb = encode_images(encoder, ds.pixels(evaluable), z, evaluable)
    pins = {item_id: ds.label(context_id, item_id) for item_id in ds.labeled(context_id)}
    model = ss_kmeans(
        emb,
        pins,
        spec.total_classes,
        seed=cfg.seed,
        n_init=cfg.kmeans_n_init,
        tol=cfg.kmeans_tol,
        max_iter=cfg.kmeans_max_iter,
        class_order=spec.known_classes,
    )
    try:
        cluster_names = name_clusters(model, encoder.lexicon.subset(spec.vocabulary))
    except AssignmentError:
        cluster_names = dict(model.cluster_classes)

    clusters = {item_id: model.assignment[item_id] for item_id in unlabeled}
    matched = match_clusters(clusters, gt)
    return ContextPrediction(
        context_id,
        method,
        names={item_id: cluster_names.get(cluster, "") for item_id, cluster in clusters.items()},
        class_predictions={item_id: matched.get(cluster, "") for item_id, cluster in clusters.items()},
        clusters=clusters,
        cluster_names=cluster_names,
        matched=dict(matched),
        model=model,
    )


def score_context(ds: MultiContextDataset, prediction: ContextPrediction) -> ContextResult:
    """Known/novel/overall accuracy of one prediction on the context's unlabeled items."""
    context_id = prediction.context_id
    known = ds.spec(context_id).known_classes
    unlabeled = ds.unlabeled(context_id)
    gt = {item_id: ds.label(context_id, item_id) for item_id in unlabeled}

    if prediction.clusters is not None:
        scores: Tuple = cluster_accuracy(prediction.clusters, gt, known)
    else:
        novel_applicable = flags_for(prediction.method).lexicon != "known"
        scores = name_accuracy(prediction.names, gt, known, novel_applicable)

    known_set = set(known)
    n_known = sum(gt[item_id] in known_set for item_id in unlabeled)
    return ContextResult(
        context_id=context_id,
        known=scores[0],
        novel=scores[1],
        overall=scores[2],
        n_known=n_known,
        n_novel=len(unlabeled) - n_known,
        n_total=len(unlabeled),
        predictions=dict(prediction.class_predictions),
    )


__all__ = [
    "METHODS",
    "MethodFlags",
    "flags_for",
    "train_config_for",
    "method_lexicon",
    "ContextPrediction",
    "predict_context",
    "score_context",
]
