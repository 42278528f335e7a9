"""
ctxcat: open ad-hoc categorization with per-context tokens.

A frozen patch transformer is steered by a small trainable token matrix per
context; semi-supervised k-means over its embeddings discovers known and novel
classes, and a frozen lexicon names them.
"""

__version__ = "0.1.0"
__author__ = "ctxcat contributors"
__license__ = "MIT"

from .backbone import (
    BackboneConfig,
    ContextTokens,
    EmbeddingBatch,
    EncoderPair,
    Lexicon,
    build_encoder,
    encode_image,
    encode_images,
    encode_text,
    init_context_tokens,
    load_encoder,
    save_encoder,
)
from .datamodel import (
    MISSING,
    ContextSpec,
    Item,
    MultiContextDataset,
    SplitConfig,
    load_dataset,
    load_manifest,
    load_vocab,
    render_vocab_prompt,
    sample_labeled,
    save_dataset,
    split_known_novel,
)
from .discovery import (
    ClusterModel,
    assign_pseudo_labels,
    hungarian_match,
    name_clusters,
    ss_kmeans,
    zero_shot_classify,
)
from .evaluation import (
    EvalReport,
    aggregate_seeds,
    build_report,
    cluster_accuracy,
    omni_accuracy,
    silhouette,
)
from .exceptions import CtxcatError
from .methods import METHODS, flags_for, predict_context, score_context
from .objectives import LossConfig, gcd_loss, oak_loss, self_con_loss, sup_con_loss, text_guidance_loss
from .saliency import RelevanceMap, relevance_map
from .synthgen import GenConfig, build_synthetic, generate_dataset
from .training import TrainConfig, Trainer, load_checkpoint, lr_at, save_checkpoint, train_context

__all__ = [
    "__version__",
    "BackboneConfig",
    "ContextTokens",
    "EmbeddingBatch",
    "EncoderPair",
    "Lexicon",
    "build_encoder",
    "encode_image",
    "encode_images",
    "encode_text",
    "init_context_tokens",
    "load_encoder",
    "save_encoder",
    "MISSING",
    "ContextSpec",
    "Item",
    "MultiContextDataset",
    "SplitConfig",
    "load_dataset",
    "load_manifest",
    "load_vocab",
    "render_vocab_prompt",
    "sample_labeled",
    "save_dataset",
    "split_known_novel",
    "ClusterModel",
    "assign_pseudo_labels",
    "hungarian_match",
    "name_clusters",
    "ss_kmeans",
    "zero_shot_classify",
    "EvalReport",
    "aggregate_seeds",
    "build_report",
    "cluster_accuracy",
    "omni_accuracy",
    "silhouette",
    "CtxcatError",
    "METHODS",
    "flags_for",
    "predict_context",
    "score_context",
    "LossConfig",
    "gcd_loss",
    "oak_loss",
    "self_con_loss",
    "sup_con_loss",
    "text_guidance_loss",
    "RelevanceMap",
    "relevance_map",
    "GenConfig",
    "build_synthetic",
    "generate_dataset",
    "TrainConfig",
    "Trainer",
    "load_checkpoint",
    "lr_at",
    "save_checkpoint",
    "train_context",
]
