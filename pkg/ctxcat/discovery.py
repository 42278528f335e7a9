"""
Semi-supervised K-means, Hungarian matching, pseudo-labels and cluster naming.

Clusters 0..L-1 belong to the known classes (in ``class_order``) and hold
their labeled items permanently; clusters L..K-1 are novel. Distances are
squared Euclidean on unit embeddings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .backbone import EmbeddingBatch, Lexicon
from .containers import read_matrix, write_matrix
from .exceptions import AssignmentError, CheckpointError, DegenerateDataError
from .tracing import emit_event

logger = logging.getLogger("ctxcat.discovery")

PathLike = Union[str, Path]

CENTROIDS_FILENAME = "centroids.emb"
CLUSTERS_FILENAME = "clusters.tsv"


@dataclass(frozen=True)
class Assignment:
    """Injective row -> column map and its total cost."""

    mapping: Dict[int, int]
    cost: float


def hungarian_match(cost: np.ndarray) -> Assignment:
    """
    Minimum-cost injective assignment of rows to columns.

    Raises:
        AssignmentError: Non-finite entries or more rows than columns
    """
    matrix = np.asarray(cost, dtype=np.float64)
    if matrix.ndim != 2:
        raise AssignmentError(f"cost must be a matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise AssignmentError("cost matrix has non-finite entries")
    rows, cols = matrix.shape
    if rows > cols:
        raise AssignmentError(f"{rows} rows cannot be matched injectively into {cols} columns")
    if rows == 0:
        return Assignment(mapping={}, cost=0.0)

    row_ind, col_ind = linear_sum_assignment(matrix)
    mapping = {int(r): int(c) for r, c in zip(row_ind, col_ind)}
    return Assignment(mapping=mapping, cost=float(sum(matrix[r, c] for r, c in mapping.items())))


@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignment: Dict[str, int]
    pinned: Dict[str, int]
    K: int
    cluster_classes: Dict[int, str] = field(default_factory=dict)
    names: Optional[Dict[int, str]] = None
    inertia: float = 0.0
    objective_trace: Tuple[float, ...] = ()
    item_ids: Tuple[str, ...] = ()

    def labels(self, item_ids: Optional[Sequence[str]] = None) -> np.ndarray:
        ids = self.item_ids if item_ids is None else item_ids
        return np.array([self.assignment[item_id] for item_id in ids], dtype=np.int64)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels(), minlength=self.K)


def _squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(
    x: np.ndarray,
    seeds: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    chosen = [row for row in seeds]
    for _ in range(count):
        if chosen:
            d2 = _squared_distances(x, np.asarray(chosen)).min(axis=1)
            total = d2.sum()
        else:
            total = 0.0
        if total > 0:
            index = int(rng.choice(len(x), p=d2 / total))
        else:
            index = int(rng.integers(len(x)))
        chosen.append(x[index])
    return np.asarray(chosen[len(seeds) :]).reshape(count, x.shape[1])


def _lloyd(
    x: np.ndarray,
    centroids: np.ndarray,
    pin_index: np.ndarray,
    pin_cluster: np.ndarray,
    free_index: np.ndarray,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, np.ndarray, float, Tuple[float, ...]]:
    k = centroids.shape[0]
    trace = []

    def assign(current: np.ndarray) -> Tuple[np.ndarray, float]:
        d2 = _squared_distances(x, current)
        labels = np.argmin(d2, axis=1)
        labels[pin_index] = pin_cluster
        return labels, float(d2[np.arange(len(x)), labels].sum())

    for _ in range(max_iter):
        labels, inertia = assign(centroids)
        trace.append(inertia)

        updated = centroids.copy()
        for cluster in range(k):
            members = labels == cluster
            if members.any():
                updated[cluster] = x[members].mean(axis=0)
        empty = [cluster for cluster in range(k) if not (labels == cluster).any()]
        if empty and free_index.size:
            # reseed with the unpinned points farthest from their own centroid
            own = ((x[free_index] - centroids[labels[free_index]]) ** 2).sum(axis=1)
            order = free_index[np.argsort(-own, kind="stable")]
            for cluster, point in zip(empty, order):
                updated[cluster] = x[point]

        shift = float(((updated - centroids) ** 2).sum())
        centroids = updated
        if shift < tol:
            break

    labels, inertia = assign(centroids)
    trace.append(inertia)
    return centroids, labels, inertia, tuple(trace)


def ss_kmeans(
    emb: Union[EmbeddingBatch, np.ndarray],
    pins: Mapping[str, str],
    K: int,
    *,
    seed: Union[int, Sequence[int]] = 0,
    n_init: int = 10,
    tol: float = 1e-4,
    max_iter: int = 200,
    class_order: Optional[Sequence[str]] = None,
    item_ids: Optional[Sequence[str]] = None,
) -> ClusterModel:
    """
    K-means with labeled items pinned to their class's cluster.

    Args:
        emb: Embedding rows (an EmbeddingBatch or an (n, d) array with item_ids)
        pins: Labeled item id -> known class name
        K: Total number of clusters
        seed: Base seed; restart r draws from (seed, r)
        class_order: Known classes owning clusters 0..L-1; defaults to sorted pinned classes

    Raises:
        DegenerateDataError: K > n, fewer clusters than pinned classes, or identical points with K > 1
    """
    if isinstance(emb, EmbeddingBatch):
        x = emb.matrix.astype(np.float64)
        ids = emb.item_ids
    else:
        x = np.asarray(emb, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        ids = tuple(item_ids) if item_ids is not None else tuple(str(i) for i in range(len(x)))
    n = x.shape[0]

    if K < 1 or K > n:
        raise DegenerateDataError(f"cannot form {K} clusters from {n} points")
    classes = tuple(class_order) if class_order is not None else tuple(sorted(set(pins.values())))
    stray = sorted(set(pins.values()) - set(classes))
    if stray:
        raise DegenerateDataError(f"pinned classes {stray} are missing from the class order")
    if len(classes) > K:
        raise DegenerateDataError(f"{len(classes)} known classes exceed K={K}")
    if K > 1 and np.all(x == x[0]):
        raise DegenerateDataError("all points are identical")

    position = {item_id: i for i, item_id in enumerate(ids)}
    missing = [item_id for item_id in pins if item_id not in position]
    if missing:
        raise DegenerateDataError(f"pinned items not in the batch: {missing[:5]}")
    pin_index = np.array([position[item_id] for item_id in pins], dtype=np.int64)
    pin_cluster = np.array([classes.index(pins[item_id]) for item_id in pins], dtype=np.int64)
    free_mask = np.ones(n, dtype=bool)
    free_mask[pin_index] = False
    free_index = np.flatnonzero(free_mask)

    best = None
    for restart in range(max(1, n_init)):
        seed_parts = list(seed) if isinstance(seed, (list, tuple)) else [seed]
        rng = np.random.default_rng(seed_parts + [restart])

        known = []
        for cluster, _ in enumerate(classes):
            members = pin_index[pin_cluster == cluster]
            if members.size:
                known.append(x[members].mean(axis=0))
        known_centroids = np.asarray(known).reshape(len(known), x.shape[1])
        pool = x[free_index] if free_index.size >= K - len(known) else x
        extra = _kmeans_pp(pool, known_centroids, K - len(known), rng)

        # classes without pins take the first k-means++ seeds
        centroids = np.empty((K, x.shape[1]))
        cursor = 0
        next_known = 0
        for cluster in range(K):
            if cluster < len(classes) and (pin_cluster == cluster).any():
                centroids[cluster] = known_centroids[next_known]
                next_known += 1
            else:
                centroids[cluster] = extra[cursor]
                cursor += 1

        result = _lloyd(x, centroids, pin_index, pin_cluster, free_index, tol, max_iter)
        if best is None or result[2] < best[2]:
            best = result

    centroids, labels, inertia, trace = best
    assignment = {item_id: int(labels[i]) for i, item_id in enumerate(ids)}
    model = ClusterModel(
        centroids=centroids,
        assignment=assignment,
        pinned={item_id: int(classes.index(name)) for item_id, name in pins.items()},
        K=K,
        cluster_classes={i: name for i, name in enumerate(classes)},
        inertia=inertia,
        objective_trace=trace,
        item_ids=ids,
    )
    emit_event(logger, "discovery.ss_kmeans", logging.DEBUG, n=n, K=K, pinned=len(pins), inertia=inertia)
    return model


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.maximum(norms, 1e-12)


def name_clusters(model: ClusterModel, lexicon: Lexicon) -> Dict[int, str]:
    """
    Name every cluster: clusters holding pinned items keep their class, the
    rest are matched to the remaining lexicon names by Hungarian on 1 - cosine.

    Raises:
        AssignmentError: Fewer lexicon names than clusters
    """
    if len(lexicon) < model.K:
        raise AssignmentError(f"lexicon has {len(lexicon)} names for {model.K} clusters")

    pinned_clusters = set(model.pinned.values())
    names = {c: name for c, name in model.cluster_classes.items() if c in pinned_clusters}
    open_clusters = [cluster for cluster in range(model.K) if cluster not in names]
    free_names = [name for name in lexicon.names if name not in set(names.values())]
    if len(free_names) < len(open_clusters):
        raise AssignmentError(
            f"{len(free_names)} unused names for {len(open_clusters)} novel clusters"
        )
    if open_clusters:
        centroids = _unit_rows(model.centroids[open_clusters].astype(np.float64))
        vectors = lexicon.subset(free_names).matrix.astype(np.float64)
        match = hungarian_match(1.0 - centroids @ vectors.T)
        for row, col in match.mapping.items():
            names[open_clusters[row]] = free_names[col]
    return {cluster: names[cluster] for cluster in range(model.K)}


def assign_pseudo_labels(model: ClusterModel, lexicon: Lexicon) -> Dict[str, str]:
    """Every item inherits its cluster's name."""
    names = name_clusters(model, lexicon)
    return {item_id: names[cluster] for item_id, cluster in model.assignment.items()}


def zero_shot_classify(emb: EmbeddingBatch, lexicon: Lexicon) -> Dict[str, str]:
    """Nearest lexicon name by cosine; the lowest lexicon index wins ties."""
    if len(lexicon) == 0:
        raise AssignmentError("zero-shot classification needs a non-empty lexicon")
    scores = emb.matrix.astype(np.float64) @ lexicon.matrix.astype(np.float64).T
    best = np.argmax(scores, axis=1)
    return {item_id: lexicon.names[int(best[i])] for i, item_id in enumerate(emb.item_ids)}


def save_cluster_model(model: ClusterModel, directory: PathLike) -> Path:
    """centroids.emb plus clusters.tsv (item_id, cluster, name, pinned)."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    write_matrix(target / CENTROIDS_FILENAME, model.centroids)

    names = model.names or {}
    lines = [f"# K\t{model.K}", f"# inertia\t{model.inertia!r}"]
    lines += [f"# known\t{cluster}\t{name}" for cluster, name in sorted(model.cluster_classes.items())]
    lines.append("item_id\tcluster\tname\tpinned")
    for item_id in model.item_ids:
        cluster = model.assignment[item_id]
        pinned = "1" if item_id in model.pinned else "0"
        lines.append(f"{item_id}\t{cluster}\t{names.get(cluster, '-')}\t{pinned}")
    (target / CLUSTERS_FILENAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def load_cluster_model(directory: PathLike) -> ClusterModel:
    source = Path(directory)
    centroids = read_matrix(source / CENTROIDS_FILENAME).matrix.astype(np.float64)
    try:
        lines = (source / CLUSTERS_FILENAME).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CheckpointError(f"cannot read {source / CLUSTERS_FILENAME}: {exc}") from exc

    K = centroids.shape[0]
    inertia = 0.0
    known: Dict[int, str] = {}
    names: Dict[int, str] = {}
    assignment: Dict[str, int] = {}
    pinned: Dict[str, int] = {}
    ids = []
    for line in lines:
        cells = line.split("\t")
        if line.startswith("#"):
            key = cells[0].lstrip("# ").strip()
            if key == "K":
                K = int(cells[1])
            elif key == "inertia":
                inertia = float(cells[1])
            elif key == "known":
                known[int(cells[1])] = cells[2]
            continue
        if cells[0] == "item_id" or not line.strip():
            continue
        if len(cells) != 4:
            raise CheckpointError(f"{source / CLUSTERS_FILENAME}: malformed row '{line}'")
        item_id, cluster = cells[0], int(cells[1])
        ids.append(item_id)
        assignment[item_id] = cluster
        if cells[2] != "-":
            names[cluster] = cells[2]
        if cells[3] == "1":
            pinned[item_id] = cluster

    return ClusterModel(
        centroids=centroids,
        assignment=assignment,
        pinned=pinned,
        K=K,
        cluster_classes=known,
        names=names or None,
        inertia=inertia,
        item_ids=tuple(ids),
    )


__all__ = [
    "Assignment",
    "ClusterModel",
    "hungarian_match",
    "ss_kmeans",
    "name_clusters",
    "assign_pseudo_labels",
    "zero_shot_classify",
    "save_cluster_model",
    "load_cluster_model",
]
