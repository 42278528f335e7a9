"""
Known/novel/overall accuracy, Omni accuracy, silhouette and report files.

Cluster predictions are scored after one joint Hungarian match between
cluster ids and true classes over the whole unlabeled set; the known and
novel figures are subsets under that same match. Zero-shot predictions are
scored by name equality.

Report files:

- ``report.txt``: fixed-width table
- ``report.tsv``: ``#``-prefixed metadata lines, then one ``context  split  value``
  line per metric; ``-`` marks a metric that does not apply
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import silhouette_score
from tabulate import tabulate

from .backbone import EmbeddingBatch
from .datamodel import MultiContextDataset
from .discovery import hungarian_match
from .exceptions import EvaluationError, ReportSchemaError, UnreliableMetricError
from .tracing import emit_event

logger = logging.getLogger("ctxcat.evaluation")

SPLITS = ("known", "novel", "overall")
OMNI = "omni"
NOT_APPLICABLE = "-"
REPORT_TEXT = "report.txt"
REPORT_TSV = "report.tsv"

PathLike = Union[str, Path]
Scores = Tuple[Optional[float], Optional[float], Optional[float]]


def _check_same_items(pred: Mapping[str, Hashable], gt: Mapping[str, str]) -> List[str]:
    if set(pred) != set(gt):
        only_pred = sorted(set(pred) - set(gt))[:3]
        only_gt = sorted(set(gt) - set(pred))[:3]
        raise EvaluationError(
            f"prediction and ground-truth item sets differ (only predicted: {only_pred}, "
            f"only labeled: {only_gt})"
        )
    return sorted(gt)


def match_clusters(pred: Mapping[str, Hashable], gt: Mapping[str, str]) -> Dict[Hashable, str]:
    """Cluster id -> class under the agreement-maximizing joint Hungarian match."""
    items = _check_same_items(pred, gt)
    clusters = sorted({pred[item] for item in items}, key=repr)
    classes = sorted({gt[item] for item in items})
    if not items:
        return {}
    row = {cluster: i for i, cluster in enumerate(clusters)}
    col = {name: j for j, name in enumerate(classes)}
    agreement = np.zeros((len(clusters), len(classes)))
    for item in items:
        agreement[row[pred[item]], col[gt[item]]] += 1

    if len(clusters) <= len(classes):
        match = hungarian_match(-agreement)
        return {clusters[r]: classes[c] for r, c in match.mapping.items()}
    match = hungarian_match(-agreement.T)
    return {clusters[c]: classes[r] for r, c in match.mapping.items()}


def _subset_scores(
    correct: Mapping[str, bool],
    gt: Mapping[str, str],
    known: Iterable[str],
    novel_applicable: bool = True,
) -> Scores:
    known_set = set(known)

    def rate(ids: List[str]) -> Optional[float]:
        return sum(correct[item] for item in ids) / len(ids) if ids else None

    items = sorted(gt)
    known_ids = [item for item in items if gt[item] in known_set]
    novel_ids = [item for item in items if gt[item] not in known_set]
    return rate(known_ids), rate(novel_ids) if novel_applicable else None, rate(items)


def cluster_accuracy(
    pred: Mapping[str, Hashable],
    gt: Mapping[str, str],
    known: Iterable[str],
) -> Scores:
    """
    Returns:
        (known_acc, novel_acc, overall_acc); None where the subset is empty
    """
    mapping = match_clusters(pred, gt)
    correct = {item: mapping.get(pred[item]) == gt[item] for item in gt}
    return _subset_scores(correct, gt, known)


def name_accuracy(
    pred_names: Mapping[str, str],
    gt: Mapping[str, str],
    known: Iterable[str],
    novel_applicable: bool = True,
) -> Scores:
    """Score name predictions by equality; novel accuracy is None when not applicable."""
    _check_same_items(pred_names, gt)
    correct = {item: pred_names[item] == gt[item] for item in gt}
    return _subset_scores(correct, gt, known, novel_applicable)


def naming_accuracy(names: Mapping[Hashable, str], matched: Mapping[Hashable, str]) -> Optional[float]:
    """Fraction of clusters whose assigned name is their Hungarian-matched true class."""
    clusters = [cluster for cluster in matched if cluster in names]
    if not clusters:
        return None
    return sum(names[cluster] == matched[cluster] for cluster in clusters) / len(clusters)


def omni_accuracy(
    preds: Mapping[str, Mapping[str, str]],
    gts: Mapping[str, Mapping[str, str]],
    eval_items: Sequence[str],
) -> float:
    """
    Fraction of items predicted correctly in every context at once.

    Raises:
        UnreliableMetricError: Empty evaluation set
        EvaluationError: An item lacks a prediction or label in some context
    """
    if not eval_items:
        raise UnreliableMetricError("Omni evaluation set is empty")
    if set(preds) != set(gts):
        raise EvaluationError(f"contexts differ: predicted {sorted(preds)}, labeled {sorted(gts)}")
    hits = 0
    for item in eval_items:
        ok = True
        for context_id in gts:
            if item not in preds[context_id] or item not in gts[context_id]:
                raise EvaluationError(f"item '{item}' lacks a prediction or label in '{context_id}'")
            ok = ok and preds[context_id][item] == gts[context_id][item]
        hits += ok
    return hits / len(eval_items)


def silhouette(emb: Union[EmbeddingBatch, np.ndarray], assignment: Union[Mapping[str, int], Sequence[int]]) -> float:
    """
    Mean silhouette over items; an item alone in its cluster scores 0.

    Raises:
        EvaluationError: Fewer than two clusters
    """
    if isinstance(emb, EmbeddingBatch):
        x = emb.matrix.astype(np.float64)
        if isinstance(assignment, Mapping):
            labels = np.array([assignment[item] for item in emb.item_ids])
        else:
            labels = np.asarray(assignment)
    else:
        x = np.asarray(emb, dtype=np.float64)
        labels = np.asarray(list(assignment.values()) if isinstance(assignment, Mapping) else assignment)

    n_clusters = len(np.unique(labels))
    if n_clusters < 2:
        raise EvaluationError("silhouette needs at least two clusters")
    if n_clusters == len(labels):
        return 0.0
    return float(silhouette_score(x, labels, metric="euclidean"))


@dataclass(frozen=True)
class ContextResult:
    context_id: str
    known: Optional[float]
    novel: Optional[float]
    overall: Optional[float]
    n_known: int
    n_novel: int
    n_total: int
    predictions: Dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def value(self, split: str) -> Optional[float]:
        return getattr(self, split)


@dataclass(frozen=True)
class OmniResult:
    known: Optional[float]
    novel: Optional[float]
    overall: Optional[float]
    n_known: int
    n_novel: int
    n_total: int
    per_context: Dict[str, Dict[str, float]] = field(default_factory=dict, compare=False)

    def value(self, split: str) -> Optional[float]:
        return getattr(self, split)


@dataclass(frozen=True)
class EvalReport:
    contexts: Tuple[ContextResult, ...]
    omni: OmniResult
    method: str
    seed: int
    dataset: str = ""

    def rows(self) -> List[Tuple[str, str, Optional[float]]]:
        rows = [(r.context_id, split, r.value(split)) for r in self.contexts for split in SPLITS]
        rows += [(OMNI, split, self.omni.value(split)) for split in SPLITS]
        return rows


def _safe_omni(
    preds: Mapping[str, Mapping[str, str]],
    gts: Mapping[str, Mapping[str, str]],
    items: Sequence[str],
    label: str,
) -> Optional[float]:
    try:
        return omni_accuracy(preds, gts, items)
    except UnreliableMetricError:
        emit_event(logger, "eval.omni_unreliable", logging.WARNING, split=label)
        return None


def evaluate_omni(
    ds: MultiContextDataset,
    predictions: Mapping[str, Mapping[str, str]],
    contexts: Optional[Sequence[str]] = None,
) -> OmniResult:
    """
    Omni accuracy over items unlabeled and evaluable in every context.

    The known (novel) split keeps items whose class is known (novel) in every context.
    """
    context_ids = list(contexts or predictions)
    shared = ds.shared_unlabeled(context_ids)
    known_sets = {c: set(ds.spec(c).known_classes) for c in context_ids}
    gts = {c: {item: ds.label(c, item) for item in shared} for c in context_ids}
    preds = {c: dict(predictions[c]) for c in context_ids}

    known_items = [i for i in shared if all(gts[c][i] in known_sets[c] for c in context_ids)]
    novel_items = [i for i in shared if all(gts[c][i] not in known_sets[c] for c in context_ids)]

    split_items = {"known": known_items, "novel": novel_items, "overall": list(shared)}
    per_context: Dict[str, Dict[str, float]] = {}
    for split, items in split_items.items():
        if items:
            per_context[split] = {
                c: sum(preds[c].get(i) == gts[c][i] for i in items) / len(items) for c in context_ids
            }

    return OmniResult(
        known=_safe_omni(preds, gts, known_items, "known"),
        novel=_safe_omni(preds, gts, novel_items, "novel"),
        overall=_safe_omni(preds, gts, list(shared), "overall"),
        n_known=len(known_items),
        n_novel=len(novel_items),
        n_total=len(shared),
        per_context=per_context,
    )


def build_report(
    results: Sequence[ContextResult],
    omni: OmniResult,
    *,
    method: str,
    seed: int,
    dataset: str = "",
    expected_contexts: Optional[Sequence[str]] = None,
) -> EvalReport:
    """
    Raises:
        EvaluationError: A context result is missing, an accuracy leaves [0, 1],
            or Omni exceeds a per-context accuracy on the shared set
    """
    present = [r.context_id for r in results]
    if expected_contexts is not None:
        missing = [c for c in expected_contexts if c not in present]
        if missing:
            raise EvaluationError(f"missing results for contexts {missing}")

    for result in list(results) + [omni]:
        for split in SPLITS:
            value = result.value(split)
            if value is not None and not 0.0 <= value <= 1.0:
                raise EvaluationError(f"accuracy {value} is outside [0, 1]")

    for split in SPLITS:
        value = omni.value(split)
        per_context = omni.per_context.get(split)
        if value is None or not per_context:
            continue
        floor = min(per_context.values())
        if value > floor + 1e-12:
            raise EvaluationError(f"Omni {split} accuracy {value} exceeds per-context minimum {floor}")

    return EvalReport(
        contexts=tuple(sorted(results, key=lambda r: present.index(r.context_id))),
        omni=omni,
        method=method,
        seed=seed,
        dataset=dataset,
    )


def _fmt(value: Optional[float]) -> str:
    return NOT_APPLICABLE if value is None else f"{value:.4f}"


def render_text(report: EvalReport) -> str:
    headers = ["context", "known", "novel", "overall", "n_known", "n_novel", "n"]
    rows = [
        [r.context_id, _fmt(r.known), _fmt(r.novel), _fmt(r.overall), r.n_known, r.n_novel, r.n_total]
        for r in report.contexts
    ]
    o = report.omni
    rows.append([OMNI, _fmt(o.known), _fmt(o.novel), _fmt(o.overall), o.n_known, o.n_novel, o.n_total])
    title = f"method: {report.method}  seed: {report.seed}"
    if report.dataset:
        title += f"  dataset: {report.dataset}"
    return title + "\n" + tabulate(rows, headers=headers, tablefmt="simple", disable_numparse=True) + "\n"


def render_tsv(report: EvalReport) -> str:
    lines = [
        f"# method\t{report.method}",
        f"# seed\t{report.seed}",
        f"# dataset\t{report.dataset or NOT_APPLICABLE}",
    ]
    for result in list(report.contexts):
        lines.append(f"# size\t{result.context_id}\t{result.n_known}\t{result.n_novel}\t{result.n_total}")
    lines.append(f"# size\t{OMNI}\t{report.omni.n_known}\t{report.omni.n_novel}\t{report.omni.n_total}")
    lines.append("context\tsplit\tvalue")
    for context_id, split, value in report.rows():
        lines.append(f"{context_id}\t{split}\t{NOT_APPLICABLE if value is None else repr(float(value))}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, directory: PathLike) -> Tuple[Path, Path]:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    text_path = target / REPORT_TEXT
    tsv_path = target / REPORT_TSV
    text_path.write_text(render_text(report), encoding="utf-8")
    tsv_path.write_text(render_tsv(report), encoding="utf-8")
    return text_path, tsv_path


@dataclass(frozen=True)
class ReportTable:
    """Machine-readable report: metadata plus (context, split) -> value."""

    metadata: Dict[str, str]
    values: Dict[Tuple[str, str], Optional[float]]
    source: str = ""


def read_report_tsv(path: PathLike) -> ReportTable:
    source = Path(path)
    try:
        lines = source.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ReportSchemaError(f"cannot read report {source}: {exc}") from exc

    metadata: Dict[str, str] = {}
    values: Dict[Tuple[str, str], Optional[float]] = {}
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if line.startswith("#"):
            key = cells[0].lstrip("# ").strip()
            if key != "size" and len(cells) >= 2:
                metadata[key] = cells[1]
            continue
        if cells == ["context", "split", "value"]:
            continue
        if len(cells) != 3:
            raise ReportSchemaError(f"{source}: line {number}: expected 3 columns")
        try:
            value = None if cells[2] == NOT_APPLICABLE else float(cells[2])
        except ValueError:
            raise ReportSchemaError(f"{source}: line {number}: bad value '{cells[2]}'") from None
        values[(cells[0], cells[1])] = value
    return ReportTable(metadata=metadata, values=values, source=str(source))


@dataclass(frozen=True)
class AggregateRow:
    context_id: str
    split: str
    mean: Optional[float]
    std: Optional[float]
    n: int


def aggregate_seeds(reports: Sequence[Union[ReportTable, PathLike]]) -> List[AggregateRow]:
    """
    Per-metric mean and sample standard deviation across seed reports.

    Raises:
        ReportSchemaError: Fewer than two reports or differing metric sets
    """
    tables = [r if isinstance(r, ReportTable) else read_report_tsv(r) for r in reports]
    if len(tables) < 2:
        raise ReportSchemaError(f"aggregation needs at least 2 reports, got {len(tables)}")
    keys = list(tables[0].values)
    for table in tables[1:]:
        if list(table.values) != keys:
            raise ReportSchemaError(f"{table.source or 'report'} has a different metric set")
    methods = {t.metadata.get("method") for t in tables}
    if len(methods) > 1:
        raise ReportSchemaError(f"reports mix methods {sorted(m or '' for m in methods)}")

    rows = []
    for key in keys:
        column = [table.values[key] for table in tables]
        present = [value for value in column if value is not None]
        if present and len(present) != len(column):
            raise ReportSchemaError(f"metric {key[0]}/{key[1]} is missing in some reports")
        if not present:
            rows.append(AggregateRow(key[0], key[1], None, None, len(column)))
            continue
        values = np.asarray(present, dtype=np.float64)
        rows.append(AggregateRow(key[0], key[1], float(values.mean()), float(values.std(ddof=1)), len(values)))
    return rows


def render_aggregate_tsv(rows: Sequence[AggregateRow], metadata: Optional[Mapping[str, str]] = None) -> str:
    lines = [f"# {key}\t{value}" for key, value in (metadata or {}).items()]
    lines.append("context\tsplit\tmean\tstd\tn")
    for row in rows:
        mean = NOT_APPLICABLE if row.mean is None else repr(row.mean)
        std = NOT_APPLICABLE if row.std is None else repr(row.std)
        lines.append(f"{row.context_id}\t{row.split}\t{mean}\t{std}\t{row.n}")
    return "\n".join(lines) + "\n"


def render_aggregate_text(rows: Sequence[AggregateRow]) -> str:
    table: Dict[str, Dict[str, str]] = {}
    for row in rows:
        cell = NOT_APPLICABLE if row.mean is None else f"{100 * row.mean:.1f} ± {100 * row.std:.1f}"
        table.setdefault(row.context_id, {})[row.split] = cell
    body = [[context] + [cells.get(split, NOT_APPLICABLE) for split in SPLITS] for context, cells in table.items()]
    return tabulate(body, headers=["context"] + list(SPLITS), tablefmt="simple", disable_numparse=True) + "\n"


__all__ = [
    "match_clusters",
    "cluster_accuracy",
    "name_accuracy",
    "naming_accuracy",
    "omni_accuracy",
    "silhouette",
    "ContextResult",
    "OmniResult",
    "EvalReport",
    "evaluate_omni",
    "build_report",
    "render_text",
    "render_tsv",
    "write_report",
    "ReportTable",
    "read_report_tsv",
    "AggregateRow",
    "aggregate_seeds",
    "render_aggregate_tsv",
    "render_aggregate_text",
]
