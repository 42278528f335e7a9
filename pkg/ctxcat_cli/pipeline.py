"""Training and evaluation runs shared by train, eval and sweep."""

from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ctxcat.backbone import ContextTokens, EncoderPair, load_encoder
from ctxcat.datamodel import MultiContextDataset, load_dataset
from ctxcat.evaluation import EvalReport, build_report, evaluate_omni, write_report
from ctxcat.exceptions import CheckpointError
from ctxcat.methods import flags_for, predict_context, score_context, train_config_for
from ctxcat.settings import RuntimeSettings
from ctxcat.training import Trainer, load_checkpoint, load_train_config
from ctxcat_cli.logging.epoch_events import EPOCH_LOG_FILENAME, EpochEvent, append_epoch_event
from ctxcat_cli.runs import CHECKPOINT_FILENAME, OMNI_DIRNAME, TOKENS_FILENAME, run_dir


def load_inputs(dataset: str) -> Tuple[MultiContextDataset, EncoderPair]:
    """Dataset, split and the frozen encoder written next to it by gen."""
    return load_dataset(dataset), load_encoder(dataset)


def train_run(
    runtime: RuntimeSettings,
    dataset: str,
    context_id: str,
    method: str,
    seed: int,
    *,
    config_path: Optional[str] = None,
    out: Optional[str] = None,
    resume: bool = False,
    inputs: Optional[Tuple[MultiContextDataset, EncoderPair]] = None,
) -> Tuple[Path, Trainer]:
    ds, encoder = inputs or load_inputs(dataset)
    cfg = train_config_for(method, load_train_config(config_path, seed=seed))
    target = Path(out) if out else run_dir(runtime.runs_root, dataset, context_id, method, seed)
    target.mkdir(parents=True, exist_ok=True)
    events = target / EPOCH_LOG_FILENAME
    checkpoint = target / CHECKPOINT_FILENAME

    def record(epoch_record) -> None:
        append_epoch_event(EpochEvent("train.epoch", "ok", asdict(epoch_record)), events)

    trainer = Trainer(ds, context_id, encoder, cfg, event_sink=record)
    if resume and checkpoint.exists():
        trainer.restore(load_checkpoint(checkpoint, expected_digest=trainer.initial_digest))
    else:
        if events.exists():
            events.unlink()
        if checkpoint.exists():
            checkpoint.unlink()

    tokens = trainer.fit(checkpoint_path=checkpoint if trainer.optimizer is not None else None)
    tokens.save(target / TOKENS_FILENAME)
    append_epoch_event(
        EpochEvent(
            "train.finished",
            "ok",
            {"context": context_id, "epochs": trainer.epoch, "backbone_digest": trainer.initial_digest},
        ),
        events,
    )
    return target, trainer


def resolve_tokens(
    runtime: RuntimeSettings,
    dataset: str,
    method: str,
    seed: int,
    contexts: Sequence[str],
    token_files: Sequence[str] = (),
) -> Dict[str, ContextTokens]:
    """Explicit token files first, then each context's run directory."""
    tokens: Dict[str, ContextTokens] = {}
    for path in token_files:
        loaded = ContextTokens.load(path)
        tokens[loaded.context_id] = loaded
    if not flags_for(method).use_context_tokens:
        return tokens
    for context_id in contexts:
        if context_id in tokens:
            continue
        path = run_dir(runtime.runs_root, dataset, context_id, method, seed) / TOKENS_FILENAME
        if not path.exists():
            raise CheckpointError(
                f"no tokens for context '{context_id}' at {path}; run train first or pass --tokens"
            )
        tokens[context_id] = ContextTokens.load(path)
    return tokens


def eval_out_dir(runtime: RuntimeSettings, dataset: str, method: str, seed: int) -> Path:
    return Path(runtime.runs_root) / Path(dataset).name / OMNI_DIRNAME / method / f"seed{seed}"


def eval_run(
    runtime: RuntimeSettings,
    dataset: str,
    method: str,
    seed: int,
    *,
    contexts: Sequence[str] = (),
    token_files: Sequence[str] = (),
    config_path: Optional[str] = None,
    out: Optional[str] = None,
    inputs: Optional[Tuple[MultiContextDataset, EncoderPair]] = None,
) -> Tuple[Path, EvalReport]:
    ds, encoder = inputs or load_inputs(dataset)
    context_ids: List[str] = list(contexts) or list(ds.context_ids)
    cfg = load_train_config(config_path, seed=seed)
    tokens = resolve_tokens(runtime, dataset, method, seed, context_ids, token_files)

    predictions = {
        context_id: predict_context(ds, context_id, encoder, method, tokens.get(context_id), cfg)
        for context_id in context_ids
    }
    results = [score_context(ds, predictions[context_id]) for context_id in context_ids]
    omni = evaluate_omni(
        ds,
        {context_id: p.class_predictions for context_id, p in predictions.items()},
        context_ids,
    )
    report = build_report(
        results,
        omni,
        method=method,
        seed=seed,
        dataset=Path(dataset).name,
        expected_contexts=context_ids,
    )
    target = Path(out) if out else eval_out_dir(runtime, dataset, method, seed)
    write_report(report, target)
    return target, report


__all__ = ["load_inputs", "train_run", "resolve_tokens", "eval_out_dir", "eval_run"]
