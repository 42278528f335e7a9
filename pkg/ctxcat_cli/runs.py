"""Run directories, run manifests and the seed-list syntax."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import click
import yaml
from pydantic import BaseModel, ConfigDict, Field
from ctxcat import __version__
from ctxcat.exceptions import ConfigError
from ctxcat.settings import validate_config

RUN_MANIFEST_FILENAME = "run.yaml"
TOKENS_FILENAME = "tokens.emb"
CHECKPOINT_FILENAME = "checkpoint.pt"
OMNI_DIRNAME = "omni"


class RunManifest(BaseModel):
    """What was run, with which inputs, and where its outputs went."""

    model_config = ConfigDict(extra="forbid")

    command: str
    argv: List[str]
    config: Optional[str] = None
    dataset: Optional[str] = None
    seeds: List[int] = Field(default_factory=list)
    out: str
    method: Optional[str] = None
    version: str = __version__


def run_dir(runs_root: str, dataset: str, context: str, method: str, seed: int) -> Path:
    """One directory per (dataset, context, method, seed)."""
    return Path(runs_root) / Path(dataset).name / context / method / f"seed{seed}"


def write_run_manifest(manifest: RunManifest, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RUN_MANIFEST_FILENAME
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest.model_dump(), f, default_flow_style=False, sort_keys=True)
    return path


def load_run_manifest(path: Path) -> RunManifest:
    source = Path(path)
    if source.is_dir():
        source = source / RUN_MANIFEST_FILENAME
    try:
        data = yaml.safe_load(source.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read run manifest {source}: {exc}") from exc
    return validate_config(RunManifest, data)


def parse_seeds(text: str) -> List[int]:
    """'0..4' (inclusive), '0,2,5' or a single seed."""
    text = text.strip()
    try:
        if ".." in text:
            first, last = (int(part) for part in text.split("..", 1))
            seeds = list(range(first, last + 1))
        else:
            seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"'{text}' is not a seed list such as 0..4 or 0,1,2") from None
    if not seeds or any(seed < 0 for seed in seeds) or len(set(seeds)) != len(seeds):
        raise click.BadParameter(f"'{text}' must name distinct non-negative seeds")
    return seeds


def recorded_argv(command: str, options: Dict[str, Any], flags: Sequence[str] = ()) -> List[str]:
    """Rebuild a subcommand argv from resolved options, in a stable order."""
    argv = [command]
    for name in sorted(options):
        value = options[name]
        if value is None or value is False:
            continue
        option = "--" + name.replace("_", "-")
        if value is True:
            argv.append(option)
        elif isinstance(value, (list, tuple)):
            for element in value:
                argv.extend([option, str(element)])
        else:
            argv.extend([option, str(value)])
    argv.extend(flags)
    return argv


__all__ = [
    "RunManifest",
    "run_dir",
    "write_run_manifest",
    "load_run_manifest",
    "parse_seeds",
    "recorded_argv",
    "RUN_MANIFEST_FILENAME",
    "TOKENS_FILENAME",
    "CHECKPOINT_FILENAME",
    "OMNI_DIRNAME",
]
