"""End-to-end tests for the ctxcat commands on a tiny generated dataset."""

import pytest
import yaml
from click.testing import CliRunner

from ctxcat.datamodel import load_dataset
from ctxcat.evaluation import read_report_tsv
from ctxcat_cli.cli import cli

TINY_GEN_YAML = """\
image_size: 16
contexts:
  color: 4
  shape: 3
n_images: 48
probe_per_class: 2
labeled_per_class: 3
vocab_multiplier: 2
seed: 0
backbone:
  image_size: 16
  patch_size: 4
  width: 72
"""

TINY_TRAIN_CFG = "epochs=1\nbatch_size=16\nn_tokens=4\nkmeans_n_init=2\n"


@pytest.fixture
def cli_runner():
    return CliRunner()


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CTXCAT_CONFIG", str(tmp_path / "missing.yml"))
    monkeypatch.setenv("CTXCAT_LOG_PATH", str(tmp_path / "cli.log"))
    for name in ("OAK_THREADS", "CTXCAT_RUNS_ROOT", "CTXCAT_FORMAT"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def runs(tmp_path):
    return tmp_path / "runs"


@pytest.fixture
def invoke(cli_runner, runs):
    """Run ctxcat with colors off and runs under tmp_path."""

    def run(*args, fmt="table"):
        return cli_runner.invoke(cli, ["--runs-root", str(runs), "--format", fmt, *args])

    return run


@pytest.fixture
def train_cfg(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text(TINY_TRAIN_CFG, encoding="utf-8")
    return str(path)


@pytest.fixture
def dataset(tiny_dataset_dir):
    return str(tiny_dataset_dir)


class TestGen:
    def test_writes_dataset(self, invoke, tmp_path):
        config = tmp_path / "synth.yml"
        config.write_text(TINY_GEN_YAML, encoding="utf-8")
        out = tmp_path / "d1"

        result = invoke("gen", "--config", str(config), "--out", str(out))

        assert result.exit_code == 0, result.output
        for name in ("manifest.tsv", "split.yaml", "lexicon.emb", "backbone.yaml", "run.yaml"):
            assert (out / name).exists()
        manifest = yaml.safe_load((out / "run.yaml").read_text(encoding="utf-8"))
        assert manifest["argv"][0] == "gen"
        assert "color" in result.output

    def test_bad_config(self, invoke, tmp_path):
        config = tmp_path / "synth.yml"
        config.write_text("n_images: 0\n", encoding="utf-8")

        result = invoke("gen", "--config", str(config), "--out", str(tmp_path / "d1"))

        assert result.exit_code == 1
        assert "error[config]" in result.output

    def test_command_log(self, invoke, tmp_path):
        config = tmp_path / "synth.yml"
        config.write_text(TINY_GEN_YAML, encoding="utf-8")

        invoke("gen", "--config", str(config), "--out", str(tmp_path / "d1"))

        log = (tmp_path / "cli.log").read_text(encoding="utf-8")
        assert '"command":"gen"' in log
        assert '"decision":"SUCCESS"' in log


def test_prompt(invoke, dataset):
    spec = load_dataset(dataset, load_images=False).spec("color")

    result = invoke("prompt", "--dataset", dataset, "--context", "color")

    assert result.exit_code == 0, result.output
    assert spec.known_classes[0] in result.output


class TestEval:
    def test_ss_kmeans(self, invoke, dataset, runs):
        result = invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", "--seed", "0")

        assert result.exit_code == 0, result.output
        target = runs / "d0" / "omni" / "ss-kmeans" / "seed0"
        table = read_report_tsv(target / "report.tsv")
        assert table.metadata["method"] == "ss-kmeans"
        assert set(context for context, _ in table.values) == {"color", "shape", "omni"}
        assert (target / "run.yaml").exists()
        assert "OVERALL" in result.output

    def test_zero_shot_has_no_novel_column(self, invoke, dataset, runs):
        result = invoke("eval", "--dataset", dataset, "--method", "zero-shot", "--context", "color")

        assert result.exit_code == 0, result.output
        table = read_report_tsv(runs / "d0" / "omni" / "zero-shot" / "seed0" / "report.tsv")
        assert table.values[("color", "novel")] is None
        assert table.values[("color", "known")] is not None

    def test_json_output(self, invoke, dataset):
        result = invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", fmt="json")

        assert result.exit_code == 0, result.output
        assert '"split": "overall"' in result.output

    def test_token_method_without_training(self, invoke, dataset):
        result = invoke("eval", "--dataset", dataset, "--method", "oak")

        assert result.exit_code == 1
        assert "run train first" in result.output

    def test_deterministic(self, invoke, dataset, tmp_path):
        invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", "--out", str(tmp_path / "a"))
        invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", "--out", str(tmp_path / "b"))

        assert (tmp_path / "a" / "report.tsv").read_bytes() == (tmp_path / "b" / "report.tsv").read_bytes()


class TestTrainAndName:
    @pytest.fixture
    def trained(self, invoke, dataset, train_cfg, runs):
        result = invoke(
            "train", "--dataset", dataset, "--context", "color", "--method", "oak", "--config", train_cfg
        )
        assert result.exit_code == 0, result.output
        return runs / "d0" / "color" / "oak" / "seed0"

    def test_train_outputs(self, trained):
        for name in ("tokens.emb", "checkpoint.pt", "epochs.jsonl", "run.yaml"):
            assert (trained / name).exists()
        manifest = yaml.safe_load((trained / "run.yaml").read_text(encoding="utf-8"))
        assert manifest["method"] == "oak"
        assert manifest["seeds"] == [0]

    def test_non_training_method_rejected(self, invoke, dataset):
        result = invoke("train", "--dataset", dataset, "--context", "color", "--method", "ss-kmeans")

        assert result.exit_code == 2

    def test_unknown_context(self, invoke, dataset, train_cfg):
        result = invoke("train", "--dataset", dataset, "--context", "texture", "--config", train_cfg)

        assert result.exit_code == 1
        assert "texture" in result.output

    def test_eval_with_trained_tokens(self, invoke, dataset, trained, train_cfg):
        result = invoke(
            "eval", "--dataset", dataset, "--method", "oak", "--context", "color", "--config", train_cfg
        )

        assert result.exit_code == 0, result.output

    def test_name(self, invoke, dataset, trained, train_cfg):
        result = invoke(
            "name", "--dataset", dataset, "--context", "color", "--method", "oak", "--config", train_cfg
        )

        assert result.exit_code == 0, result.output
        lines = (trained / "names.tsv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "cluster\tkind\tsize\tname\tmatched"
        assert len(lines) == 1 + 4
        assert (trained / "clusters.tsv").exists()

    def test_replay_reproduces_tokens_and_heatmap(self, invoke, dataset, trained, tmp_path):
        item = load_dataset(dataset, load_images=False).item_ids[0]
        out = tmp_path / "sal"
        result = invoke(
            "saliency", "--dataset", dataset, "--context", "color", "--item", item,
            "--method", "oak", "--out", str(out),
        )
        assert result.exit_code == 0, result.output
        tokens_before = (trained / "tokens.emb").read_bytes()
        heatmap_before = (out / "heatmap.pgm").read_bytes()
        for path in (trained / "tokens.emb", trained / "checkpoint.pt", out / "heatmap.pgm"):
            path.unlink()

        retrained = invoke("replay", "--manifest", str(trained / "run.yaml"))
        redrawn = invoke("replay", "--manifest", str(out / "run.yaml"))

        assert retrained.exit_code == 0, retrained.output
        assert redrawn.exit_code == 0, redrawn.output
        assert (trained / "tokens.emb").read_bytes() == tokens_before
        assert (out / "heatmap.pgm").read_bytes() == heatmap_before

    def test_resume_finished_run(self, invoke, dataset, trained, train_cfg):
        before = (trained / "tokens.emb").read_bytes()

        result = invoke(
            "train", "--dataset", dataset, "--context", "color", "--config", train_cfg, "--resume"
        )

        assert result.exit_code == 0, result.output
        assert (trained / "tokens.emb").read_bytes() == before


def test_name_without_tokens(invoke, dataset, runs):
    result = invoke("name", "--dataset", dataset, "--context", "shape", "--method", "ss-kmeans")

    assert result.exit_code == 0, result.output
    assert (runs / "d0" / "shape" / "ss-kmeans" / "seed0" / "names.tsv").exists()


class TestSaliency:
    @pytest.fixture
    def item(self, dataset):
        return load_dataset(dataset, load_images=False).item_ids[0]

    def test_predicted_target(self, invoke, dataset, item, tmp_path):
        out = tmp_path / "sal"

        result = invoke(
            "saliency", "--dataset", dataset, "--context", "color", "--item", item,
            "--method", "ss-kmeans", "--out", str(out),
        )

        assert result.exit_code == 0, result.output
        assert (out / "heatmap.pgm").read_bytes().startswith(b"P5")
        assert len((out / "weights.txt").read_text(encoding="utf-8").splitlines()) == 4

    def test_empty_target(self, invoke, dataset, item, tmp_path):
        result = invoke(
            "saliency", "--dataset", dataset, "--context", "color", "--item", item,
            "--method", "ss-kmeans", "--target", "", "--out", str(tmp_path / "sal"),
        )

        assert result.exit_code == 0, result.output

    def test_unknown_item(self, invoke, dataset):
        result = invoke(
            "saliency", "--dataset", dataset, "--context", "color", "--item", "images/nope.ppm", "--method", "ss-kmeans"
        )

        assert result.exit_code == 1
        assert "images/nope.ppm" in result.output

    def test_unknown_target(self, invoke, dataset, item, tmp_path):
        result = invoke(
            "saliency", "--dataset", dataset, "--context", "color", "--item", item,
            "--method", "ss-kmeans", "--target", "plaid", "--out", str(tmp_path / "sal"),
        )

        assert result.exit_code == 1
        assert "plaid" in result.output


class TestReport:
    def test_aggregate(self, invoke, dataset, runs, tmp_path):
        for seed in ("0", "1"):
            assert invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", "--seed", seed).exit_code == 0
        base = runs / "d0" / "omni" / "ss-kmeans"

        result = invoke("report", str(base / "seed0"), str(base / "seed1" / "report.tsv"), "--out", str(tmp_path / "agg"))

        assert result.exit_code == 0, result.output
        text = (tmp_path / "agg" / "aggregate.tsv").read_text(encoding="utf-8")
        assert "0,1" in text
        assert (tmp_path / "agg" / "aggregate.txt").exists()
        assert (tmp_path / "agg" / "run.yaml").exists()

    def test_single_report_rejected(self, invoke, dataset, runs, tmp_path):
        invoke("eval", "--dataset", dataset, "--method", "ss-kmeans")

        result = invoke("report", str(runs / "d0" / "omni" / "ss-kmeans" / "seed0"), "--out", str(tmp_path / "agg"))

        assert result.exit_code == 1
        assert "at least 2" in result.output


class TestReplay:
    def test_reproduces_report(self, invoke, dataset, runs):
        invoke("eval", "--dataset", dataset, "--method", "ss-kmeans", "--seed", "1")
        target = runs / "d0" / "omni" / "ss-kmeans" / "seed1"
        before = (target / "report.tsv").read_bytes()
        (target / "report.tsv").unlink()

        result = invoke("replay", "--manifest", str(target / "run.yaml"))

        assert result.exit_code == 0, result.output
        assert (target / "report.tsv").read_bytes() == before

    def test_bad_manifest(self, invoke, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("command: nope\nargv: [nope]\nout: x\n", encoding="utf-8")

        result = invoke("replay", "--manifest", str(path))

        assert result.exit_code != 0
        assert "nope" in result.output


class TestSweep:
    def test_needs_two_seeds(self, invoke, dataset):
        result = invoke("sweep", "--dataset", dataset, "--method", "ss-kmeans", "--seeds", "0")

        assert result.exit_code == 2

    def test_ss_kmeans(self, invoke, dataset, runs):
        result = invoke("sweep", "--dataset", dataset, "--method", "ss-kmeans", "--seeds", "0,1")

        assert result.exit_code == 0, result.output
        aggregate = runs / "d0" / "omni" / "ss-kmeans" / "aggregate"
        assert (aggregate / "aggregate.tsv").exists()
        assert (aggregate / "run.yaml").exists()

    @pytest.mark.slow
    def test_oak_trains_every_seed(self, invoke, dataset, runs, train_cfg):
        result = invoke("sweep", "--dataset", dataset, "--method", "oak", "--seeds", "0..1", "--config", train_cfg)

        assert result.exit_code == 0, result.output
        for seed in (0, 1):
            for context in ("color", "shape"):
                assert (runs / "d0" / context / "oak" / f"seed{seed}" / "tokens.emb").exists()
        assert (runs / "d0" / "omni" / "oak" / "aggregate" / "aggregate.txt").exists()
