"""Tests for the fastskip CLI."""

import csv
from typing import List

import pytest
from typer.testing import CliRunner

from fastskip import __version__
from fastskip.cli import CHECKPOINT_NAME, TRAIN_LOG_NAME, app
from fastskip.core.training import read_training_log

runner = CliRunner()


def with_set(args: List[str], key: str, value) -> List[str]:
    """Replace (or add) one ``--set key=value`` pair."""
    out: List[str] = []
    skip = False
    for i, arg in enumerate(args):
        if skip:
            skip = False
            continue
        if arg == "--set" and args[i + 1].startswith(f"{key}="):
            skip = True
            continue
        out.append(arg)
    return out + ["--set", f"{key}={value}"]


def invoke(*args: str):
    return runner.invoke(app, list(args))


@pytest.fixture
def generated(tiny_run):
    result = invoke("gen", *tiny_run)
    assert result.exit_code == 0, result.output
    return tiny_run


@pytest.fixture
def trained(generated):
    result = invoke("train", *generated)
    assert result.exit_code == 0, result.output
    return generated


class TestInfo:
    def test_version(self):
        result = invoke("version")
        assert result.exit_code == 0
        assert result.stdout.strip() == f"fastskip {__version__}"

    def test_config_prints_resolved_values(self):
        result = invoke("config", "--set", "fsr_lambda=0", "--set", "delta=0.3")
        assert result.exit_code == 0
        assert "fsr_lambda = 0.0" in result.stdout
        assert "delta = 0.3" in result.stdout

    def test_config_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("w_left = 2\n")
        result = invoke("config", "--config", str(path))
        assert "w_left = 2" in result.stdout


class TestErrors:
    def test_unknown_key(self):
        result = invoke("config", "--set", "lambda=0.1")
        assert result.exit_code == 1
        assert "error code=CONFIGURATION_ERROR" in result.output

    def test_zero_training_utterances(self, tiny_run):
        result = invoke("gen", *with_set(tiny_run, "n_train", 0))
        assert result.exit_code == 1
        assert "error code=CONFIGURATION_ERROR message=n_train" in result.output

    def test_eval_without_checkpoint(self, generated):
        result = invoke("eval", *generated)
        assert result.exit_code == 1
        assert "error code=FORMAT_ERROR" in result.output

    def test_train_without_data(self, tiny_run):
        result = invoke("train", *tiny_run)
        assert result.exit_code == 1
        assert "error code=FORMAT_ERROR" in result.output

    def test_corrupt_dataset_is_reported(self, generated, tmp_path):
        path = tmp_path / "data" / "train.fskd"
        raw = bytearray(path.read_bytes())
        raw[22] = 0xFF
        path.write_bytes(bytes(raw))
        result = invoke("train", *generated)
        assert result.exit_code == 1
        assert "error code=CORRUPT_FILE" in result.output

    def test_unknown_mode(self, trained):
        result = invoke("eval", *trained, "--mode", "beam")
        assert result.exit_code == 1
        assert "error code=CONFIGURATION_ERROR" in result.output


class TestPipeline:
    def test_gen_writes_splits(self, generated, tmp_path):
        data = tmp_path / "data"
        for split in ("train", "dev", "test"):
            assert (data / f"{split}.fskd").exists()
            assert (data / f"{split}.manifest").exists()
        assert (data / "config.txt").exists()
        assert (data / "VERSION").read_text().strip() == f"fastskip {__version__}"

    def test_gen_is_reproducible(self, generated, tmp_path):
        again = tmp_path / "again"
        assert invoke("gen", *generated, "--out", str(again)).exit_code == 0
        for split in ("train", "dev", "test"):
            first = (tmp_path / "data" / f"{split}.fskd").read_bytes()
            assert (again / f"{split}.fskd").read_bytes() == first

    def test_train_writes_checkpoint_and_log(self, trained, tmp_path):
        run = tmp_path / "run"
        assert (run / CHECKPOINT_NAME).exists()
        records = read_training_log(run / TRAIN_LOG_NAME)
        assert [r.step for r in records] == [1, 2, 3, 4, 5, 6]

    def test_resume_matches_uninterrupted_run(self, generated, tmp_path):
        full = with_set(generated, "out_dir", tmp_path / "full")
        assert invoke("train", *full).exit_code == 0

        part = with_set(generated, "out_dir", tmp_path / "part")
        assert invoke("train", *with_set(part, "max_steps", 3)).exit_code == 0
        result = invoke("train", *part, "--resume")
        assert result.exit_code == 0, result.output

        full_ckpt = (tmp_path / "full" / CHECKPOINT_NAME).read_bytes()
        part_ckpt = (tmp_path / "part" / CHECKPOINT_NAME).read_bytes()
        assert full_ckpt == part_ckpt
        assert read_training_log(tmp_path / "full" / TRAIN_LOG_NAME) == read_training_log(
            tmp_path / "part" / TRAIN_LOG_NAME
        )

    def test_eval_report(self, trained, tmp_path):
        result = invoke("eval", *trained, "--mode", "fastskip")
        assert result.exit_code == 0, result.output
        out = tmp_path / "run" / "eval-fastskip-test"
        report = dict(
            line.split("=", 1) for line in (out / "report.txt").read_text().splitlines()
        )
        assert report["mode"] == "fastskip"
        assert report["utterances"] == "3"
        with (out / "utterances.csv").open() as fh:
            assert len(list(csv.DictReader(fh))) == 3
        assert (out / "report.csv").exists()
        assert (out / "config.txt").exists()

    def test_greedy_never_skips(self, trained, tmp_path):
        out = tmp_path / "greedy"
        result = invoke("eval", *trained, "--mode", "greedy", "--out", str(out))
        assert result.exit_code == 0, result.output
        assert "skip_ratio=0.000000" in (out / "report.txt").read_text()

    def test_align(self, trained, tmp_path):
        result = invoke("align", *trained, "--split", "dev")
        assert result.exit_code == 0, result.output
        out = tmp_path / "run" / "align-fastskip-dev"
        assert len(list(out.glob("*.tsv"))) == 3
        assert (out / "summary.txt").read_text().splitlines()[-1].startswith(
            "# mean_agreement="
        )

    def test_window_sweep(self, trained, tmp_path):
        result = invoke("sweep", "--kind", "window", *trained)
        assert result.exit_code == 0, result.output
        with (tmp_path / "run" / "sweep-window" / "sweep.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 7
        assert rows[0]["w_left"] == "0"

    def test_ablation_needs_baseline(self, trained):
        result = invoke("sweep", "--kind", "ablation", *trained)
        assert result.exit_code == 1
        assert "error code=CONFIGURATION_ERROR" in result.output
