"""fastskip CLI: reproducible fast-skip experiments on a synthetic task.

Usage:
    fastskip gen                              # train/dev/test splits + manifests
    fastskip train                            # SGD run, checkpoint + per-step CSV
    fastskip train --resume                   # continue from out_dir/model.fskm
    fastskip eval --mode fastskip             # report on the test split
    fastskip eval --mode greedy --split dev
    fastskip align --mode fastskip            # per-frame alignment records
    fastskip sweep --kind window              # spike-window grid on one checkpoint
    fastskip sweep --kind ablation --baseline runs/base/model.fskm
    fastskip config --set fsr_lambda=0        # print the resolved config
    fastskip version

Every command reads ``--config`` (or ``$FASTSKIP_CONFIG``) and any number of
``--set key=value`` overrides. Failures exit 1 with one stderr line
``error code=<CODE> message=<text>``.
"""

from __future__ import annotations

import csv
import functools
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import typer
from rich.console import Console
from rich.table import Table

from fastskip import __version__
from fastskip.core.checkpoint import load_checkpoint, save_checkpoint
from fastskip.core.config import ExperimentConfig, parse_key_values
from fastskip.core.data import (
    SPLIT_STREAMS,
    Dataset,
    generate,
    load_dataset,
    save_dataset,
    summarize,
    write_manifest,
)
from fastskip.core.evaluation import (
    MODES,
    align,
    evaluate,
    mean_agreement,
    write_alignments,
    write_report,
    write_utterance_csv,
)
from fastskip.core.logging import setup_logging
from fastskip.core.metrics import REPORT_COLUMNS, EvalReport, UtteranceResult
from fastskip.core.model import TinyTransducer
from fastskip.core.training import (
    StepRecord,
    read_training_log,
    train,
    write_training_log,
)
from fastskip.utils.exceptions import (
    CheckpointMismatchError,
    ConfigurationError,
    FastSkipError,
    FileFormatError,
    TrainingDivergedError,
)

app = typer.Typer(
    name="fastskip",
    help="Transducer training with fast-skip regularization and CTC frame skipping.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console()

CHECKPOINT_NAME = "model.fskm"
TRAIN_LOG_NAME = "train_log.csv"
CONFIG_NAME = "config.txt"
VERSION_NAME = "VERSION"

LAMBDA_GRID = (0.0, 0.001, 0.003, 0.005, 0.01, 0.02)
WINDOW_GRID = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2))
DELTA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
SWEEP_KINDS = ("lambda", "window", "delta", "ablation")

ConfigOption = typer.Option(
    None, "--config", "-c", help="key = value config file (default $FASTSKIP_CONFIG)"
)
SetOption = typer.Option(
    None, "--set", "-s", help="Override one config key: key=value (repeatable)"
)
CheckpointOption = typer.Option(
    None, "--checkpoint", help="Model file (default out_dir/model.fskm)"
)
SplitOption = typer.Option("test", "--split", help="train, dev or test")
ModeOption = typer.Option("fastskip", "--mode", "-m", help="greedy or fastskip")


def _fail(code: str, message: str) -> None:
    typer.echo(f"error code={code} message={message}", err=True)
    raise typer.Exit(1)


def handle_errors(func: Callable) -> Callable:
    """Turn fastskip errors into the machine-parsable error line and exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FastSkipError as e:
            _fail(e.error_code or "FASTSKIP_ERROR", e.message)
        except OSError as e:
            _fail("IO_ERROR", str(e))

    return wrapper


def _resolve(config: Optional[Path], sets: Optional[List[str]]) -> ExperimentConfig:
    overrides = parse_key_values("\n".join(sets or []))
    return ExperimentConfig.resolve(config, overrides)


def _write_provenance(out_dir: Path, cfg: ExperimentConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.write(out_dir / CONFIG_NAME)
    (out_dir / VERSION_NAME).write_text(f"fastskip {__version__}\n", encoding="utf-8")


def _split_path(data_dir: Path, split: str) -> Path:
    return data_dir / f"{split}.fskd"


def _load_split(cfg: ExperimentConfig, split: str) -> Dataset:
    if split not in SPLIT_STREAMS:
        raise ConfigurationError(f"Unknown split: {split}", config_key="split")
    path = _split_path(Path(cfg.data_dir), split)
    if not path.exists():
        raise FileFormatError(
            "Dataset file not found; run `fastskip gen` first", path=str(path)
        )
    dataset = load_dataset(path)
    if dataset.vocab_size != cfg.vocab_size:
        raise CheckpointMismatchError("vocab_size", dataset.vocab_size, cfg.vocab_size)
    if dataset.feat_dim != cfg.feat_dim:
        raise CheckpointMismatchError("feat_dim", dataset.feat_dim, cfg.feat_dim)
    return dataset


def _load_model(cfg: ExperimentConfig, checkpoint: Optional[Path]) -> TinyTransducer:
    path = checkpoint or Path(cfg.out_dir) / CHECKPOINT_NAME
    return load_checkpoint(path, expected=cfg.model()).params


def _report_table(title: str, report: EvalReport) -> Table:
    table = Table(title=title, show_header=False, border_style="blue")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for key, value in zip(REPORT_COLUMNS, report.csv_row()):
        table.add_row(key, value)
    return table


def _write_eval(
    out_dir: Path,
    cfg: ExperimentConfig,
    report: EvalReport,
    results: Sequence[UtteranceResult],
) -> None:
    _write_provenance(out_dir, cfg)
    write_report(report, out_dir / "report.txt")
    with (out_dir / "report.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        writer.writerow(report.csv_row())
    write_utterance_csv(results, out_dir / "utterances.csv")


# ── Training driver ──────────────────────────────────────────────────────


def run_training(
    cfg: ExperimentConfig, resume: bool = False
) -> Tuple[TinyTransducer, int]:
    """Train into ``cfg.out_dir``; returns final params and step.

    Checkpoint and log advance together, so after a crash or divergence the
    checkpoint is the last good one and the log covers exactly its steps plus
    the records leading to the failure.
    """
    out_dir = Path(cfg.out_dir)
    ckpt_path = out_dir / CHECKPOINT_NAME
    log_path = out_dir / TRAIN_LOG_NAME
    dataset = _load_split(cfg, "train")

    start_step = 0
    if resume and ckpt_path.exists():
        ckpt = load_checkpoint(ckpt_path, expected=cfg.model())
        params, start_step = ckpt.params, ckpt.step
        kept = []
        if log_path.exists():
            kept = [r for r in read_training_log(log_path) if r.step <= start_step]
        write_training_log(kept, log_path)
    else:
        params = TinyTransducer.init(cfg.model())
        write_training_log([], log_path)
    _write_provenance(out_dir, cfg)

    pending: List[StepRecord] = []

    def flush() -> None:
        write_training_log(pending, log_path, append=True)
        pending.clear()

    def on_checkpoint(p: TinyTransducer, step: int) -> None:
        save_checkpoint(ckpt_path, p, step)
        flush()

    try:
        result = train(
            params,
            dataset.utterances,
            cfg.fsr(),
            cfg.train(),
            start_step=start_step,
            on_checkpoint=on_checkpoint,
            on_step=pending.append,
        )
    except TrainingDivergedError:
        flush()
        raise
    return result.params, max(result.final_step, start_step)


# ── Commands ─────────────────────────────────────────────────────────────


@app.callback()
def main_callback(
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="DEBUG, INFO, WARNING, ERROR"
    ),
    log_json: Optional[bool] = typer.Option(
        None, "--log-json/--log-text", help="Log format (default JSON)"
    ),
):
    """Configure logging for every subcommand."""
    setup_logging(level=log_level, json_format=log_json)


@app.command("gen")
@handle_errors
def gen_cmd(
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Output dir (default data_dir)"
    ),
):
    """Generate train/dev/test splits with disjoint seed streams."""
    cfg = _resolve(config, sets)
    if out is not None:
        cfg = cfg.with_overrides({"data_dir": str(out)})
    data_dir = Path(cfg.data_dir)
    task = cfg.task()

    table = Table(title="Synthetic dataset", border_style="blue")
    for column in ("split", "utterances", "frames", "tokens", "frames/token"):
        table.add_column(column)

    splits = (("train", cfg.n_train), ("dev", cfg.n_dev), ("test", cfg.n_test))
    for split, n in splits:
        dataset = generate(task, n, split=split)
        save_dataset(dataset, _split_path(data_dir, split))
        write_manifest(dataset, data_dir / f"{split}.manifest")
        stats = summarize(dataset)
        table.add_row(
            split,
            str(stats["count"]),
            str(stats["total_frames"]),
            str(stats["total_tokens"]),
            f"{stats['mean_frames_per_token']:.2f}",
        )
    _write_provenance(data_dir, cfg)
    console.print(table)
    console.print(f"[green]Wrote dataset to {data_dir}[/green]")


@app.command("train")
@handle_errors
def train_cmd(
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
    resume: bool = typer.Option(
        False, "--resume", help="Continue from the out_dir checkpoint"
    ),
):
    """Train the transducer; writes model.fskm and train_log.csv to out_dir."""
    cfg = _resolve(config, sets)
    _, step = run_training(cfg, resume=resume)
    ckpt_path = Path(cfg.out_dir) / CHECKPOINT_NAME
    console.print(f"[green]Trained to step {step}[/green] → {ckpt_path}")


@app.command("eval")
@handle_errors
def eval_cmd(
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
    checkpoint: Optional[Path] = CheckpointOption,
    split: str = SplitOption,
    mode: str = ModeOption,
    threads: Optional[int] = typer.Option(None, "--threads", help="Encoder workers"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Report dir"),
):
    """Decode a split and write report.txt, report.csv and utterances.csv."""
    cfg = _resolve(config, sets)
    if threads is not None:
        cfg = cfg.with_overrides({"threads": threads})
    if mode not in MODES:
        raise ConfigurationError(f"Unknown decode mode: {mode}", config_key="mode")
    params = _load_model(cfg, checkpoint)
    dataset = _load_split(cfg, split)

    report, results = evaluate(
        params, dataset.utterances, cfg.skip(), mode, threads=cfg.threads
    )
    out_dir = out or Path(cfg.out_dir) / f"eval-{mode}-{split}"
    _write_eval(out_dir, cfg, report, results)
    console.print(_report_table(f"{mode} on {split}", report))
    console.print(f"[green]Report written to {out_dir}[/green]")


@app.command("align")
@handle_errors
def align_cmd(
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
    checkpoint: Optional[Path] = CheckpointOption,
    split: str = SplitOption,
    mode: str = ModeOption,
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Alignment dir"),
):
    """Write per-frame alignment records (frame, cb, triggered, tokens)."""
    cfg = _resolve(config, sets)
    if mode not in MODES:
        raise ConfigurationError(f"Unknown decode mode: {mode}", config_key="mode")
    params = _load_model(cfg, checkpoint)
    dataset = _load_split(cfg, split)

    alignments = align(
        params, dataset.utterances, cfg.skip(), mode, threads=cfg.threads
    )
    out_dir = out or Path(cfg.out_dir) / f"align-{mode}-{split}"
    _write_provenance(out_dir, cfg)
    write_alignments(alignments, out_dir)
    overall = mean_agreement(r for _, r in alignments)
    shown = "n/a" if overall is None else f"{overall:.4f}"
    console.print(
        f"[green]{len(alignments)} alignments[/green] → {out_dir} "
        f"(mean agreement {shown})"
    )


def _write_sweep(
    out_dir: Path, rows: Sequence[Tuple[Dict[str, str], EvalReport]]
) -> Path:
    path = out_dir / "sweep.csv"
    cell_keys = list(rows[0][0]) if rows else []
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cell_keys + list(REPORT_COLUMNS))
        for cell, report in rows:
            writer.writerow([cell[k] for k in cell_keys] + report.csv_row())
    return path


@app.command("sweep")
@handle_errors
def sweep_cmd(
    kind: str = typer.Option(
        ..., "--kind", "-k", help="lambda, window, delta or ablation"
    ),
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
    checkpoint: Optional[Path] = typer.Option(
        None, "--checkpoint", help="Model for window/delta; FSR model for ablation"
    ),
    baseline: Optional[Path] = typer.Option(
        None, "--baseline", help="lambda=0 model for ablation"
    ),
    split: str = SplitOption,
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Sweep dir"),
):
    """Run one experiment grid and tabulate it in sweep.csv."""
    if kind not in SWEEP_KINDS:
        raise ConfigurationError(f"Unknown sweep kind: {kind}", config_key="kind")
    cfg = _resolve(config, sets)
    if kind == "ablation" and baseline is None:
        raise ConfigurationError("ablation needs --baseline", config_key="baseline")
    out_dir = out or Path(cfg.out_dir) / f"sweep-{kind}"
    _write_provenance(out_dir, cfg)
    dataset = _load_split(cfg, split)
    rows: List[Tuple[Dict[str, str], EvalReport]] = []

    def run_cell(
        cell: Dict[str, str],
        cell_cfg: ExperimentConfig,
        params: TinyTransducer,
        mode: str,
    ) -> None:
        report, results = evaluate(
            params, dataset.utterances, cell_cfg.skip(), mode, threads=cell_cfg.threads
        )
        name = "-".join(f"{k}{v}" for k, v in cell.items())
        _write_eval(out_dir / name, cell_cfg, report, results)
        rows.append((cell, report))

    if kind == "lambda":
        for lam in LAMBDA_GRID:
            cell_cfg = cfg.with_overrides(
                {"fsr_lambda": lam, "out_dir": str(out_dir / f"train-lambda{lam}")}
            )
            params, _ = run_training(cell_cfg)
            run_cell({"lambda": str(lam)}, cell_cfg, params, "fastskip")
    elif kind == "window":
        params = _load_model(cfg, checkpoint)
        for w_left, w_right in WINDOW_GRID:
            cell_cfg = cfg.with_overrides({"w_left": w_left, "w_right": w_right})
            cell = {"w_left": str(w_left), "w_right": str(w_right)}
            run_cell(cell, cell_cfg, params, "fastskip")
    elif kind == "delta":
        params = _load_model(cfg, checkpoint)
        for delta in DELTA_GRID:
            cell_cfg = cfg.with_overrides({"delta": delta})
            run_cell({"delta": str(delta)}, cell_cfg, params, "fastskip")
    else:
        fsr_model = _load_model(cfg, checkpoint)
        base_model = _load_model(cfg, baseline)
        for row, params, fsr, mode in (
            ("A", fsr_model, "on", "fastskip"),
            ("B", fsr_model, "on", "greedy"),
            ("C", base_model, "off", "fastskip"),
            ("D", base_model, "off", "greedy"),
        ):
            run_cell({"row": row, "fsr": fsr, "mode": mode}, cfg, params, mode)

    path = _write_sweep(out_dir, rows)
    table = Table(title=f"sweep {kind}", border_style="blue")
    for column in list(rows[0][0]) + ["cer", "joint_calls_total", "skip_ratio"]:
        table.add_column(column)
    for cell, report in rows:
        table.add_row(
            *cell.values(),
            f"{report.cer:.4f}",
            str(report.joint_calls_total),
            f"{report.skip_ratio:.4f}",
        )
    console.print(table)
    console.print(f"[green]Sweep written to {path}[/green]")


@app.command("config")
@handle_errors
def config_cmd(
    config: Optional[Path] = ConfigOption,
    sets: Optional[List[str]] = SetOption,
):
    """Print the resolved configuration in key = value form."""
    typer.echo(_resolve(config, sets).to_text(), nl=False)


@app.command("version")
def version_cmd():
    """Show the fastskip version."""
    typer.echo(f"fastskip {__version__}")


def main():
    """Entry point for CLI."""
    app()


if __name__ == "__main__":
    main()
