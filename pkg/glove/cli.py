from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import typer

try:  # newer typer releases vendor click and raise their own exception classes
    from typer._click import exceptions as _click_exceptions
except ImportError:
    _click_exceptions = click.exceptions
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from .augment import augment_dataset
from .config import SYNTH_PRESETS, RunConfig, dump_config, get_settings, load_run_config
from .data import load_corpus, load_recording
from .errors import GloveError, UnknownLabel
from .labels import SYMBOLS, ClassLabel, resolve_label
from .pipeline import MODEL_KINDS, Pipeline, StageResult, ablation_summary, run_ablation
from .preprocess import load_windows, save_windows, segment
from .synth import generate_corpus
from .utils import derive_seed, section_seed

app = typer.Typer(help="Data-glove sign recognition pipeline")

RUN_CONFIG = "run_config.txt"


def setup_logging(level: str) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    root.setLevel(level)


@app.callback()
def main_options(
    ctx: typer.Context,
    run: str = typer.Option("default", "--run", help="Run directory name under GLOVE_RUN_ROOT"),
    config: Optional[Path] = typer.Option(None, "--config", exists=True, dir_okay=False),
    set_: List[str] = typer.Option([], "--set", help="Override a config key: section.key=value"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Stages share one run directory; each reads what the previous one wrote."""
    settings = get_settings()
    setup_logging("DEBUG" if verbose else settings.log_level)
    ctx.obj = {"run_dir": settings.run_root / run, "config": config, "overrides": list(set_)}


def _resolve_config(ctx: typer.Context, extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Stored run config (or ``--config``), then ``--set`` overrides, then command flags."""
    run_dir: Path = ctx.obj["run_dir"]
    path = ctx.obj["config"]
    if path is None and (run_dir / RUN_CONFIG).exists():
        path = run_dir / RUN_CONFIG
    try:
        return load_run_config(path, ctx.obj["overrides"], extra)
    except ValidationError:
        raise
    except ValueError as exc:
        raise typer.BadParameter(str(exc)) from exc


def _pipeline(ctx: typer.Context, extra: Optional[Dict[str, Any]] = None) -> Pipeline:
    return Pipeline(ctx.obj["run_dir"], _resolve_config(ctx, extra))


def _remember(pipeline: Pipeline) -> None:
    """Store the resolved config so later stages of the run need no repeated flags."""
    (pipeline.run_dir / RUN_CONFIG).write_text(dump_config(pipeline.cfg), encoding="utf-8")


def _run_stage(
    ctx: typer.Context, stage: str, extra: Optional[Dict[str, Any]] = None, **kwargs: Any
) -> StageResult:
    pipeline = _pipeline(ctx, extra)
    result: StageResult = getattr(pipeline, stage)(**kwargs)
    _remember(pipeline)
    typer.echo(json.dumps(result.summary, indent=2, default=str))
    typer.echo(f"{result.stage} written to {result.directory}")
    return result


@app.command()
def synth(
    ctx: typer.Context,
    preset: str = typer.Option("default", help=f"One of: {', '.join(SYNTH_PRESETS)}"),
    seed: Optional[int] = typer.Option(None, help="Root seed"),
) -> None:
    """Generate the synthetic glove corpus."""
    if preset not in SYNTH_PRESETS:
        raise typer.BadParameter(f"preset must be one of {', '.join(SYNTH_PRESETS)}")
    extra: Dict[str, Any] = {f"synth.{k}": v for k, v in SYNTH_PRESETS[preset].items()}
    extra["seed"] = seed
    _run_stage(ctx, "synth", extra)


@app.command()
def split(
    ctx: typer.Context,
    corpus: Optional[Path] = typer.Option(
        None, exists=True, file_okay=False, help="Corpus directory (default: this run's synth output)"
    ),
    seed: Optional[int] = typer.Option(None, help="Root seed"),
) -> None:
    """Stratified recording-level train/val/test split."""
    _run_stage(ctx, "split", {"seed": seed}, corpus=corpus)


def _label_for(path: Path, label: Optional[str]) -> ClassLabel:
    if label:
        return resolve_label(label)
    try:
        return resolve_label(path.parent.name)
    except UnknownLabel:
        return ClassLabel(SYMBOLS[0])


@app.command("segment")
def segment_cmd(
    ctx: typer.Context,
    window: Optional[int] = typer.Option(None, "--window", "-w", min=1, help="Window length"),
    recording: Optional[Path] = typer.Option(
        None, exists=True, dir_okay=False, help="Count the windows of one CSV file only"
    ),
    label: Optional[str] = typer.Option(None, help="Label for --recording (default: parent dir)"),
) -> None:
    """Cut the split recordings into fixed-length windows."""
    if recording is not None:
        cfg = _resolve_config(ctx, {"window.size": window})
        rec = load_recording(recording, _label_for(recording, label))
        windows = segment(rec, cfg.window.size)
        dropped = rec.n_frames - len(windows) * cfg.window.size
        typer.echo(
            f"{recording}: {rec.n_frames} samples -> {len(windows)} windows of "
            f"{cfg.window.size} ({dropped} leading samples dropped)"
        )
        return
    _run_stage(ctx, "segment", {"window.size": window})


@app.command()
def augment(
    ctx: typer.Context,
    variants: Optional[int] = typer.Option(None, min=0, help="Augmented copies per window"),
    seed: Optional[int] = typer.Option(None, help="Augmentation seed"),
    input_path: Optional[Path] = typer.Option(
        None, "--input", exists=True, dir_okay=False, help="Window block file to expand"
    ),
    output_path: Optional[Path] = typer.Option(None, "--output", help="Expanded block file"),
) -> None:
    """Expand windows with noise, time warp, scaling and shift variants."""
    extra = {"augment.variants_per_sample": variants, "augment.rng_seed": seed}
    if input_path is not None:
        if output_path is None:
            raise typer.BadParameter("--output is required with --input")
        cfg = _resolve_config(ctx, extra)
        windows = load_windows(input_path)
        rng = section_seed(cfg.augment.rng_seed, cfg.seed, "augment")
        expanded = augment_dataset(windows, cfg.augment, rng=derive_seed(rng, "file"))
        save_windows(output_path, expanded, {"source": str(input_path)})
        typer.echo(f"{len(windows)} windows -> {len(expanded)} written to {output_path}")
        return
    _run_stage(ctx, "augment", extra)


@app.command()
def mfcc(
    ctx: typer.Context,
    dump: bool = typer.Option(False, "--dump", help="Also write one MFC1 block per window"),
) -> None:
    """Compute (5, F, 12) MFCC tensors for every window."""
    _run_stage(ctx, "mfcc", dump=dump)


@app.command()
def train(
    ctx: typer.Context,
    model: str = typer.Option("multibranch", help=f"One of: {', '.join(MODEL_KINDS)}"),
    seed: Optional[int] = typer.Option(None, help="Training seed"),
) -> None:
    """Train a model on the augmented training windows."""
    if model not in MODEL_KINDS:
        raise typer.BadParameter(f"model must be one of {', '.join(MODEL_KINDS)}")
    section = "simplenn" if model == "simplenn" else "train"
    _run_stage(ctx, "train", {f"{section}.rng_seed": seed}, model=model)


@app.command()
def evaluate(ctx: typer.Context) -> None:
    """Score the trained model on the untouched test windows."""
    result = _run_stage(ctx, "evaluate")
    typer.echo((result.directory / "report.txt").read_text(encoding="utf-8"))


@app.command()
def report(ctx: typer.Context) -> None:
    """Render confusion-matrix and training-curve SVGs."""
    _run_stage(ctx, "report")


@app.command("ablate-window")
def ablate_window(
    ctx: typer.Context,
    model: Optional[str] = typer.Option(None, help=f"One of: {', '.join(MODEL_KINDS)}"),
    seeds: Optional[int] = typer.Option(None, min=1, help="Seeds per window size"),
    windows: Optional[str] = typer.Option(None, help="Comma separated sizes, e.g. 50,75,100"),
    corpus: Optional[Path] = typer.Option(
        None, exists=True, file_okay=False, help="Corpus directory (default: synthetic)"
    ),
) -> None:
    """Rerun split to evaluate for several window sizes and compare."""
    if model is not None and model not in MODEL_KINDS:
        raise typer.BadParameter(f"model must be one of {', '.join(MODEL_KINDS)}")
    pipeline = _pipeline(
        ctx, {"ablation.model": model, "ablation.seeds": seeds, "ablation.windows": windows}
    )
    cfg = pipeline.cfg
    if corpus is not None:
        recordings, _ = load_corpus(corpus, cfg.data.zero_eps)
    else:
        synth_dir = pipeline.stage_dir("synth") / "corpus"
        if synth_dir.is_dir():
            pipeline.require("synth")
            recordings, _ = load_corpus(synth_dir, cfg.data.zero_eps)
        else:
            seed = section_seed(cfg.synth.rng_seed, cfg.seed, "synth")
            recordings = generate_corpus(cfg.synth, seed=seed)
    table = run_ablation(recordings, cfg)
    out_dir = pipeline.run_dir / "ablate-window"
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "ablation.csv", index=False, float_format="%.6f")
    (out_dir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    _remember(pipeline)
    typer.echo(ablation_summary(table).to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    typer.echo(f"ablation table written to {out_dir / 'ablation.csv'}")


def _error_line(kind: str, exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"glove-error kind={kind} type={type(exc).__name__} msg={msg}"


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point; maps failures onto exit codes with a single stderr tag line."""
    try:
        code = app(args=argv, prog_name="glove", standalone_mode=False)
    except _click_exceptions.Exit as exc:
        return exc.exit_code
    except _click_exceptions.UsageError as exc:
        typer.echo(_error_line("usage", exc), err=True)
        return 1
    except ValidationError as exc:
        typer.echo(_error_line("usage", exc), err=True)
        return 1
    except GloveError as exc:
        typer.echo(_error_line(exc.kind, exc), err=True)
        return exc.exit_code
    except _click_exceptions.Abort:
        typer.echo("glove-error kind=usage type=Abort msg=aborted", err=True)
        return 1
    return code if isinstance(code, int) else 0


__all__ = ["app", "main", "setup_logging"]


if __name__ == "__main__":
    sys.exit(main())
