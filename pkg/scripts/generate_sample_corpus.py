"""Write a small synthetic glove corpus (CSV per recording plus manifest.csv)."""
from __future__ import annotations

from pathlib import Path

import typer

from glove.synth import generate_corpus, synth_config, write_corpus


def build_corpus(out_dir: Path, preset: str = "default", per_class: int = 5, seed: int = 7) -> Path:
    cfg = synth_config(preset, recordings_per_class=per_class)
    return write_corpus(generate_corpus(cfg, seed=seed), out_dir)


def main(
    out_dir: Path = typer.Argument(
        Path(__file__).resolve().parent.parent / "samples" / "corpus"
    ),
    preset: str = typer.Option("default"),
    per_class: int = typer.Option(5, min=3),
    seed: int = typer.Option(7),
) -> None:
    manifest = build_corpus(out_dir, preset, per_class, seed)
    typer.echo(f"Generated {manifest.parent}")


if __name__ == "__main__":
    typer.run(main)
