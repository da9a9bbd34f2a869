from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import typer
from rich.markup import escape

from .config import RunConfig, load_run_config, parse_override
from .core import run_ablate, run_arch, run_eval, run_infer, run_perturb, run_synth, run_train
from .errors import USAGE_ERRORS, ConfigurationError, LanegenError
from .log import console, setup_logging

app = typer.Typer(
    help="Generate lane and road-symbol maps from road scenes with a conditioned GAN."
)


# ---------- Shared options ----------


def _config_opt() -> Any:
    return typer.Option(None, "--config", "-c", help="TOML config file")


def _set_opt() -> Any:
    return typer.Option(
        None, "--set", "-s", help="Dotted override, e.g. train.batch_size=4 (repeatable)"
    )


def _out_opt() -> Any:
    return typer.Option(None, "--out", "-o", help="Run directory for every output")


def _palette_opt() -> Any:
    return typer.Option(None, "--palette", help="Palette CSV (class_id,name,R,G,B)")


def _verbose_opt() -> Any:
    return typer.Option(False, "--verbose", "-v", help="Debug logging")


def _env_opt() -> Any:
    return typer.Option(None, "--env", help="Path to a .env file to load")


@contextmanager
def _guard() -> Iterator[None]:
    """Map lanegen errors to exit codes: 2 for usage/validation, 1 for runtime and I/O."""
    try:
        yield
    except USAGE_ERRORS as exc:
        console.print(f"[red]error:[/red] {escape(str(exc))}")
        raise typer.Exit(code=2) from exc
    except LanegenError as exc:
        console.print(f"[red]failed:[/red] {escape(str(exc))}")
        raise typer.Exit(code=1) from exc
    except OSError as exc:
        console.print(f"[red]failed:[/red] {escape(str(exc))}")
        raise typer.Exit(code=1) from exc


def _parse_ints(raw: str, what: str) -> list[int]:
    try:
        return [int(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise ConfigurationError(f"{what} must be comma-separated integers, got {raw!r}") from None


def _load(
    config: Path | None,
    sets: list[str] | None,
    out: Path | None,
    palette: Path | None,
    env: str | None,
    verbose: bool,
    flags: dict[str, Any] | None = None,
) -> RunConfig:
    setup_logging(verbose)
    overrides: dict[str, Any] = dict(parse_override(item) for item in sets or [])
    if out is not None:
        overrides["out"] = str(out)
    if palette is not None:
        overrides["palette"] = str(palette)
    overrides.update({k: v for k, v in (flags or {}).items() if v is not None})
    return load_run_config(config, overrides, dotenv_path=env)


# ---------- Commands ----------


@app.command("synth")
def synth(
    seed: int | None = typer.Option(None, help="Dataset seed"),
    counts: str | None = typer.Option(None, help="train,val,test sample counts, e.g. 8,2,2"),
    size: int | None = typer.Option(None, help="Square image size in pixels"),
    preset: str | None = typer.Option(None, help="Palette preset (apolloscape | bdd100k)"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Generate a synthetic road-scene dataset in the train/val/test layout.
    """
    with _guard():
        flags: dict[str, Any] = {
            "synth.seed": seed,
            "train.arch.image_size": size,
            "palette_preset": preset,
        }
        if counts is not None:
            parsed = _parse_ints(counts, "--counts")
            if len(parsed) != 3:
                raise ConfigurationError(f"--counts needs 3 values, got {counts!r}")
            for name, n in zip(("train", "val", "test"), parsed):
                flags[f"synth.counts.{name}"] = n
        cfg = _load(config, sets, out, palette, env, verbose, flags)
        splits = run_synth(cfg)
    total = sum(len(s) for s in splits.values())
    typer.echo(f"Synthesized {total} pairs -> {cfg.out}")


@app.command("train")
def train_cmd(
    data: Path | None = typer.Option(None, "--data", help="Dataset root with train/val/test"),
    epochs: int | None = typer.Option(None, help="Total epochs to reach"),
    seed: int | None = typer.Option(None, help="Training seed"),
    batch_size: int | None = typer.Option(None, "--batch-size", help="Mini-batch size"),
    no_adversarial: bool = typer.Option(
        False, "--no-adversarial", help="Train on the MSE term only (ablation)"
    ),
    source_mode: str | None = typer.Option(None, "--source-mode", help="teacher | noise"),
    resume: Path | None = typer.Option(None, "--resume", help="Checkpoint to continue from"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Train generator and discriminator; writes checkpoint.pt and train_log.csv.
    """
    with _guard():
        flags = {
            "train.epochs": epochs,
            "train.seed": seed,
            "train.batch_size": batch_size,
            "train.source_mode": source_mode,
            "train.adversarial_enabled": False if no_adversarial else None,
        }
        cfg = _load(config, sets, out, palette, env, verbose, flags)
        state = run_train(cfg, data, resume)
    typer.echo(f"Trained to epoch {state.epoch} ({state.step} steps) -> {cfg.out}")


@app.command("infer")
def infer(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trained checkpoint"),
    source: Path = typer.Option(..., "--input", help="Split directory or directory of PNGs"),
    seed: int | None = typer.Option(None, help="Noise seed (item k uses seed + k)"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Generate <stem>.gen.png and <stem>.label.png for every input image.
    """
    with _guard():
        cfg = _load(config, sets, out, palette, env, verbose, {"infer_seed": seed})
        written = run_infer(cfg, checkpoint, source)
    typer.echo(f"Wrote {len(written) // 2} generations -> {cfg.out}")


@app.command("eval")
def eval_cmd(
    split: Path = typer.Option(..., "--split", help="Split directory with images/ and labels/"),
    checkpoint: Path | None = typer.Option(None, "--checkpoint", help="Trained checkpoint"),
    self_check: bool = typer.Option(
        False, "--self-check", help="Score ground truth against itself"
    ),
    seed: int | None = typer.Option(None, help="Noise seed"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Generate, quantize and score a split; writes metrics.csv and metrics.json.
    """
    with _guard():
        cfg = _load(config, sets, out, palette, env, verbose, {"infer_seed": seed})
        metrics = run_eval(cfg, split, checkpoint, self_check)
    mean = "undefined" if metrics.mean_iou is None else f"{metrics.mean_iou:.4f}"
    typer.echo(f"Mean IOU {mean} over {metrics.samples} samples -> {cfg.out}")


@app.command("perturb")
def perturb(
    split: Path = typer.Option(..., "--split", help="Split directory to perturb"),
    checkpoint: Path | None = typer.Option(
        None, "--checkpoint", help="Also evaluate clean vs adverse sets"
    ),
    kind: str | None = typer.Option(
        None, help="Perturb the whole split with one kind (noise | gamma | occlusion)"
    ),
    seed: int | None = typer.Option(None, help="Perturbation seed"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Build adverse_noise, adverse_gamma and adverse_occl from one split.
    """
    with _guard():
        flags = {"perturb.kind": kind, "perturb.seed": seed}
        cfg = _load(config, sets, out, palette, env, verbose, flags)
        reports = run_perturb(cfg, split, checkpoint)
    if reports:
        typer.echo(f"Robustness report -> {cfg.out / 'robustness.csv'}")
    else:
        typer.echo(f"Adverse sets -> {cfg.out}")


@app.command("ablate")
def ablate(
    data: Path | None = typer.Option(None, "--data", help="Dataset root with train/val/test"),
    seeds: str | None = typer.Option(None, help="Comma-separated training seeds"),
    epochs: int | None = typer.Option(None, help="Epochs per run"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    palette: Path | None = _palette_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Train with and without the adversarial loss per seed and compare IOU.
    """
    with _guard():
        flags: dict[str, Any] = {"train.epochs": epochs}
        if seeds is not None:
            flags["ablate.seeds"] = _parse_ints(seeds, "--seeds")
        cfg = _load(config, sets, out, palette, env, verbose, flags)
        run_dir = run_ablate(cfg, data)
    typer.echo(f"Ablation table -> {run_dir / 'ablation.csv'}")


@app.command("arch")
def arch(
    preset: str = typer.Option("full", help="Architecture preset (desk | full)"),
    config: Path | None = _config_opt(),
    sets: list[str] | None = _set_opt(),
    out: Path | None = _out_opt(),
    verbose: bool = _verbose_opt(),
    env: str | None = _env_opt(),
) -> None:
    """
    Build a preset's networks and report trainable parameter counts.
    """
    with _guard():
        cfg = _load(config, sets, out, None, env, verbose)
        counts = run_arch(cfg, preset)
    typer.echo(f"generator={counts['generator']} discriminator={counts['discriminator']}")


if __name__ == "__main__":
    app()
