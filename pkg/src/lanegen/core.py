"""
Pipelines behind the CLI commands. Every run writes into ``config.out`` and
echoes its merged RunConfig there; input dataset directories are only read.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import ARCH_PRESETS, RunConfig, echo_config
from .data.dataset import DatasetSplit, load_split, write_split
from .data.images import read_rgb, resize_rgb
from .data.synth import synth_dataset
from .errors import ConfigurationError, DatasetError, InputValidationError
from .inference import generate_batch, noise_agreement, write_generation
from .log import get_logger
from .metrics import ConfusionCounts, MetricsReport, accumulate, report, write_report
from .model import Generator, build_networks, count_parameters
from .palette import ClassPalette, resolve_palette, save_palette
from .perturb import build_adverse_sets, perturb_split
from .reports import (
    ablation_table,
    arch_table,
    metrics_table,
    robustness_table,
    stdout,
    summarize_ablation,
    write_ablation,
    write_robustness,
)
from .trainer import TrainState, train
from .utils import ensure_dir, sha256_file, utcnow_iso

logger = get_logger(__name__)


# ---------- Shared helpers ----------


def _start_run(config: RunConfig) -> Path:
    try:
        out = ensure_dir(config.out)
        echo_config(config, out)
    except OSError as exc:
        raise DatasetError(f"cannot write run directory {config.out}: {exc}") from exc
    logger.debug("run started %s -> %s", utcnow_iso(), out)
    return out


def _palette(config: RunConfig) -> ClassPalette:
    return resolve_palette(config.palette, config.palette_preset)


def _data_root(config: RunConfig, data_root: Path | None) -> Path:
    root = data_root or config.data_root
    if root is None:
        raise ConfigurationError("no dataset given; pass --data or set data_root")
    if not root.is_dir():
        raise ConfigurationError(f"dataset directory not found: {root}")
    return root


def _nonempty(split: DatasetSplit) -> DatasetSplit:
    if len(split) == 0:
        raise InputValidationError(f"split {split.name!r} is empty")
    return split


def predict_counts(
    generator: Generator | None,
    split: DatasetSplit,
    palette: ClassPalette,
    seed: int,
) -> ConfusionCounts:
    """
    Confusion counts of generate -> quantize against the split's targets.
    generator None evaluates ground truth against itself (self-check).
    """
    counts = ConfusionCounts.empty(len(palette))
    if generator is None:
        for s in split.samples:
            counts = accumulate(counts, s.target, s.target)
        return counts
    generated = generate_batch(generator, [s.context for s in split.samples], seed, palette)
    for s, (_, labels) in zip(split.samples, generated):
        counts = accumulate(counts, labels, s.target)
    return counts


def _load_generator(checkpoint: Path) -> TrainState:
    state = load_checkpoint(checkpoint)
    logger.info(
        "loaded %s (epoch %d, step %d, sha256 %s)",
        checkpoint,
        state.epoch,
        state.step,
        sha256_file(checkpoint)[:12],
    )
    return state


# ---------- synth ----------


def run_synth(config: RunConfig) -> dict[str, DatasetSplit]:
    out = _start_run(config)
    palette = _palette(config)
    save_palette(palette, out / "palette.csv")
    return synth_dataset(
        config.synth.seed,
        config.synth.counts.model_dump(),
        palette,
        config.train.arch.image_size,
        root=out,
    )


# ---------- train ----------


def run_train(
    config: RunConfig, data_root: Path | None = None, resume: Path | None = None
) -> TrainState:
    root = _data_root(config, data_root)
    out = _start_run(config)
    train_config = config.train
    state: TrainState | None = None
    if resume is not None:
        state = load_checkpoint(resume)
        if state.config.model_copy(update={"epochs": train_config.epochs}) != train_config:
            logger.warning("resuming with the checkpoint's training config; only epochs is taken")
        train_config = state.config.model_copy(update={"epochs": train_config.epochs})
        palette = state.palette
        logger.info("resuming from %s at epoch %d", resume, state.epoch)
    else:
        palette = _palette(config)
    split = load_split(
        root / "train",
        palette,
        train_config.arch.image_size,
        name="train",
        workers=config.io_workers,
    )
    return train(_nonempty(split), train_config, palette, out, state)


# ---------- infer ----------


def _context_images(source: Path, size: int) -> list[tuple[str, np.ndarray]]:
    directory = source / "images" if (source / "images").is_dir() else source
    if not directory.is_dir():
        raise DatasetError(f"no image directory at {source}")
    return [(p.stem, resize_rgb(read_rgb(p), size)) for p in sorted(directory.glob("*.png"))]


def run_infer(
    config: RunConfig,
    checkpoint: Path,
    source: Path,
    agreement_seeds: tuple[int, int] | None = None,
) -> list[Path]:
    """Write <stem>.gen.png / <stem>.label.png per image plus noise_agreement.csv."""
    state = _load_generator(checkpoint)
    out = _start_run(config)
    size = state.config.arch.image_size
    items = _context_images(source, size)
    if not items:
        raise InputValidationError(f"no PNG images found under {source}")
    seed = config.infer_seed
    generated = generate_batch(state.generator, [ctx for _, ctx in items], seed, state.palette)
    written: list[Path] = []
    for (stem, _), generation in zip(items, generated):
        written.extend(write_generation(out, stem, generation, state.palette))

    seeds = agreement_seeds or (seed, seed + 1)
    with (out / "noise_agreement.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stem", "seed_a", "seed_b", "agreement"])
        for stem, ctx in items:
            rate = noise_agreement(state.generator, ctx, seeds, state.palette)
            writer.writerow([stem, seeds[0], seeds[1], f"{rate:.6f}"])
    logger.info("wrote %d generations to %s", len(items), out)
    return written


# ---------- eval ----------


def run_eval(
    config: RunConfig,
    split_dir: Path,
    checkpoint: Path | None = None,
    self_check: bool = False,
) -> MetricsReport:
    if checkpoint is None and not self_check:
        raise ConfigurationError("eval needs --checkpoint, or --self-check")
    state = _load_generator(checkpoint) if checkpoint is not None and not self_check else None
    palette = state.palette if state is not None else _palette(config)
    size = state.config.arch.image_size if state is not None else config.train.arch.image_size
    split = _nonempty(load_split(split_dir, palette, size, workers=config.io_workers))
    out = _start_run(config)
    generator = state.generator if state is not None else None
    metrics = report(predict_counts(generator, split, palette, config.infer_seed), palette)
    write_report(metrics, out)
    stdout.print(metrics_table(metrics, title=f"Metrics on {split.name}"))
    return metrics


# ---------- perturb ----------


def _check_labels_unchanged(source: DatasetSplit, adverse: DatasetSplit) -> None:
    originals = {s.id: s.target for s in source.samples}
    for s in adverse.samples:
        base = s.id.rsplit("-", 1)[0]
        if not np.array_equal(originals[base], s.target):
            raise DatasetError(f"labels of {s.id} differ from {base}")


def run_perturb(
    config: RunConfig, split_dir: Path, checkpoint: Path | None = None
) -> dict[str, MetricsReport]:
    """
    Build the adverse sets from one split. With a checkpoint, evaluate the clean
    split, each adverse set and all adverse sets pooled, into robustness.csv.
    """
    state = _load_generator(checkpoint) if checkpoint is not None else None
    palette = state.palette if state is not None else _palette(config)
    size = state.config.arch.image_size if state is not None else config.train.arch.image_size
    split = _nonempty(load_split(split_dir, palette, size, workers=config.io_workers))
    out = _start_run(config)
    spec = config.perturb
    if spec.kind is None:
        sets = build_adverse_sets(split, spec, out_root=out, palette=palette)
    else:
        only = perturb_split(split.samples, spec.kind, spec, spec.seed, split.image_size)
        sets = {only.name: only}
        write_split(only, out / only.name, palette)
    for adverse in sets.values():
        _check_labels_unchanged(split, adverse)
    logger.info("labels verified unchanged across %d adverse sets", len(sets))

    if state is None:
        return {}
    seed = config.infer_seed
    counts = {"clean": predict_counts(state.generator, split, palette, seed)}
    for name, adverse in sets.items():
        counts[name] = predict_counts(state.generator, adverse, palette, seed)
    adverse_counts = [c for name, c in counts.items() if name != "clean"]
    if len(adverse_counts) > 1:
        pooled = adverse_counts[0]
        for c in adverse_counts[1:]:
            pooled = pooled + c
        counts["adverse_all"] = pooled
    reports = {name: report(c, palette) for name, c in counts.items()}
    write_robustness(reports, out / "robustness.csv")
    for name, metrics in reports.items():
        write_report(metrics, out, stem=f"metrics_{name}")
    stdout.print(robustness_table(reports))
    return reports


# ---------- ablate ----------


def run_ablate(config: RunConfig, data_root: Path | None = None) -> Path:
    """Train with and without the adversarial term per seed, then compare held-out IOU."""
    root = _data_root(config, data_root)
    out = _start_run(config)
    palette = _palette(config)
    size = config.train.arch.image_size
    train_split = _nonempty(
        load_split(root / "train", palette, size, name="train", workers=config.io_workers)
    )
    eval_name = config.ablate.eval_split
    eval_split = _nonempty(
        load_split(root / eval_name, palette, size, name=eval_name, workers=config.io_workers)
    )

    seeds: Sequence[int] = config.ablate.seeds
    if not seeds:
        raise ConfigurationError("ablate.seeds is empty")
    with_adv: list[MetricsReport] = []
    without_adv: list[MetricsReport] = []
    for seed in seeds:
        for adversarial, bucket in ((True, with_adv), (False, without_adv)):
            tag = "adv" if adversarial else "noadv"
            run_dir = out / f"seed{seed}-{tag}"
            cfg = config.train.model_copy(
                update={"seed": seed, "adversarial_enabled": adversarial}
            )
            logger.info("ablation run seed=%d adversarial=%s", seed, adversarial)
            state = train(train_split, cfg, palette, run_dir)
            metrics = report(
                predict_counts(state.generator, eval_split, palette, config.infer_seed), palette
            )
            write_report(metrics, run_dir)
            bucket.append(metrics)

    summary = summarize_ablation(seeds, with_adv, without_adv, config.ablate.top_classes)
    write_ablation(summary, out)
    stdout.print(ablation_table(summary))
    logger.info(
        "adversarial loss not worse on %d/%d seeds: %s",
        summary.wins,
        len(summary.seeds),
        "yes" if summary.adversarial_not_worse else "no",
    )
    return out


# ---------- arch ----------


def run_arch(config: RunConfig, preset: str) -> dict[str, int]:
    try:
        arch = ARCH_PRESETS[preset]
    except KeyError:
        raise ConfigurationError(
            f"unknown architecture preset {preset!r} (choose from {sorted(ARCH_PRESETS)})"
        ) from None
    out = _start_run(config)
    generator, discriminator = build_networks(arch)
    counts = {
        "generator": count_parameters(generator),
        "discriminator": count_parameters(discriminator),
    }
    (out / "arch.json").write_text(
        json.dumps({"preset": preset, "arch": arch.model_dump(mode="json"), **counts}, indent=2),
        encoding="utf-8",
    )
    stdout.print(arch_table(preset, counts))
    return counts


