"""
Alternating adversarial optimisation: one discriminator update on the detached
fake, then one generator update on the weighted MSE + adversarial objective.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .config import TrainConfig
from .data.dataset import DatasetSplit, SamplePair, epoch_order, iter_batches, validate_pair
from .errors import ConfigurationError, InputValidationError, TrainingDivergedError
from .inference import sample_noise
from .log import get_logger
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_loss_g,
    discriminator_loss,
    generative_loss,
    total_generator_loss,
    weighted_generator_loss,
)
from .model import Discriminator, Generator, build_networks, images_to_tensor
from .palette import ClassPalette, render_labels
from .utils import seed_everything

logger = get_logger(__name__)

LOG_COLUMNS = ("step", "epoch", "l_mse", "l_adv", "l_total_g", "l_d")
CHECKPOINT_NAME = "checkpoint.pt"
TRAIN_LOG_NAME = "train_log.csv"


@dataclass
class TrainState:
    config: TrainConfig
    palette: ClassPalette
    generator: Generator
    discriminator: Discriminator
    g_opt: torch.optim.Adam
    d_opt: torch.optim.Adam
    # drives noise-mode sources; saved with every checkpoint
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0


def init_state(
    config: TrainConfig,
    palette: ClassPalette,
    *,
    dtype: torch.dtype = torch.float32,
    seed_weights: bool = True,
) -> TrainState:
    if seed_weights:
        seed_everything(config.seed)
    generator, discriminator = build_networks(config.arch)
    generator.to(dtype)
    discriminator.to(dtype)
    betas = (config.beta1, config.beta2)
    return TrainState(
        config=config,
        palette=palette,
        generator=generator,
        discriminator=discriminator,
        g_opt=torch.optim.Adam(generator.parameters(), lr=config.learning_rate, betas=betas),
        d_opt=torch.optim.Adam(discriminator.parameters(), lr=config.learning_rate, betas=betas),
        rng=np.random.default_rng([config.seed, 1]),
    )


def learning_rate_at(config: TrainConfig, epoch: int) -> float:
    """Learning rate for 0-based epoch: constant, then linear decay toward zero."""
    if config.lr_decay_start is None or epoch < config.lr_decay_start:
        return config.learning_rate
    done = epoch + 1 - config.lr_decay_start
    return config.learning_rate * max(0.0, 1.0 - done / (config.lr_decay_epochs + 1))


def _finite(value: torch.Tensor, term: str, step: int) -> None:
    v = float(value.detach())
    if not math.isfinite(v):
        raise TrainingDivergedError(term, v, step)


def _batch_tensors(
    state: TrainState, batch: Sequence[SamplePair], config: TrainConfig
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    size = config.arch.image_size
    dtype = next(state.generator.parameters()).dtype
    for sample in batch:
        if sample.size != size or sample.context.shape[:2] != (size, size):
            raise InputValidationError(
                f"sample {sample.id} is {sample.target.shape}, configured size is {size}"
            )
    context = images_to_tensor([s.context for s in batch], dtype)
    target = images_to_tensor([render_labels(s.target, state.palette) for s in batch], dtype)
    if config.source_mode == "teacher":
        source = target
    else:
        source = images_to_tensor([sample_noise(state.rng, size) for _ in batch], dtype)
    return source, context, target


def train_step(
    state: TrainState, batch: Sequence[SamplePair], config: TrainConfig | None = None
) -> tuple[TrainState, LossBreakdown]:
    config = config or state.config
    if not batch:
        raise InputValidationError("train_step needs a nonempty batch")
    source, context, target = _batch_tensors(state, batch, config)
    adversarial = config.adversarial_enabled
    weights = LossWeights(config.lambda_mse, config.lambda_adv if adversarial else 0.0)
    step = state.step + 1
    G, D = state.generator, state.discriminator
    G.train()
    D.train()

    fake = G(torch.cat([source, context], dim=1))

    l_d_value = 0.0
    if adversarial:
        state.d_opt.zero_grad(set_to_none=True)
        l_d = discriminator_loss(D(target, context), D(fake.detach(), context))
        _finite(l_d, "l_d", step)
        l_d.backward()
        state.d_opt.step()
        l_d_value = float(l_d.detach())

    state.g_opt.zero_grad(set_to_none=True)
    l_mse = generative_loss(fake, target)
    _finite(l_mse, "l_mse", step)
    l_adv = adversarial_loss_g(D(fake, context)) if adversarial else None
    if l_adv is not None:
        _finite(l_adv, "l_adv", step)
    l_total = weighted_generator_loss(l_mse, l_adv, weights)
    _finite(l_total, "l_total_g", step)
    l_total.backward()
    state.g_opt.step()
    # gradients D received through the G objective are never applied
    if adversarial:
        state.d_opt.zero_grad(set_to_none=True)

    state.step = step
    losses = total_generator_loss(
        float(l_mse.detach()),
        float(l_adv.detach()) if l_adv is not None else 0.0,
        weights,
        l_d=l_d_value,
    )
    return state, losses


class TrainLog:
    """Append-only CSV of per-step losses; the header is written once."""

    def __init__(self, path: Path) -> None:
        self.path = path
        if not path.exists() or path.stat().st_size == 0:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerow(LOG_COLUMNS)

    def append(self, step: int, epoch: int, losses: LossBreakdown) -> None:
        row = losses.as_row()
        with self.path.open("a", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(
                [step, epoch, *(repr(row[k]) for k in LOG_COLUMNS[2:])]
            )


def read_train_log(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def train(
    split: DatasetSplit,
    config: TrainConfig,
    palette: ClassPalette,
    run_dir: Path | None = None,
    state: TrainState | None = None,
) -> TrainState:
    """
    Run epochs state.epoch..config.epochs-1. With run_dir set, every step is
    appended to train_log.csv and checkpoint.pt is rewritten every
    checkpoint_every epochs and after the final epoch.
    """
    if run_dir is None and not config.allow_ephemeral:
        raise ConfigurationError(
            "training without a checkpoint directory is disabled; "
            "pass a run directory or set train.allow_ephemeral=true"
        )
    if len(split) == 0:
        raise InputValidationError(f"split {split.name!r} is empty")
    for sample in split.samples:
        validate_pair(sample, palette, config.arch.image_size)

    state = state or init_state(config, palette)
    state.config = config
    if config.source_mode == "teacher":
        logger.warning(
            "source_mode=teacher feeds the rendered target to the generator; "
            "inference starts from noise, so generated layouts may not match"
        )
    log = TrainLog(run_dir / TRAIN_LOG_NAME) if run_dir is not None else None
    logger.info(
        "training on %d samples: epochs %d..%d, batch %d, adversarial=%s, source=%s",
        len(split),
        state.epoch + 1,
        config.epochs,
        config.batch_size,
        config.adversarial_enabled,
        config.source_mode,
    )

    for epoch in range(state.epoch, config.epochs):
        lr = learning_rate_at(config, epoch)
        for opt in (state.g_opt, state.d_opt):
            for group in opt.param_groups:
                group["lr"] = lr
        order = epoch_order(len(split), config.seed, epoch)
        last: LossBreakdown | None = None
        for batch in iter_batches(split.samples, order, config.batch_size):
            state, last = train_step(state, batch, config)
            if log is not None:
                log.append(state.step, epoch + 1, last)
            if state.step % config.log_every == 0:
                logger.debug(
                    "step %d: l_mse=%.5f l_adv=%.4f l_d=%.4f",
                    state.step,
                    last.l_mse,
                    last.l_adv,
                    last.l_d,
                )
        state.epoch = epoch + 1
        if last is not None:
            logger.info(
                "epoch %d/%d  l_mse=%.5f l_total_g=%.4f l_d=%.4f",
                state.epoch,
                config.epochs,
                last.l_mse,
                last.l_total_g,
                last.l_d,
            )
        if run_dir is not None and state.epoch % config.checkpoint_every == 0:
            save_checkpoint(state, run_dir / CHECKPOINT_NAME)

    if run_dir is not None:
        save_checkpoint(state, run_dir / CHECKPOINT_NAME)
        logger.info("checkpoint written to %s", run_dir / CHECKPOINT_NAME)
    return state
