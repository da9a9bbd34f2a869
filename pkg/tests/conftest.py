from __future__ import annotations

from pathlib import Path

import pytest
import torch

from lanegen.config import ArchConfig, TrainConfig
from lanegen.data.dataset import DatasetSplit
from lanegen.data.synth import synth_scene
from lanegen.model import Generator
from lanegen.palette import APOLLOSCAPE, ClassPalette

TINY_ARCH = ArchConfig(image_size=16, base_channels=4, depth=2)


@pytest.fixture
def palette() -> ClassPalette:
    return APOLLOSCAPE


@pytest.fixture
def desk_toml() -> Path:
    return Path(__file__).resolve().parents[1] / "configs" / "desk.toml"


@pytest.fixture
def tiny_arch() -> ArchConfig:
    return TINY_ARCH


@pytest.fixture
def tiny_config() -> TrainConfig:
    return TrainConfig(
        batch_size=4,
        epochs=1,
        seed=0,
        arch=TINY_ARCH,
        checkpoint_every=1,
        log_every=1,
    )


@pytest.fixture
def tiny_split(palette: ClassPalette) -> DatasetSplit:
    samples = tuple(synth_scene(seed, palette, TINY_ARCH.image_size) for seed in range(8))
    return DatasetSplit("train", samples, TINY_ARCH.image_size)


@pytest.fixture
def tiny_generator() -> Generator:
    torch.manual_seed(0)
    return Generator(TINY_ARCH)
