from __future__ import annotations

import time
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .config import ArchConfig
from .data.dataset import make_conditioned_input
from .data.images import write_labels, write_rgb
from .errors import InputValidationError
from .log import get_logger
from .model import Generator, generator_forward
from .palette import ClassPalette, LabelImage, RgbImage, check_rgb, quantize

logger = get_logger(__name__)

NOISE_MEAN = 0.5
NOISE_STD = 0.25

Generation = tuple[RgbImage, LabelImage]


# ---------- Noise prior ----------


def sample_noise(rng: np.random.Generator, size: int) -> RgbImage:
    """(size, size, 3) Gaussian image, clipped to [0, 1]."""
    return np.clip(rng.normal(NOISE_MEAN, NOISE_STD, size=(size, size, 3)), 0.0, 1.0)


def noise_image(seed: int, size: int) -> RgbImage:
    return sample_noise(np.random.default_rng(seed), size)


# ---------- Generation ----------


def _check_context(context: RgbImage, size: int) -> RgbImage:
    context = check_rgb(context, "context")
    if context.shape[:2] != (size, size):
        raise InputValidationError(
            f"context is {context.shape[:2]}, configured size is {size}"
        )
    return context


def generate(
    generator: Generator,
    context: RgbImage,
    seed: int,
    palette: ClassPalette,
    config: ArchConfig | None = None,
) -> Generation:
    """O = G([noise(seed) | context]) and its quantized label map."""
    config = config or generator.config
    context = _check_context(context, config.image_size)
    source = noise_image(seed, config.image_size)
    conditioned = make_conditioned_input(source, context, image_size=config.image_size)
    out = np.clip(generator_forward(generator, conditioned, config), 0.0, 1.0)
    return out, quantize(out, palette)


def generate_batch(
    generator: Generator,
    contexts: Sequence[RgbImage],
    seed: int,
    palette: ClassPalette,
    config: ArchConfig | None = None,
) -> list[Generation]:
    """Item k is exactly generate(contexts[k], seed + k)."""
    config = config or generator.config
    shapes = {tuple(np.shape(c)) for c in contexts}
    if len(shapes) > 1:
        raise InputValidationError(f"contexts have mixed sizes {sorted(shapes)}")
    started = time.perf_counter()
    results = [
        generate(generator, context, seed + k, palette, config)
        for k, context in enumerate(contexts)
    ]
    if results:
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        logger.info(
            "generated %d frames at %d px: %.1f ms/frame",
            len(results),
            config.image_size,
            elapsed_ms / len(results),
        )
    return results


def noise_agreement(
    generator: Generator,
    context: RgbImage,
    seeds: tuple[int, int],
    palette: ClassPalette,
    config: ArchConfig | None = None,
) -> float:
    """Fraction of pixels whose label is the same under two noise seeds."""
    _, a = generate(generator, context, seeds[0], palette, config)
    _, b = generate(generator, context, seeds[1], palette, config)
    return float(np.mean(a == b))


def write_generation(
    out_dir: Path, stem: str, generation: Generation, palette: ClassPalette
) -> tuple[Path, Path]:
    out, labels = generation
    gen_path = out_dir / f"{stem}.gen.png"
    label_path = out_dir / f"{stem}.label.png"
    write_rgb(out, gen_path)
    write_labels(labels, label_path, palette)
    return gen_path, label_path
