from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DatasetError, InputValidationError
from ..log import get_logger
from ..palette import ClassPalette, LabelImage, RgbImage, check_labels, check_rgb
from .images import read_labels, read_rgb, resize_labels, resize_rgb, write_labels, write_rgb

logger = get_logger(__name__)

SPLIT_NAMES = ("train", "val", "test")


# ------------------ model ------------------


@dataclass(frozen=True, slots=True, eq=False)
class SamplePair:
    id: str
    context: RgbImage
    target: LabelImage

    def __post_init__(self) -> None:
        if self.context.shape[:2] != self.target.shape:
            raise InputValidationError(
                f"sample {self.id}: context {self.context.shape[:2]} and target "
                f"{self.target.shape} differ in size"
            )

    @property
    def size(self) -> int:
        return int(self.target.shape[0])


@dataclass(frozen=True, slots=True)
class DatasetSplit:
    name: str
    samples: tuple[SamplePair, ...]
    image_size: int

    def __post_init__(self) -> None:
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InputValidationError(f"split {self.name}: duplicate sample ids {dupes}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]


@dataclass(frozen=True, slots=True, eq=False)
class ConditionedInput:
    """(H, W, 6): channels 0-2 source (target or noise), 3-5 context."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[2] != 6:
            raise InputValidationError(
                f"conditioned input must be (H, W, 6), got {self.data.shape}"
            )

    @property
    def source(self) -> RgbImage:
        return self.data[:, :, :3]

    @property
    def context(self) -> RgbImage:
        return self.data[:, :, 3:]

    @property
    def size(self) -> int:
        return int(self.data.shape[0])


def make_conditioned_input(
    source: RgbImage, context: RgbImage, *, image_size: int | None = None
) -> ConditionedInput:
    source = check_rgb(source, "source")
    context = check_rgb(context, "context")
    if source.shape != context.shape:
        raise InputValidationError(
            f"source {source.shape[:2]} and context {context.shape[:2]} differ in size"
        )
    if image_size is not None and source.shape[:2] != (image_size, image_size):
        raise InputValidationError(
            f"conditioned input is {source.shape[:2]}, configured size is {image_size}"
        )
    return ConditionedInput(np.concatenate([source, context], axis=2))


# ------------------ readers ------------------


def _stems(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise DatasetError(f"missing directory {directory}")
    return {p.stem: p for p in sorted(directory.glob("*.png"))}


def load_split(
    split_dir: Path,
    palette: ClassPalette,
    image_size: int,
    *,
    name: str | None = None,
    workers: int = 1,
) -> DatasetSplit:
    """
    Read ``<split_dir>/{images,labels}/<stem>.png`` pairs matched by stem,
    squashed to image_size. Reads may run on a thread pool; order stays sorted by stem.
    """
    images = _stems(split_dir / "images")
    labels = _stems(split_dir / "labels")
    orphans = sorted(set(images) ^ set(labels))
    if orphans:
        raise DatasetError(f"{split_dir}: unmatched pair members for stems {orphans}")

    def _read(stem: str) -> SamplePair:
        context = resize_rgb(read_rgb(images[stem]), image_size)
        target = resize_labels(read_labels(labels[stem], palette), image_size)
        return SamplePair(stem, context, target)

    stems = sorted(images)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = tuple(pool.map(_read, stems))
    else:
        samples = tuple(_read(s) for s in stems)
    logger.debug("loaded %d samples from %s", len(samples), split_dir)
    return DatasetSplit(name or split_dir.name, samples, image_size)


def load_dataset(
    root: Path, palette: ClassPalette, image_size: int, *, workers: int = 1
) -> dict[str, DatasetSplit]:
    splits = {
        name: load_split(root / name, palette, image_size, name=name, workers=workers)
        for name in SPLIT_NAMES
    }
    seen: dict[str, str] = {}
    for name, split in splits.items():
        for sid in split.ids:
            if sid in seen:
                raise DatasetError(f"sample {sid!r} appears in both {seen[sid]} and {name}")
            seen[sid] = name
    return splits


# ------------------ writers ------------------


def write_split(split: DatasetSplit, dest: Path, palette: ClassPalette) -> Path:
    for sample in split.samples:
        write_rgb(sample.context, dest / "images" / f"{sample.id}.png")
        write_labels(sample.target, dest / "labels" / f"{sample.id}.png", palette)
    return dest


def write_dataset(
    splits: Mapping[str, DatasetSplit], root: Path, palette: ClassPalette
) -> Path:
    for name, split in splits.items():
        write_split(split, root / name, palette)
    return root


# ------------------ iteration ------------------


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Seed-and-epoch derived permutation; independent of any other RNG state."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def iter_batches(
    samples: Sequence[SamplePair], order: np.ndarray, batch_size: int
) -> Iterator[list[SamplePair]]:
    for start in range(0, len(order), batch_size):
        yield [samples[int(i)] for i in order[start : start + batch_size]]


def validate_pair(sample: SamplePair, palette: ClassPalette, image_size: int) -> None:
    check_rgb(sample.context, f"context of {sample.id}")
    check_labels(sample.target, palette)
    if sample.target.shape != (image_size, image_size):
        raise InputValidationError(
            f"sample {sample.id} is {sample.target.shape}, configured size is {image_size}"
        )
