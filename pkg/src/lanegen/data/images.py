from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from skimage.transform import resize

from ..errors import DatasetError, InputValidationError
from ..palette import ClassPalette, LabelImage, RgbImage, check_labels, quantize, render_labels

# ---------- 8-bit conversion ----------


def to_uint8(image: RgbImage) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(data: np.ndarray) -> RgbImage:
    return data.astype(np.float64) / 255.0


# ---------- Resizing ----------


def resize_rgb(image: RgbImage, size: int) -> RgbImage:
    """Bilinear squash to size x size (aspect ratio is not preserved)."""
    if image.shape[:2] == (size, size):
        return image
    out = resize(image, (size, size, 3), order=1, mode="edge", anti_aliasing=False)
    return np.clip(out, 0.0, 1.0)


def resize_labels(labels: LabelImage, size: int) -> LabelImage:
    """Nearest-neighbour squash; only ids already present can appear."""
    if labels.shape == (size, size):
        return labels
    out = resize(
        labels,
        (size, size),
        order=0,
        mode="edge",
        anti_aliasing=False,
        preserve_range=True,
    )
    return np.rint(out).astype(np.int64)


# ---------- PNG I/O ----------


def read_rgb(path: Path) -> RgbImage:
    try:
        with Image.open(path) as im:
            data = np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc
    return from_uint8(data)


def write_rgb(image: RgbImage, path: Path) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputValidationError(f"cannot write {image.shape} as RGB")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(to_uint8(image)).save(path, format="PNG")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


def read_labels(path: Path, palette: ClassPalette) -> LabelImage:
    """Labels are stored palette-rendered; quantizing recovers the ids."""
    return quantize(read_rgb(path), palette)


def write_labels(labels: LabelImage, path: Path, palette: ClassPalette) -> None:
    write_rgb(render_labels(check_labels(labels, palette), palette), path)
