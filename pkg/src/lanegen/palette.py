"""
Class palette: the bridge between generated RGB distributions and class labels.

Images are numpy arrays. An ``RgbImage`` is float64 ``(H, W, 3)`` with channels in
[0, 1]; a ``LabelImage`` is integer ``(H, W)`` holding class ids.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, InputValidationError, PaletteFormatError

RgbImage: TypeAlias = NDArray[np.float64]
LabelImage: TypeAlias = NDArray[np.int64]
Color: TypeAlias = tuple[float, float, float]

BACKGROUND: Color = (0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class PaletteEntry:
    class_id: int
    name: str
    color: Color


@dataclass(frozen=True)
class ClassPalette:
    entries: tuple[PaletteEntry, ...]

    def __post_init__(self) -> None:
        _validate_entries(self.entries)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[int, str, Color]]) -> ClassPalette:
        return cls(
            tuple(
                PaletteEntry(i, n, (float(c[0]), float(c[1]), float(c[2]))) for i, n, c in rows
            )
        )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def colors(self) -> NDArray[np.float64]:
        """(K, 3) array of class colors, row k = class k."""
        return np.array([e.color for e in self.entries], dtype=np.float64)

    def find(self, *keywords: str) -> int | None:
        """First class id whose name contains any keyword (case-insensitive)."""
        for e in self.entries[1:]:
            lname = e.name.lower()
            if any(k in lname for k in keywords):
                return e.class_id
        return None


def _validate_entries(entries: Sequence[PaletteEntry]) -> None:
    if not entries:
        raise ConfigurationError("palette is empty")
    ids = [e.class_id for e in entries]
    if ids != list(range(len(entries))):
        raise ConfigurationError(f"class ids must be contiguous from 0 in order, got {ids}")
    if tuple(entries[0].color) != BACKGROUND:
        raise ConfigurationError(f"class 0 must be background (0,0,0), got {entries[0].color}")
    for e in entries:
        if len(e.color) != 3 or not all(0.0 <= c <= 1.0 for c in e.color):
            raise ConfigurationError(f"class {e.class_id} color out of [0,1]: {e.color}")
    for a, b in combinations(entries, 2):
        if a.color == b.color:
            raise ConfigurationError(
                f"classes {a.class_id} and {b.class_id} share color {a.color}"
            )


# ---------- Presets ----------

# Corners of the RGB cube, maximally separated.
APOLLOSCAPE = ClassPalette.from_rows(
    [
        (0, "background", (0.0, 0.0, 0.0)),
        (1, "dividing_lane", (1.0, 1.0, 1.0)),
        (2, "guiding_lane", (1.0, 1.0, 0.0)),
        (3, "crossing", (1.0, 0.0, 0.0)),
        (4, "stop_lane", (0.0, 0.0, 1.0)),
        (5, "turn_symbol", (0.0, 1.0, 0.0)),
        (6, "no_parking", (1.0, 0.0, 1.0)),
    ]
)

BDD100K = ClassPalette.from_rows(
    [
        (0, "background", (0.0, 0.0, 0.0)),
        (1, "crosswalk", (1.0, 0.0, 0.0)),
        (2, "double_other", (0.0, 0.0, 1.0)),
        (3, "double_white", (1.0, 1.0, 1.0)),
        (4, "double_yellow", (1.0, 1.0, 0.0)),
        (5, "road_curb", (0.0, 1.0, 1.0)),
        (6, "single_other", (1.0, 0.0, 1.0)),
        (7, "single_white", (0.0, 1.0, 0.0)),
        (8, "single_yellow", (1.0, 128 / 255, 0.0)),
    ]
)

PRESETS: dict[str, ClassPalette] = {"apolloscape": APOLLOSCAPE, "bdd100k": BDD100K}


def default_palette() -> ClassPalette:
    return APOLLOSCAPE


# ---------- Validation ----------


def check_rgb(image: np.ndarray, what: str = "image") -> RgbImage:
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] < 1 or image.shape[1] < 1:
        raise InputValidationError(f"{what} must be (H, W, 3), got {image.shape}")
    img = np.asarray(image, dtype=np.float64)
    if img.size and (img.min() < 0.0 or img.max() > 1.0 or not np.isfinite(img).all()):
        raise InputValidationError(f"{what} channels must lie in [0,1]")
    return img


def check_labels(labels: np.ndarray, palette: ClassPalette) -> LabelImage:
    if labels.ndim != 2:
        raise InputValidationError(f"label image must be (H, W), got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise InputValidationError(f"label image must be integer, got {labels.dtype}")
    bad = (labels < 0) | (labels >= len(palette))
    if bad.any():
        r, c = (int(v) for v in np.argwhere(bad)[0])
        raise InputValidationError(
            f"unknown class id {int(labels[r, c])} at pixel (row={r}, col={c})"
        )
    return labels.astype(np.int64, copy=False)


# ---------- Render / quantize ----------


def render_labels(labels: LabelImage, palette: ClassPalette) -> RgbImage:
    labels = check_labels(labels, palette)
    return palette.colors[labels]


def quantize(image: RgbImage, palette: ClassPalette) -> LabelImage:
    """
    Nearest palette color per pixel (Euclidean in RGB). Ties go to the lowest
    class id, which is what argmin's first-occurrence rule gives over ordered ids.
    """
    img = check_rgb(image)
    d = img[:, :, None, :] - palette.colors[None, None, :, :]
    dist2 = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
    return np.argmin(dist2, axis=2).astype(np.int64)


# ---------- Palette files ----------


def _parse_channel(raw: str, line: int) -> float:
    try:
        v = int(raw.strip())
    except ValueError:
        raise PaletteFormatError(f"channel {raw!r} is not an integer", line=line) from None
    if not 0 <= v <= 255:
        raise PaletteFormatError(f"channel {v} outside 0..255", line=line)
    return v / 255.0


def parse_palette(text: str) -> ClassPalette:
    entries: list[PaletteEntry] = []
    seen_colors: dict[Color, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = next(csv.reader([stripped]))
        if len(row) != 5:
            raise PaletteFormatError(f"expected 5 fields, got {len(row)}", line=lineno)
        try:
            class_id = int(row[0].strip())
        except ValueError:
            raise PaletteFormatError(
                f"class id {row[0]!r} is not an integer", line=lineno
            ) from None
        if class_id != len(entries):
            raise PaletteFormatError(
                f"class id {class_id} breaks contiguous numbering (expected {len(entries)})",
                line=lineno,
            )
        color = (
            _parse_channel(row[2], lineno),
            _parse_channel(row[3], lineno),
            _parse_channel(row[4], lineno),
        )
        if color in seen_colors:
            raise PaletteFormatError(
                f"color duplicates class {seen_colors[color]}", line=lineno
            )
        if class_id == 0 and color != BACKGROUND:
            raise PaletteFormatError("class 0 must be background 0,0,0", line=lineno)
        seen_colors[color] = class_id
        entries.append(PaletteEntry(class_id, row[1].strip(), color))
    if not entries:
        raise PaletteFormatError("no palette rows found")
    return ClassPalette(tuple(entries))


def load_palette(path: Path) -> ClassPalette:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read palette {path}: {exc}") from exc
    return parse_palette(text)


def format_palette(palette: ClassPalette) -> str:
    buf = io.StringIO()
    buf.write("# class_id,name,R,G,B\n")
    writer = csv.writer(buf, lineterminator="\n")
    for e in palette.entries:
        writer.writerow([e.class_id, e.name, *(int(round(c * 255)) for c in e.color)])
    return buf.getvalue()


def save_palette(palette: ClassPalette, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_palette(palette), encoding="utf-8")


def resolve_palette(path: Path | None, preset: str = "apolloscape") -> ClassPalette:
    if path is not None:
        if not path.exists():
            raise ConfigurationError(f"palette file not found: {path}")
        return load_palette(path)
    try:
        return PRESETS[preset]
    except KeyError:
        raise ConfigurationError(
            f"unknown palette preset {preset!r} (choose from {sorted(PRESETS)})"
        ) from None
