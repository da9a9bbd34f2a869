"""
Adverse-condition test sets: additive Gaussian noise, random gamma and
removal of marking components by boundary-ring fill. Labels always pass
through untouched.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation
from skimage.measure import label as label_components

from .config import PerturbationKind, PerturbationSpec
from .data.dataset import DatasetSplit, SamplePair, write_split
from .errors import InputValidationError
from .log import get_logger
from .palette import ClassPalette, LabelImage, RgbImage, check_rgb

logger = get_logger(__name__)

ADVERSE_KINDS: tuple[PerturbationKind, ...] = ("noise", "gamma", "occlusion")
SET_NAMES: dict[PerturbationKind, str] = {
    "noise": "adverse_noise",
    "gamma": "adverse_gamma",
    "occlusion": "adverse_occl",
}
_SUFFIX: dict[PerturbationKind, str] = {"noise": "noise", "gamma": "gamma", "occlusion": "occl"}

_RING = np.ones((3, 3), dtype=bool)


# ---------- Per-image perturbations ----------


def apply_gaussian_noise(image: RgbImage, sigma: float, seed: int) -> RgbImage:
    if sigma < 0:
        raise InputValidationError(f"noise sigma must be >= 0, got {sigma}")
    img = check_rgb(image)
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, sigma, size=img.shape), 0.0, 1.0)


def apply_gamma(image: RgbImage, gamma: float) -> RgbImage:
    if not gamma > 0:
        raise InputValidationError(f"gamma must be > 0, got {gamma}")
    return np.power(check_rgb(image), gamma)


def occlude_components(
    context: RgbImage, labels: LabelImage, fraction: float, seed: int
) -> RgbImage:
    """
    Fill ceil(fraction * count) seeded-chosen 8-connected marking components
    with the per-channel median of their one-pixel boundary ring. Every other
    pixel is returned bit-identical.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InputValidationError(f"removal fraction must lie in [0,1], got {fraction}")
    img = check_rgb(context, "context")
    if img.shape[:2] != labels.shape:
        raise InputValidationError(
            f"context {img.shape[:2]} and labels {labels.shape} differ in size"
        )
    components, count = label_components(labels > 0, connectivity=2, return_num=True)
    out = img.copy()
    if count == 0 or fraction == 0.0:
        return out
    # round first so products like 0.7 * 10 do not ceil to 8
    k = min(count, math.ceil(round(fraction * count, 9)))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(np.arange(1, count + 1), size=k, replace=False)
    for comp in sorted(int(c) for c in chosen):
        mask = components == comp
        ring = binary_dilation(mask, structure=_RING) & ~mask
        if not ring.any():
            continue
        out[mask] = np.median(img[ring], axis=0)
    return out


# ---------- Set construction ----------


def _item_seed(seed: int, kind: PerturbationKind, index: int) -> int:
    seq = np.random.SeedSequence([seed, ADVERSE_KINDS.index(kind), index])
    return int(seq.generate_state(1)[0])


def _perturber(
    kind: PerturbationKind, spec: PerturbationSpec
) -> Callable[[SamplePair, int], RgbImage]:
    if kind == "noise":
        return lambda s, seed: apply_gaussian_noise(s.context, spec.noise_sigma, seed)
    if kind == "gamma":
        lo, hi = spec.gamma_range

        def _gamma(s: SamplePair, seed: int) -> RgbImage:
            return apply_gamma(s.context, float(np.random.default_rng(seed).uniform(lo, hi)))

        return _gamma
    return lambda s, seed: occlude_components(s.context, s.target, spec.removal_fraction, seed)


def perturb_split(
    samples: tuple[SamplePair, ...],
    kind: PerturbationKind,
    spec: PerturbationSpec,
    seed: int,
    image_size: int,
) -> DatasetSplit:
    perturb = _perturber(kind, spec)
    out = tuple(
        SamplePair(
            f"{s.id}-{_SUFFIX[kind]}",
            perturb(s, _item_seed(seed, kind, i)),
            s.target.copy(),
        )
        for i, s in enumerate(samples)
    )
    return DatasetSplit(SET_NAMES[kind], out, image_size)


def build_adverse_sets(
    split: DatasetSplit,
    spec: PerturbationSpec,
    seed: int | None = None,
    out_root: Path | None = None,
    palette: ClassPalette | None = None,
) -> dict[str, DatasetSplit]:
    """
    Partition the split into three consecutive thirds and perturb each with
    one kind (noise, gamma, occlusion). A remainder is dropped with a warning.
    """
    seed = spec.seed if seed is None else seed
    third = len(split) // 3
    if third == 0:
        raise InputValidationError(
            f"split {split.name!r} has {len(split)} samples, need at least 3"
        )
    if len(split) % 3:
        logger.warning(
            "split %s has %d samples, not divisible by 3; using the first %d",
            split.name,
            len(split),
            3 * third,
        )
    sets: dict[str, DatasetSplit] = {}
    for k, kind in enumerate(ADVERSE_KINDS):
        part = split.samples[k * third : (k + 1) * third]
        sets[SET_NAMES[kind]] = perturb_split(part, kind, spec, seed, split.image_size)
    if out_root is not None:
        if palette is None:
            raise InputValidationError("writing adverse sets needs the palette")
        for name, adverse in sets.items():
            write_split(adverse, out_root / name, palette)
        logger.info("wrote %d adverse sets to %s", len(sets), out_root)
    return sets
