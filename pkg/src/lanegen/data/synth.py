"""
Procedural road scenes: a perspective road with lane lines, optional crossing
stripes and stop line or a hatched no-parking box, and one turn arrow. Every
scene is a pure function of (seed, palette, image_size).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.draw import polygon

from ..errors import ConfigurationError
from ..log import get_logger
from ..palette import ClassPalette
from .dataset import SPLIT_NAMES, DatasetSplit, SamplePair, write_dataset
from .images import from_uint8, to_uint8

logger = get_logger(__name__)

# Seed ranges per split; a split may hold at most this many scenes.
SPLIT_SEED_STRIDE = 300_000
_SPLIT_OFFSETS = {"train": 0, "val": SPLIT_SEED_STRIDE, "test": 2 * SPLIT_SEED_STRIDE}

_WHITE_PAINT = np.array([0.93, 0.93, 0.9])
_YELLOW_PAINT = np.array([0.95, 0.8, 0.25])


@dataclass(frozen=True, slots=True)
class SceneRoles:
    solid: int
    dashed: int
    symbol: int
    crossing: int | None
    stop: int | None
    no_parking: int | None = None


def resolve_roles(palette: ClassPalette) -> SceneRoles:
    """
    Map drawing roles to class ids by name, falling back to the lowest unused
    ids for the three required roles.
    """
    if len(palette) < 4:
        raise ConfigurationError(
            f"synthetic scenes need background + 2 lane classes + 1 symbol class, "
            f"palette has {len(palette)} classes"
        )
    named = {
        "solid": palette.find("dividing", "double_yellow", "solid"),
        "dashed": palette.find("guiding", "single_white", "dashed"),
        "symbol": palette.find("turn", "symbol", "arrow"),
        "crossing": palette.find("crossing", "crosswalk", "zebra"),
        "stop": palette.find("stop"),
        "no_parking": palette.find("parking"),
    }
    used = {v for v in named.values() if v is not None}
    spare = iter(i for i in range(1, len(palette)) if i not in used)

    def _required(role: str) -> int:
        found = named[role]
        return found if found is not None else next(spare)

    return SceneRoles(
        solid=_required("solid"),
        dashed=_required("dashed"),
        symbol=_required("symbol"),
        crossing=named["crossing"],
        stop=named["stop"],
        no_parking=named["no_parking"],
    )


def _arrow_polygon(
    uc: float, tc: float, lane_width: float, turn: int
) -> tuple[np.ndarray, np.ndarray]:
    """Arrow outline in road coordinates (u lateral, t depth; smaller t is farther)."""
    sw, hw = 0.12 * lane_width, 0.32 * lane_width
    length, head = 0.16, 0.06
    t_bot, t_top = tc + length / 2, tc - length / 2
    t_neck = t_top + head
    tip_u = uc + turn * 0.6 * hw
    us = np.array([uc - sw, uc + sw, uc + sw, uc + hw, tip_u, uc - hw, uc - sw])
    ts = np.array([t_bot, t_bot, t_neck, t_neck, t_top, t_neck, t_neck])
    return us, ts


def synth_scene(seed: int, palette: ClassPalette, image_size: int) -> SamplePair:
    roles = resolve_roles(palette)
    rng = np.random.default_rng(seed)
    size = image_size

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    horizon = size * rng.uniform(0.32, 0.48)  # randomized camera pitch
    vx = size * (0.5 + rng.uniform(-0.08, 0.08))
    spread = size * rng.uniform(0.9, 1.2)
    curve = rng.uniform(-0.3, 0.3)

    t = (ys - horizon) / (size - horizon)
    ground = t > 0.0
    t_safe = np.maximum(t, 1e-3)
    half_width = t_safe * spread
    u = (xs - vx) / half_width - curve * (1.0 - t_safe) ** 2
    depth = 1.0 / t_safe
    pixel_u = 1.0 / half_width
    drawable = t > 0.12

    target = np.zeros((size, size), dtype=np.int64)

    # lane lines, at least two pixels wide; dashes repeat in log depth so they
    # stay a few pixels long near the horizon instead of aliasing
    n_lines = int(rng.integers(2, 5))
    positions = np.linspace(-0.75, 0.75, n_lines) + rng.uniform(-0.05, 0.05, n_lines)
    kinds = ["solid"] + ["dashed"] * (n_lines - 2) + ["solid" if n_lines > 2 else "dashed"]
    line_w = rng.uniform(0.025, 0.04)
    period = rng.uniform(0.35, 0.6)
    phase = rng.uniform(0.0, 1.0)
    dash_on = ((np.log(depth) / period + phase) % 1.0) < 0.55
    for pos, kind in zip(positions, kinds):
        on_line = drawable & (np.abs(u - pos) <= line_w + pixel_u)
        if kind == "solid":
            target[on_line] = roles.solid
        else:
            target[on_line & dash_on] = roles.dashed

    # crossing stripes + stop line
    crossing_band: tuple[float, float] | None = None
    if roles.crossing is not None and rng.random() < 0.5:
        tc = rng.uniform(0.3, 0.45)
        crossing_band = (tc, tc + 0.12)
        band = (t >= tc) & (t <= tc + 0.12)
        stripes = (((u * 6.0 + 0.25) % 1.0) < 0.5) & (np.abs(u) < 0.9)
        target[band & stripes] = roles.crossing
        if roles.stop is not None and rng.random() < 0.7:
            ts = tc + 0.17
            stop = (t >= ts) & (t <= ts + 0.03) & (u >= positions[0]) & (u <= positions[-1])
            target[stop] = roles.stop

    # hatched no-parking box in a lane, only on scenes without a crossing
    if roles.no_parking is not None and crossing_band is None and rng.random() < 0.7:
        j = int(rng.integers(0, n_lines - 1))
        inset = 0.2 * (positions[j + 1] - positions[j])
        tb = rng.uniform(0.4, 0.48)
        box = (
            (t >= tb)
            & (t <= tb + 0.1)
            & (u >= positions[j] + inset)
            & (u <= positions[j + 1] - inset)
        )
        hatch = ((u * 5.0 + t * 8.0) % 1.0) < 0.5
        target[box & hatch] = roles.no_parking

    # one turn arrow inside a lane, kept clear of the crossing band and stop line
    k = int(rng.integers(0, n_lines - 1))
    uc = float((positions[k] + positions[k + 1]) / 2)
    lane_width = float(positions[k + 1] - positions[k])
    ta = rng.uniform(0.68, 0.85)
    if crossing_band is not None and ta - 0.08 < crossing_band[1] + 0.1:
        ta = min(0.88, crossing_band[1] + 0.2)
    turn = int(rng.integers(-1, 2))
    au, at = _arrow_polygon(uc, ta, lane_width, turn)
    arrow_y = horizon + at * (size - horizon)
    arrow_x = vx + (au + curve * (1.0 - at) ** 2) * at * spread
    rr, cc = polygon(arrow_y - 0.5, arrow_x - 0.5, shape=(size, size))
    target[rr, cc] = roles.symbol

    context = _render_context(rng, target, roles, ground, u, t_safe, ys, horizon, size)
    return SamplePair(f"scene-{seed}", context, target)


def _render_context(
    rng: np.random.Generator,
    target: np.ndarray,
    roles: SceneRoles,
    ground: np.ndarray,
    u: np.ndarray,
    t: np.ndarray,
    ys: np.ndarray,
    horizon: float,
    size: int,
) -> np.ndarray:
    img = np.zeros((size, size, 3), dtype=np.float64)

    # sky
    frac = np.clip(ys / max(horizon, 1.0), 0.0, 1.0)[..., None]
    sky_top = np.array([0.45, 0.6, 0.85]) * rng.uniform(0.85, 1.1)
    sky_low = np.array([0.82, 0.85, 0.9]) * rng.uniform(0.9, 1.05)
    sky = sky_top * (1 - frac) + sky_low * frac
    img[~ground] = sky[~ground]

    # verge and asphalt
    verge = np.array([0.32, 0.4, 0.22]) * rng.uniform(0.8, 1.2)
    asphalt = rng.uniform(0.25, 0.45)
    shade = 1.0 + 0.1 * rng.uniform(-1.0, 1.0) * u
    road = ground & (np.abs(u) <= 1.0)
    img[ground & ~road] = verge
    img[road] = (asphalt * shade[road])[:, None] * np.array([1.0, 1.0, 1.03])
    img[ground] += rng.normal(0.0, 0.03, size=(int(ground.sum()), 3)) * t[ground][:, None]

    # paint with random wear
    marked = target > 0
    paint = np.tile(_WHITE_PAINT, (size, size, 1))
    paint[target == roles.solid] = _YELLOW_PAINT
    if roles.no_parking is not None:
        paint[target == roles.no_parking] = _YELLOW_PAINT
    wear = rng.uniform(0.75, 1.0)
    img[marked] = (1 - wear) * img[marked] + wear * paint[marked]

    # photometric jitter
    img = img * rng.uniform(0.85, 1.15) * rng.uniform(0.95, 1.05, size=3)
    img = np.clip(img, 0.0, 1.0)
    # stored images are 8-bit; keep the in-memory scene identical to what is written
    return from_uint8(to_uint8(img))


def synth_dataset(
    seed: int,
    counts: Mapping[str, int],
    palette: ClassPalette,
    image_size: int,
    root: Path | None = None,
) -> dict[str, DatasetSplit]:
    """
    Generate train/val/test from disjoint seed ranges and, when root is given,
    write them in the standard ``<root>/<split>/{images,labels}`` layout.
    """
    splits: dict[str, DatasetSplit] = {}
    for name in SPLIT_NAMES:
        n = int(counts.get(name, 0))
        if n <= 0:
            raise ConfigurationError(f"count for split {name!r} must be positive, got {n}")
        if n > SPLIT_SEED_STRIDE:
            raise ConfigurationError(f"count for split {name!r} exceeds {SPLIT_SEED_STRIDE}")
        base = seed * 3 * SPLIT_SEED_STRIDE + _SPLIT_OFFSETS[name]
        samples = tuple(synth_scene(base + i, palette, image_size) for i in range(n))
        splits[name] = DatasetSplit(name, samples, image_size)
        logger.debug("synthesized %s: %d scenes", name, n)
    if root is not None:
        write_dataset(splits, root, palette)
        logger.info("wrote synthetic dataset to %s", root)
    return splits
