import logging
from pathlib import Path

import numpy as np
import pytest
from skimage.measure import label as label_components

from lanegen.config import PerturbationSpec
from lanegen.data.dataset import DatasetSplit
from lanegen.data.synth import synth_scene
from lanegen.errors import InputValidationError
from lanegen.palette import ClassPalette
from lanegen.perturb import (
    SET_NAMES,
    apply_gamma,
    apply_gaussian_noise,
    build_adverse_sets,
    occlude_components,
    perturb_split,
)
from lanegen.utils import directory_checksum

SPEC = PerturbationSpec()


def _split(palette: ClassPalette, n: int, size: int = 32) -> DatasetSplit:
    return DatasetSplit("test", tuple(synth_scene(s, palette, size) for s in range(n)), size)


# ---------- noise ----------


def test_zero_sigma_is_identity() -> None:
    image = np.random.default_rng(0).random((8, 8, 3))
    assert np.array_equal(apply_gaussian_noise(image, 0.0, 1), image)


def test_noise_is_seeded() -> None:
    image = np.full((16, 16, 3), 0.5)
    a = apply_gaussian_noise(image, 0.1, 4)
    assert np.array_equal(a, apply_gaussian_noise(image, 0.1, 4))
    assert not np.array_equal(a, apply_gaussian_noise(image, 0.1, 5))


def test_noise_statistics() -> None:
    image = np.full((256, 256, 3), 0.5)
    delta = apply_gaussian_noise(image, 0.1, 0) - image
    assert abs(float(delta.mean())) < 0.005
    assert abs(float(delta.std()) - 0.1) < 0.005


def test_negative_sigma_is_rejected() -> None:
    with pytest.raises(InputValidationError):
        apply_gaussian_noise(np.zeros((2, 2, 3)), -0.1, 0)


# ---------- gamma ----------


def test_gamma_values() -> None:
    image = np.random.default_rng(1).random((8, 8, 3))
    assert np.array_equal(apply_gamma(image, 1.0), image)
    assert apply_gamma(np.full((1, 1, 3), 0.5), 2.0)[0, 0, 0] == 0.25


@pytest.mark.parametrize("gamma", [0.4, 0.9, 2.5])
def test_gamma_preserves_order(gamma: float) -> None:
    ramp = np.linspace(0.0, 1.0, 30).reshape(1, 30, 1).repeat(3, axis=2)
    out = apply_gamma(ramp, gamma)
    assert np.all(np.diff(out[0, :, 0]) > 0)


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_gamma_is_rejected(gamma: float) -> None:
    with pytest.raises(InputValidationError):
        apply_gamma(np.zeros((2, 2, 3)), gamma)


# ---------- occlusion ----------


def test_zero_fraction_keeps_context(palette: ClassPalette) -> None:
    pair = synth_scene(2, palette, 32)
    assert np.array_equal(occlude_components(pair.context, pair.target, 0.0, 0), pair.context)


def test_single_component_takes_ring_median() -> None:
    context = np.full((9, 9, 3), 0.5)
    context[3:6, 3:6] = 0.9
    labels = np.zeros((9, 9), dtype=np.int64)
    labels[3:6, 3:6] = 1
    out = occlude_components(context, labels, 1.0, 0)
    assert np.array_equal(out, np.full((9, 9, 3), 0.5))


def test_no_components_is_identity() -> None:
    context = np.random.default_rng(2).random((8, 8, 3))
    out = occlude_components(context, np.zeros((8, 8), dtype=np.int64), 1.0, 0)
    assert np.array_equal(out, context)


@pytest.mark.parametrize("fraction", [0.3, 0.5, 1.0])
def test_changes_stay_inside_chosen_components(palette: ClassPalette, fraction: float) -> None:
    pair = synth_scene(11, palette, 64)
    out = occlude_components(pair.context, pair.target, fraction, 3)
    support = pair.target > 0
    changed = np.any(out != pair.context, axis=2)
    assert not np.any(changed & ~support)

    components, count = label_components(support, connectivity=2, return_num=True)
    touched = {int(c) for c in np.unique(components[changed])}
    assert len(touched) <= int(np.ceil(fraction * count))


def test_component_count_is_rounded_up() -> None:
    context = np.full((5, 11, 3), 0.2)
    labels = np.zeros((5, 11), dtype=np.int64)
    for col in (1, 5, 9):
        labels[2, col] = 1
        context[2, col] = 1.0
    out = occlude_components(context, labels, 0.5, 0)
    filled = int(np.sum(out[2, [1, 5, 9], 0] == 0.2))
    assert filled == 2


def test_occlusion_rejects_bad_inputs() -> None:
    with pytest.raises(InputValidationError):
        occlude_components(np.zeros((4, 4, 3)), np.zeros((4, 4), dtype=np.int64), 1.5, 0)
    with pytest.raises(InputValidationError):
        occlude_components(np.zeros((4, 4, 3)), np.zeros((4, 5), dtype=np.int64), 0.5, 0)


# ---------- adverse sets ----------


def test_twelve_samples_make_three_disjoint_sets(palette: ClassPalette) -> None:
    split = _split(palette, 12)
    sets = build_adverse_sets(split, SPEC, seed=0)
    assert list(sets) == list(SET_NAMES.values())
    assert all(len(s) == 4 for s in sets.values())

    origins = [sid.rsplit("-", 1)[0] for s in sets.values() for sid in s.ids]
    assert len(set(origins)) == 12
    assert set(origins) == set(split.ids)
    assert sets["adverse_occl"].ids[0].endswith("-occl")

    by_id = {s.id: s for s in split.samples}
    for adverse in sets.values():
        for sample in adverse.samples:
            original = by_id[sample.id.rsplit("-", 1)[0]]
            assert np.array_equal(sample.target, original.target)
            assert sample.context.min() >= 0.0 and sample.context.max() <= 1.0


def test_rebuild_is_byte_identical(tmp_path: Path, palette: ClassPalette) -> None:
    split = _split(palette, 6)
    build_adverse_sets(split, SPEC, seed=7, out_root=tmp_path / "a", palette=palette)
    build_adverse_sets(split, SPEC, seed=7, out_root=tmp_path / "b", palette=palette)
    assert directory_checksum(tmp_path / "a") == directory_checksum(tmp_path / "b")
    assert (tmp_path / "a" / "adverse_gamma" / "images").is_dir()


def test_remainder_is_dropped_with_warning(
    palette: ClassPalette, caplog: pytest.LogCaptureFixture
) -> None:
    with caplog.at_level(logging.WARNING, logger="lanegen"):
        sets = build_adverse_sets(_split(palette, 13), SPEC, seed=0)
    assert sum(len(s) for s in sets.values()) == 12
    assert "not divisible by 3" in caplog.text


def test_too_few_samples(palette: ClassPalette) -> None:
    with pytest.raises(InputValidationError):
        build_adverse_sets(_split(palette, 2), SPEC)


def test_writing_needs_palette(tmp_path: Path, palette: ClassPalette) -> None:
    with pytest.raises(InputValidationError):
        build_adverse_sets(_split(palette, 3), SPEC, out_root=tmp_path)


def test_perturb_split_whole_split(palette: ClassPalette) -> None:
    split = _split(palette, 4)
    noisy = perturb_split(split.samples, "noise", SPEC, 0, split.image_size)
    assert noisy.name == "adverse_noise"
    assert noisy.ids == [f"{sid}-noise" for sid in split.ids]
