from pathlib import Path

import numpy as np
import pytest

from lanegen.data.images import read_labels, read_rgb, to_uint8
from lanegen.errors import InputValidationError
from lanegen.inference import (
    NOISE_MEAN,
    generate,
    generate_batch,
    noise_agreement,
    noise_image,
    write_generation,
)
from lanegen.model import Generator
from lanegen.palette import ClassPalette


def _contexts(n: int, size: int = 16) -> list[np.ndarray]:
    rng = np.random.default_rng(9)
    return [rng.random((size, size, 3)) for _ in range(n)]


def test_noise_image_is_seeded_and_clipped() -> None:
    a = noise_image(3, 64)
    assert a.shape == (64, 64, 3)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert np.array_equal(a, noise_image(3, 64))
    assert not np.array_equal(a, noise_image(4, 64))
    assert abs(float(a.mean()) - NOISE_MEAN) < 0.02


def test_generate_is_deterministic(tiny_generator: Generator, palette: ClassPalette) -> None:
    (context,) = _contexts(1)
    out, labels = generate(tiny_generator, context, 5, palette)
    out2, labels2 = generate(tiny_generator, context, 5, palette)
    assert np.array_equal(out, out2) and np.array_equal(labels, labels2)
    assert out.shape == (16, 16, 3) and labels.shape == (16, 16)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert labels.min() >= 0 and labels.max() < len(palette)


def test_batch_items_match_single_generation(
    tiny_generator: Generator, palette: ClassPalette
) -> None:
    contexts = _contexts(3)
    batch = generate_batch(tiny_generator, contexts, 10, palette)
    assert len(batch) == 3
    for k, (out, labels) in enumerate(batch):
        single_out, single_labels = generate(tiny_generator, contexts[k], 10 + k, palette)
        assert np.array_equal(out, single_out)
        assert np.array_equal(labels, single_labels)

    (only,) = generate_batch(tiny_generator, contexts[:1], 10, palette)
    assert np.array_equal(only[0], batch[0][0])


def test_batch_rejects_mixed_sizes(tiny_generator: Generator, palette: ClassPalette) -> None:
    contexts = _contexts(1) + _contexts(1, size=32)
    with pytest.raises(InputValidationError, match="mixed"):
        generate_batch(tiny_generator, contexts, 0, palette)


def test_empty_batch(tiny_generator: Generator, palette: ClassPalette) -> None:
    assert generate_batch(tiny_generator, [], 0, palette) == []


def test_wrong_context_size(tiny_generator: Generator, palette: ClassPalette) -> None:
    with pytest.raises(InputValidationError):
        generate(tiny_generator, np.zeros((32, 32, 3)), 0, palette)


def test_noise_agreement(tiny_generator: Generator, palette: ClassPalette) -> None:
    (context,) = _contexts(1)
    assert noise_agreement(tiny_generator, context, (7, 7), palette) == 1.0
    value = noise_agreement(tiny_generator, context, (7, 8), palette)
    assert 0.0 <= value <= 1.0


def test_write_generation(
    tmp_path: Path, tiny_generator: Generator, palette: ClassPalette
) -> None:
    (context,) = _contexts(1)
    generation = generate(tiny_generator, context, 1, palette)
    gen_path, label_path = write_generation(tmp_path, "frame-01", generation, palette)
    assert gen_path.name == "frame-01.gen.png"
    assert label_path.name == "frame-01.label.png"
    assert np.array_equal(to_uint8(read_rgb(gen_path)), to_uint8(generation[0]))
    assert np.array_equal(read_labels(label_path, palette), generation[1])
