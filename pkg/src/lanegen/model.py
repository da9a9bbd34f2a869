"""
Conditioned encoder/generator with multi-resolution skip conditioning, and a
conditioned discriminator that emits a patch map of realness scores.

Encoder level l (1..depth) halves the spatial size; decoder level l (depth-1..0)
doubles it back. Skip tensors join encoder and decoder at equal resolution.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import torch
from torch import Tensor, nn

from .config import ArchConfig
from .data.dataset import ConditionedInput
from .errors import InputValidationError
from .palette import RgbImage


def conv_block(in_ch: int, out_ch: int, config: ArchConfig, *, stride: int) -> nn.Sequential:
    """Convolution -> Batch Normalization -> Leaky ReLU."""
    kernel = 4 if stride == 2 else 3
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(out_ch, momentum=config.bn_momentum),
        nn.LeakyReLU(config.leaky_slope),
    )


class UpBlock(nn.Module):
    """Up sampling -> [skip concat] -> Convolution -> Batch Normalization -> Leaky ReLU."""

    def __init__(self, in_ch: int, skip_ch: int, out_ch: int, config: ArchConfig) -> None:
        super().__init__()
        self.skip_ch = skip_ch
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.block = conv_block(in_ch + skip_ch, out_ch, config, stride=1)

    def forward(self, x: Tensor, skip: Tensor | None = None) -> Tensor:
        x = self.up(x)
        if self.skip_ch:
            if skip is None:
                raise InputValidationError("skip-conditioned block called without a skip tensor")
            x = torch.cat([x, skip], dim=1)
        return self.block(x)


class Generator(nn.Module):
    """Encoder over [source | context] followed by a skip-conditioned decoder."""

    def __init__(self, config: ArchConfig, in_channels: int = 6, out_channels: int = 3) -> None:
        super().__init__()
        self.config = config
        enc = config.encoder_channels
        self.encoder = nn.ModuleList(
            conv_block(in_channels if lvl == 1 else enc(lvl - 1), enc(lvl), config, stride=2)
            for lvl in range(1, config.depth + 1)
        )
        decoder: list[UpBlock] = []
        prev = enc(config.depth)
        for lvl in range(config.depth - 1, -1, -1):
            out_ch = enc(lvl) if lvl >= 1 else config.base_channels
            skip_ch = enc(lvl) if lvl in config.skips else 0
            decoder.append(UpBlock(prev, skip_ch, out_ch, config))
            prev = out_ch
        self.decoder = nn.ModuleList(decoder)
        self.head = nn.Conv2d(prev, out_channels, 3, padding=1)

    def encode(self, x: Tensor) -> list[Tensor]:
        """Feature maps of levels 1..depth."""
        feats = []
        for block in self.encoder:
            x = block(x)
            feats.append(x)
        return feats

    def forward(self, x: Tensor, zero_skips: Sequence[int] = ()) -> Tensor:
        """zero_skips lists skip levels whose tensors are replaced by zeros."""
        _check_tensor(x, self.config, 6)
        feats = self.encode(x)
        h = feats[-1]
        for i, block in enumerate(self.decoder):
            lvl = self.config.depth - 1 - i
            skip: Tensor | None = None
            if lvl in self.config.skips:
                skip = feats[lvl - 1]
                if lvl in zero_skips:
                    skip = torch.zeros_like(skip)
            h = block(h, skip)
        return torch.sigmoid(self.head(h))


class Discriminator(nn.Module):
    """Encoder-like stack over [candidate | context] ending in a sigmoid score map."""

    def __init__(self, config: ArchConfig, in_channels: int = 6) -> None:
        super().__init__()
        self.config = config
        enc = config.encoder_channels
        self.features = nn.Sequential(
            *(
                conv_block(in_channels if lvl == 1 else enc(lvl - 1), enc(lvl), config, stride=2)
                for lvl in range(1, config.depth + 1)
            )
        )
        self.score = nn.Conv2d(enc(config.depth), 1, 3, padding=1)

    def forward(self, candidate: Tensor, context: Tensor) -> Tensor:
        _check_tensor(candidate, self.config, 3)
        _check_tensor(context, self.config, 3)
        if candidate.shape[0] != context.shape[0]:
            raise InputValidationError("candidate and context batch sizes differ")
        x = torch.cat([candidate, context], dim=1)
        return torch.sigmoid(self.score(self.features(x)))


def _check_tensor(x: Tensor, config: ArchConfig, channels: int) -> None:
    expected = (channels, config.image_size, config.image_size)
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise InputValidationError(
            f"expected (N, {channels}, {config.image_size}, {config.image_size}), "
            f"got {tuple(x.shape)}"
        )


def build_networks(config: ArchConfig) -> tuple[Generator, Discriminator]:
    return Generator(config), Discriminator(config)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


# ---------- numpy <-> tensor ----------


def images_to_tensor(images: Sequence[np.ndarray], dtype: torch.dtype = torch.float32) -> Tensor:
    """Stack (H, W, C) arrays into an (N, C, H, W) tensor."""
    arr = np.stack([np.asarray(im) for im in images]).transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(arr)).to(dtype)


def tensor_to_images(x: Tensor) -> list[RgbImage]:
    arr = x.detach().cpu().to(torch.float64).numpy().transpose(0, 2, 3, 1)
    return [np.ascontiguousarray(a) for a in arr]


# ---------- operation-level entry points ----------


def generator_forward(
    generator: Generator, conditioned: ConditionedInput, config: ArchConfig | None = None
) -> RgbImage:
    """Evaluation-mode forward of one conditioned input; deterministic for fixed weights."""
    config = config or generator.config
    if conditioned.size != config.image_size or conditioned.data.shape[1] != config.image_size:
        raise InputValidationError(
            f"input is {conditioned.data.shape[:2]}, configured size is {config.image_size}"
        )
    dtype = next(generator.parameters()).dtype
    generator.eval()
    with torch.no_grad():
        out = generator(images_to_tensor([conditioned.data], dtype))
    return tensor_to_images(out)[0]


def discriminator_forward(
    discriminator: Discriminator,
    candidate: RgbImage,
    context: RgbImage,
    config: ArchConfig | None = None,
) -> np.ndarray:
    """Evaluation-mode score map (S, S) with S = image_size / 2**depth."""
    config = config or discriminator.config
    if candidate.shape != context.shape:
        raise InputValidationError(
            f"candidate {candidate.shape[:2]} and context {context.shape[:2]} differ in size"
        )
    if candidate.shape[:2] != (config.image_size, config.image_size):
        raise InputValidationError(
            f"inputs are {candidate.shape[:2]}, configured size is {config.image_size}"
        )
    dtype = next(discriminator.parameters()).dtype
    discriminator.eval()
    with torch.no_grad():
        scores = discriminator(
            images_to_tensor([candidate], dtype), images_to_tensor([context], dtype)
        )
    return scores[0, 0].detach().cpu().to(torch.float64).numpy()
