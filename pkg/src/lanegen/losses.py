from __future__ import annotations

from dataclasses import dataclass

from torch import Tensor

from .errors import ConfigurationError, InputValidationError


@dataclass(frozen=True, slots=True)
class LossWeights:
    lambda_mse: float = 100.0
    lambda_adv: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_mse < 0 or self.lambda_adv < 0:
            raise ConfigurationError(
                f"loss weights must be nonnegative, got mse={self.lambda_mse} adv={self.lambda_adv}"
            )


@dataclass(frozen=True, slots=True)
class LossBreakdown:
    l_mse: float
    l_adv: float
    l_total_g: float
    l_d: float
    lambda_mse: float
    lambda_adv: float

    def as_row(self) -> dict[str, float]:
        return {
            "l_mse": self.l_mse,
            "l_adv": self.l_adv,
            "l_total_g": self.l_total_g,
            "l_d": self.l_d,
        }


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise InputValidationError(f"{what}: shapes differ {tuple(a.shape)} vs {tuple(b.shape)}")


def generative_loss(generated: Tensor, target: Tensor) -> Tensor:
    """
    Mean over pixels of the squared RGB distance. Tensors are (N, 3, H, W);
    channels are summed per pixel, then averaged over N*H*W pixels.
    """
    _same_shape(generated, target, "generative_loss")
    return ((generated - target) ** 2).sum(dim=1).mean()


def adversarial_loss_g(scores: Tensor) -> Tensor:
    """Mean over score elements of (1 - score)^2; soft targets, never log-loss."""
    return ((1.0 - scores) ** 2).mean()


def discriminator_loss(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    _same_shape(real_scores, fake_scores, "discriminator_loss")
    return ((1.0 - real_scores) ** 2).mean() + (fake_scores**2).mean()


def weighted_generator_loss(l_mse: Tensor, l_adv: Tensor | None, weights: LossWeights) -> Tensor:
    """Differentiable counterpart of total_generator_loss; l_adv None drops the term entirely."""
    total = weights.lambda_mse * l_mse
    if l_adv is not None:
        total = total + weights.lambda_adv * l_adv
    return total


def total_generator_loss(
    l_mse: float, l_adv: float, weights: LossWeights, *, l_d: float = 0.0
) -> LossBreakdown:
    if weights.lambda_mse < 0 or weights.lambda_adv < 0:
        raise ConfigurationError("loss weights must be nonnegative")
    return LossBreakdown(
        l_mse=l_mse,
        l_adv=l_adv,
        l_total_g=weights.lambda_mse * l_mse + weights.lambda_adv * l_adv,
        l_d=l_d,
        lambda_mse=weights.lambda_mse,
        lambda_adv=weights.lambda_adv,
    )
