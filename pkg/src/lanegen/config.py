from __future__ import annotations

import sys
from contextvars import ContextVar
from pathlib import Path
from typing import Any, Literal

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from .errors import ConfigurationError

SourceMode = Literal["teacher", "noise"]
PerturbationKind = Literal["noise", "gamma", "occlusion"]

# run file read by RunConfig while load_run_config is building it
_toml_path: ContextVar[Path | None] = ContextVar("lanegen_toml_path", default=None)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------- Architecture ----------


class ArchConfig(_Section):
    image_size: int = Field(64, ge=4)
    base_channels: int = Field(16, ge=1)
    depth: int = Field(4, ge=2)
    leaky_slope: float = Field(0.2, gt=0.0, lt=1.0)
    # None means every level 1..depth-1
    skip_levels: tuple[int, ...] | None = None
    bn_momentum: float = Field(0.1, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_shape(self) -> ArchConfig:
        if self.image_size % (2**self.depth) != 0:
            raise ValueError(
                f"image_size {self.image_size} is not divisible by 2**depth={2**self.depth}"
            )
        if self.image_size // 2**self.depth < 2:
            # a 1x1 bottleneck leaves batch norm a single value per channel at batch size 1
            raise ValueError(
                f"image_size {self.image_size} with depth {self.depth} leaves a "
                f"{self.image_size // 2**self.depth}x{self.image_size // 2**self.depth} "
                "bottleneck; need at least 2x2"
            )
        if self.skip_levels is not None:
            bad = [lvl for lvl in self.skip_levels if not 1 <= lvl <= self.depth - 1]
            if bad:
                raise ValueError(f"skip_levels {bad} outside 1..{self.depth - 1}")
        return self

    @property
    def skips(self) -> frozenset[int]:
        if self.skip_levels is None:
            return frozenset(range(1, self.depth))
        return frozenset(self.skip_levels)

    def encoder_channels(self, level: int) -> int:
        """Channels produced by encoder level 1..depth (base * 2**(level-1), capped at 8*base)."""
        return min(self.base_channels * 2 ** (level - 1), 8 * self.base_channels)

    @property
    def score_size(self) -> int:
        return self.image_size // 2**self.depth


ARCH_PRESETS: dict[str, ArchConfig] = {
    "desk": ArchConfig(),
    "full": ArchConfig(image_size=512, base_channels=64, depth=8),
}


# ---------- Training ----------


class TrainConfig(_Section):
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(2e-4, gt=0.0)
    # linear decay toward zero over lr_decay_epochs, starting at this 0-based epoch
    lr_decay_start: int | None = Field(None, ge=0)
    lr_decay_epochs: int = Field(100, ge=1)
    beta1: float = Field(0.5, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    epochs: int = Field(200, ge=0)
    seed: int = Field(0, ge=0)
    adversarial_enabled: bool = True
    lambda_mse: float = Field(100.0, ge=0.0)
    lambda_adv: float = Field(1.0, ge=0.0)
    source_mode: SourceMode = "teacher"
    arch: ArchConfig = ArchConfig()
    checkpoint_every: int = Field(10, ge=1)
    allow_ephemeral: bool = False
    log_every: int = Field(10, ge=1)


# ---------- Perturbation ----------


class PerturbationSpec(_Section):
    kind: PerturbationKind | None = None
    seed: int = Field(0, ge=0)
    noise_sigma: float = Field(0.05, ge=0.0)
    gamma_range: tuple[float, float] = (0.4, 2.5)
    removal_fraction: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_gamma(self) -> PerturbationSpec:
        lo, hi = self.gamma_range
        if not 0.0 < lo <= hi:
            raise ValueError(f"gamma_range must satisfy 0 < lo <= hi, got {self.gamma_range}")
        return self


# ---------- Synthetic data / ablation ----------


class SplitCounts(_Section):
    train: int = Field(8, ge=1)
    val: int = Field(2, ge=1)
    test: int = Field(2, ge=1)


class SynthConfig(_Section):
    seed: int = Field(1, ge=0)
    counts: SplitCounts = SplitCounts()


class AblationConfig(_Section):
    seeds: tuple[int, ...] = (1, 2, 3)
    top_classes: int = Field(5, ge=1)
    eval_split: Literal["train", "val", "test"] = "val"


# ---------- Run config ----------


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="LANEGEN_",
        env_nested_delimiter="__",
        extra="forbid",
        frozen=True,
    )

    palette: Path | None = None
    palette_preset: str = "apolloscape"
    data_root: Path | None = None
    out: Path = Path("runs")
    infer_seed: int = Field(0, ge=0)
    # threads decoding dataset images
    io_workers: int = Field(4, ge=1)
    train: TrainConfig = TrainConfig()
    perturb: PerturbationSpec = PerturbationSpec()
    synth: SynthConfig = SynthConfig()
    ablate: AblationConfig = AblationConfig()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # earlier sources win: overrides, then the run file, then LANEGEN_* variables
        path = _toml_path.get()
        if path is None:
            return init_settings, env_settings
        return init_settings, TomlConfigSettingsSource(settings_cls, toml_file=path), env_settings


# ---------- Loading ----------


def parse_override(item: str) -> tuple[str, Any]:
    """
    Parse ``key=value`` with a dotted key. Values are read as TOML scalars
    (``5``, ``0.5``, ``true``, ``[1, 2]``) and fall back to plain strings.
    """
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigurationError(f"override {item!r} has an empty key")
    try:
        value: Any = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


def set_dotted(target: dict[str, Any], key: str, value: Any) -> None:
    node = target
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"override {key!r} descends into non-table {part!r}")
        node = child
    node[parts[-1]] = value


def load_run_config(
    config_path: Path | None = None,
    overrides: dict[str, Any] | None = None,
    *,
    dotenv_path: str | None = None,
) -> RunConfig:
    """
    Merge defaults < environment (LANEGEN_*, .env) < TOML file < overrides.
    """
    load_dotenv(dotenv_path=dotenv_path)
    if config_path is not None and not config_path.is_file():
        raise ConfigurationError(f"cannot read config {config_path}: not a file")
    nested: dict[str, Any] = {}
    for key, value in (overrides or {}).items():
        set_dotted(nested, key, value)
    token = _toml_path.set(config_path)
    try:
        return RunConfig(**nested)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {config_path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML in {config_path}: {exc}") from exc
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc
    finally:
        _toml_path.reset(token)


def echo_config(config: RunConfig, run_dir: Path) -> Path:
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "run_config.json"
    path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
    return path
