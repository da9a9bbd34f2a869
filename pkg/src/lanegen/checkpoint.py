"""
Single-file training checkpoints: config echo, both networks, both optimizer
states, counters, palette and the training RNG, tagged with a format magic.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import torch

from .errors import CheckpointError, CheckpointVersionError

if TYPE_CHECKING:
    from .trainer import TrainState

CHECKPOINT_MAGIC = "LANEGEN-CKPT-v1"

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def dtype_name(dtype: torch.dtype) -> str:
    for name, dt in _DTYPES.items():
        if dt == dtype:
            return name
    raise CheckpointError(f"unsupported parameter dtype {dtype}")


def state_to_payload(state: TrainState) -> dict[str, Any]:
    from .palette import format_palette

    return {
        "magic": CHECKPOINT_MAGIC,
        "config": state.config.model_dump_json(),
        "palette": format_palette(state.palette),
        "dtype": dtype_name(next(state.generator.parameters()).dtype),
        "epoch": state.epoch,
        "step": state.step,
        "generator": state.generator.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "g_opt": state.g_opt.state_dict(),
        "d_opt": state.d_opt.state_dict(),
        "rng": json.dumps(state.rng.bit_generator.state),
    }


def save_checkpoint(state: TrainState, path: Path) -> Path:
    payload = state_to_payload(state)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(payload, tmp)
        tmp.replace(path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def read_payload(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"corrupt or unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise CheckpointError(f"corrupt checkpoint {path}: not a mapping")
    magic = payload.get("magic")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointVersionError(
            f"checkpoint {path} has format {magic!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    missing = [
        k
        for k in ("config", "palette", "dtype", "epoch", "step", "generator", "discriminator",
                  "g_opt", "d_opt", "rng")
        if k not in payload
    ]
    if missing:
        raise CheckpointError(f"corrupt checkpoint {path}: missing {missing}")
    return payload


def load_checkpoint(path: Path) -> TrainState:
    from .config import TrainConfig
    from .palette import parse_palette
    from .trainer import init_state

    payload = read_payload(path)
    try:
        config = TrainConfig.model_validate_json(payload["config"])
        palette = parse_palette(payload["palette"])
        state = init_state(config, palette, dtype=_DTYPES[payload["dtype"]], seed_weights=False)
        state.generator.load_state_dict(payload["generator"])
        state.discriminator.load_state_dict(payload["discriminator"])
        state.g_opt.load_state_dict(payload["g_opt"])
        state.d_opt.load_state_dict(payload["d_opt"])
        state.rng.bit_generator.state = json.loads(payload["rng"])
    except (KeyError, ValueError, RuntimeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    state.epoch = int(payload["epoch"])
    state.step = int(payload["step"])
    return state
