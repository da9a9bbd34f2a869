from __future__ import annotations

import hashlib
import random
from collections.abc import Iterable
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch

# ---------- Time helpers ----------


def utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


# ---------- Filesystem helpers ----------


def ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------- Checksums ----------


def sha256_bytes(chunks: Iterable[bytes]) -> str:
    h = hashlib.sha256()
    for chunk in chunks:
        h.update(chunk)
    return h.hexdigest()


def sha256_file(path: Path) -> str:
    return sha256_bytes([path.read_bytes()])


def array_checksum(*arrays: np.ndarray) -> str:
    """Checksum over dtype, shape and raw bytes of each array."""
    parts: list[bytes] = []
    for a in arrays:
        a = np.ascontiguousarray(a)
        parts.append(f"{a.dtype.str}{a.shape}".encode())
        parts.append(a.tobytes())
    return sha256_bytes(parts)


def directory_checksum(root: Path) -> str:
    """
    Hash every file under root (relative path + content), in sorted order,
    so two trees compare equal iff they hold identical files.
    """
    parts: list[bytes] = []
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        parts.append(p.relative_to(root).as_posix().encode())
        parts.append(p.read_bytes())
    return sha256_bytes(parts)


def module_checksum(module: torch.nn.Module) -> str:
    """Checksum over a module's state dict (parameters and buffers)."""
    parts: list[bytes] = []
    for name, tensor in sorted(module.state_dict().items()):
        parts.append(name.encode())
        parts.append(tensor.detach().cpu().contiguous().numpy().tobytes())
    return sha256_bytes(parts)


# ---------- Seeding ----------


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
