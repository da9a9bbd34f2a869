from __future__ import annotations

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

_TRUE_VALUES = {"1", "true", "yes", "on"}
_ROOT = "lanegen"

console = Console(stderr=True)


def debug_enabled() -> bool:
    return (os.getenv("LANEGEN_DEBUG") or "").strip().lower() in _TRUE_VALUES


def setup_logging(verbose: bool = False) -> None:
    """Attach a single rich handler to the package logger (idempotent)."""
    root = logging.getLogger(_ROOT)
    root.setLevel(logging.DEBUG if verbose or debug_enabled() else logging.INFO)
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)


def get_logger(name: str) -> logging.Logger:
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
