"""Shipped model recipes and example run configs."""

from __future__ import annotations

from pathlib import Path

from ..errors import ModelIOError

_ROOT = Path(__file__).parent


def preset_path(name: str) -> Path:
    """Resolve a shipped recipe by bare name (``tlm_a``) or file name."""
    candidate = _ROOT / name
    if candidate.suffix == "" :
        candidate = candidate.with_suffix(".nlgen")
    if not candidate.is_file():
        known = ", ".join(sorted(p.stem for p in _ROOT.glob("*.nlgen")))
        raise ModelIOError(f"no preset named {name!r}; shipped recipes: {known}")
    return candidate
