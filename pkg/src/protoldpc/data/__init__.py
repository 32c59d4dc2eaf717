"""Protograph files shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..protograph import Protograph, parse_protograph


def available() -> list[str]:
    return sorted(p.name[: -len(".proto")] for p in resources.files(__name__).iterdir() if p.name.endswith(".proto"))


def load(name: str) -> Protograph:
    """Load a packaged protograph by file stem, e.g. ``"bec_r1-8_21x24"``."""
    path = resources.files(__name__) / f"{name}.proto"
    if not path.is_file():
        raise FileNotFoundError(f"no packaged protograph named {name!r}; available: {', '.join(available())}")
    return parse_protograph(path.read_text())
