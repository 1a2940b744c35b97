"""Access to the bundled example models and documents."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    p = Path(str(resources.files("reparam").joinpath("fixtures", name)))
    if not p.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return p
