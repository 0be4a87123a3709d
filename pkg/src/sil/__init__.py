"""Social Interactions Lab: recover interaction networks from panel data."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("social-interactions-lab")
except PackageNotFoundError:
    # Fallback for editable/local source execution without installed package metadata.
    __version__ = "0.1.0"

__all__ = ["__version__"]
