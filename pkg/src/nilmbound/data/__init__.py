"""Bundled demo catalogs and scenarios."""

from importlib import resources
from pathlib import Path

__all__ = ["path", "demo_scenario", "interchangeable_scenario"]


def path(name: str) -> Path:
    """Filesystem path of a bundled data file such as ``demo_scenario.yaml``."""
    return Path(str(resources.files(__name__).joinpath(name)))


def demo_scenario():
    from ..scenario import load_scenario

    return load_scenario(path("demo_scenario.yaml"))


def interchangeable_scenario():
    from ..scenario import load_scenario

    return load_scenario(path("interchangeable_scenario.yaml"))
