"""Bundled data files."""

from importlib import resources


def synthetic_network_path() -> str:
    """Path of the bundled synthetic city network (grid street plan, ~1.2k vertices)."""
    return str(resources.files(__package__).joinpath("synthetic_city.net"))
