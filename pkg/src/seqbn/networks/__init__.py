"""Reference networks shipped with the package."""
from importlib import resources

from ..network import BayesianNetwork, parse_network

NAMES = ("chain3", "diamond4", "mix5", "six6", "sparse8", "net10")


def load(name: str) -> BayesianNetwork:
    """Load a shipped network by name (see ``NAMES``)."""
    if name not in NAMES:
        raise KeyError(f"unknown reference network {name!r}; choose from {NAMES}")
    return parse_network(resources.files(__name__).joinpath(f"{name}.net").read_text(encoding="utf-8"))


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.net")
