"""Bundled example models: ``m1`` to ``m4`` and ``m2_observational``."""

from importlib import resources

from ..io import load_model

NAMES = ("m1", "m2", "m3", "m4", "m2_observational")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.json")


def load(name: str):
    """Parse the bundled model ``name``."""
    if name not in NAMES:
        raise KeyError(f"no fixture {name!r}; choose from {NAMES}")
    with resources.as_file(path(name)) as p:
        return load_model(p)
