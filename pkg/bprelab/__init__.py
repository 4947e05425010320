"""bprelab: simulation lab for critical multi-type branching processes in random environment."""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("bprelab")
except PackageNotFoundError:
    __version__ = "0.1.0"
