"""Shared test fixtures for bprelab tests."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pytest

# Ensure bprelab package is importable without installing
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from bprelab.environment.ensemble import EnvironmentEnsemble, mixture, single_atom
from bprelab.environment.families import lattice_critical_ensemble, table_law_for_means
from bprelab.offspring.laws import OffspringLaw, deterministic_law, table_law

ENSEMBLES = ROOT / "ensembles"
CONFIGS = ROOT / "configs"


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@pytest.fixture
def lattice() -> EnvironmentEnsemble:
    """Mean matrices ``2 B`` and ``B / 2`` with weight 1/2: a critical +-ln 2 walk."""
    return lattice_critical_ensemble()


@pytest.fixture
def doubling_law() -> OffspringLaw:
    """Every parent, whatever its type, has exactly two children of each type."""
    return deterministic_law([[2, 2], [2, 2]])


@pytest.fixture
def doubling(doubling_law: OffspringLaw) -> EnvironmentEnsemble:
    return single_atom(doubling_law, name="doubling")


def _up_down(weight_up: float, name: str) -> EnvironmentEnsemble:
    base = np.array([[0.5, 0.5], [0.25, 0.75]])
    up = table_law_for_means(2.0 * base, 1.0 / 16.0)
    down = table_law_for_means(base / 2.0, 1.0 / 16.0)
    return mixture([(weight_up, up), (1.0 - weight_up, down)], name=name)


@pytest.fixture
def supercritical() -> EnvironmentEnsemble:
    return _up_down(0.75, "lattice-supercritical")


@pytest.fixture
def subcritical() -> EnvironmentEnsemble:
    return _up_down(0.25, "lattice-subcritical")


@pytest.fixture
def three_type() -> EnvironmentEnsemble:
    """Two table-law atoms on three types, one growing and one shrinking."""
    rich = table_law(
        [
            [((0, 0, 0), 0.3), ((2, 1, 0), 0.3), ((1, 1, 2), 0.4)],
            [((0, 0, 0), 0.25), ((0, 2, 1), 0.5), ((3, 0, 0), 0.25)],
            [((0, 0, 0), 0.4), ((1, 2, 2), 0.6)],
        ]
    )
    poor = table_law(
        [
            [((0, 0, 0), 0.6), ((1, 0, 1), 0.4)],
            [((0, 0, 0), 0.5), ((0, 1, 0), 0.3), ((2, 0, 1), 0.2)],
            [((0, 0, 0), 0.7), ((0, 1, 2), 0.3)],
        ]
    )
    return mixture([(0.5, rich), (0.5, poor)], name="three-type")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

@pytest.fixture
def lattice_file() -> Path:
    return ENSEMBLES / "lattice-critical.json"


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a JSON experiment config into ``tmp_path`` and return its path."""

    def _write(name: str = "config.json", **values: Any) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(values))
        return path

    return _write
