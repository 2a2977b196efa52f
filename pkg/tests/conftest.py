"""Shared fixtures."""

import os
from pathlib import Path

import numpy as np
import pytest

os.environ.setdefault("NILSPECTRA_LOG_TO_FILE", "false")

from nilspectra.config import get_settings  # noqa: E402
from nilspectra.services.automorphism import build  # noqa: E402
from nilspectra.services.sector import theta_atom  # noqa: E402

get_settings.cache_clear()

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

GOLDEN_LAM = (3 + 5 ** 0.5) / 2


@pytest.fixture
def golden():
    """A = [[2, 1], [1, 1]], K = 1."""
    return build(2, 1, 1, 1, 0, 0, K=1)


@pytest.fixture
def golden_k2():
    return build(2, 1, 1, 1, 0, 0, K=2)


@pytest.fixture
def atom():
    return theta_atom(1, 1, 0, 0)


@pytest.fixture
def mixed_atom():
    """A two-term N = 1 observable with a Hermite degree-one part."""
    return theta_atom(1, 1, 0, 0) + theta_atom(1, 1, 1, 0).scale(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def config_dir() -> Path:
    return CONFIGS


@pytest.fixture
def golden_lam() -> float:
    return GOLDEN_LAM
