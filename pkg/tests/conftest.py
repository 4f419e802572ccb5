"""Pytest configuration and fixtures for crop_spectra tests."""

import os
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from crop_spectra.core.dataset import Dataset
from crop_spectra.ingestion.synthetic import separable_spec, synthesize
from crop_spectra.utils import get_test_results_dir

GHISACONUS_ENV = "GHISACONUS_CSV"


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for testing in the project temp folder."""
    with tempfile.TemporaryDirectory(dir=get_test_results_dir()) as tmp_dir:
        yield Path(tmp_dir)


@pytest.fixture
def resources_dir() -> Path:
    return Path(Path(__file__).parent, "resources")


@pytest.fixture
def tiny_library_path(resources_dir: Path) -> Path:
    """Return path to the ten-record GHISACONUS-layout library."""
    return Path(resources_dir, "tiny_library.csv")


@pytest.fixture
def synthetic_spec_path(resources_dir: Path) -> Path:
    return Path(resources_dir, "separable_spec.yaml")


@pytest.fixture
def separable_dataset() -> Dataset:
    """Three crops x two stages, 20 records each, four bands, well separated."""
    return synthesize(separable_spec(), seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ghisaconus_path() -> Path:
    """Path of the real library from GHISACONUS_CSV; skips when unset."""
    value = os.environ.get(GHISACONUS_ENV)
    if not value or not Path(value).is_file():
        pytest.skip(f"Set {GHISACONUS_ENV} to the GHISACONUS CSV to run this test")
    return Path(value)
