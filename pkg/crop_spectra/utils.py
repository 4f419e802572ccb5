"""Utility functions for crop_spectra."""

import logging
import re
from pathlib import Path

import coloredlogs

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def get_project_temp_dir() -> Path:
    """Get the project temp directory."""
    return Path(Path(__file__).parent.parent, "temp")


def get_runs_dir() -> Path:
    """Get the default output directory for CLI runs within project temp."""
    runs_dir = Path(get_project_temp_dir(), "runs")
    runs_dir.mkdir(parents=True, exist_ok=True)
    return runs_dir


def get_test_results_dir() -> Path:
    """Get the test results directory within project temp."""
    test_dir = Path(get_project_temp_dir(), "test_results")
    test_dir.mkdir(parents=True, exist_ok=True)
    return test_dir


def setup_logging(verbose: bool = False) -> None:
    """Install colored console logging on the crop_spectra logger."""
    level = logging.DEBUG if verbose else logging.INFO
    coloredlogs.install(
        level=level,
        logger=logging.getLogger("crop_spectra"),
        fmt=LOG_FORMAT,
    )


def slugify(text: str) -> str:
    """File-name-safe lowercase slug, e.g. 'QDA-Bayes-MMP(0.5)' -> 'qda-bayes-mmp_0.5'."""
    slug = text.strip().lower()
    slug = re.sub(r"[()\s=,]+", "_", slug)
    slug = re.sub(r"[^a-z0-9._-]", "", slug)
    return slug.strip("_") or "unnamed"
