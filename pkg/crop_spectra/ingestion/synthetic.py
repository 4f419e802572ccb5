"""Synthetic spectral libraries drawn from per-joint-label Gaussians."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from crop_spectra.core.constants import CROPS, STAGES, CropLabel, StageLabel
from crop_spectra.core.dataset import Dataset, JointLabel, SampleRecord, WavelengthGrid
from crop_spectra.core.exceptions import ConfigError, DatasetError

logger = logging.getLogger(__name__)

PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SyntheticClass:
    """Generator for one joint label: mean, covariance and sample count."""

    label: JointLabel
    mean: np.ndarray
    covariance: np.ndarray
    count: int


@dataclass(frozen=True)
class SyntheticSpec:
    """A wavelength grid and the per-class generators drawn in order."""

    wavelengths_nm: Tuple[float, ...]
    classes: Tuple[SyntheticClass, ...]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SyntheticSpec":
        """Parse the YAML layout documented in docs/formats.md."""
        try:
            wavelengths = tuple(float(v) for v in data["wavelengths_nm"])
            entries = data["classes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Synthetic spec needs wavelengths_nm and classes: {exc}") from exc
        classes = []
        for i, entry in enumerate(entries or []):
            try:
                label = JointLabel(CropLabel(entry["crop"]), StageLabel(entry["stage"]))
                mean = np.asarray(entry["mean"], dtype=float)
                if "covariance" in entry:
                    covariance = np.asarray(entry["covariance"], dtype=float)
                else:
                    covariance = np.diag(np.asarray(entry["variances"], dtype=float))
                count = int(entry["count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"Synthetic class {i} is malformed: {exc}") from exc
            classes.append(SyntheticClass(label, mean, covariance, count))
        return cls(wavelengths, tuple(classes))


def load_synthetic_spec(path: Path) -> SyntheticSpec:
    """Load a SyntheticSpec from YAML."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Synthetic spec file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse synthetic spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Synthetic spec must be a mapping: {path}")
    return SyntheticSpec.from_mapping(data)


def _check_class(entry: SyntheticClass, band_count: int) -> None:
    if entry.mean.shape != (band_count,):
        raise DatasetError(
            f"{entry.label}: mean has shape {entry.mean.shape}, expected ({band_count},)"
        )
    if entry.covariance.shape != (band_count, band_count):
        raise DatasetError(
            f"{entry.label}: covariance has shape {entry.covariance.shape}, "
            f"expected ({band_count}, {band_count})"
        )
    if entry.count < 0:
        raise DatasetError(f"{entry.label}: negative sample count {entry.count}")
    if not np.allclose(entry.covariance, entry.covariance.T, rtol=0.0, atol=PSD_TOLERANCE):
        raise DatasetError(f"{entry.label}: covariance is not symmetric")
    scale = max(1.0, float(np.abs(entry.covariance).max()))
    if np.linalg.eigvalsh(entry.covariance).min() < -PSD_TOLERANCE * scale:
        raise DatasetError(f"{entry.label}: covariance is not positive semi-definite")


def synthesize(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw a labeled Dataset from the spec's Gaussians.

    Classes are drawn in spec order from one generator seeded with ``seed``,
    so the same spec and seed give identical datasets. A zero covariance
    yields samples equal to the mean.

    Raises:
        DatasetError: If a covariance is not symmetric positive semi-definite
            or shapes disagree with the grid.
    """
    grid = WavelengthGrid(spec.wavelengths_nm)
    if not spec.classes:
        raise DatasetError("Synthetic spec lists no classes")
    for entry in spec.classes:
        _check_class(entry, grid.band_count)

    rng = np.random.default_rng(seed)
    records: List[SampleRecord] = []
    for entry in spec.classes:
        if entry.count == 0:
            continue
        samples = rng.multivariate_normal(
            entry.mean, entry.covariance, size=entry.count, method="eigh"
        )
        if not np.any(entry.covariance):
            samples = np.tile(entry.mean, (entry.count, 1))
        records.extend(
            SampleRecord(spectrum=row, crop=entry.label.crop, stage=entry.label.stage,
                         source_id="synthetic")
            for row in samples
        )
    logger.debug("Synthesized %d records over %d classes", len(records), len(spec.classes))
    return Dataset(grid, tuple(records))


def separable_spec(
    crops: Sequence[CropLabel] = CROPS[:3],
    stages: Sequence[StageLabel] = STAGES[:2],
    n_per_class: int = 20,
    band_count: int = 4,
    separation: float = 50.0,
    noise: float = 1.0,
    covariances: Optional[Dict[JointLabel, np.ndarray]] = None,
) -> SyntheticSpec:
    """Well-separated fixture: every joint label gets its own mean, far apart.

    Means sit at ``separation`` times a distinct vertex pattern so that
    crops are separable by any of the classifiers.
    """
    wavelengths = tuple(float(500 + 100 * b) for b in range(band_count))
    classes = []
    for ci, crop in enumerate(crops):
        for si, stage in enumerate(stages):
            mean = np.full(band_count, 10.0)
            mean[ci % band_count] += separation * (1 + ci // band_count)
            mean[(ci + 1 + si) % band_count] += separation * 0.25 * (si + 1)
            label = JointLabel(crop, stage)
            covariance = (
                covariances[label]
                if covariances and label in covariances
                else np.eye(band_count) * noise**2
            )
            classes.append(SyntheticClass(label, mean, covariance, n_per_class))
    return SyntheticSpec(wavelengths, tuple(classes))
