"""Canonical data model for labeled spectral libraries."""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from crop_spectra.core.constants import (
    CROPS,
    REFLECTANCE_MAX,
    REFLECTANCE_MIN,
    STAGES,
    CropLabel,
    StageLabel,
)
from crop_spectra.core.exceptions import DatasetError

logger = logging.getLogger(__name__)


class JointLabel(NamedTuple):
    """A (crop, growth stage) pair used as one model class."""

    crop: CropLabel
    stage: StageLabel

    def __str__(self) -> str:
        return f"{self.crop.value}/{self.stage.value}"


def joint_sort_key(label: JointLabel) -> Tuple[int, int]:
    """Crop alphabetical, then stage enumeration order."""
    return CROPS.index(label.crop), STAGES.index(label.stage)


ALL_JOINT_LABELS: Tuple[JointLabel, ...] = tuple(
    JointLabel(crop, stage) for crop in CROPS for stage in STAGES
)


@dataclass(frozen=True)
class WavelengthGrid:
    """Band centres in nanometres, strictly increasing."""

    wavelengths_nm: Tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.wavelengths_nm)
        object.__setattr__(self, "wavelengths_nm", values)
        if len(values) < 2:
            raise DatasetError(
                f"A wavelength grid needs at least 2 bands, got {len(values)}"
            )
        for previous, current in zip(values, values[1:]):
            if not current > previous:
                raise DatasetError(
                    f"Wavelengths must be strictly increasing: {previous} then {current}"
                )

    @property
    def band_count(self) -> int:
        return len(self.wavelengths_nm)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.wavelengths_nm, dtype=float)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One labeled spectrum with its geolocation metadata.

    Latitude and longitude are None when absent or unparseable.
    """

    spectrum: np.ndarray
    crop: CropLabel
    stage: StageLabel
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    aez: str = ""
    source_id: str = ""

    def __post_init__(self) -> None:
        spectrum = np.array(self.spectrum, dtype=float)
        if spectrum.ndim != 1:
            raise DatasetError(f"Spectrum must be one-dimensional, got shape {spectrum.shape}")
        if not np.all(np.isfinite(spectrum)):
            raise DatasetError("Spectrum contains non-finite reflectance values")
        spectrum.setflags(write=False)
        object.__setattr__(self, "spectrum", spectrum)
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            raise DatasetError(f"Latitude out of range: {self.latitude}")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            raise DatasetError(f"Longitude out of range: {self.longitude}")

    @property
    def joint_label(self) -> JointLabel:
        return JointLabel(self.crop, self.stage)

    @property
    def has_location(self) -> bool:
        return self.latitude is not None and self.longitude is not None

    def same_values(self, other: "SampleRecord") -> bool:
        """Value equality, including exact reflectance values."""
        return (
            np.array_equal(self.spectrum, other.spectrum)
            and self.crop == other.crop
            and self.stage == other.stage
            and self.latitude == other.latitude
            and self.longitude == other.longitude
            and self.aez == other.aez
            and self.source_id == other.source_id
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """A wavelength grid and an immutable, ordered list of records."""

    grid: WavelengthGrid
    records: Tuple[SampleRecord, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if not records:
            raise DatasetError("Dataset contains no records")
        for i, record in enumerate(records):
            if record.spectrum.shape[0] != self.grid.band_count:
                raise DatasetError(
                    f"Record {i} has {record.spectrum.shape[0]} bands, "
                    f"grid has {self.grid.band_count}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def band_count(self) -> int:
        return self.grid.band_count

    @cached_property
    def spectra(self) -> np.ndarray:
        """Records stacked as an (n, B) read-only matrix."""
        matrix = np.vstack([record.spectrum for record in self.records])
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def crops(self) -> Tuple[CropLabel, ...]:
        return tuple(record.crop for record in self.records)

    @cached_property
    def stages(self) -> Tuple[StageLabel, ...]:
        return tuple(record.stage for record in self.records)

    @cached_property
    def joint_labels(self) -> Tuple[JointLabel, ...]:
        return tuple(record.joint_label for record in self.records)

    def crop_indices(self) -> np.ndarray:
        """Integer crop codes in CROPS order."""
        lookup = {crop: i for i, crop in enumerate(CROPS)}
        return np.array([lookup[crop] for crop in self.crops], dtype=int)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        """Dataset restricted to the given record indices, in the given order."""
        return Dataset(self.grid, tuple(self.records[int(i)] for i in indices))

    def same_values(self, other: "Dataset") -> bool:
        """Value equality of grids and every record."""
        if self.grid != other.grid or len(self) != len(other):
            return False
        return all(a.same_values(b) for a, b in zip(self.records, other.records))


@dataclass(frozen=True)
class DatasetSummary:
    """Counts and value ranges describing one dataset."""

    total_records: int
    band_count: int
    first_wavelength_nm: float
    last_wavelength_nm: float
    crop_counts: Dict[str, int]
    stage_counts: Dict[str, int]
    joint_counts: Dict[str, int]
    reflectance_min: float
    reflectance_max: float
    out_of_range_values: int
    records_with_out_of_range: int
    records_missing_location: int
    crops_present: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total_records": self.total_records,
            "band_count": self.band_count,
            "first_wavelength_nm": self.first_wavelength_nm,
            "last_wavelength_nm": self.last_wavelength_nm,
            "crops_present": self.crops_present,
            "crop_counts": dict(self.crop_counts),
            "stage_counts": dict(self.stage_counts),
            "joint_counts": dict(self.joint_counts),
            "reflectance_min": self.reflectance_min,
            "reflectance_max": self.reflectance_max,
            "out_of_range_values": self.out_of_range_values,
            "records_with_out_of_range": self.records_with_out_of_range,
            "records_missing_location": self.records_missing_location,
        }


def summarize(ds: Dataset) -> DatasetSummary:
    """Counts per crop, stage and joint label, band count and value range.

    Every crop, stage and joint label appears in the counts, with 0 when
    absent, in enumeration order.
    """
    crop_counts = {crop.value: 0 for crop in CROPS}
    stage_counts = {stage.value: 0 for stage in STAGES}
    joint_counts = {str(label): 0 for label in ALL_JOINT_LABELS}
    for record in ds.records:
        crop_counts[record.crop.value] += 1
        stage_counts[record.stage.value] += 1
        joint_counts[str(record.joint_label)] += 1

    spectra = ds.spectra
    out_of_range = (spectra < REFLECTANCE_MIN) | (spectra > REFLECTANCE_MAX)
    missing_location = sum(1 for record in ds.records if not record.has_location)
    summary = DatasetSummary(
        total_records=len(ds),
        band_count=ds.band_count,
        first_wavelength_nm=ds.grid.wavelengths_nm[0],
        last_wavelength_nm=ds.grid.wavelengths_nm[-1],
        crop_counts=crop_counts,
        stage_counts=stage_counts,
        joint_counts=joint_counts,
        reflectance_min=float(spectra.min()),
        reflectance_max=float(spectra.max()),
        out_of_range_values=int(out_of_range.sum()),
        records_with_out_of_range=int(out_of_range.any(axis=1).sum()),
        records_missing_location=missing_location,
        crops_present=sum(1 for count in crop_counts.values() if count > 0),
    )
    if summary.out_of_range_values:
        logger.warning(
            "%d reflectance values in %d records fall outside [%g, %g]",
            summary.out_of_range_values,
            summary.records_with_out_of_range,
            REFLECTANCE_MIN,
            REFLECTANCE_MAX,
        )
    return summary


def format_summary(summary: DatasetSummary) -> str:
    """Human-readable multi-line summary for the CLI."""
    lines: List[str] = [
        f"Records: {summary.total_records}",
        f"Bands: {summary.band_count} "
        f"({_format_nm(summary.first_wavelength_nm)}-"
        f"{_format_nm(summary.last_wavelength_nm)} nm)",
        f"Crops present: {summary.crops_present}",
    ]
    for name, count in summary.crop_counts.items():
        lines.append(f"  {name}: {count}")
    lines.append("Stages:")
    for name, count in summary.stage_counts.items():
        lines.append(f"  {name}: {count}")
    realized = [(name, count) for name, count in summary.joint_counts.items() if count]
    lines.append(f"Joint labels realized: {len(realized)}")
    for name, count in realized:
        lines.append(f"  {name}: {count}")
    lines.append(
        f"Reflectance range: {summary.reflectance_min:g} to {summary.reflectance_max:g}"
    )
    lines.append(
        f"Out-of-range values: {summary.out_of_range_values} "
        f"(in {summary.records_with_out_of_range} records)"
    )
    lines.append(f"Records without location: {summary.records_missing_location}")
    return "\n".join(lines)


def _format_nm(value: float) -> str:
    return str(int(value)) if math.isfinite(value) and value == int(value) else f"{value:g}"

