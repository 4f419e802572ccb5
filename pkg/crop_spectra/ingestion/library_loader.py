"""Load and write delimiter-separated spectral libraries."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from crop_spectra.core.constants import (
    BAND_DETECTION_INDEX_RANGE,
    BAND_DETECTION_NUMERIC_HEADER,
    COLUMN_AEZ,
    COLUMN_CROP,
    COLUMN_LATITUDE,
    COLUMN_LONGITUDE,
    COLUMN_SOURCE_ID,
    COLUMN_STAGE,
    DEFAULT_BAND_PREFIX,
    DEFAULT_DELIMITER,
    GHISACONUS_COLUMNS,
    GHISACONUS_CROP_ALIASES,
    GHISACONUS_STAGE_ALIASES,
    OPTIONAL_COLUMN_KEYS,
    REQUIRED_COLUMN_KEYS,
    VALID_BAND_DETECTION_MODES,
    CropLabel,
    StageLabel,
)
from crop_spectra.core.dataset import Dataset, SampleRecord, WavelengthGrid
from crop_spectra.core.exceptions import ConfigError, DatasetError

logger = logging.getLogger(__name__)

ColumnRef = Union[str, int]


def _normalize_label(raw: str) -> str:
    return " ".join(str(raw).split()).casefold()


@dataclass(frozen=True)
class IngestConfig:
    """How to read one library export.

    Attributes:
        columns: Metadata key (crop, stage, latitude, longitude, aez,
            source_id) to header name or 0-based column index. Only crop and
            stage are required.
        band_detection: ``numeric_header`` (every other header that parses
            as nanometres after stripping ``band_prefix``) or ``index_range``.
        band_index_range: Half-open [start, stop) column range for
            ``index_range`` detection.
        crop_aliases / stage_aliases: Raw label string to enum value. Matching
            ignores case and repeated whitespace; the canonical enum values
            are always accepted.
        reflectance_scale: Multiplier applied to every reflectance cell
            (100.0 turns fractions into percent).
    """

    columns: Dict[str, ColumnRef] = field(default_factory=lambda: dict(GHISACONUS_COLUMNS))
    delimiter: str = DEFAULT_DELIMITER
    band_detection: str = BAND_DETECTION_NUMERIC_HEADER
    band_prefix: str = DEFAULT_BAND_PREFIX
    band_index_range: Optional[Tuple[int, int]] = None
    crop_aliases: Dict[str, CropLabel] = field(
        default_factory=lambda: dict(GHISACONUS_CROP_ALIASES)
    )
    stage_aliases: Dict[str, StageLabel] = field(
        default_factory=lambda: dict(GHISACONUS_STAGE_ALIASES)
    )
    reflectance_scale: float = 1.0

    def __post_init__(self) -> None:
        for key in REQUIRED_COLUMN_KEYS:
            if self.columns.get(key) in (None, ""):
                raise ConfigError(f"Ingest config must map the '{key}' column")
        unknown = set(self.columns) - set(REQUIRED_COLUMN_KEYS) - set(OPTIONAL_COLUMN_KEYS)
        if unknown:
            raise ConfigError(f"Unknown column keys in ingest config: {sorted(unknown)}")
        if self.band_detection not in VALID_BAND_DETECTION_MODES:
            raise ConfigError(
                f"Invalid band_detection {self.band_detection!r}; "
                f"expected one of {VALID_BAND_DETECTION_MODES}"
            )
        if self.band_detection == BAND_DETECTION_INDEX_RANGE:
            if self.band_index_range is None:
                raise ConfigError("band_detection index_range requires band_index_range")
            start, stop = self.band_index_range
            if start < 0 or stop - start < 2:
                raise ConfigError(f"Invalid band_index_range {self.band_index_range}")
        if not self.delimiter:
            raise ConfigError("Delimiter must be a non-empty string")
        if not (math.isfinite(self.reflectance_scale) and self.reflectance_scale > 0):
            raise ConfigError(f"reflectance_scale must be positive, got {self.reflectance_scale}")
        missing_crops = set(CropLabel) - set(self.crop_lookup().values())
        missing_stages = set(StageLabel) - set(self.stage_lookup().values())
        if missing_crops or missing_stages:
            raise ConfigError(
                "Canonicalization table leaves labels unreachable: "
                f"{sorted(v.value for v in missing_crops | missing_stages)}"
            )

    def crop_lookup(self) -> Dict[str, CropLabel]:
        lookup = {_normalize_label(crop.value): crop for crop in CropLabel}
        lookup.update({_normalize_label(k): v for k, v in self.crop_aliases.items()})
        return lookup

    def stage_lookup(self) -> Dict[str, StageLabel]:
        lookup = {_normalize_label(stage.value): stage for stage in StageLabel}
        lookup.update({_normalize_label(k): v for k, v in self.stage_aliases.items()})
        return lookup

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "IngestConfig":
        """Build a config from a parsed YAML mapping; absent keys keep defaults."""
        known = {
            "columns",
            "delimiter",
            "band_detection",
            "band_prefix",
            "band_index_range",
            "crop_aliases",
            "stage_aliases",
            "reflectance_scale",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown ingest config keys: {sorted(unknown)}")
        kwargs: Dict[str, Any] = {}
        if "columns" in data:
            columns = data["columns"] or {}
            if not isinstance(columns, Mapping):
                raise ConfigError("Ingest config 'columns' must be a mapping")
            kwargs["columns"] = {
                str(k): v for k, v in columns.items() if v is not None and v != ""
            }
        for key in ("delimiter", "band_detection", "band_prefix"):
            if data.get(key) is not None:
                kwargs[key] = str(data[key])
        if data.get("band_index_range") is not None:
            bounds = data["band_index_range"]
            if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
                raise ConfigError("band_index_range must be a [start, stop] pair")
            kwargs["band_index_range"] = (int(bounds[0]), int(bounds[1]))
        if data.get("reflectance_scale") is not None:
            kwargs["reflectance_scale"] = float(data["reflectance_scale"])
        if "crop_aliases" in data:
            kwargs["crop_aliases"] = _parse_aliases(data["crop_aliases"], CropLabel, "crop")
        if "stage_aliases" in data:
            kwargs["stage_aliases"] = _parse_aliases(
                data["stage_aliases"], StageLabel, "stage"
            )
        return cls(**kwargs)


def _parse_aliases(raw: Any, enum_cls: Any, kind: str) -> Dict[str, Any]:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{kind}_aliases must be a mapping of raw string to label")
    aliases = {}
    for key, value in raw.items():
        try:
            aliases[str(key)] = enum_cls(str(value))
        except ValueError as exc:
            valid = [member.value for member in enum_cls]
            raise ConfigError(
                f"{kind}_aliases maps {key!r} to unknown label {value!r}; expected one of {valid}"
            ) from exc
    return aliases


def load_ingest_config(config_path: Optional[Path]) -> IngestConfig:
    """Load an IngestConfig from YAML, or the built-in GHISACONUS profile when None."""
    if config_path is None:
        return IngestConfig()
    config_path = Path(config_path)
    if not config_path.is_file():
        raise ConfigError(f"Ingest config file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse ingest config {config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Ingest config must be a mapping: {config_path}")
    return IngestConfig.from_mapping(data)


def _resolve_column(header: List[str], ref: ColumnRef, key: str) -> str:
    if isinstance(ref, int):
        if not 0 <= ref < len(header):
            raise DatasetError(f"Column index {ref} for '{key}' outside header of {len(header)}")
        return header[ref]
    if ref not in header:
        raise DatasetError(f"Header is missing the '{key}' column {ref!r}")
    return ref


def _parse_wavelength(name: str, prefix: str) -> Optional[float]:
    text = name.strip()
    if prefix and text.startswith(prefix):
        text = text[len(prefix):]
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _detect_bands(
    header: List[str], metadata_columns: List[str], config: IngestConfig
) -> List[Tuple[str, float]]:
    if config.band_detection == BAND_DETECTION_INDEX_RANGE:
        start, stop = config.band_index_range  # type: ignore[misc]
        if stop > len(header):
            raise DatasetError(
                f"band_index_range {config.band_index_range} exceeds {len(header)} columns"
            )
        bands = []
        for name in header[start:stop]:
            nm = _parse_wavelength(name, config.band_prefix)
            if nm is None:
                raise DatasetError(f"Band column header {name!r} is not a wavelength")
            bands.append((name, nm))
    else:
        bands = []
        for name in header:
            if name in metadata_columns:
                continue
            nm = _parse_wavelength(name, config.band_prefix)
            if nm is not None:
                bands.append((name, nm))
    if len(bands) < 2:
        raise DatasetError(f"Found {len(bands)} band columns; at least 2 are required")
    return sorted(bands, key=lambda item: item[1])


def _parse_coordinate(raw: str, limit: float) -> Optional[float]:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        return None
    if not math.isfinite(value) or abs(value) > limit:
        return None
    return value


def load_library(path: Path, config: Optional[IngestConfig] = None) -> Dataset:
    """Read a delimiter-separated spectral library into a Dataset.

    One record per data row, in file order. Labels are canonicalized through
    the config's alias tables; an unknown label, a missing crop or stage column
    or a non-numeric reflectance cell aborts the load.

    Args:
        path: UTF-8 text file with a header row.
        config: Column mapping and band detection; GHISACONUS profile when None.

    Returns:
        The loaded Dataset.

    Raises:
        DatasetError: If the file cannot be read or violates the schema.
    """
    config = config or IngestConfig()
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"Library file not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            sep=config.delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as exc:
        raise DatasetError(f"Library file is empty: {path}") from exc
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as exc:
        raise DatasetError(f"Cannot read library file {path}: {exc}") from exc

    # Header read as a data row so pandas does not rename repeated names.
    header = [str(name).strip() for name in frame.iloc[0]]
    repeated = sorted({name for name in header if header.count(name) > 1})
    if repeated:
        raise DatasetError(f"Repeated column header(s) {repeated} in {path}")
    frame = frame.iloc[1:].reset_index(drop=True)
    frame.columns = header
    if frame.empty:
        raise DatasetError(f"Library file has a header but no data rows: {path}")

    mapped: Dict[str, str] = {}
    for key, ref in config.columns.items():
        if key in OPTIONAL_COLUMN_KEYS and isinstance(ref, str) and ref not in header:
            logger.debug("Optional column %r (%s) not in header", ref, key)
            continue
        mapped[key] = _resolve_column(header, ref, key)
    bands = _detect_bands(header, list(mapped.values()), config)
    band_columns = [name for name, _ in bands]
    grid = WavelengthGrid(tuple(nm for _, nm in bands))

    raw_values = frame[band_columns]
    numeric = raw_values.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DatasetError(
            f"Non-numeric reflectance {raw_values.iat[row, col]!r} at row {row + 1} "
            f"(line {row + 2}), column {band_columns[col]!r}"
        )
    spectra = numeric.to_numpy(dtype=float)
    if config.reflectance_scale != 1.0:
        spectra = spectra * config.reflectance_scale

    crop_lookup = config.crop_lookup()
    stage_lookup = config.stage_lookup()
    records: List[SampleRecord] = []
    missing_location = 0
    columns = {key: frame[name].tolist() for key, name in mapped.items()}
    for i in range(len(frame)):
        crop_raw = columns[COLUMN_CROP][i]
        crop = crop_lookup.get(_normalize_label(crop_raw))
        if crop is None:
            raise DatasetError(
                f"Row {i + 1} (line {i + 2}): crop value {crop_raw!r} has no "
                "canonicalization entry"
            )
        stage_raw = columns[COLUMN_STAGE][i]
        stage = stage_lookup.get(_normalize_label(stage_raw))
        if stage is None:
            raise DatasetError(
                f"Row {i + 1} (line {i + 2}): stage value {stage_raw!r} has no "
                "canonicalization entry"
            )
        latitude = longitude = None
        if COLUMN_LATITUDE in mapped and COLUMN_LONGITUDE in mapped:
            latitude = _parse_coordinate(columns[COLUMN_LATITUDE][i], 90.0)
            longitude = _parse_coordinate(columns[COLUMN_LONGITUDE][i], 180.0)
            if latitude is None or longitude is None:
                latitude = longitude = None
        if latitude is None:
            missing_location += 1
        records.append(
            SampleRecord(
                spectrum=spectra[i],
                crop=crop,
                stage=stage,
                latitude=latitude,
                longitude=longitude,
                aez=str(columns[COLUMN_AEZ][i]) if COLUMN_AEZ in columns else "",
                source_id=(
                    str(columns[COLUMN_SOURCE_ID][i]) if COLUMN_SOURCE_ID in columns else ""
                ),
            )
        )

    if missing_location:
        logger.debug("%d records have no usable location", missing_location)
    logger.info(
        "Loaded %d records with %d bands from %s", len(records), grid.band_count, path
    )
    return Dataset(grid, tuple(records))


def _format_wavelength(nm: float) -> str:
    return str(int(nm)) if nm == int(nm) else repr(nm)


def _column_layout(ds: Dataset, config: IngestConfig) -> List[Tuple[str, Any]]:
    """(header, slot) per output column; a slot is a metadata key or a band index.

    Columns mapped by index and an index-range band block sit at their
    configured positions; the rest fill the free positions in order.
    """
    meta_keys = [
        key
        for key in (COLUMN_SOURCE_ID, COLUMN_CROP, COLUMN_STAGE, COLUMN_LATITUDE,
                    COLUMN_LONGITUDE, COLUMN_AEZ)
        if key in config.columns
    ]
    band_names = [
        f"{config.band_prefix}{_format_wavelength(nm)}" for nm in ds.grid.wavelengths_nm
    ]
    width = len(meta_keys) + len(band_names)
    layout: List[Optional[Tuple[str, Any]]] = [None] * width

    def place(position: int, column: Tuple[str, Any]) -> None:
        if not 0 <= position < width or layout[position] is not None:
            raise ConfigError(
                f"Cannot write {column[0]!r} at column {position} of {width}"
            )
        layout[position] = column

    floating: List[Tuple[str, Any]] = []
    for key in meta_keys:
        ref = config.columns[key]
        if isinstance(ref, int):
            place(ref, (key, key))
        else:
            floating.append((ref, key))
    bands = [(name, b) for b, name in enumerate(band_names)]
    if config.band_detection == BAND_DETECTION_INDEX_RANGE:
        start, stop = config.band_index_range  # type: ignore[misc]
        if stop - start != len(bands):
            raise ConfigError(
                f"band_index_range {config.band_index_range} holds {stop - start} "
                f"columns, dataset has {len(bands)} bands"
            )
        for offset, column in enumerate(bands):
            place(start + offset, column)
    else:
        floating.extend(bands)
    free = iter(i for i, column in enumerate(layout) if column is None)
    for column in floating:
        layout[next(free)] = column
    return [column for column in layout if column is not None]


def write_library(ds: Dataset, path: Path, config: Optional[IngestConfig] = None) -> Path:
    """Write a Dataset in the layout load_library reads back with the same config.

    Columns mapped by name are written under that name. Columns mapped by
    index are written at that index under their key name, and an index-range
    band block at its range. Band headers are ``<band_prefix><nm>``. Values
    are written with repr, so the round trip is exact at reflectance_scale 1.

    Raises:
        ConfigError: If the indexed columns do not fit the dataset's width,
            or the file cannot be written.
    """
    config = config or IngestConfig()
    path = Path(path)
    layout = _column_layout(ds, config)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, delimiter=config.delimiter)
            writer.writerow([name for name, _ in layout])
            for record in ds.records:
                meta = {
                    COLUMN_SOURCE_ID: record.source_id,
                    COLUMN_CROP: record.crop.value,
                    COLUMN_STAGE: record.stage.value,
                    COLUMN_LATITUDE: "" if record.latitude is None else repr(record.latitude),
                    COLUMN_LONGITUDE: "" if record.longitude is None else repr(record.longitude),
                    COLUMN_AEZ: record.aez,
                }
                values = record.spectrum / config.reflectance_scale
                writer.writerow(
                    [
                        repr(float(values[slot])) if isinstance(slot, int) else meta[slot]
                        for _, slot in layout
                    ]
                )
    except OSError as exc:
        raise ConfigError(f"Cannot write library file {path}: {exc}") from exc
    logger.info("Wrote %d records to %s", len(ds), path)
    return path
