"""Constants for crop_spectra (label vocabularies, defaults, no magic strings)."""

from enum import Enum
from typing import Dict, Tuple


class CropLabel(str, Enum):
    """The five crops of the library, declared in alphabetical order.

    Declaration order is the tie-break order used by every decision rule.
    """

    CORN = "Corn"
    COTTON = "Cotton"
    RICE = "Rice"
    SOYBEANS = "Soybeans"
    WINTER_WHEAT = "WinterWheat"


class StageLabel(str, Enum):
    """The six growth stages, in phenological (enumeration) order."""

    EMERGE_VEARLY = "EmergeVEarly"
    EARLY_MID = "EarlyMid"
    LATE = "Late"
    CRITICAL = "Critical"
    MATURE_SENESC = "MatureSenesc"
    HARVEST = "Harvest"


CROPS: Tuple[CropLabel, ...] = tuple(CropLabel)
STAGES: Tuple[StageLabel, ...] = tuple(StageLabel)

CROP_INDEX: Dict[CropLabel, int] = {crop: i for i, crop in enumerate(CROPS)}
STAGE_INDEX: Dict[StageLabel, int] = {stage: i for i, stage in enumerate(STAGES)}

REFLECTANCE_MIN = 0.0
REFLECTANCE_MAX = 100.0

# Ingest profile for the GHISACONUS CSV export.
DEFAULT_DELIMITER = ","
DEFAULT_BAND_PREFIX = "X"
BAND_DETECTION_NUMERIC_HEADER = "numeric_header"
BAND_DETECTION_INDEX_RANGE = "index_range"
VALID_BAND_DETECTION_MODES = (
    BAND_DETECTION_NUMERIC_HEADER,
    BAND_DETECTION_INDEX_RANGE,
)

COLUMN_CROP = "crop"
COLUMN_STAGE = "stage"
COLUMN_LATITUDE = "latitude"
COLUMN_LONGITUDE = "longitude"
COLUMN_AEZ = "aez"
COLUMN_SOURCE_ID = "source_id"
REQUIRED_COLUMN_KEYS = (COLUMN_CROP, COLUMN_STAGE)
OPTIONAL_COLUMN_KEYS = (
    COLUMN_LATITUDE,
    COLUMN_LONGITUDE,
    COLUMN_AEZ,
    COLUMN_SOURCE_ID,
)

GHISACONUS_COLUMNS: Dict[str, str] = {
    COLUMN_CROP: "Crop",
    COLUMN_STAGE: "Stage",
    COLUMN_LATITUDE: "Lat",
    COLUMN_LONGITUDE: "Long",
    COLUMN_AEZ: "AEZ",
    COLUMN_SOURCE_ID: "Image",
}

GHISACONUS_CROP_ALIASES: Dict[str, CropLabel] = {
    "Corn": CropLabel.CORN,
    "Cotton": CropLabel.COTTON,
    "Rice": CropLabel.RICE,
    "Soybeans": CropLabel.SOYBEANS,
    "Soybean": CropLabel.SOYBEANS,
    "Soybn": CropLabel.SOYBEANS,
    "Winter Wheat": CropLabel.WINTER_WHEAT,
    "Winter_Wheat": CropLabel.WINTER_WHEAT,
    "WinterWheat": CropLabel.WINTER_WHEAT,
    "Wheat": CropLabel.WINTER_WHEAT,
}

GHISACONUS_STAGE_ALIASES: Dict[str, StageLabel] = {
    "Emerge_VEarly": StageLabel.EMERGE_VEARLY,
    "Emerge VEarly": StageLabel.EMERGE_VEARLY,
    "EmergeVEarly": StageLabel.EMERGE_VEARLY,
    "Emg_VE": StageLabel.EMERGE_VEARLY,
    "Emergence/Very Early Vegetative": StageLabel.EMERGE_VEARLY,
    "Early_Mid": StageLabel.EARLY_MID,
    "Early Mid": StageLabel.EARLY_MID,
    "EarlyMid": StageLabel.EARLY_MID,
    "Erl_Mid": StageLabel.EARLY_MID,
    "Late": StageLabel.LATE,
    "Critical": StageLabel.CRITICAL,
    "Mature_Senesc": StageLabel.MATURE_SENESC,
    "Mature Senesc": StageLabel.MATURE_SENESC,
    "MatureSenesc": StageLabel.MATURE_SENESC,
    "Mat_Sen": StageLabel.MATURE_SENESC,
    "Harvest": StageLabel.HARVEST,
}

GHISACONUS_BAND_COUNT = 131
GHISACONUS_FIRST_NM = 437.0
GHISACONUS_LAST_NM = 2345.0

# Regularization grid as printed, with the elided run read as 0.2 .. 0.9.
DEFAULT_SHRINKAGE_GRID: Tuple[float, ...] = (
    0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
)

DEFAULT_FOLDS = 10
DEFAULT_SEED = 2021

PRIORS_UNIFORM = "uniform"
PRIORS_EMPIRICAL = "empirical"
VALID_PRIOR_MODES = (PRIORS_UNIFORM, PRIORS_EMPIRICAL)

# CLI exit codes.
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

# Fixed palettes so emitted graphics are stable across runs.
STAGE_COLORS: Dict[StageLabel, str] = {
    StageLabel.EMERGE_VEARLY: "#1b9e77",
    StageLabel.EARLY_MID: "#66a61e",
    StageLabel.LATE: "#7570b3",
    StageLabel.CRITICAL: "#e7298a",
    StageLabel.MATURE_SENESC: "#d95f02",
    StageLabel.HARVEST: "#a6761d",
}

CROP_COLORS: Dict[CropLabel, str] = {
    CropLabel.CORN: "#e6ab02",
    CropLabel.COTTON: "#7f7f7f",
    CropLabel.RICE: "#1f78b4",
    CropLabel.SOYBEANS: "#33a02c",
    CropLabel.WINTER_WHEAT: "#b15928",
}

REPORT_VERSION = 1
MODEL_FORMAT = "crop_spectra.model"
MODEL_FORMAT_VERSION = 1
