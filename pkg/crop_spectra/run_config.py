"""Versionable run definitions loaded from YAML.

A run config supplies defaults for CLI options (keys are option
destination names); flags given on the command line win.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from crop_spectra.core.constants import (
    DEFAULT_FOLDS,
    DEFAULT_SEED,
    DEFAULT_SHRINKAGE_GRID,
    PRIORS_UNIFORM,
    VALID_PRIOR_MODES,
)
from crop_spectra.core.exceptions import ConfigError
from crop_spectra.evaluation.algorithms import TABLE_ALGORITHMS, parse_algorithm
from crop_spectra.evaluation.grid_search import check_grid
from crop_spectra.models.mlp import MLPConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    dataset: Optional[str] = None
    ingest_config: Optional[str] = None
    algorithms: Tuple[str, ...] = TABLE_ALGORITHMS
    algorithm: str = "QDA-Bayes-MMP(0.5)"
    grid: Tuple[float, ...] = DEFAULT_SHRINKAGE_GRID
    folds: int = DEFAULT_FOLDS
    seed: int = DEFAULT_SEED
    output_dir: Optional[str] = None
    workers: int = 1
    priors: str = PRIORS_UNIFORM
    n_components: int = 4
    group_by: str = "crop"
    components: Tuple[int, int] = (0, 1)
    mlp: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.priors not in VALID_PRIOR_MODES:
            raise ConfigError(f"priors must be one of {VALID_PRIOR_MODES}, got {self.priors!r}")
        if not self.algorithms:
            raise ConfigError("algorithms must name at least one algorithm")
        for descriptor in self.algorithms + (self.algorithm,):
            parse_algorithm(descriptor)
        check_grid(self.grid)
        self.mlp_config()

    def mlp_config(self) -> MLPConfig:
        known = {f.name for f in fields(MLPConfig)}
        unknown = sorted(set(self.mlp) - known)
        if unknown:
            raise ConfigError(f"Unknown mlp settings: {unknown}; expected some of {sorted(known)}")
        settings = dict(self.mlp)
        if "hidden_layers" in settings:
            hidden = settings["hidden_layers"]
            settings["hidden_layers"] = tuple(hidden) if isinstance(hidden, (list, tuple)) else (hidden,)
        try:
            return MLPConfig(**settings)
        except TypeError as exc:
            raise ConfigError(f"Bad mlp settings: {exc}") from exc

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown run config keys: {unknown}")
        values: Dict[str, Any] = dict(data)
        try:
            for key in ("algorithms", "grid", "components"):
                if key in values:
                    raw = values[key]
                    values[key] = tuple(raw) if isinstance(raw, (list, tuple)) else (raw,)
            if "grid" in values:
                values["grid"] = tuple(float(v) for v in values["grid"])
            if "components" in values:
                values["components"] = tuple(int(v) for v in values["components"])
                if len(values["components"]) != 2:
                    raise ConfigError("components must name exactly two component indices")
            for key in ("folds", "seed", "workers", "n_components"):
                if key in values:
                    values[key] = int(values[key])
            if "mlp" in values:
                if not isinstance(values["mlp"], dict):
                    raise ConfigError("mlp must be a mapping")
                values["mlp"] = dict(values["mlp"])
            for key in ("dataset", "ingest_config", "output_dir"):
                if values.get(key) is not None:
                    values[key] = str(values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Bad run config value: {exc}") from exc
        return cls(**values)

    def as_defaults(self, keys: Optional[List[str]] = None) -> Dict[str, Any]:
        """Option defaults for argparse, optionally restricted to ``keys``."""
        defaults = {f.name: getattr(self, f.name) for f in fields(self)}
        defaults["algorithms"] = list(self.algorithms)
        defaults["grid"] = list(self.grid)
        defaults["components"] = list(self.components)
        if keys is not None:
            defaults = {k: v for k, v in defaults.items() if k in keys}
        return defaults


def load_run_config(config_path: Path) -> RunConfig:
    """Load a YAML run config file."""
    config_path = Path(config_path)
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Cannot parse config file {config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config must be a mapping: {config_path}")
    logger.debug("Loaded run config %s", config_path)
    return RunConfig.from_mapping(data)
