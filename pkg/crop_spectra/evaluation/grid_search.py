"""Regularization grid search on a shared fold assignment."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from crop_spectra.core.constants import DEFAULT_SHRINKAGE_GRID
from crop_spectra.core.dataset import Dataset
from crop_spectra.core.exceptions import ConfigError
from crop_spectra.evaluation.algorithms import FAMILY_DISCRIMINANT, as_algorithm_spec
from crop_spectra.evaluation.cross_validation import (
    AlgorithmLike,
    CVReport,
    FoldAssignment,
    run_cv,
)

logger = logging.getLogger(__name__)


def check_grid(grid: Sequence[float]) -> Tuple[float, ...]:
    """Validate a shrinkage grid: nonempty, within [0, 1], strictly increasing."""
    values = tuple(float(v) for v in grid)
    if not values:
        raise ConfigError("Regularization grid is empty")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"Regularization value {v} outside [0, 1]")
    for a, b in zip(values, values[1:]):
        if b <= a:
            raise ConfigError(f"Regularization grid must be strictly increasing ({a} then {b})")
    return values


@dataclass(frozen=True)
class GridSearchReport:
    algorithm: str
    grid: Tuple[float, ...]
    reports: Tuple[CVReport, ...]

    @property
    def means(self) -> List[float]:
        return [r.mean for r in self.reports]

    @property
    def selected_index(self) -> int:
        """Index of the best mean accuracy; the first (smallest lambda) on ties."""
        means = self.means
        best = max(means)
        return means.index(best)

    @property
    def selected(self) -> float:
        return self.grid[self.selected_index]

    @property
    def selected_report(self) -> CVReport:
        return self.reports[self.selected_index]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "grid": list(self.grid),
            "selected": self.selected,
            "points": [
                {"shrinkage": lam, "report": report.to_dict()}
                for lam, report in zip(self.grid, self.reports)
            ],
        }


def grid_search_reg(
    ds: Dataset,
    algorithm: AlgorithmLike,
    folds: FoldAssignment,
    grid: Optional[Sequence[float]] = None,
    progress: bool = False,
    max_workers: int = 1,
) -> GridSearchReport:
    """Cross-validate ``algorithm`` at every lambda of ``grid`` on the same folds.

    Selection uses the same folds as the reported accuracies, so the
    selected point's accuracy is optimistically biased.
    """
    spec = as_algorithm_spec(algorithm)
    if spec.family != FAMILY_DISCRIMINANT:
        raise ConfigError(f"{spec.name} has no regularization parameter to search")
    values = check_grid(DEFAULT_SHRINKAGE_GRID if grid is None else grid)

    reports = []
    for lam in tqdm(values, desc="grid", disable=not progress):
        reports.append(run_cv(ds, spec.with_shrinkage(lam), folds, max_workers=max_workers))

    family = spec.with_shrinkage(0.0).name.split("(")[0]
    result = GridSearchReport(algorithm=family, grid=values, reports=tuple(reports))
    logger.info(
        "%s: selected lambda=%g (mean accuracy %.4f)",
        family,
        result.selected,
        result.selected_report.mean,
    )
    return result
