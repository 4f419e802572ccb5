"""Principal component analysis of a spectral library."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import linalg

from crop_spectra.core.constants import CropLabel, StageLabel
from crop_spectra.core.dataset import Dataset
from crop_spectra.core.exceptions import ConfigError, ModelError
from crop_spectra.models.gaussian import estimate_mean_cov

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PCAModel:
    """Band means plus the leading eigenvectors of the library covariance.

    ``components`` holds one orthonormal basis vector per row; the sign of
    each is fixed so its largest-magnitude entry is positive.
    """

    means: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])

    @property
    def band_count(self) -> int:
        return int(self.means.shape[0])

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0.0:
            return np.zeros(self.n_components)
        return self.explained_variance / self.total_variance


def _fix_signs(components: np.ndarray) -> np.ndarray:
    fixed = components.copy()
    for i, row in enumerate(fixed):
        if row[int(np.argmax(np.abs(row)))] < 0.0:
            fixed[i] = -row
    return fixed


def fit_pca(ds: Dataset, n_components: int) -> PCAModel:
    """Covariance PCA (centering only) by symmetric eigendecomposition.

    Raises:
        ConfigError: If n_components is outside 1..min(B, record count).
    """
    limit = min(ds.band_count, len(ds))
    if not 1 <= n_components <= limit:
        raise ConfigError(f"n_components must lie in 1..{limit}, got {n_components}")
    means, cov = estimate_mean_cov(ds.spectra)
    eigenvalues, eigenvectors = linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:n_components]
    variances = np.clip(eigenvalues[order], 0.0, None)
    components = _fix_signs(eigenvectors[:, order].T)
    model = PCAModel(
        means=means,
        components=components,
        explained_variance=variances,
        total_variance=float(np.trace(cov)),
    )
    logger.info(
        "PCA on %d records: explained variance ratios %s",
        len(ds),
        ", ".join(f"{r:.4f}" for r in model.explained_variance_ratio),
    )
    return model


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Component scores per record, with the record's labels."""

    record_indices: np.ndarray
    scores: np.ndarray
    crops: Tuple[CropLabel, ...]
    stages: Tuple[StageLabel, ...]

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    @property
    def n_components(self) -> int:
        return int(self.scores.shape[1])

    def subset(self, mask: np.ndarray) -> "ScoreTable":
        picked = np.flatnonzero(mask)
        return ScoreTable(
            record_indices=self.record_indices[picked],
            scores=self.scores[picked],
            crops=tuple(self.crops[i] for i in picked),
            stages=tuple(self.stages[i] for i in picked),
        )

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for i in range(len(self)):
            row: Dict[str, Any] = {"record_index": int(self.record_indices[i])}
            for j in range(self.n_components):
                row[f"pc{j + 1}"] = float(self.scores[i, j])
            row["crop"] = self.crops[i].value
            row["stage"] = self.stages[i].value
            rows.append(row)
        return rows


def transform(m: PCAModel, spectra: np.ndarray) -> np.ndarray:
    """Scores of one spectrum or an (n, B) batch."""
    spectra = np.asarray(spectra, dtype=float)
    if spectra.shape[-1] != m.band_count:
        raise ModelError(f"Spectra have {spectra.shape[-1]} bands, PCA expects {m.band_count}")
    return (spectra - m.means) @ m.components.T


def project(m: PCAModel, ds: Dataset) -> ScoreTable:
    return ScoreTable(
        record_indices=np.arange(len(ds)),
        scores=np.atleast_2d(transform(m, ds.spectra)),
        crops=ds.crops,
        stages=ds.stages,
    )


def reconstruct(m: PCAModel, scores: np.ndarray) -> np.ndarray:
    """Map scores back to band space (means plus the component combination)."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape[-1] != m.n_components:
        raise ModelError(f"Scores have {scores.shape[-1]} components, PCA has {m.n_components}")
    return m.means + scores @ m.components


def explained_variance_table(m: PCAModel) -> List[Dict[str, Any]]:
    ratios = m.explained_variance_ratio
    cumulative = np.cumsum(ratios)
    return [
        {
            "component": f"pc{i + 1}",
            "explained_variance": float(m.explained_variance[i]),
            "ratio": float(ratios[i]),
            "cumulative_ratio": float(cumulative[i]),
        }
        for i in range(m.n_components)
    ]


def export_explained_variance_csv(m: PCAModel, path: Path) -> Path:
    rows = explained_variance_table(m)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(
                handle, fieldnames=["component", "explained_variance", "ratio", "cumulative_ratio"]
            )
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise ConfigError(f"Cannot write variance table {path}: {exc}") from exc
    return path
