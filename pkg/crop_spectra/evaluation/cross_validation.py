"""Stratified k-fold cross-validation over crop labels."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from crop_spectra.core.constants import CROPS, DEFAULT_FOLDS, DEFAULT_SEED
from crop_spectra.core.dataset import Dataset
from crop_spectra.core.exceptions import ConfigError, CropSpectraError, DatasetError
from crop_spectra.evaluation.algorithms import (
    AlgorithmSpec,
    as_algorithm_spec,
    fit_algorithm,
    predict_indices,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Fold index (0..k-1) for every record of one dataset."""

    k: int
    folds: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        folds = np.asarray(self.folds, dtype=int)
        if folds.ndim != 1 or (folds.size and (folds.min() < 0 or folds.max() >= self.k)):
            raise ConfigError(f"Fold indices must lie in 0..{self.k - 1}")
        folds.setflags(write=False)
        object.__setattr__(self, "folds", folds)

    def __len__(self) -> int:
        return int(self.folds.size)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)

    def fold_sizes(self) -> List[int]:
        return [int(n) for n in np.bincount(self.folds, minlength=self.k)]


def stratified_kfold(
    ds: Dataset, k: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED
) -> FoldAssignment:
    """Shuffle each crop's records with ``seed`` and deal them round-robin.

    Crops are visited in alphabetical order and the dealing position carries
    over from one crop to the next, so fold sizes also stay within one of
    each other overall.

    Raises:
        ConfigError: If k < 2.
        DatasetError: If a crop present in ``ds`` has fewer than k records.
    """
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    crop_indices = ds.crop_indices()
    for ci, crop in enumerate(CROPS):
        count = int(np.sum(crop_indices == ci))
        if 0 < count < k:
            raise DatasetError(
                f"Crop {crop.value} has {count} record(s); {k}-fold cross-validation needs at least {k}"
            )

    rng = np.random.default_rng(seed)
    folds = np.empty(len(ds), dtype=int)
    position = 0
    for ci in range(len(CROPS)):
        members = np.flatnonzero(crop_indices == ci)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        folds[members] = (position + np.arange(members.size)) % k
        position = (position + members.size) % k
    logger.debug("Assigned %d records to %d folds (seed %d)", len(ds), k, seed)
    return FoldAssignment(k=k, folds=folds, seed=seed)


@dataclass(frozen=True, eq=False)
class CVReport:
    """Per-fold accuracies and the pooled confusion matrix of one algorithm."""

    algorithm: str
    k: int
    seed: int
    fold_accuracies: Tuple[float, ...]
    fold_sizes: Tuple[int, ...]
    confusion_matrix: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        """Population (divide-by-k) standard deviation across folds."""
        return float(np.std(self.fold_accuracies))

    @property
    def interval(self) -> Tuple[float, float]:
        return self.mean - 2.0 * self.std, self.mean + 2.0 * self.std

    @property
    def total(self) -> int:
        return int(self.confusion_matrix.sum())

    def to_dict(self) -> Dict[str, Any]:
        low, high = self.interval
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "seed": self.seed,
            "fold_accuracies": list(self.fold_accuracies),
            "fold_sizes": list(self.fold_sizes),
            "mean": self.mean,
            "std": self.std,
            "interval": [low, high],
            "classes": [c.value for c in CROPS],
            "confusion_matrix": self.confusion_matrix.tolist(),
        }


AlgorithmLike = Union[AlgorithmSpec, str]


def _run_fold(
    ds: Dataset, spec: AlgorithmSpec, folds: FoldAssignment, fold: int
) -> Tuple[np.ndarray, np.ndarray]:
    test = folds.test_indices(fold)
    if test.size == 0:
        raise DatasetError(f"Fold {fold} has no records")
    train_ds = ds.subset(folds.train_indices(fold))
    try:
        model = fit_algorithm(spec, train_ds)
        predicted = predict_indices(spec, model, ds.spectra[test])
    except CropSpectraError as exc:
        raise type(exc)(f"Fold {fold} of {spec.name}: {exc.message}") from exc
    return ds.crop_indices()[test], np.asarray(predicted, dtype=int)


def run_cv(
    ds: Dataset,
    algorithm: AlgorithmLike,
    folds: FoldAssignment,
    progress: bool = False,
    max_workers: int = 1,
) -> CVReport:
    """Fit on k-1 folds, score crop accuracy on the held-out fold, k times.

    The target is the crop label whatever the model's labeling mode. Folds
    run on a thread pool when ``max_workers`` > 1; results keep fold order.

    Raises:
        CropSpectraError: The fit or prediction error of the failing fold,
            same class, message prefixed with the fold index.
    """
    spec = as_algorithm_spec(algorithm)
    if len(folds) != len(ds):
        raise ConfigError(
            f"Fold assignment covers {len(folds)} records, dataset has {len(ds)}"
        )
    fold_ids = list(range(folds.k))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(
                tqdm(
                    pool.map(lambda f: _run_fold(ds, spec, folds, f), fold_ids),
                    total=folds.k,
                    desc=spec.name,
                    disable=not progress,
                )
            )
    else:
        results = [
            _run_fold(ds, spec, folds, f)
            for f in tqdm(fold_ids, desc=spec.name, disable=not progress)
        ]

    matrix = np.zeros((len(CROPS), len(CROPS)), dtype=int)
    accuracies: List[float] = []
    sizes: List[int] = []
    for truth, predicted in results:
        np.add.at(matrix, (truth, predicted), 1)
        accuracies.append(float(np.mean(truth == predicted)))
        sizes.append(int(truth.size))

    report = CVReport(
        algorithm=spec.name,
        k=folds.k,
        seed=folds.seed,
        fold_accuracies=tuple(accuracies),
        fold_sizes=tuple(sizes),
        confusion_matrix=matrix,
    )
    logger.info(
        "%s: mean accuracy %.4f (+/- %.4f) over %d folds",
        spec.name,
        report.mean,
        2.0 * report.std,
        folds.k,
    )
    return report


def recall_precision(matrix: np.ndarray) -> Tuple[List[Optional[float]], List[Optional[float]]]:
    """Per-crop recall (row-wise) and precision (column-wise); None when undefined."""
    diagonal = np.diag(matrix).astype(float)
    rows = matrix.sum(axis=1)
    cols = matrix.sum(axis=0)
    recall = [float(d / n) if n else None for d, n in zip(diagonal, rows)]
    precision = [float(d / n) if n else None for d, n in zip(diagonal, cols)]
    return recall, precision


def _fmt_rate(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def confusion(report: CVReport) -> str:
    """Plain-text confusion matrix: rows true crop, columns predicted, with recall and precision."""
    matrix = report.confusion_matrix
    recall, precision = recall_precision(matrix)
    names = [c.value for c in CROPS]
    width = max(len(n) for n in names + ["precision"]) + 2

    lines = [f"Confusion matrix for {report.algorithm} (rows true, columns predicted)"]
    lines.append("".ljust(width) + "".join(n.rjust(width) for n in names) + "recall".rjust(width))
    for i, name in enumerate(names):
        counts = "".join(str(int(v)).rjust(width) for v in matrix[i])
        lines.append(name.ljust(width) + counts + _fmt_rate(recall[i]).rjust(width))
    lines.append(
        "precision".ljust(width) + "".join(_fmt_rate(p).rjust(width) for p in precision)
    )
    lines.append(f"Total: {report.total}  Accuracy: {report.mean:.4f} +/- {2.0 * report.std:.4f}")
    return "\n".join(lines)
