"""Gaussian discriminant classifiers over crops or joint crop/stage labels.

A joint-label model turns one spectrum into a stage x crop probability grid
(the JointPosteriorTable). Two rules reduce that grid to a crop:

- MMP (max marginal probability): sum each crop's column, pick the largest.
- MJP (max joint probability): take the crop of the single largest cell.

Joint classes that never occur in training are not modelled and carry
exactly zero probability.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from crop_spectra.core.constants import (
    CROP_INDEX,
    CROPS,
    PRIORS_EMPIRICAL,
    PRIORS_UNIFORM,
    STAGE_INDEX,
    STAGES,
    VALID_PRIOR_MODES,
    CropLabel,
)
from crop_spectra.core.dataset import Dataset, JointLabel, joint_sort_key
from crop_spectra.core.exceptions import DatasetError, ModelError, NumericalError
from crop_spectra.models.gaussian import (
    ClassGaussian,
    check_shrinkage,
    estimate_mean_cov,
    factorize,
    log_density,
    shrink_covariance,
)

logger = logging.getLogger(__name__)

ClassId = Union[CropLabel, JointLabel]

MIN_CLASS_SAMPLES = 2
PRIOR_SUM_TOLERANCE = 1e-12


class LabelingMode(str, Enum):
    CROP_ONLY = "crop_only"
    JOINT_CROP_STAGE = "joint_crop_stage"


class DiscriminantKind(str, Enum):
    LDA = "LDA"
    QDA = "QDA"


class DecisionRule(str, Enum):
    """How a model's class posteriors become a crop prediction."""

    DIRECT = "direct"
    MMP = "mmp"
    MJP = "mjp"


def class_label(value: ClassId) -> str:
    return str(value) if isinstance(value, JointLabel) else value.value


@dataclass(frozen=True, eq=False)
class DiscriminantModel:
    """A fitted LDA or QDA model.

    LDA keeps exactly one covariance factor shared by all classes; QDA keeps
    one per class, aligned with ``classes``.
    """

    mode: LabelingMode
    kind: DiscriminantKind
    classes: Tuple[ClassId, ...]
    means: np.ndarray
    priors: np.ndarray
    class_counts: Tuple[int, ...]
    factors: Tuple[np.ndarray, ...]
    log_dets: Tuple[float, ...]
    shrinkage: float

    def __post_init__(self) -> None:
        if not self.classes:
            raise ModelError("A discriminant model needs at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise ModelError("Duplicate classes in discriminant model")
        k = len(self.classes)
        if self.means.shape[0] != k or self.priors.shape != (k,):
            raise ModelError("Means and priors must align with the class list")
        if np.any(self.priors < 0) or abs(float(self.priors.sum()) - 1.0) > PRIOR_SUM_TOLERANCE:
            raise ModelError("Priors must be nonnegative and sum to 1")
        expected = 1 if self.kind == DiscriminantKind.LDA else k
        if len(self.factors) != expected or len(self.log_dets) != expected:
            raise ModelError(
                f"{self.kind.value} model needs {expected} covariance factors, "
                f"got {len(self.factors)}"
            )
        expected_type = CropLabel if self.mode == LabelingMode.CROP_ONLY else JointLabel
        for label in self.classes:
            if not isinstance(label, expected_type):
                raise ModelError(f"Class {label!r} does not match mode {self.mode.value}")

    @property
    def band_count(self) -> int:
        return int(self.means.shape[1])

    def gaussian(self, k: int) -> ClassGaussian:
        shared = 0 if self.kind == DiscriminantKind.LDA else k
        return ClassGaussian(
            mean=self.means[k],
            factor=self.factors[shared],
            log_det=self.log_dets[shared],
            sample_count=self.class_counts[k],
        )

    def class_crop_indices(self) -> np.ndarray:
        """Crop index (CROPS order) of every class."""
        return np.array(
            [CROP_INDEX[c.crop if isinstance(c, JointLabel) else c] for c in self.classes]
        )

    def support_mask(self) -> np.ndarray:
        """Stage x crop boolean grid of the joint classes present in the model."""
        self._require_mode(LabelingMode.JOINT_CROP_STAGE)
        mask = np.zeros((len(STAGES), len(CROPS)), dtype=bool)
        for label in self.classes:
            mask[STAGE_INDEX[label.stage], CROP_INDEX[label.crop]] = True
        return mask

    def _require_mode(self, mode: LabelingMode) -> None:
        if self.mode != mode:
            raise ModelError(
                f"Operation needs a {mode.value} model, this model is {self.mode.value}"
            )


def _class_sort_key(label: ClassId) -> Tuple[int, int]:
    if isinstance(label, JointLabel):
        return joint_sort_key(label)
    return CROP_INDEX[label], -1


def fit(
    ds: Dataset,
    mode: LabelingMode,
    kind: DiscriminantKind,
    shrinkage: float = 0.0,
    priors: str = PRIORS_UNIFORM,
    drop_sparse_classes: bool = False,
) -> DiscriminantModel:
    """Fit LDA or QDA on crop labels or joint crop/stage labels.

    QDA shrinks each class covariance; LDA shrinks the pooled within-class
    covariance (sample-count weighted average of the per-class biased
    covariances). Uniform priors put 1/K on each of the K realized classes.

    Args:
        ds: Training data.
        mode: Label per record: crop only, or (crop, stage).
        kind: LDA (shared covariance) or QDA (per-class covariance).
        shrinkage: Regularization parameter in [0, 1].
        priors: ``uniform`` or ``empirical`` (class frequencies).
        drop_sparse_classes: Leave out classes with fewer than 2 samples
            instead of failing; they then behave as unseen classes.

    Raises:
        DatasetError: If a class has fewer than 2 samples (and dropping is off).
        NumericalError: If a covariance cannot be factorized.
    """
    shrinkage = check_shrinkage(shrinkage)
    if priors not in VALID_PRIOR_MODES:
        raise ModelError(f"Invalid priors {priors!r}; expected one of {VALID_PRIOR_MODES}")
    labels = ds.crops if mode == LabelingMode.CROP_ONLY else ds.joint_labels

    members: Dict[ClassId, List[int]] = {}
    for i, label in enumerate(labels):
        members.setdefault(label, []).append(i)

    classes: List[ClassId] = []
    for label in sorted(members, key=_class_sort_key):
        if len(members[label]) < MIN_CLASS_SAMPLES:
            if drop_sparse_classes:
                logger.warning(
                    "Class %s has %d training sample(s); treating it as unseen",
                    class_label(label),
                    len(members[label]),
                )
                continue
            raise DatasetError(
                f"Class {class_label(label)} has {len(members[label])} sample(s); "
                f"at least {MIN_CLASS_SAMPLES} are required"
            )
        classes.append(label)
    if not classes:
        raise DatasetError("No class has enough samples to fit a model")

    spectra = ds.spectra
    counts = [len(members[label]) for label in classes]
    estimates = [estimate_mean_cov(spectra[members[label]]) for label in classes]
    means = np.vstack([mean for mean, _ in estimates])

    factors: List[np.ndarray] = []
    log_dets: List[float] = []
    if kind == DiscriminantKind.LDA:
        pooled = sum(n * cov for n, (_, cov) in zip(counts, estimates)) / sum(counts)
        try:
            factor, log_det = factorize(shrink_covariance(pooled, shrinkage))
        except NumericalError as exc:
            raise NumericalError(f"Pooled covariance at lambda={shrinkage}: {exc.message}") from exc
        factors.append(factor)
        log_dets.append(log_det)
    else:
        for label, (_, cov) in zip(classes, estimates):
            try:
                factor, log_det = factorize(shrink_covariance(cov, shrinkage))
            except NumericalError as exc:
                raise NumericalError(
                    f"Class {class_label(label)} at lambda={shrinkage}: {exc.message}"
                ) from exc
            factors.append(factor)
            log_dets.append(log_det)

    if priors == PRIORS_EMPIRICAL:
        prior_values = np.asarray(counts, dtype=float) / sum(counts)
    else:
        prior_values = np.full(len(classes), 1.0 / len(classes))
    prior_values = prior_values / prior_values.sum()

    logger.debug(
        "Fitted %s (%s, lambda=%g) on %d records, %d classes",
        kind.value,
        mode.value,
        shrinkage,
        len(ds),
        len(classes),
    )
    return DiscriminantModel(
        mode=mode,
        kind=kind,
        classes=tuple(classes),
        means=means,
        priors=prior_values,
        class_counts=tuple(counts),
        factors=tuple(factors),
        log_dets=tuple(log_dets),
        shrinkage=shrinkage,
    )


def class_log_posteriors(m: DiscriminantModel, x: np.ndarray) -> np.ndarray:
    """Normalized log-posteriors over ``m.classes`` for one spectrum or a batch.

    log pi_c + log N(x; mu_c, Sigma_c), minus their log-sum-exp.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.band_count:
        raise ModelError(f"Spectrum has {x.shape[-1]} bands, model expects {m.band_count}")
    batch = np.atleast_2d(x)
    with np.errstate(divide="ignore"):
        log_priors = np.log(m.priors)
    scores = np.column_stack(
        [log_priors[k] + log_density(m.gaussian(k), batch) for k in range(len(m.classes))]
    )
    scores = scores - logsumexp(scores, axis=1, keepdims=True)
    return scores if x.ndim > 1 else scores[0]


def crop_log_marginals(m: DiscriminantModel, log_posteriors: np.ndarray) -> np.ndarray:
    """Per-crop log of summed class posteriors, shape (..., 5); -inf for absent crops."""
    log_posteriors = np.asarray(log_posteriors, dtype=float)
    batch = np.atleast_2d(log_posteriors)
    crop_of_class = m.class_crop_indices()
    marginals = np.full((batch.shape[0], len(CROPS)), -np.inf)
    for c in range(len(CROPS)):
        columns = np.flatnonzero(crop_of_class == c)
        if columns.size:
            marginals[:, c] = logsumexp(batch[:, columns], axis=1)
    return marginals if log_posteriors.ndim > 1 else marginals[0]


@dataclass(frozen=True, eq=False)
class JointPosteriorTable:
    """Stage x crop probability grid for one spectrum.

    Rows follow STAGES, columns follow CROPS; cells of joint classes the
    model never saw are exactly 0.
    """

    probabilities: np.ndarray
    support: np.ndarray

    def cell(self, crop: CropLabel, stage) -> float:
        return float(self.probabilities[STAGE_INDEX[stage], CROP_INDEX[crop]])

    def crop_marginals(self) -> np.ndarray:
        return self.probabilities.sum(axis=0)

    def argmax_cell(self) -> JointLabel:
        """Largest cell; ties go to crop alphabetical, then stage order."""
        best = None
        best_value = -1.0
        for crop in CROPS:
            for stage in STAGES:
                value = self.cell(crop, stage)
                if value > best_value:
                    best, best_value = JointLabel(crop, stage), value
        return best  # type: ignore[return-value]

    def to_rows(self) -> List[Dict[str, object]]:
        """One dict per stage row, keyed by crop name, for reports."""
        rows = []
        for si, stage in enumerate(STAGES):
            row: Dict[str, object] = {"stage": stage.value}
            for ci, crop in enumerate(CROPS):
                row[crop.value] = float(self.probabilities[si, ci])
            rows.append(row)
        return rows


def joint_posterior_table(m: DiscriminantModel, x: np.ndarray) -> JointPosteriorTable:
    """Reshape a joint model's class posteriors into the stage x crop grid."""
    m._require_mode(LabelingMode.JOINT_CROP_STAGE)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError("joint_posterior_table takes a single spectrum")
    posteriors = np.exp(class_log_posteriors(m, x))
    grid = np.zeros((len(STAGES), len(CROPS)))
    for label, p in zip(m.classes, posteriors):
        grid[STAGE_INDEX[label.stage], CROP_INDEX[label.crop]] = p
    return JointPosteriorTable(probabilities=grid, support=m.support_mask())


def decide(m: DiscriminantModel, x: np.ndarray, rule: DecisionRule) -> np.ndarray:
    """Crop indices (CROPS order) for a batch of spectra under a decision rule.

    Ties resolve to the first candidate: alphabetical crop for DIRECT and
    MMP, then (crop, stage) order for MJP.
    """
    if rule == DecisionRule.DIRECT:
        m._require_mode(LabelingMode.CROP_ONLY)
    else:
        m._require_mode(LabelingMode.JOINT_CROP_STAGE)
    log_post = np.atleast_2d(class_log_posteriors(m, x))
    if rule == DecisionRule.MMP:
        return np.argmax(crop_log_marginals(m, log_post), axis=1)
    return m.class_crop_indices()[np.argmax(log_post, axis=1)]


def predict_crops(
    m: DiscriminantModel, x: np.ndarray, rule: DecisionRule
) -> List[CropLabel]:
    """Batch crop predictions under a decision rule."""
    return [CROPS[i] for i in decide(m, np.atleast_2d(x), rule)]


def predict_direct(m: DiscriminantModel, x: np.ndarray) -> CropLabel:
    """Argmax crop of a crop-only model."""
    return predict_crops(m, x, DecisionRule.DIRECT)[0]


def predict_mmp(m: DiscriminantModel, x: np.ndarray) -> Tuple[CropLabel, np.ndarray]:
    """Crop with the largest marginal, and the marginal vector over CROPS."""
    m._require_mode(LabelingMode.JOINT_CROP_STAGE)
    log_marginals = crop_log_marginals(m, class_log_posteriors(m, np.asarray(x, dtype=float)))
    if log_marginals.ndim != 1:
        raise ModelError("predict_mmp takes a single spectrum")
    return CROPS[int(np.argmax(log_marginals))], np.exp(log_marginals)


def predict_mjp(m: DiscriminantModel, x: np.ndarray) -> Tuple[CropLabel, JointLabel]:
    """Crop of the most probable joint class, and that class."""
    m._require_mode(LabelingMode.JOINT_CROP_STAGE)
    log_post = class_log_posteriors(m, np.asarray(x, dtype=float))
    if log_post.ndim != 1:
        raise ModelError("predict_mjp takes a single spectrum")
    best = m.classes[int(np.argmax(log_post))]
    return best.crop, best  # type: ignore[union-attr]
