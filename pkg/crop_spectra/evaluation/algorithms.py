"""Algorithm descriptors: parse, fit and predict for every evaluated method.

Descriptor grammar (case-insensitive):

    LDA | QDA [-Bayes-MMP | -Bayes-MJP] [(lambda)]
    MLP-1HL | MLP-2HL

``-Bayes-*`` variants fit on joint crop/stage labels and reduce with the
named decision rule; plain LDA/QDA fit on crop labels. Lambda defaults to 0.
"""

import re
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from crop_spectra.core.constants import PRIORS_UNIFORM
from crop_spectra.core.dataset import Dataset
from crop_spectra.core.exceptions import ConfigError, ModelError
from crop_spectra.models import discriminant, mlp
from crop_spectra.models.discriminant import (
    DecisionRule,
    DiscriminantKind,
    DiscriminantModel,
    LabelingMode,
)
from crop_spectra.models.gaussian import check_shrinkage
from crop_spectra.models.mlp import MLPConfig, MLPModel

FAMILY_DISCRIMINANT = "discriminant"
FAMILY_MLP = "mlp"

TABLE_ALGORITHMS: Tuple[str, ...] = (
    "LDA",
    "LDA-Bayes-MMP",
    "LDA-Bayes-MJP",
    "QDA(0.01)",
    "QDA-Bayes-MMP(0.5)",
    "QDA-Bayes-MJP(0.5)",
    "MLP-1HL",
    "MLP-2HL",
)

_DISCRIMINANT_PATTERN = re.compile(
    r"^(LDA|QDA)(?:-BAYES-(MMP|MJP))?(?:\(\s*([^)]*?)\s*\))?$", re.IGNORECASE
)
_MLP_PATTERN = re.compile(r"^(?:MLP|NN)-([12])HL$", re.IGNORECASE)


@dataclass(frozen=True)
class AlgorithmSpec:
    """One evaluable method: a model family plus its decision rule."""

    family: str
    rule: DecisionRule = DecisionRule.DIRECT
    kind: Optional[DiscriminantKind] = None
    shrinkage: float = 0.0
    priors: str = PRIORS_UNIFORM
    mlp_config: Optional[MLPConfig] = None

    @property
    def mode(self) -> LabelingMode:
        if self.rule == DecisionRule.DIRECT:
            return LabelingMode.CROP_ONLY
        return LabelingMode.JOINT_CROP_STAGE

    @property
    def name(self) -> str:
        if self.family == FAMILY_MLP:
            assert self.mlp_config is not None
            return f"MLP-{len(self.mlp_config.hidden_layers)}HL"
        assert self.kind is not None
        text = self.kind.value
        if self.rule != DecisionRule.DIRECT:
            text += f"-Bayes-{self.rule.value.upper()}"
        if self.kind == DiscriminantKind.QDA or self.shrinkage > 0.0:
            text += f"({self.shrinkage:g})"
        return text

    def with_shrinkage(self, lam: float) -> "AlgorithmSpec":
        if self.family != FAMILY_DISCRIMINANT:
            raise ConfigError(f"{self.name} has no regularization parameter")
        return replace(self, shrinkage=check_shrinkage(lam))


def parse_algorithm(
    text: str,
    mlp_defaults: Optional[MLPConfig] = None,
    priors: str = PRIORS_UNIFORM,
) -> AlgorithmSpec:
    """Parse a descriptor such as ``QDA-Bayes-MMP(0.5)`` or ``MLP-2HL``."""
    text = str(text).strip()
    match = _MLP_PATTERN.match(text)
    if match:
        defaults = mlp_defaults or MLPConfig()
        width = defaults.hidden_layers[0]
        config = replace(defaults, hidden_layers=(width,) * int(match.group(1)))
        return AlgorithmSpec(family=FAMILY_MLP, mlp_config=config)

    match = _DISCRIMINANT_PATTERN.match(text)
    if not match:
        raise ConfigError(
            f"Unknown algorithm descriptor {text!r}; expected e.g. LDA, "
            "QDA(0.01), QDA-Bayes-MMP(0.5), LDA-Bayes-MJP, MLP-1HL"
        )
    kind = DiscriminantKind(match.group(1).upper())
    rule = DecisionRule(match.group(2).lower()) if match.group(2) else DecisionRule.DIRECT
    shrinkage = 0.0
    if match.group(3):
        try:
            shrinkage = float(match.group(3))
        except ValueError as exc:
            raise ConfigError(f"Bad regularization value in {text!r}") from exc
    try:
        shrinkage = check_shrinkage(shrinkage)
    except ModelError as exc:
        raise ConfigError(f"{text}: {exc.message}") from exc
    return AlgorithmSpec(
        family=FAMILY_DISCRIMINANT, rule=rule, kind=kind, shrinkage=shrinkage, priors=priors
    )


Model = Union[DiscriminantModel, MLPModel]


def fit_algorithm(spec: AlgorithmSpec, train_ds: Dataset, progress: bool = False) -> Model:
    """Fit the spec's model on training records only.

    Joint labelings drop classes with fewer than 2 training samples, which
    then carry zero posterior like any unseen crop/stage pair.
    """
    if spec.family == FAMILY_MLP:
        assert spec.mlp_config is not None
        return mlp.train(train_ds, spec.mlp_config, progress=progress)
    assert spec.kind is not None
    return discriminant.fit(
        train_ds,
        spec.mode,
        spec.kind,
        shrinkage=spec.shrinkage,
        priors=spec.priors,
        drop_sparse_classes=spec.mode == LabelingMode.JOINT_CROP_STAGE,
    )


def predict_indices(spec: AlgorithmSpec, model: Model, spectra: np.ndarray) -> np.ndarray:
    """Crop indices (CROPS order) predicted for a batch of spectra."""
    if isinstance(model, MLPModel):
        return np.argmax(np.atleast_2d(mlp.predict_proba(model, spectra)), axis=1)
    return discriminant.decide(model, spectra, spec.rule)


def as_algorithm_spec(algorithm: Union[AlgorithmSpec, str]) -> AlgorithmSpec:
    """Accept either a parsed spec or a descriptor string."""
    return parse_algorithm(algorithm) if isinstance(algorithm, str) else algorithm
