"""Self-describing JSON model files shared by discriminant and MLP models."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from crop_spectra.core.constants import MODEL_FORMAT, MODEL_FORMAT_VERSION, CropLabel, StageLabel
from crop_spectra.core.dataset import JointLabel
from crop_spectra.core.exceptions import ConfigError, ModelError
from crop_spectra.models.discriminant import (
    DiscriminantKind,
    DiscriminantModel,
    LabelingMode,
)
from crop_spectra.models.mlp import MLPModel, NetworkParameters

logger = logging.getLogger(__name__)

MODEL_TYPE_DISCRIMINANT = "discriminant"
MODEL_TYPE_MLP = "mlp"

AnyModel = Union[DiscriminantModel, MLPModel]


def _matrix(value: Any, name: str) -> np.ndarray:
    try:
        return np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"Model field {name!r} is not numeric: {exc}") from exc


def discriminant_to_dict(model: DiscriminantModel) -> Dict[str, Any]:
    if model.mode == LabelingMode.JOINT_CROP_STAGE:
        classes = [[c.crop.value, c.stage.value] for c in model.classes]
    else:
        classes = [c.value for c in model.classes]
    return {
        "mode": model.mode.value,
        "kind": model.kind.value,
        "shrinkage": model.shrinkage,
        "classes": classes,
        "priors": model.priors.tolist(),
        "class_counts": list(model.class_counts),
        "means": model.means.tolist(),
        "covariance_factors": [f.tolist() for f in model.factors],
        "log_dets": list(model.log_dets),
    }


def discriminant_from_dict(data: Dict[str, Any]) -> DiscriminantModel:
    try:
        mode = LabelingMode(data["mode"])
        kind = DiscriminantKind(data["kind"])
        if mode == LabelingMode.JOINT_CROP_STAGE:
            classes = tuple(JointLabel(CropLabel(c), StageLabel(s)) for c, s in data["classes"])
        else:
            classes = tuple(CropLabel(c) for c in data["classes"])
        return DiscriminantModel(
            mode=mode,
            kind=kind,
            classes=classes,  # type: ignore[arg-type]
            means=_matrix(data["means"], "means"),
            priors=_matrix(data["priors"], "priors"),
            class_counts=tuple(int(n) for n in data["class_counts"]),
            factors=tuple(_matrix(f, "covariance_factors") for f in data["covariance_factors"]),
            log_dets=tuple(float(v) for v in data["log_dets"]),
            shrinkage=float(data["shrinkage"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"Malformed discriminant model: {exc}") from exc


def mlp_to_dict(model: MLPModel) -> Dict[str, Any]:
    return {
        "classes": [c.value for c in CropLabel],
        "hidden_layers": list(model.hidden_layers),
        "weights": [w.tolist() for w in model.parameters.weights],
        "biases": [b.tolist() for b in model.parameters.biases],
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "loss_history": list(model.loss_history),
        "trained_crops": list(model.trained_crops),
    }


def mlp_from_dict(data: Dict[str, Any]) -> MLPModel:
    try:
        if data["classes"] != [c.value for c in CropLabel]:
            raise ModelError(f"MLP output classes {data['classes']} do not match this version")
        params = NetworkParameters(
            tuple(_matrix(w, "weights") for w in data["weights"]),
            tuple(_matrix(b, "biases") for b in data["biases"]),
        )
        return MLPModel(
            parameters=params,
            feature_mean=_matrix(data["feature_mean"], "feature_mean"),
            feature_std=_matrix(data["feature_std"], "feature_std"),
            loss_history=tuple(float(v) for v in data.get("loss_history", [])),
            trained_crops=tuple(data.get("trained_crops", [True] * len(CropLabel))),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelError(f"Malformed MLP model: {exc}") from exc


def save_model(model: AnyModel, path: Path, algorithm: str = "") -> Path:
    """Write a model file; ``algorithm`` records the descriptor it was trained for."""
    if isinstance(model, DiscriminantModel):
        model_type, body = MODEL_TYPE_DISCRIMINANT, discriminant_to_dict(model)
    elif isinstance(model, MLPModel):
        model_type, body = MODEL_TYPE_MLP, mlp_to_dict(model)
    else:
        raise ModelError(f"Cannot serialize {type(model).__name__}")
    document = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "model_type": model_type,
        "algorithm": algorithm,
        "band_count": model.band_count,
        "model": body,
    }
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2)
            handle.write("\n")
    except OSError as exc:
        raise ConfigError(f"Cannot write model file {path}: {exc}") from exc
    logger.info("Saved %s model to %s", model_type, path)
    return path


def load_model(path: Path) -> Tuple[AnyModel, str]:
    """Read a model file; returns the model and its algorithm descriptor."""
    path = Path(path)
    if not path.is_file():
        raise ModelError(f"Model file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"Cannot read model file {path}: {exc}") from exc
    if not isinstance(document, dict) or document.get("format") != MODEL_FORMAT:
        raise ModelError(f"Not a {MODEL_FORMAT} file: {path}")
    if document.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(
            f"Unsupported model format version {document.get('format_version')!r}"
        )
    model_type: Optional[str] = document.get("model_type")
    body = document.get("model") or {}
    if model_type == MODEL_TYPE_DISCRIMINANT:
        model: AnyModel = discriminant_from_dict(body)
    elif model_type == MODEL_TYPE_MLP:
        model = mlp_from_dict(body)
    else:
        raise ModelError(f"Unknown model_type {model_type!r} in {path}")
    return model, str(document.get("algorithm") or "")
