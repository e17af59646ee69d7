"""JSON round-tripping for fitted calibration models.

Every model serializes to an object with a ``method`` discriminator plus
method-specific fields. Floats pass through Python's shortest round-trip
representation, so save/load reproduces the model bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .binary import BBQModel, BBQScheme, HistogramBinningModel, IsotonicModel, PlattModel
from .errors import DataFormatError, DataIOError
from .multiclass import AffineScalingModel, OneVsAllModel, TemperatureModel

_OVA_PREFIX = "ova_"


def model_to_dict(model) -> dict:
    """JSON-ready dictionary for any fitted model."""
    if isinstance(model, HistogramBinningModel):
        return {
            "method": "histogram",
            "boundaries": model.boundaries.tolist(),
            "thetas": model.thetas.tolist(),
        }
    if isinstance(model, IsotonicModel):
        return {
            "method": "isotonic",
            "breakpoints": model.breakpoints.tolist(),
            "values": model.values.tolist(),
        }
    if isinstance(model, BBQModel):
        return {
            "method": "bbq",
            "schemes": [
                {
                    "boundaries": s.boundaries.tolist(),
                    "alphas": s.alphas.tolist(),
                    "betas": s.betas.tolist(),
                    "log_marginal": s.log_marginal,
                }
                for s in model.schemes
            ],
            "log_weights": model.log_weights.tolist(),
        }
    if isinstance(model, PlattModel):
        return {"method": "platt", "a": model.a, "b": model.b}
    if isinstance(model, TemperatureModel):
        return {"method": "temperature", "temperature": model.temperature}
    if isinstance(model, AffineScalingModel):
        return {
            "method": model.kind,
            "weight": model.weight.tolist(),
            "bias": model.bias.tolist(),
        }
    if isinstance(model, OneVsAllModel):
        return {
            "method": _OVA_PREFIX + model.method,
            "per_class": [model_to_dict(m) for m in model.per_class],
        }
    raise TypeError(f"not a fitted calibration model: {model!r}")


def _require(payload: dict, *keys):
    missing = [k for k in keys if k not in payload]
    if missing:
        raise DataFormatError(f"model JSON is missing field(s): {', '.join(missing)}")
    return [payload[k] for k in keys]


def model_from_dict(payload: dict):
    """Rebuild a fitted model from :func:`model_to_dict` output."""
    if not isinstance(payload, dict) or "method" not in payload:
        raise DataFormatError("model JSON must be an object with a 'method' field")
    method = payload["method"]
    try:
        if method == "histogram":
            boundaries, thetas = _require(payload, "boundaries", "thetas")
            return HistogramBinningModel(
                boundaries=np.asarray(boundaries, dtype=float),
                thetas=np.asarray(thetas, dtype=float),
            )
        if method == "isotonic":
            breakpoints, values = _require(payload, "breakpoints", "values")
            return IsotonicModel(
                breakpoints=np.asarray(breakpoints, dtype=float),
                values=np.asarray(values, dtype=float),
            )
        if method == "bbq":
            schemes, log_weights = _require(payload, "schemes", "log_weights")
            rebuilt = tuple(
                BBQScheme(
                    boundaries=np.asarray(s["boundaries"], dtype=float),
                    alphas=np.asarray(s["alphas"], dtype=float),
                    betas=np.asarray(s["betas"], dtype=float),
                    log_marginal=float(s["log_marginal"]),
                )
                for s in schemes
            )
            return BBQModel(schemes=rebuilt, log_weights=np.asarray(log_weights, dtype=float))
        if method == "platt":
            a, b = _require(payload, "a", "b")
            return PlattModel(a=float(a), b=float(b))
        if method == "temperature":
            (t,) = _require(payload, "temperature")
            return TemperatureModel(temperature=float(t))
        if method in ("vector", "matrix"):
            weight, bias = _require(payload, "weight", "bias")
            return AffineScalingModel(
                weight=np.asarray(weight, dtype=float),
                bias=np.asarray(bias, dtype=float),
                kind=method,
            )
        if method.startswith(_OVA_PREFIX):
            (per_class,) = _require(payload, "per_class")
            return OneVsAllModel(
                method=method[len(_OVA_PREFIX) :],
                per_class=tuple(model_from_dict(m) for m in per_class),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad model JSON for method {method!r}: {exc}") from exc
    raise DataFormatError(f"unknown calibration method {method!r} in model JSON")


def save_model(model, path) -> None:
    text = json.dumps(model_to_dict(model), indent=2) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read model from {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(payload)
