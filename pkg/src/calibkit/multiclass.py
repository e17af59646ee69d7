"""Multiclass calibrators: temperature, vector and matrix scaling, plus the
one-vs-all wrapper around the binary binning methods.

Scaling maps transform the logits (``z / T`` or ``W z + b``) and re-apply
softmax; temperature scaling provably keeps the argmax, so it never
changes which class is predicted. The one-vs-all wrapper calibrates each
class's softmax score independently and renormalizes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .binary import (
    BBQModel,
    BinaryModel,
    HistogramBinningModel,
    IsotonicModel,
    PlattModel,
    apply_binary,
    fit_bbq,
    fit_histogram,
    fit_isotonic,
)
from .dataset import LogitDataset, ProbVector, softmax, to_one_vs_all
from .errors import (
    BoundaryOptimumError,
    CalibrationError,
    NonConvergenceError,
    OverfitWarning,
    ValidationError,
    ZeroMassError,
)
from .optimize import minimize_grad, minimize_scalar

MATRIX = "matrix"
VECTOR = "vector"

#: Search interval and tolerance for the temperature fit.
TEMPERATURE_SEARCH = (0.05, 50.0)
TEMPERATURE_TOL = 1e-6

AFFINE_GRAD_TOL = 1e-7
AFFINE_MAX_ITERS = 50_000

_OVA_FITTERS = {
    "histogram": fit_histogram,
    "isotonic": fit_isotonic,
    "bbq": fit_bbq,
}
_OVA_MODEL_TYPES = {
    "histogram": HistogramBinningModel,
    "isotonic": IsotonicModel,
    "bbq": BBQModel,
}


@dataclass(frozen=True)
class TemperatureModel:
    """A single positive scalar dividing every logit."""

    temperature: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise ValidationError(f"temperature must be finite and positive, got {self.temperature!r}")


@dataclass(frozen=True)
class AffineScalingModel:
    """Affine logit transform W z + b; ``vector`` kind keeps W diagonal."""

    weight: np.ndarray
    bias: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        weight = np.asarray(self.weight, dtype=float)
        bias = np.asarray(self.bias, dtype=float)
        if self.kind not in (MATRIX, VECTOR):
            raise ValidationError(f"kind must be {MATRIX!r} or {VECTOR!r}, got {self.kind!r}")
        if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
            raise ValidationError(f"weight must be square, got shape {weight.shape}")
        if bias.shape != (weight.shape[0],):
            raise ValidationError(
                f"bias shape {bias.shape} does not match weight shape {weight.shape}"
            )
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise ValidationError("weight and bias must be finite")
        if self.kind == VECTOR and np.any(weight[~np.eye(weight.shape[0], dtype=bool)] != 0.0):
            raise ValidationError("vector scaling requires an exactly diagonal weight")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def k(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class OneVsAllModel:
    """K binary calibrators of one method, one per class."""

    method: str
    per_class: tuple

    def __post_init__(self) -> None:
        expected = _OVA_MODEL_TYPES.get(self.method)
        if expected is None:
            raise ValidationError(
                f"unknown one-vs-all method {self.method!r}; expected one of "
                f"{sorted(_OVA_MODEL_TYPES)}"
            )
        per_class = tuple(self.per_class)
        if len(per_class) < 2:
            raise ValidationError("need one calibrator per class, K >= 2")
        if any(not isinstance(m, expected) for m in per_class):
            raise ValidationError(
                f"every per-class calibrator must be a fitted {self.method} model"
            )
        object.__setattr__(self, "per_class", per_class)

    @property
    def k(self) -> int:
        return len(self.per_class)


@dataclass(frozen=True)
class CalibratedOutput:
    """A calibrated prediction; the full distribution is attached whenever
    the method produces one, with confidence equal to its max."""

    label: int
    confidence: float
    full_distribution: Optional[ProbVector] = None

    def __post_init__(self) -> None:
        if self.full_distribution is not None:
            p = self.full_distribution.probs
            if not 0 <= self.label < p.size:
                raise ValidationError(f"label {self.label} outside the distribution")
            top = float(np.max(p))
            if self.confidence != top or float(p[self.label]) != top:
                raise ValidationError(
                    "confidence/label must be the max/argmax of the distribution"
                )


def _mean_nll_of_logits(u: np.ndarray, labels: np.ndarray) -> float:
    rows = np.arange(u.shape[0])
    m = np.max(u, axis=1)
    e = np.exp(u - m[:, None])
    # The max term contributes exactly 1; summing the rest separately and
    # grouping (max - label logit) before the log1p remainder keeps the
    # objective strictly monotone even deep in saturation, where
    # log(1 + tiny) added to a large log-sum-exp would be absorbed.
    e[rows, np.argmax(u, axis=1)] = 0.0
    rest = np.log1p(np.sum(e, axis=1))
    return float(np.mean((m - u[rows, labels]) + rest))


def temperature_nll(d: LogitDataset, t: float) -> float:
    """Mean per-sample log loss of softmax(z / t); the fit's objective."""
    if t <= 0.0:
        raise ValidationError(f"temperature must be positive, got {t}")
    return _mean_nll_of_logits(d.logits / t, d.labels)


def fit_temperature(d: LogitDataset) -> TemperatureModel:
    """Pick the temperature minimizing log loss on the fitting set.

    The objective is unimodal in T (it is convex in the inverse
    temperature), so golden-section search over ``TEMPERATURE_SEARCH``
    finds the optimum to ``TEMPERATURE_TOL``. An argmin on the interval
    boundary is reported as an error instead of being returned silently.
    """
    lo, hi = TEMPERATURE_SEARCH
    result = minimize_scalar(lambda t: temperature_nll(d, t), lo, hi, TEMPERATURE_TOL)
    if result.at_boundary:
        raise BoundaryOptimumError(
            f"temperature optimum {result.argmin:.6g} sits on the search "
            f"boundary [{lo}, {hi}]"
        )
    return TemperatureModel(temperature=float(result.argmin))


def _affine_objective(d: LogitDataset, kind: str):
    z = d.logits
    n, k = z.shape
    rows = np.arange(n)
    labels = d.labels

    def f_and_grad(params: np.ndarray):
        if kind == MATRIX:
            w = params[: k * k].reshape(k, k)
            b = params[k * k :]
            u = z @ w.T + b
        else:
            w = params[:k]
            b = params[k:]
            u = z * w + b
        m = np.max(u, axis=1, keepdims=True)
        e = np.exp(u - m)
        s = np.sum(e, axis=1, keepdims=True)
        q = e / s
        value = float(np.mean((m + np.log(s)).ravel() - u[rows, labels]))
        g = q.copy()
        g[rows, labels] -= 1.0
        g /= n
        grad_b = g.sum(axis=0)
        if kind == MATRIX:
            grad_w = g.T @ z
            return value, np.concatenate([grad_w.ravel(), grad_b])
        grad_w = np.sum(g * z, axis=0)
        return value, np.concatenate([grad_w, grad_b])

    return f_and_grad


def fit_affine(d: LogitDataset, kind: str) -> AffineScalingModel:
    """Fit W and b by full-batch descent on the mean log loss.

    Starts from the identity (W = I, b = 0), so the fitted loss never
    exceeds the uncalibrated one. The matrix kind warns when the fitting
    set is small relative to its K^2 parameters, since nothing regularizes
    the fit.
    """
    if kind not in (MATRIX, VECTOR):
        raise ValidationError(f"kind must be {MATRIX!r} or {VECTOR!r}, got {kind!r}")
    k = d.k
    if d.n < k:
        raise ValidationError(f"need at least K={k} samples to fit, got {d.n}")
    if kind == MATRIX and d.n < 10 * k * k:
        warnings.warn(
            f"matrix scaling with n={d.n} < 10*K^2={10 * k * k} samples is "
            "likely to overfit",
            OverfitWarning,
            stacklevel=2,
        )
    if kind == MATRIX:
        init = np.concatenate([np.eye(k).ravel(), np.zeros(k)])
    else:
        init = np.concatenate([np.ones(k), np.zeros(k)])
    result = minimize_grad(
        _affine_objective(d, kind),
        init=init,
        grad_tol=AFFINE_GRAD_TOL,
        max_iters=AFFINE_MAX_ITERS,
    )
    if not result.converged:
        raise NonConvergenceError(
            f"{kind} scaling stopped at gradient {result.grad_max_norm:.3e} "
            f"after {result.iterations} iterations"
        )
    if kind == MATRIX:
        weight = result.params[: k * k].reshape(k, k)
        bias = result.params[k * k :]
    else:
        weight = np.diag(result.params[:k])
        bias = result.params[k:]
    return AffineScalingModel(weight=weight, bias=bias, kind=kind)


def fit_one_vs_all(d: LogitDataset, method: str, **fit_kwargs) -> OneVsAllModel:
    """Fit one binary calibrator per class on its one-vs-all projection.

    Keyword arguments are forwarded to the underlying binary fitter
    (for example ``m_bins`` for histogram binning). Per-class fits are
    independent; a failure is re-raised with the class index attached.
    """
    if method not in _OVA_FITTERS:
        raise ValidationError(
            f"unknown one-vs-all method {method!r}; expected one of {sorted(_OVA_FITTERS)}"
        )
    fitter = _OVA_FITTERS[method]
    per_class = []
    for k in range(d.k):
        try:
            per_class.append(fitter(to_one_vs_all(d, k), **fit_kwargs))
        except CalibrationError as exc:
            raise type(exc)(f"class {k}: {exc}") from exc
    return OneVsAllModel(method=method, per_class=tuple(per_class))


def _check_vector(z, k: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValidationError(f"expected a single logit vector, got shape {z.shape}")
    if k is not None and z.size != k:
        raise ValidationError(f"model expects K={k} classes, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise ValidationError("logits must be finite")
    return z


def apply_temperature(m: TemperatureModel, z) -> CalibratedOutput:
    """Softmax of z / T. The label is the raw argmax, which scaling by a
    positive temperature cannot change."""
    z = _check_vector(z, None)
    p = softmax(z / m.temperature)
    label = int(np.argmax(z))
    return CalibratedOutput(
        label=label, confidence=float(p[label]), full_distribution=ProbVector(p)
    )


def apply_affine(m: AffineScalingModel, z) -> CalibratedOutput:
    """Softmax of W z + b; unlike temperature scaling the argmax may move."""
    z = _check_vector(z, m.k)
    u = m.weight @ z + m.bias
    p = softmax(u)
    label = int(np.argmax(u))
    return CalibratedOutput(
        label=label, confidence=float(p[label]), full_distribution=ProbVector(p)
    )


def apply_one_vs_all(m: OneVsAllModel, z) -> CalibratedOutput:
    """Per-class calibrated scores, renormalized into a distribution.

    The label is the argmax of the unnormalized score vector (the
    normalizer is a positive scalar, so normalizing cannot change it) and
    the confidence is the normalized max.
    """
    z = _check_vector(z, m.k)
    p = softmax(z)
    q = np.array([apply_binary(model, p[k]) for k, model in enumerate(m.per_class)])
    total = float(np.sum(q))
    if total <= 0.0:
        raise ZeroMassError("every per-class calibrator returned zero")
    label = int(np.argmax(q))
    normalized = q / total
    return CalibratedOutput(
        label=label,
        confidence=float(normalized[label]),
        full_distribution=ProbVector(normalized),
    )


CalibrationModel = (
    TemperatureModel | AffineScalingModel | OneVsAllModel | BinaryModel
)


def calibrated_probs(model, logits) -> np.ndarray:
    """Calibrated distribution matrix (n x K) for a whole logit matrix.

    Accepts any fitted model. The binary calibrators require K = 2 and
    produce the two-class distribution [1 - q, q] for the calibrated
    positive-class probability q. Row argmaxes of the result agree with
    the per-sample ``apply_*`` labels for every model type.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2:
        raise ValidationError(f"expected an n x K logit matrix, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValidationError("logits must be finite")
    k = logits.shape[1]

    if isinstance(model, TemperatureModel):
        return softmax(logits / model.temperature)
    if isinstance(model, AffineScalingModel):
        if model.k != k:
            raise ValidationError(f"model expects K={model.k} classes, got {k}")
        return softmax(logits @ model.weight.T + model.bias)
    if isinstance(model, OneVsAllModel):
        if model.k != k:
            raise ValidationError(f"model expects K={model.k} classes, got {k}")
        p = softmax(logits)
        q = np.column_stack(
            [apply_binary(mod, p[:, j]) for j, mod in enumerate(model.per_class)]
        )
        totals = q.sum(axis=1)
        if np.any(totals <= 0.0):
            i = int(np.argmax(totals <= 0.0))
            raise ZeroMassError(
                f"every per-class calibrator returned zero for sample {i + 1}"
            )
        return q / totals[:, None]
    if isinstance(model, (HistogramBinningModel, IsotonicModel, BBQModel, PlattModel)):
        if k != 2:
            raise ValidationError(
                f"binary calibrators apply to K=2 logits, got K={k}"
            )
        p = softmax(logits)
        if isinstance(model, PlattModel):
            # The two-class log-odds of class 1 is exactly z1 - z0.
            q = apply_binary(model, p[:, 1], logit=logits[:, 1] - logits[:, 0])
        else:
            q = apply_binary(model, p[:, 1])
        return np.column_stack([1.0 - q, q])
    raise TypeError(f"not a fitted calibration model: {model!r}")
