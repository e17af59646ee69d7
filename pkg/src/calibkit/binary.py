"""Binary calibrators: histogram binning, isotonic regression, Bayesian
binning over schemes, and logistic (Platt-style) scaling.

All four fit a map from an uncalibrated score in [0, 1] (plus optionally a
raw logit) to a calibrated probability. Fitting is deterministic; the
fitted models are immutable dataclasses that serialize to JSON via
:mod:`calibkit.serialize`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binning import bin_index, equal_frequency_boundaries, equal_width_boundaries
from .dataset import BinaryCalibrationSet
from .errors import DegenerateLabelsError, NonConvergenceError, ValidationError
from .optimize import minimize_grad

EQUAL_WIDTH = "equal-width"
EQUAL_FREQUENCY = "equal-frequency"

#: Flat per-bin Beta prior used by the Bayesian binning default.
DEFAULT_BBQ_PRIOR = (1.0, 1.0)

_SCORE_CLAMP = 1e-12
_PLATT_GRAD_TOL = 1e-8
_PLATT_MAX_ITERS = 10_000


@dataclass(frozen=True)
class HistogramBinningModel:
    """Piecewise-constant map: boundaries (M+1) and one value per bin."""

    boundaries: np.ndarray
    thetas: np.ndarray

    def __post_init__(self) -> None:
        boundaries = np.asarray(self.boundaries, dtype=float)
        thetas = np.asarray(self.thetas, dtype=float)
        if boundaries.ndim != 1 or boundaries.size < 2:
            raise ValidationError("need at least two boundaries")
        if thetas.shape != (boundaries.size - 1,):
            raise ValidationError(
                f"{thetas.size} bin values for {boundaries.size - 1} bins"
            )
        if boundaries[0] != 0.0 or boundaries[-1] != 1.0 or np.any(np.diff(boundaries) < 0):
            raise ValidationError("boundaries must be nondecreasing from 0 to 1")
        if np.any(thetas < 0.0) or np.any(thetas > 1.0):
            raise ValidationError("bin values must lie in [0, 1]")
        object.__setattr__(self, "boundaries", boundaries)
        object.__setattr__(self, "thetas", thetas)


@dataclass(frozen=True)
class IsotonicModel:
    """Nondecreasing step function: value j applies from breakpoint j up
    to (but excluding) breakpoint j+1; scores below the first breakpoint
    take the first value."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        breakpoints = np.asarray(self.breakpoints, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if breakpoints.ndim != 1 or breakpoints.size < 1:
            raise ValidationError("need at least one breakpoint")
        if values.shape != breakpoints.shape:
            raise ValidationError(f"{values.size} values for {breakpoints.size} breakpoints")
        if np.any(np.diff(breakpoints) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if np.any(breakpoints < 0.0) or np.any(breakpoints > 1.0):
            raise ValidationError("breakpoints must lie in [0, 1]")
        if np.any(np.diff(values) < 0):
            raise ValidationError("values must be nondecreasing")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValidationError("values must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class BBQScheme:
    """One candidate binning: boundaries, per-bin Beta posteriors, and the
    log marginal likelihood of the outcomes under that binning."""

    boundaries: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    log_marginal: float

    def __post_init__(self) -> None:
        boundaries = np.asarray(self.boundaries, dtype=float)
        alphas = np.asarray(self.alphas, dtype=float)
        betas = np.asarray(self.betas, dtype=float)
        m = boundaries.size - 1
        if alphas.shape != (m,) or betas.shape != (m,):
            raise ValidationError("posterior parameter count must match the bin count")
        if np.any(alphas <= 0.0) or np.any(betas <= 0.0):
            raise ValidationError("Beta posterior parameters must be positive")
        object.__setattr__(self, "boundaries", boundaries)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)


@dataclass(frozen=True)
class BBQModel:
    """Mixture over binning schemes, weighted by marginal likelihood."""

    schemes: tuple[BBQScheme, ...]
    log_weights: np.ndarray

    def __post_init__(self) -> None:
        log_weights = np.asarray(self.log_weights, dtype=float)
        if len(self.schemes) < 1:
            raise ValidationError("need at least one scheme")
        if log_weights.shape != (len(self.schemes),):
            raise ValidationError(f"{log_weights.size} weights for {len(self.schemes)} schemes")
        total = _logsumexp(log_weights)
        if abs(total) > 1e-9:
            raise ValidationError(f"scheme weights must sum to 1, got log-sum {total!r}")
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "log_weights", log_weights)


@dataclass(frozen=True)
class PlattModel:
    """Logistic map sigma(a*z + b) on the raw logit z."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("Platt parameters must be finite")


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, _SCORE_CLAMP, 1.0 - _SCORE_CLAMP)
    return np.log(p) - np.log1p(-p)


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


def _lbeta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def fit_histogram(
    s: BinaryCalibrationSet,
    m_bins: int = 15,
    mode: str = EQUAL_FREQUENCY,
) -> HistogramBinningModel:
    """Bin the scores and set each bin's value to its mean outcome.

    The bin-wise mean is the exact least-squares choice for a fixed
    binning. Empty bins, which only occur with equal-width boundaries or
    heavily tied scores, predict their interval midpoint.
    """
    if mode == EQUAL_WIDTH:
        boundaries = equal_width_boundaries(m_bins)
    elif mode == EQUAL_FREQUENCY:
        boundaries = equal_frequency_boundaries(s.scores, m_bins)
    else:
        raise ValidationError(
            f"unknown mode {mode!r}; expected {EQUAL_WIDTH!r} or {EQUAL_FREQUENCY!r}"
        )
    idx = bin_index(boundaries, s.scores)
    counts = np.bincount(idx, minlength=m_bins)
    positives = np.bincount(idx, weights=s.outcomes.astype(float), minlength=m_bins)
    midpoints = 0.5 * (boundaries[:-1] + boundaries[1:])
    with np.errstate(invalid="ignore"):
        thetas = np.where(counts > 0, positives / np.maximum(counts, 1), midpoints)
    return HistogramBinningModel(boundaries=boundaries, thetas=thetas)


def _pava_blocks(y: np.ndarray) -> list[tuple[int, int, float]]:
    """Pool-adjacent-violators on a sequence; returns (start, size, mean)
    blocks whose means are nondecreasing and minimize squared error."""
    starts: list[int] = []
    sizes: list[int] = []
    means: list[float] = []
    for i, yi in enumerate(y):
        starts.append(i)
        sizes.append(1)
        means.append(float(yi))
        while len(means) > 1 and means[-2] > means[-1]:
            total = sizes[-2] + sizes[-1]
            merged = (means[-2] * sizes[-2] + means[-1] * sizes[-1]) / total
            starts.pop()
            sizes.pop()
            means.pop()
            sizes[-1] = total
            means[-1] = merged
    return list(zip(starts, sizes, means))


def fit_isotonic(s: BinaryCalibrationSet) -> IsotonicModel:
    """Least-squares nondecreasing step fit of outcomes against scores.

    Samples are stably sorted by score (ties keep input order) and pooled
    by adjacent violators; the block structure supplies both the
    breakpoints and the fitted values. Blocks that begin at the same score
    (possible only with tied scores) are merged by weighted average so the
    result is a well-defined function of the score.
    """
    order = np.argsort(s.scores, kind="stable")
    sorted_scores = s.scores[order]
    blocks = _pava_blocks(s.outcomes[order].astype(float))

    breakpoints: list[float] = []
    values: list[float] = []
    weights: list[int] = []
    for start, size, mean in blocks:
        bp = float(sorted_scores[start])
        if breakpoints and bp == breakpoints[-1]:
            total = weights[-1] + size
            values[-1] = (values[-1] * weights[-1] + mean * size) / total
            weights[-1] = total
        elif breakpoints and mean == values[-1]:
            # Same value as the previous piece: extend it instead of
            # recording a redundant breakpoint.
            weights[-1] += size
        else:
            breakpoints.append(bp)
            values.append(mean)
            weights.append(size)
    return IsotonicModel(breakpoints=np.array(breakpoints), values=np.array(values))


def fit_bbq(
    s: BinaryCalibrationSet,
    candidate_bin_counts=None,
    prior_alpha: float = DEFAULT_BBQ_PRIOR[0],
    prior_beta: float = DEFAULT_BBQ_PRIOR[1],
) -> BBQModel:
    """Average equal-frequency binnings, weighted by how well each one
    explains the outcomes.

    Each candidate bin count M yields a scheme whose bins carry
    independent Beta(prior_alpha, prior_beta) priors on the positive rate.
    The outcomes inside a bin with n1 positives and n0 negatives then have
    exact log marginal likelihood

        lbeta(prior_alpha + n1, prior_beta + n0) - lbeta(prior_alpha, prior_beta)

    and a scheme's log marginal is the sum over its bins. Scheme weights
    are the normalized marginals (a flat prior over schemes), kept in log
    space to survive large n. The default candidate list is
    M = 1 .. 3 * ceil(n ** (1/3)).
    """
    if prior_alpha <= 0.0 or prior_beta <= 0.0:
        raise ValidationError("Beta prior parameters must be positive")
    if candidate_bin_counts is None:
        candidate_bin_counts = range(1, 3 * math.ceil(s.n ** (1.0 / 3.0)) + 1)
    candidates = [int(m) for m in candidate_bin_counts]
    if not candidates:
        raise ValidationError("candidate bin-count list is empty")
    if any(m < 1 for m in candidates):
        raise ValidationError("candidate bin counts must be positive")

    outcomes = s.outcomes.astype(float)
    schemes = []
    log_marginals = np.empty(len(candidates))
    for j, m_bins in enumerate(candidates):
        boundaries = equal_frequency_boundaries(s.scores, m_bins)
        idx = bin_index(boundaries, s.scores)
        counts = np.bincount(idx, minlength=m_bins)
        positives = np.bincount(idx, weights=outcomes, minlength=m_bins)
        negatives = counts - positives
        alphas = prior_alpha + positives
        betas = prior_beta + negatives
        log_marginal = sum(
            _lbeta(a, b) - _lbeta(prior_alpha, prior_beta)
            for a, b in zip(alphas, betas)
        )
        schemes.append(
            BBQScheme(
                boundaries=boundaries,
                alphas=alphas,
                betas=betas,
                log_marginal=float(log_marginal),
            )
        )
        log_marginals[j] = log_marginal
    log_weights = log_marginals - _logsumexp(log_marginals)
    return BBQModel(schemes=tuple(schemes), log_weights=log_weights)


def fit_platt(s: BinaryCalibrationSet, from_logits=None) -> PlattModel:
    """Fit sigma(a*z + b) by minimizing the mean binary log loss.

    ``from_logits`` supplies the raw scores z directly; otherwise z is the
    log-odds of the clamped score. Single-class and perfectly separable
    outcomes are rejected up front: in both cases the loss has no attained
    minimum (a or b runs off to infinity).
    """
    y = s.outcomes.astype(float)
    if s.n < 2 or np.all(y == y[0]):
        raise DegenerateLabelsError(
            "need at least one positive and one negative outcome"
        )
    if from_logits is not None:
        z = np.asarray(from_logits, dtype=float)
        if z.shape != s.scores.shape:
            raise ValidationError(f"{z.size} logits for {s.n} samples")
        if not np.all(np.isfinite(z)):
            raise ValidationError("logits must be finite")
    else:
        z = _logit(s.scores)
    # Perfectly separated classes push a to +/- infinity; refuse up front
    # instead of handing back whatever huge value the iteration cap left.
    neg, pos = z[y == 0.0], z[y == 1.0]
    if float(np.max(neg)) < float(np.min(pos)) or float(np.max(pos)) < float(np.min(neg)):
        raise DegenerateLabelsError(
            "outcomes are perfectly separable in the score; the logistic "
            "optimum is unbounded"
        )
    n = s.n

    def loss_and_grad(params: np.ndarray):
        a, b = params
        u = a * z + b
        # log(1 + e^u) - y*u, computed without overflow
        value = float(np.sum(np.logaddexp(0.0, u) - y * u) / n)
        r = (_sigmoid(u) - y) / n
        return value, np.array([float(r @ z), float(np.sum(r))])

    result = minimize_grad(
        loss_and_grad,
        init=np.array([1.0, 0.0]),
        grad_tol=_PLATT_GRAD_TOL,
        max_iters=_PLATT_MAX_ITERS,
    )
    if not result.converged:
        raise NonConvergenceError(
            f"logistic fit still had gradient {result.grad_max_norm:.3e} after "
            f"{result.iterations} iterations (data may be separable)"
        )
    return PlattModel(a=float(result.params[0]), b=float(result.params[1]))


BinaryModel = HistogramBinningModel | IsotonicModel | BBQModel | PlattModel


def apply_binary(model: BinaryModel, score, logit=None):
    """Calibrated probability for a score (scalar or array) under a fitted
    binary model.

    Histogram and Bayesian models look up the bin containing the score;
    the isotonic model takes the step piece whose breakpoint is the last
    one at or below the score, clamping outside the fitted range; the
    logistic model uses ``logit`` when given and the score's log-odds
    otherwise.
    """
    score_arr = np.atleast_1d(np.asarray(score, dtype=float))
    if np.any(score_arr < 0.0) or np.any(score_arr > 1.0) or not np.all(
        np.isfinite(score_arr)
    ):
        raise ValidationError("scores must lie in [0, 1]")

    if isinstance(model, HistogramBinningModel):
        out = model.thetas[bin_index(model.boundaries, score_arr)]
    elif isinstance(model, IsotonicModel):
        piece = np.searchsorted(model.breakpoints, score_arr, side="right") - 1
        out = model.values[np.clip(piece, 0, model.values.size - 1)]
    elif isinstance(model, BBQModel):
        out = np.zeros_like(score_arr)
        weights = np.exp(model.log_weights)
        for w, scheme in zip(weights, model.schemes):
            post_mean = scheme.alphas / (scheme.alphas + scheme.betas)
            out = out + w * post_mean[bin_index(scheme.boundaries, score_arr)]
    elif isinstance(model, PlattModel):
        if logit is not None:
            z = np.atleast_1d(np.asarray(logit, dtype=float))
            if z.shape != score_arr.shape:
                raise ValidationError("logit shape must match score shape")
            if not np.all(np.isfinite(z)):
                raise ValidationError("logits must be finite")
        else:
            z = _logit(score_arr)
        out = _sigmoid(model.a * z + model.b)
    else:
        raise TypeError(f"not a fitted binary calibration model: {model!r}")

    if np.isscalar(score) or np.ndim(score) == 0:
        return float(out[0])
    return out
