"""Deterministic numerical minimizers shared by the calibration fitters.

Nothing here knows about calibration: fitters hand in closures and get
argmins back. All routines are pure functions of their inputs, with no
randomness, so identical calls produce bit-identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import NumericalError, ValidationError

# Armijo sufficient-decrease constant. Loose on purpose: on smooth
# objectives the adaptive trial step should rarely be rejected.
ARMIJO_C = 1e-4
_MIN_STEP = 1e-20
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

FloatFn = Callable[[float], float]
ValueGradFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class ScalarMinResult:
    """Outcome of a bracketed one-dimensional minimization."""

    argmin: float
    value: float
    iterations: int
    at_boundary: bool


@dataclass(frozen=True)
class GradMinResult:
    """Outcome of gradient descent. ``converged`` means the gradient
    max-norm fell below the requested tolerance before the iteration cap."""

    params: np.ndarray
    value: float
    grad_max_norm: float
    iterations: int
    converged: bool


def _checked(f: FloatFn, x: float) -> float:
    v = float(f(x))
    if not np.isfinite(v):
        raise NumericalError(f"objective returned non-finite value {v!r} at x={x!r}")
    return v


def minimize_scalar(f: FloatFn, lo: float, hi: float, tol: float = 1e-6) -> ScalarMinResult:
    """Golden-section search for the minimum of a unimodal f on [lo, hi].

    For unimodal objectives the returned argmin is within ``tol`` of the
    true minimizer. ``at_boundary`` flags argmins within ``tol`` of either
    end of the interval, which usually means the true optimum lies outside.
    """
    lo = float(lo)
    hi = float(hi)
    if not lo < hi:
        raise ValidationError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0.0:
        raise ValidationError(f"tolerance must be positive, got {tol}")

    a, b = lo, hi
    c = b - (b - a) * _INV_PHI
    d = a + (b - a) * _INV_PHI
    fc = _checked(f, c)
    fd = _checked(f, d)
    iterations = 0
    # The second guard stops the loop once the interval is too narrow for
    # the interior points to remain distinct in floating point.
    while b - a > tol and c < d:
        iterations += 1
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_PHI
            fc = _checked(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_PHI
            fd = _checked(f, d)
    x = 0.5 * (a + b)
    return ScalarMinResult(
        argmin=x,
        value=_checked(f, x),
        iterations=iterations,
        at_boundary=(x - lo) <= tol or (hi - x) <= tol,
    )


def _eval_fg(f_and_grad: ValueGradFn, x: np.ndarray, where: str) -> Tuple[float, np.ndarray]:
    value, grad = f_and_grad(x)
    value = float(value)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != x.shape:
        raise ValidationError(
            f"gradient shape {grad.shape} does not match parameter shape {x.shape}"
        )
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError(f"objective or gradient non-finite at {where}")
    return value, grad


def minimize_grad(
    f_and_grad: ValueGradFn,
    init: np.ndarray,
    grad_tol: float,
    max_iters: int = 10_000,
) -> GradMinResult:
    """Steepest descent with an Armijo backtracking line search.

    The first trial step is 1.0; each later iteration opens with a
    Barzilai-Borwein step estimated from the previous accepted move
    (falling back to the last accepted step length) and halves until the
    Armijo condition holds. The objective is nonincreasing across accepted
    steps, and the trajectory is a deterministic function of ``init``.
    """
    if grad_tol <= 0.0:
        raise ValidationError(f"grad_tol must be positive, got {grad_tol}")
    x = np.array(init, dtype=float).ravel()
    fx, g = _eval_fg(f_and_grad, x, "the initial point")

    step = 1.0
    prev_x: np.ndarray | None = None
    prev_g: np.ndarray | None = None
    iterations = 0
    gmax = float(np.max(np.abs(g)))
    while gmax >= grad_tol and iterations < max_iters:
        if prev_x is not None:
            s = x - prev_x
            y = g - prev_g
            sy = float(s @ y)
            if sy > 0.0:
                step = min(max(float(s @ s) / sy, 1e-12), 1e12)
        gg = float(g @ g)
        trial = step
        accepted = None
        while trial >= _MIN_STEP:
            cand = x - trial * g
            val, grad = f_and_grad(cand)
            val = float(val)
            grad = np.asarray(grad, dtype=float)
            # Strict decrease is required on top of Armijo so that a step
            # too small to change the objective cannot be "accepted" once
            # the required decrease underflows.
            if (
                np.isfinite(val)
                and np.all(np.isfinite(grad))
                and val < fx
                and val <= fx - ARMIJO_C * trial * gg
            ):
                accepted = (cand, val, grad)
                break
            trial *= 0.5
        if accepted is None:
            raise NumericalError(
                "line search found no acceptable step; the gradient may be "
                "inconsistent with the objective"
            )
        prev_x, prev_g = x, g
        x, fx, g = accepted
        step = trial
        iterations += 1
        gmax = float(np.max(np.abs(g)))
    return GradMinResult(
        params=x,
        value=fx,
        grad_max_norm=gmax,
        iterations=iterations,
        converged=gmax < grad_tol,
    )


def check_gradient(f_and_grad: ValueGradFn, point: np.ndarray, h: float = 1e-5) -> float:
    """Compare an analytic gradient against central finite differences.

    Returns the max over coordinates of
    ``|numeric_i - analytic_i| / max(|analytic_i|, 1e-8)``.
    """
    if h <= 0.0:
        raise ValidationError(f"step h must be positive, got {h}")
    x = np.array(point, dtype=float).ravel()
    _, g = _eval_fg(f_and_grad, x, "the evaluation point")
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = float(f_and_grad(xp)[0])
        fm = float(f_and_grad(xm)[0])
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"objective non-finite while probing coordinate {i}")
        numeric = (fp - fm) / (2.0 * h)
        worst = max(worst, abs(numeric - g[i]) / max(abs(g[i]), 1e-8))
    return worst
