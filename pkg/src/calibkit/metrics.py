"""Miscalibration metrics: reliability histograms, ECE, MCE, NLL, entropy.

Conventions fixed here and relied on by the tests:

* Histogram bins are ``((m-1)/M, m/M]`` with confidence 0 assigned to the
  first bin, so every sample lands somewhere.
* Empty bins have no accuracy or mean confidence (stored as ``None``);
  they contribute 0 to ECE and are excluded from MCE.
* NLL uses natural logs and floors probabilities at 1e-12, so degenerate
  inputs give a large finite number instead of infinity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .binning import bin_index, equal_width_boundaries
from .dataset import PROB_SUM_TOL, LogitDataset, softmax
from .errors import ValidationError

NLL_FLOOR = 1e-12
DEFAULT_BINS = 15


@dataclass(frozen=True)
class BinStats:
    """One confidence bin: its interval, occupancy, and per-bin averages."""

    lower: float
    upper: float
    count: int
    accuracy: Optional[float]
    mean_confidence: Optional[float]


@dataclass(frozen=True)
class ReliabilityHistogram:
    """Per-bin accuracy/confidence table behind ECE, MCE and diagrams."""

    m_bins: int
    bins: tuple[BinStats, ...]

    @property
    def n(self) -> int:
        return sum(b.count for b in self.bins)


@dataclass(frozen=True)
class MetricsReport:
    ece: float
    mce: float
    nll: float
    error_rate: float
    mean_entropy: float
    histogram: ReliabilityHistogram


def build_histogram(confidences, correct, m_bins: int) -> ReliabilityHistogram:
    """Bin confidences into M equal-width intervals and average per bin."""
    if m_bins < 1:
        raise ValidationError(f"need at least one bin, got {m_bins}")
    confidences = np.asarray(confidences, dtype=float)
    correct = np.asarray(correct, dtype=bool)
    if confidences.ndim != 1 or correct.shape != confidences.shape:
        raise ValidationError(
            f"confidences shape {confidences.shape} and correctness shape "
            f"{correct.shape} must be equal 1-d"
        )
    if confidences.size == 0:
        raise ValidationError("empty input: nothing to bin")
    if np.any(confidences < 0.0) or np.any(confidences > 1.0) or not np.all(
        np.isfinite(confidences)
    ):
        raise ValidationError("confidences must lie in [0, 1]")

    edges = equal_width_boundaries(m_bins)
    idx = bin_index(edges, confidences)
    counts = np.bincount(idx, minlength=m_bins)
    acc_sums = np.bincount(idx, weights=correct.astype(float), minlength=m_bins)
    conf_sums = np.bincount(idx, weights=confidences, minlength=m_bins)

    bins = []
    for m in range(m_bins):
        c = int(counts[m])
        bins.append(
            BinStats(
                lower=float(edges[m]),
                upper=float(edges[m + 1]),
                count=c,
                accuracy=float(acc_sums[m] / c) if c else None,
                mean_confidence=float(conf_sums[m] / c) if c else None,
            )
        )
    return ReliabilityHistogram(m_bins=m_bins, bins=tuple(bins))


def ece(h: ReliabilityHistogram, n: int) -> float:
    """Count-weighted mean absolute accuracy/confidence gap."""
    if n != h.n:
        raise ValidationError(f"histogram holds {h.n} samples, caller claims {n}")
    total = 0.0
    for b in h.bins:
        if b.count:
            total += (b.count / n) * abs(b.accuracy - b.mean_confidence)
    return total


def mce(h: ReliabilityHistogram) -> float:
    """Largest accuracy/confidence gap over the nonempty bins."""
    gaps = [abs(b.accuracy - b.mean_confidence) for b in h.bins if b.count]
    if not gaps:
        raise ValidationError("all bins are empty")
    return max(gaps)


def _check_prob_matrix(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise ValidationError(f"expected an n x K probability matrix, got shape {probs.shape}")
    if np.any(probs < 0.0) or np.any(probs > 1.0) or not np.all(np.isfinite(probs)):
        raise ValidationError("probabilities must lie in [0, 1]")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > PROB_SUM_TOL):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise ValidationError(f"row {i + 1} sums to {sums[i]!r}, not 1")
    return probs


def nll(probs, labels) -> float:
    """Total negative log likelihood, in nats, of the true labels."""
    probs = _check_prob_matrix(probs)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = probs.shape
    if labels.shape != (n,):
        raise ValidationError(f"expected {n} labels, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= k):
        i = int(np.argmax((labels < 0) | (labels >= k)))
        raise ValidationError(f"label {labels[i]} at row {i + 1} outside [0, {k})")
    p_true = probs[np.arange(n), labels]
    return float(-np.sum(np.log(np.maximum(p_true, NLL_FLOOR))))


def mean_entropy(probs) -> float:
    """Average Shannon entropy (nats) of the rows, with 0*log(0) = 0."""
    probs = _check_prob_matrix(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return float(-np.sum(terms) / probs.shape[0])


def evaluate_probs(probs, labels, m_bins: int = DEFAULT_BINS) -> MetricsReport:
    """Full metrics report from explicit predictive distributions."""
    probs = _check_prob_matrix(probs)
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.shape[0]
    predicted = np.argmax(probs, axis=1)
    confidences = probs[np.arange(n), predicted]
    correct = predicted == labels
    h = build_histogram(confidences, correct, m_bins)
    return MetricsReport(
        ece=ece(h, n),
        mce=mce(h),
        nll=nll(probs, labels),
        error_rate=float(np.mean(~correct)),
        mean_entropy=mean_entropy(probs),
        histogram=h,
    )


def evaluate(d: LogitDataset, m_bins: int = DEFAULT_BINS) -> MetricsReport:
    """Metrics report for a raw dataset: softmax, then score everything."""
    return evaluate_probs(softmax(d.logits), d.labels, m_bins)


def histogram_to_csv(h: ReliabilityHistogram) -> str:
    """Reliability table as CSV; empty bins leave their averages blank."""
    lines = ["bin_lower,bin_upper,count,accuracy,mean_confidence"]
    for b in h.bins:
        acc = "" if b.accuracy is None else repr(b.accuracy)
        conf = "" if b.mean_confidence is None else repr(b.mean_confidence)
        lines.append(f"{b.lower!r},{b.upper!r},{b.count},{acc},{conf}")
    return "\n".join(lines) + "\n"


def report_to_json(report: MetricsReport) -> dict:
    """JSON-ready view of a report (scalars plus the bin count)."""
    return {
        "ece": report.ece,
        "mce": report.mce,
        "nll": report.nll,
        "error_rate": report.error_rate,
        "mean_entropy": report.mean_entropy,
        "m_bins": report.histogram.m_bins,
    }


__all__ = [
    "BinStats",
    "ReliabilityHistogram",
    "MetricsReport",
    "build_histogram",
    "ece",
    "mce",
    "nll",
    "mean_entropy",
    "evaluate",
    "evaluate_probs",
    "histogram_to_csv",
    "report_to_json",
    "DEFAULT_BINS",
    "NLL_FLOOR",
]
