"""Interval-binning helpers used by both the metrics and the binning
calibrators.

Bins over [0, 1] are half-open on the left, ``(a_m, a_{m+1}]``, except that
a value of exactly 0 lands in the first bin so every sample is counted.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError


def equal_width_boundaries(m_bins: int) -> np.ndarray:
    """M+1 boundaries splitting [0, 1] into M equal-length bins."""
    if m_bins < 1:
        raise ValidationError(f"need at least one bin, got {m_bins}")
    return np.arange(m_bins + 1, dtype=float) / m_bins


def equal_frequency_boundaries(scores: np.ndarray, m_bins: int) -> np.ndarray:
    """M+1 boundaries placing interior cuts at score quantiles.

    Endpoints are pinned to 0 and 1. Ties in the scores can collapse
    adjacent boundaries, leaving some bins empty.
    """
    if m_bins < 1:
        raise ValidationError(f"need at least one bin, got {m_bins}")
    scores = np.asarray(scores, dtype=float)
    interior = np.quantile(scores, np.arange(1, m_bins) / m_bins)
    bounds = np.concatenate(([0.0], interior, [1.0]))
    # Guard against quantile round-off producing a locally decreasing pair.
    return np.maximum.accumulate(bounds)


def bin_index(boundaries: np.ndarray, x: np.ndarray) -> np.ndarray:
    """0-based bin index of each x under the ``(a_m, a_{m+1}]`` convention."""
    idx = np.searchsorted(boundaries, x, side="left") - 1
    return np.clip(idx, 0, len(boundaries) - 2)
