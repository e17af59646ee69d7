"""Logit/label ingestion and the softmax/prediction primitives.

File format: headerless CSV. The logits file has one sample per row with K
comma-separated finite decimals; the labels file has one 0-indexed integer
per row. UTF-8, LF or CRLF. Blank lines are skipped. Row and column numbers
in error messages are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DataIOError, ValidationError

#: Absolute tolerance for "these probabilities sum to one".
PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LogitDataset:
    """An n x K matrix of finite logits plus integer labels in {0..K-1}."""

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        logits = np.asarray(self.logits, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if logits.ndim != 2:
            raise ValidationError(f"logits must be 2-dimensional, got shape {logits.shape}")
        n, k = logits.shape
        if n < 1:
            raise ValidationError("need at least one sample")
        if k < 2:
            raise ValidationError(f"need at least two classes, got K={k}")
        if labels.ndim != 1 or labels.shape[0] != n:
            raise ValidationError(
                f"expected {n} labels to match the logit rows, got shape {labels.shape}"
            )
        if not np.all(np.isfinite(logits)):
            i, j = np.argwhere(~np.isfinite(logits))[0]
            raise ValidationError(f"non-finite logit at row {i + 1}, column {j + 1}")
        bad = (labels < 0) | (labels >= k)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(
                f"label {labels[i]} at row {i + 1} outside [0, {k})"
            )
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def k(self) -> int:
        return self.logits.shape[1]


@dataclass(frozen=True)
class ProbVector:
    """A point on the probability simplex: entries in [0, 1] summing to 1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValidationError(f"probability vector must be 1-dimensional, got shape {p.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("probabilities must lie in [0, 1]")
        total = float(np.sum(p))
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class Prediction:
    """Predicted class plus the probability assigned to it."""

    label: int
    confidence: float


@dataclass(frozen=True)
class BinaryCalibrationSet:
    """Scores in [0, 1] paired with 0/1 outcomes; the binary fitting input."""

    scores: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=float)
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if scores.ndim != 1 or scores.size < 1:
            raise ValidationError(f"scores must be a non-empty 1-d array, got shape {scores.shape}")
        if outcomes.shape != scores.shape:
            raise ValidationError(
                f"{outcomes.shape[0] if outcomes.ndim == 1 else outcomes.shape} outcomes "
                f"for {scores.size} scores"
            )
        if not np.all(np.isfinite(scores)) or np.any(scores < 0.0) or np.any(scores > 1.0):
            raise ValidationError("scores must be finite and lie in [0, 1]")
        if not np.all((outcomes == 0) | (outcomes == 1)):
            raise ValidationError("outcomes must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n(self) -> int:
        return self.scores.size


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, stabilized by max-subtraction.

    Safe for entries of any magnitude representable as a finite double;
    the output rows always sum to 1 up to rounding.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValidationError("softmax input must be finite")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def predict(z: np.ndarray) -> Prediction:
    """Argmax class (lowest index wins ties) and its softmax probability."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValidationError(f"expected a single logit vector, got shape {z.shape}")
    p = softmax(z)
    label = int(np.argmax(z))
    return Prediction(label=label, confidence=float(p[label]))


def to_one_vs_all(d: LogitDataset, k: int) -> BinaryCalibrationSet:
    """Binary view of class k: softmax score of k versus label-equals-k."""
    if not 0 <= k < d.k:
        raise ValidationError(f"class index {k} out of range for K={d.k}")
    p = softmax(d.logits)
    return BinaryCalibrationSet(scores=p[:, k], outcomes=(d.labels == k).astype(np.int64))


def _read_rows(path) -> list[list[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        rows.append((lineno, [cell.strip() for cell in line.split(",")]))
    return rows


def load_logit_matrix(path) -> np.ndarray:
    """Read just a logits CSV; finiteness and shape validated, no labels."""
    raw = _read_rows(path)
    if not raw:
        raise ValidationError(f"{path} contains no data rows")
    width = len(raw[0][1])
    logits = np.empty((len(raw), width), dtype=float)
    for i, (lineno, cells) in enumerate(raw):
        if len(cells) != width:
            raise DataFormatError(
                f"{path}: row {lineno} has {len(cells)} values, expected {width}"
            )
        for j, cell in enumerate(cells):
            try:
                logits[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {lineno}, column {j + 1}: {cell!r} is not a number"
                ) from None
    if width < 2:
        raise ValidationError(f"{path}: need at least two classes per row, got {width}")
    if not np.all(np.isfinite(logits)):
        i, j = np.argwhere(~np.isfinite(logits))[0]
        raise ValidationError(f"{path}: non-finite logit at row {i + 1}, column {j + 1}")
    return logits


def load_logits(path, labels_path) -> LogitDataset:
    """Read and validate a logits/labels CSV pair, preserving row order."""
    logits = load_logit_matrix(path)

    raw_labels = _read_rows(labels_path)
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, (lineno, cells) in enumerate(raw_labels):
        if len(cells) != 1:
            raise DataFormatError(
                f"{labels_path}: row {lineno} has {len(cells)} values, expected 1"
            )
        try:
            labels[i] = int(cells[0])
        except ValueError:
            raise DataFormatError(
                f"{labels_path}: row {lineno}: {cells[0]!r} is not an integer"
            ) from None
    if len(raw_labels) != logits.shape[0]:
        raise ValidationError(
            f"{labels_path} has {len(raw_labels)} labels for {logits.shape[0]} logit rows"
        )
    return LogitDataset(logits=logits, labels=labels)


def save_logits(d: LogitDataset, path, labels_path) -> None:
    """Write a dataset as the logits/labels CSV pair ``load_logits`` reads.

    Floats are written in shortest round-trip form, so save/load is exact.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in d.logits.tolist():
                fh.write(",".join(repr(v) for v in row))
                fh.write("\n")
        with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
            for label in d.labels.tolist():
                fh.write(f"{label}\n")
    except OSError as exc:
        raise DataIOError(f"cannot write dataset: {exc}") from exc
