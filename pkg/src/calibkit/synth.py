"""Synthetic datasets with known ground-truth calibration structure.

These generators are the oracle layer for the test suite: data built here
has a known optimal temperature (the ``sharpening`` factor) or a known
score-outcome relationship, so fitted models can be checked against the
construction instead of against opaque expected numbers.

Random stream
-------------
All randomness comes from the splitmix64 counter generator, fixed here so
datasets are reproducible from the seed alone:

    out(i) = mix64(seed + i * 0x9E3779B97F4A7C15)        for i = 1, 2, ...

    mix64(v): v ^= v >> 30;  v *= 0xBF58476D1CE4E5B9
              v ^= v >> 27;  v *= 0x94D049BB133111EB
              return v ^ (v >> 31)

with all arithmetic modulo 2**64. A uniform double in [0, 1) is the top 53
bits over 2**53; standard normals come from Box-Muller pairs
``sqrt(-2 ln u1) * cos(2 pi u2)`` where u1 uses the (0, 1] variant
``(bits53 + 1) / 2**53`` so the log is always finite. Each generator
documents exactly which positions of the stream each sample consumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BinaryCalibrationSet, LogitDataset, softmax
from .errors import ValidationError

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


class SplitMix64:
    """Counter-based splitmix64 stream over uint64 outputs.

    Stateless apart from the position counter, so any block of outputs can
    be produced in one vectorized shot.
    """

    def __init__(self, seed: int) -> None:
        self._seed = int(seed) & _MASK
        self._position = 0

    def next_u64(self, count: int) -> np.ndarray:
        start = self._position + 1
        self._position += count
        idx = np.arange(start, start + count, dtype=np.uint64)
        z = np.uint64(self._seed) + idx * np.uint64(_GAMMA)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        return z


def _uniform_halfopen(bits: np.ndarray) -> np.ndarray:
    """uint64 words -> doubles in [0, 1)."""
    return (bits >> np.uint64(11)).astype(float) * _INV_2_53


def _uniform_positive(bits: np.ndarray) -> np.ndarray:
    """uint64 words -> doubles in (0, 1]; safe under log()."""
    return ((bits >> np.uint64(11)) + np.uint64(1)).astype(float) * _INV_2_53


def _box_muller(u1_bits: np.ndarray, u2_bits: np.ndarray) -> np.ndarray:
    u1 = _uniform_positive(u1_bits)
    u2 = _uniform_halfopen(u2_bits)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; ``sharpening`` is the ground-truth inverse
    temperature of the emitted miscalibration."""

    n: int
    k: int
    sharpening: float
    logit_scale: float
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"need n >= 1 samples, got {self.n}")
        if self.k < 2:
            raise ValidationError(f"need K >= 2 classes, got {self.k}")
        if not (math.isfinite(self.sharpening) and self.sharpening > 0.0):
            raise ValidationError(f"sharpening must be positive, got {self.sharpening!r}")
        if not (math.isfinite(self.logit_scale) and self.logit_scale > 0.0):
            raise ValidationError(f"logit_scale must be positive, got {self.logit_scale!r}")


def gen_sharpened(spec: SynthSpec) -> LogitDataset:
    """Dataset whose temperature-scaling population optimum equals
    ``spec.sharpening``.

    Per sample: draw base logits z ~ Normal(0, logit_scale**2)^K, draw the
    label from Categorical(softmax(z)), then emit ``sharpening * z``. The
    label is therefore distributed exactly as softmax of the emitted
    logits divided by ``sharpening``; with sharpening = 1 the dataset is
    calibrated by construction.

    Stream layout: sample i consumes the 2K+1 consecutive words starting
    at position (2K+1)*i + 1; word pairs (2j, 2j+1) within the block form
    normal coordinate j via Box-Muller, and the final word drives the
    label draw by inverse CDF.
    """
    rng = SplitMix64(spec.seed)
    n, k = spec.n, spec.k
    block = rng.next_u64(n * (2 * k + 1)).reshape(n, 2 * k + 1)
    base = spec.logit_scale * _box_muller(block[:, 0 : 2 * k : 2], block[:, 1 : 2 * k : 2])
    probs = softmax(base)
    u_label = _uniform_halfopen(block[:, 2 * k])
    cdf = np.cumsum(probs, axis=1)
    labels = np.minimum((cdf < u_label[:, None]).sum(axis=1), k - 1)
    return LogitDataset(logits=spec.sharpening * base, labels=labels)


def gen_binary(n: int, noise: float, seed: int) -> BinaryCalibrationSet:
    """Scores uniform on [0, 1); outcome 1 with probability
    clamp(score + Uniform(-noise, noise), 0, 1).

    With noise = 0 the scores are perfectly calibrated probabilities.
    Stream layout: sample i consumes words 3i+1 (score), 3i+2 (noise
    shift), 3i+3 (outcome draw).
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 samples, got {n}")
    if not (0.0 <= noise <= 0.5):
        raise ValidationError(f"noise must lie in [0, 0.5], got {noise!r}")
    rng = SplitMix64(seed)
    block = rng.next_u64(3 * n).reshape(n, 3)
    scores = _uniform_halfopen(block[:, 0])
    shift = (2.0 * _uniform_halfopen(block[:, 1]) - 1.0) * noise
    prob = np.clip(scores + shift, 0.0, 1.0)
    outcomes = (_uniform_halfopen(block[:, 2]) < prob).astype(np.int64)
    return BinaryCalibrationSet(scores=scores, outcomes=outcomes)
