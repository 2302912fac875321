"""Ordinality-weighted binary cross-entropy for flare forecasting.

The binary FL/NF task (threshold >=M) hides the ordinal flare scale
FQ < A < B < C < M < X.  Each instance is therefore weighted by
``alpha / log10(beta)`` of its flare sub-class, so that the extremes of
the ordinal scale (FQ and X) incur the largest loss and the classes
next to the binary boundary (C and M on either side) the smallest.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FlareClass",
    "LossConfig",
    "LossBatch",
    "binary_label",
    "sigmoid",
    "bce",
    "beta_weight",
    "ordinal_weight",
    "bce_sf_instance",
    "bce_sf_batch",
    "grad_bce_sf",
]

# Probabilities are clamped to [EPS, 1-EPS] before any logarithm.
EPS = 1e-12


class FlareClass(enum.IntEnum):
    """GOES flare magnitude category, ordered FQ < A < B < C < M < X."""

    FQ = 0
    A = 1
    B = 2
    C = 3
    M = 4
    X = 5


# Ordinal weights per sub-class: symmetric around the FL/NF boundary.
_BETA = {
    FlareClass.FQ: 10.0,
    FlareClass.A: 10.0 ** 2,
    FlareClass.B: 10.0 ** 3,
    FlareClass.C: 10.0 ** 4,
    FlareClass.M: 10.0 ** 2,
    FlareClass.X: 10.0,
}

# log10(beta) indexed by FlareClass value; exact small integers.
_LOG10_BETA = np.array([1.0, 2.0, 3.0, 4.0, 2.0, 1.0])


def binary_label(c):
    """1 (FL) for M- and X-class, 0 (NF) otherwise."""
    return int(FlareClass(c) >= FlareClass.M)


@dataclass(frozen=True)
class LossConfig:
    """Scaling factor for the ordinal loss.

    ``alpha`` in [1, 4] is the recommended range: alpha=1 aligns the
    FQ/X loss scale with plain BCE, alpha=4 aligns the C-class scale.
    Values outside the range are accepted with a warning.
    """

    alpha: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha <= 0:
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not 1.0 <= self.alpha <= 4.0:
            warnings.warn(
                f"alpha={self.alpha} is outside the recommended range [1, 4]",
                stacklevel=2,
            )


def _check_targets(targets):
    t = np.asarray(targets)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("targets must be 0 or 1")
    return t.astype(float)


def _check_consistent(targets, classes):
    t = np.asarray(targets)
    c = np.asarray(classes)
    expected = (c >= FlareClass.M).astype(t.dtype)
    if np.any(t != expected):
        raise ValueError(
            "target disagrees with the >=M binary label of its flare class; "
            "the pair is corrupt"
        )


def sigmoid(logit):
    """Numerically stable logistic function, elementwise.

    Uses the sign-split form exp(-|z|)-based evaluation so it does not
    overflow for |z| up to (and well beyond) 700.
    """
    z = np.asarray(logit, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("logit must be finite")
    t = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    return float(out) if out.ndim == 0 else out


def bce(prob, target):
    """Single-instance binary cross-entropy term -[y ln p + (1-y) ln(1-p)].

    ``prob`` is clamped to [1e-12, 1 - 1e-12] before the logarithms.
    The batch mean is a separate reduction (see :func:`bce_sf_batch`).
    """
    y = _check_targets(target)
    p = np.clip(np.asarray(prob, dtype=float), EPS, 1.0 - EPS)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def beta_weight(c):
    """Ordinal weight beta of a flare sub-class (FQ,X -> 10 ... C -> 10^4)."""
    return _BETA[FlareClass(c)]


def ordinal_weight(c, alpha=1.0):
    """Effective per-instance multiplier alpha / log10(beta_c)."""
    return alpha / math.log10(beta_weight(c))


def _weights(classes, alpha):
    c = np.asarray(classes)
    if c.ndim > 0 and c.size == 0:
        raise ValueError("empty class vector")
    if np.any(c < FlareClass.FQ) or np.any(c > FlareClass.X):
        raise ValueError("unknown flare class code")
    return alpha / _LOG10_BETA[c]


def bce_sf_instance(logit, target, c, cfg=LossConfig()):
    """Ordinality-weighted BCE of one instance.

    Returns ``alpha * bce(sigmoid(logit), target) / log10(beta_c)``.
    Raises if ``target`` contradicts the >=M label of ``c``.
    """
    _check_consistent(target, c)
    w = _weights(c, cfg.alpha)
    out = w * bce(sigmoid(logit), target)
    return float(out) if np.ndim(out) == 0 else out


def grad_bce_sf(logit, target, c, cfg=LossConfig()):
    """Exact derivative of :func:`bce_sf_instance` w.r.t. the logit.

    Equals ``w * (sigmoid(logit) - target)`` with ``w = alpha/log10(beta_c)``.
    """
    _check_consistent(target, c)
    w = _weights(c, cfg.alpha)
    y = _check_targets(target)
    out = w * (sigmoid(logit) - y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LossBatch:
    """One batch of (logit, target, flare class) triples.

    All three vectors must have identical length N >= 1 and every target
    must equal the >=M binary label of its class.
    """

    logits: np.ndarray
    targets: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=float)
        targets = np.asarray(self.targets)
        classes = np.asarray(self.classes)
        if not logits.ndim == targets.ndim == classes.ndim == 1:
            raise ValueError("logits, targets and classes must be 1-D")
        if not len(logits) == len(targets) == len(classes) >= 1:
            raise ValueError("logits, targets and classes must share a length >= 1")
        _check_targets(targets)
        _check_consistent(targets, classes)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "classes", classes)

    def __len__(self):
        return len(self.logits)


def bce_sf_batch(batch, cfg=LossConfig()):
    """Mean ordinality-weighted BCE over a :class:`LossBatch`."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    w = _weights(batch.classes, cfg.alpha)
    terms = w * bce(sigmoid(batch.logits), batch.targets)
    return float(np.mean(terms))
