"""Binary class-prevalence vectors, classifier rates, and quantification error measures.

The two classes are labelled 1 (positive) and 0 (negative) throughout the
package.  A prevalence vector stores both class frequencies redundantly so
that code reads symmetrically; construction normalizes and validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

POSITIVE = 1
NEGATIVE = 0

#: Tolerance for the pos+neg=1 construction invariant.  Prevalences are
#: simple ratios, so nothing ill-conditioned ever gets near this.
SUM_TOLERANCE = 1e-9


def check_binary_labels(labels) -> np.ndarray:
    """Validate and convert a label sequence to an int8 array of {0, 1}.

    Raises ``ValueError`` on an empty sequence or on any value outside {0, 1}.
    """
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("empty sample: no labels given")
    if y.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        bad = np.unique(y[~np.isin(y, (0, 1))])
        raise ValueError(f"labels must be 0 (negative) or 1 (positive), got {bad!r}")
    return y.astype(np.int8, copy=False)


@dataclass(frozen=True)
class PrevalenceVector:
    """A distribution over the two classes: ``pos`` + ``neg`` = 1.

    Construction validates both components against [0, 1] and the unit sum
    (within ``SUM_TOLERANCE``), then renormalizes exactly so downstream
    arithmetic can rely on ``pos + neg == 1``.
    """

    pos: float
    neg: float

    def __post_init__(self) -> None:
        pos = float(self.pos)
        neg = float(self.neg)
        if not (math.isfinite(pos) and math.isfinite(neg)):
            raise ValueError(f"non-finite prevalence components ({pos}, {neg})")
        if pos < -SUM_TOLERANCE or pos > 1.0 + SUM_TOLERANCE:
            raise ValueError(f"positive prevalence {pos} outside [0, 1]")
        if neg < -SUM_TOLERANCE or neg > 1.0 + SUM_TOLERANCE:
            raise ValueError(f"negative prevalence {neg} outside [0, 1]")
        total = pos + neg
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"prevalences must sum to 1, got {total}")
        pos = min(max(pos / total, 0.0), 1.0)
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", 1.0 - pos)

    @classmethod
    def from_positive(cls, pos: float) -> "PrevalenceVector":
        return cls(float(pos), 1.0 - float(pos))

    def __iter__(self):
        return iter((self.pos, self.neg))


@dataclass(frozen=True)
class ClassRates:
    """True/false positive rates of a classifier, both in [0, 1].

    The soft variant (mean posterior per true class) uses the same container.
    """

    tpr: float
    fpr: float

    def __post_init__(self) -> None:
        for name, value in (("tpr", self.tpr), ("fpr", self.fpr)):
            v = float(value)
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, v)


def prevalence_from_labels(labels: Sequence[int] | np.ndarray) -> PrevalenceVector:
    """Empirical prevalence of a label sample.

    Raises ``ValueError("empty sample...")`` on empty input.
    """
    y = check_binary_labels(labels)
    pos = float(np.count_nonzero(y == POSITIVE)) / y.size
    return PrevalenceVector.from_positive(pos)


def smooth(p: PrevalenceVector, eps: float) -> PrevalenceVector:
    """Additive smoothing: each component y becomes (eps + p(y)) / (2*eps + sum p).

    The output sums to 1 and has strictly positive components for eps > 0.
    """
    if not (eps > 0.0):
        raise ValueError(f"smoothing factor must be positive, got {eps}")
    denom = 2.0 * eps + p.pos + p.neg
    return PrevalenceVector((eps + p.pos) / denom, (eps + p.neg) / denom)


def absolute_error(p_true: PrevalenceVector, p_hat: PrevalenceVector) -> float:
    """Absolute error: the class-averaged absolute prevalence difference.

    Symmetric in its arguments; always in [0, 1] for valid vectors.
    """
    return 0.5 * (abs(p_hat.pos - p_true.pos) + abs(p_hat.neg - p_true.neg))


def relative_absolute_error(
    p_true: PrevalenceVector, p_hat: PrevalenceVector, test_size: int
) -> float:
    """Relative absolute error with additive smoothing.

    Both vectors are smoothed unconditionally with eps = 1/(2*test_size),
    where ``test_size`` is the size of the evaluated sample, so the result is
    finite even when a true prevalence is zero.
    """
    test_size = int(test_size)
    if test_size < 1:
        raise ValueError(f"test_size must be >= 1, got {test_size}")
    eps = 1.0 / (2.0 * test_size)

    # smoothing inlined: the vector type's exact-unit-sum normalization costs
    # relative precision in a near-zero component, which the 1/p ratio amplifies
    def components(p: PrevalenceVector) -> tuple[float, float]:
        denom = 2.0 * eps + p.pos + p.neg
        return (eps + p.pos) / denom, (eps + p.neg) / denom

    st_pos, st_neg = components(p_true)
    sh_pos, sh_neg = components(p_hat)
    return 0.5 * (abs(sh_pos - st_pos) / st_pos + abs(sh_neg - st_neg) / st_neg)


def clip_normalize(raw_pos: float) -> PrevalenceVector:
    """Clamp a raw positive-prevalence estimate into [0, 1] and complete the vector.

    Rate-adjusted estimators can produce values outside [0, 1]; this is the
    canonical repair.  Idempotent.  Raises on non-finite input.
    """
    raw_pos = float(raw_pos)
    if not math.isfinite(raw_pos):
        raise ValueError(f"non-finite estimate: {raw_pos}")
    pos = min(1.0, max(0.0, raw_pos))
    return PrevalenceVector.from_positive(pos)
