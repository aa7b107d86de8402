"""Change-metric formulas and classification scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import EmptyError, FileCountError, ProbabilityError, UndefinedMetricError

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class FileChangeProfile:
    """Share of a change's modified lines falling in each touched file."""

    proportions: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.proportions)
        if not p:
            raise ProbabilityError("profile needs at least one file")
        if any(not math.isfinite(x) or x < 0 for x in p):
            raise ProbabilityError(f"proportions must be finite and non-negative: {p}")
        if abs(math.fsum(p) - 1.0) > PROB_SUM_TOL:
            raise ProbabilityError(f"proportions sum to {math.fsum(p)!r}, not 1")
        object.__setattr__(self, "proportions", p)

    @property
    def n(self) -> int:
        return len(self.proportions)

    @classmethod
    def from_counts(cls, lines_per_file: Sequence[float]) -> "FileChangeProfile":
        total = math.fsum(lines_per_file)
        if total <= 0:
            raise ProbabilityError("no modified lines")
        return cls(tuple(c / total for c in lines_per_file))


def entropy(profile: FileChangeProfile | Sequence[float]) -> float:
    """Shannon entropy in bits, with 0*log2(0) taken as 0."""
    if not isinstance(profile, FileChangeProfile):
        profile = FileChangeProfile(tuple(profile))
    h = -math.fsum(p * math.log2(p) for p in profile.proportions if p > 0)
    # -0.0 for the one-hot case
    return h + 0.0


def average_age(intervals: Sequence[float]) -> float:
    """Mean days since each modified file was last changed."""
    if len(intervals) == 0:
        raise EmptyError("no intervals")
    if any(x < 0 for x in intervals):
        raise ValueError("intervals must be non-negative")
    return math.fsum(intervals) / len(intervals)


class NormalizedChurn(NamedTuple):
    la: float
    ld: float
    lt: float
    nuc: float
    raw: bool


def normalize_churn(la: float, ld: float, lt: float, nf: int, nuc: float) -> NormalizedChurn:
    """Relative churn as stored in the change datasets.

    Lines added/deleted are divided by lines-before-change; when that is 0
    (only new files) they are passed through unchanged and ``raw`` is set.
    LT and NUC are divided by the file count.
    """
    if nf < 1:
        raise FileCountError(f"nf must be >= 1, got {nf}")
    if min(la, ld, lt, nuc) < 0:
        raise ValueError("churn inputs must be non-negative")
    if lt > 0:
        return NormalizedChurn(la / lt, ld / lt, lt / nf, nuc / nf, False)
    return NormalizedChurn(float(la), float(ld), 0.0, nuc / nf, la > 0 or ld > 0)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_labels(cls, actual, predicted) -> "ConfusionCounts":
        tp = fp = tn = fn = 0
        for a, p in zip(actual, predicted):
            if p:
                if a:
                    tp += 1
                else:
                    fp += 1
            elif a:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall undefined without actual positives")
    return c.tp / (c.tp + c.fn)


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision undefined without predicted positives")
    return c.tp / (c.tp + c.fp)
