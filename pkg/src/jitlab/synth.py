"""Synthetic change datasets with controllable class signal.

Used as a ground truth where real-project results cannot be reproduced
exactly: features listed in ``signal_features`` have their log-scale mean
shifted upward for defect-inducing rows by ``separation`` standard
deviations; every other feature has the same distribution in both classes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import METRICS, Dataset
from .errors import SpecError
from .preprocess import DEFAULT_LOG_COLUMNS

# (log-scale location, log-scale spread) per positive-valued metric
_LOGNORMAL = {
    "ns": (0.3, 0.4),
    "nd": (0.8, 0.5),
    "nf": (1.0, 0.6),
    "la": (-2.0, 0.8),
    "ld": (-3.0, 0.8),
    "lt": (5.0, 0.5),
    "ndev": (1.5, 0.6),
    "age": (3.0, 0.5),
    "nuc": (1.5, 0.5),
    "exp": (4.0, 0.8),
    "rexp": (2.0, 0.7),
    "sexp": (3.0, 0.8),
}
_COUNT_COLUMNS = ("ns", "nd", "nf", "ndev", "exp", "sexp")


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 1000
    defect_fraction: float = 0.5
    signal_features: tuple[str, ...] = ()
    separation: float = 0.0
    seed: int = 0
    project: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "signal_features", tuple(self.signal_features))
        if self.n_rows < 2:
            raise SpecError(f"n_rows must be >= 2, got {self.n_rows}")
        if not 0 < self.defect_fraction < 1:
            raise SpecError(f"defect_fraction must be in (0, 1), got {self.defect_fraction}")
        if self.separation < 0:
            raise SpecError(f"separation must be >= 0, got {self.separation}")
        bad = [f for f in self.signal_features if f not in METRICS]
        if bad:
            raise SpecError(f"unknown signal features {bad}")
        n_def = self.n_defective
        if n_def == 0 or n_def == self.n_rows:
            raise SpecError("spec yields a single class")

    @property
    def n_defective(self) -> int:
        return int(round(self.n_rows * self.defect_fraction))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signal_features"] = list(self.signal_features)
        return d


def generate(spec: SynthSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    labels = np.zeros(n, dtype=np.int8)
    labels[: spec.n_defective] = 1
    labels = labels[rng.permutation(n)]
    cols: dict[str, np.ndarray] = {}

    def shift(name: str) -> np.ndarray:
        if name in spec.signal_features:
            return spec.separation * labels
        return np.zeros(n)

    for name in METRICS:
        if name in ("entropy", "fix"):
            continue
        loc, spread = _LOGNORMAL[name]
        z = rng.standard_normal(n) + shift(name)
        x = np.exp(loc + spread * z)
        if name in _COUNT_COLUMNS:
            x = np.floor(x)
        if name in DEFAULT_LOG_COLUMNS:
            x = 1.0 + x
        cols[name] = x

    # entropy is bounded by log2 of the file count
    share = 1.0 / (1.0 + np.exp(-(rng.standard_normal(n) + shift("entropy"))))
    cols["entropy"] = share * np.log2(cols["nf"])
    p_fix = 1.0 / (1.0 + np.exp(-(-0.8 + shift("fix"))))
    cols["fix"] = (rng.random(n) < p_fix).astype(np.float64)

    values = np.column_stack([cols[m] for m in METRICS])
    return Dataset(METRICS, values, labels, spec.project)
