"""Training-data preparation: undersampling, log transform, min-max scaling, splits."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import METRICS, Dataset, select_features
from .errors import (
    EmptyError,
    LogDomainError,
    MissingParamsError,
    OneClassError,
    SpecError,
    TooSmallError,
    UnknownFeatureError,
)

DEFAULT_LOG_COLUMNS = ("ns", "nf", "ndev", "nuc", "exp", "rexp", "sexp")
DEFAULT_DROP_COLUMNS = ("nd", "rexp", "la", "ld")
LOG_MODES = ("strict", "log1p")


@dataclass(frozen=True)
class TransformPlan:
    log_columns: tuple[str, ...] = DEFAULT_LOG_COLUMNS
    log_mode: str = "strict"
    drop_columns: tuple[str, ...] = DEFAULT_DROP_COLUMNS
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "log_columns", tuple(self.log_columns))
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if self.log_mode not in LOG_MODES:
            raise SpecError(f"log_mode must be one of {LOG_MODES}, got {self.log_mode!r}")
        for c in (*self.log_columns, *self.drop_columns):
            if c not in METRICS:
                raise SpecError(f"unknown metric {c!r} in transform plan")

    def restricted_to(self, columns: Sequence[str]) -> "TransformPlan":
        return replace(self, log_columns=tuple(c for c in self.log_columns if c in columns))

    def training_features(self, available: Sequence[str] = METRICS) -> tuple[str, ...]:
        return tuple(c for c in available if c not in self.drop_columns)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["log_columns"] = list(self.log_columns)
        d["drop_columns"] = list(self.drop_columns)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformPlan":
        known = {"log_columns", "log_mode", "drop_columns", "normalize"}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown transform plan keys: {sorted(unknown)}")
        return cls(**d)


def parse_plan_text(text: str) -> TransformPlan:
    """Read a plan from ``key = value`` lines; lists are comma separated."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in ("log_columns", "drop_columns"):
            out[key] = tuple(v.strip().lower() for v in value.split(",") if v.strip())
        elif key == "normalize":
            if value.lower() not in ("true", "false", "1", "0"):
                raise SpecError(f"line {lineno}: normalize must be true/false")
            out[key] = value.lower() in ("true", "1")
        else:
            out[key] = value
    return TransformPlan.from_dict(out)


def format_plan_text(plan: TransformPlan) -> str:
    return (
        f"log_columns = {','.join(plan.log_columns)}\n"
        f"log_mode = {plan.log_mode}\n"
        f"drop_columns = {','.join(plan.drop_columns)}\n"
        f"normalize = {str(plan.normalize).lower()}\n"
    )


@dataclass(frozen=True)
class NormalizationParams:
    columns: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(d["columns"]), tuple(map(float, d["mins"])), tuple(map(float, d["maxs"])))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise SpecError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _class_indices(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    pos = np.flatnonzero(d.labels == 1)
    neg = np.flatnonzero(d.labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        who = f" in {d.project!r}" if d.project else ""
        raise OneClassError(f"need both classes{who}: {len(pos)} defective, {len(neg)} clean")
    return pos, neg


def undersample(d: Dataset, seed: int) -> Dataset:
    """Randomly drop majority-class rows until both classes have equal counts.

    All minority rows survive. The result is returned in shuffled order.
    """
    pos, neg = _class_indices(d)
    rng = np.random.default_rng(seed)
    if len(pos) < len(neg):
        neg = rng.choice(neg, size=len(pos), replace=False)
    elif len(neg) < len(pos):
        pos = rng.choice(pos, size=len(neg), replace=False)
    keep = np.concatenate([pos, neg])
    return d.take(rng.permutation(keep))


def log_transform(d: Dataset, plan: TransformPlan) -> Dataset:
    for c in plan.log_columns:
        if not d.has(c):
            raise UnknownFeatureError(c)
    if not plan.log_columns:
        return d
    idx = [d.columns.index(c) for c in plan.log_columns]
    values = np.array(d.values)
    block = values[:, idx]
    if plan.log_mode == "strict":
        bad_r, bad_c = np.nonzero(~(block > 0))
        if len(bad_r):
            raise LogDomainError([(int(r), plan.log_columns[c]) for r, c in zip(bad_r, bad_c)])
        values[:, idx] = np.log(block)
    else:
        if np.any(block < 0):
            r, c = np.argwhere(block < 0)[0]
            raise LogDomainError([(int(r), plan.log_columns[c])])
        values[:, idx] = np.log1p(block)
    return d.with_values(values)


def fit_minmax(d: Dataset, columns: Sequence[str] | None = None) -> NormalizationParams:
    if d.n_rows == 0:
        raise EmptyError("cannot fit normalization on an empty dataset")
    columns = tuple(d.columns if columns is None else columns)
    idx = []
    for c in columns:
        if not d.has(c):
            raise UnknownFeatureError(c)
        idx.append(d.columns.index(c))
    block = d.values[:, idx]
    return NormalizationParams(
        columns,
        tuple(float(v) for v in block.min(axis=0)),
        tuple(float(v) for v in block.max(axis=0)),
    )


def apply_minmax(
    d: Dataset, p: NormalizationParams, columns: Sequence[str] | None = None
) -> Dataset:
    """Map each column to ``(x - min) / (max - min)`` using fitted bounds.

    Constant columns map to 0. Values outside the fitted range are left
    outside [0, 1].
    """
    columns = tuple(d.columns if columns is None else columns)
    values = np.array(d.values)
    for c in columns:
        if c not in p.columns:
            raise MissingParamsError(f"no fitted bounds for column {c!r}")
        j = p.columns.index(c)
        lo, hi = p.mins[j], p.maxs[j]
        i = d.columns.index(c)
        if hi > lo:
            values[:, i] = (values[:, i] - lo) / (hi - lo)
        else:
            values[:, i] = 0.0
    return d.with_values(values)


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    if d.n_rows < 2:
        raise TooSmallError(f"need at least 2 rows to split, got {d.n_rows}")
    perm = np.random.default_rng(spec.seed).permutation(d.n_rows)
    n_train = int(np.floor(d.n_rows * spec.train_fraction))
    return d.take(perm[:n_train]), d.take(perm[n_train:])


def combine(datasets: Sequence[Dataset], seed: int) -> Dataset:
    """Pool several projects so each contributes the same balanced share.

    Every source is undersampled to class balance, then cut down (per
    class, uniformly) to the smallest balanced source. Rows keep their
    project tag in ``sources``.
    """
    if len(datasets) < 2:
        raise SpecError("combine needs at least two datasets")
    columns = datasets[0].columns
    for d in datasets[1:]:
        if d.columns != columns:
            raise SpecError(f"column mismatch between {datasets[0].project!r} and {d.project!r}")
    balanced = [undersample(d, seed + i) for i, d in enumerate(datasets)]
    per_class = min(int(np.sum(b.labels == 1)) for b in balanced)
    rng = np.random.default_rng(seed)
    parts = []
    for b in balanced:
        pos, neg = _class_indices(b)
        keep = np.sort(np.concatenate([
            rng.choice(pos, size=per_class, replace=False),
            rng.choice(neg, size=per_class, replace=False),
        ]))
        part = b.take(keep)
        parts.append((part, part.row_sources()))
    shared_meta = set.intersection(*(set(p.meta) for p, _ in parts))
    merged = Dataset(
        columns=columns,
        values=np.vstack([p.values for p, _ in parts]),
        labels=np.concatenate([p.labels for p, _ in parts]),
        project="+".join(d.project for d in datasets),
        meta={k: np.concatenate([p.meta[k] for p, _ in parts]) for k in sorted(shared_meta)},
        sources=np.concatenate([s for _, s in parts]),
    )
    return merged.take(rng.permutation(merged.n_rows))


@dataclass(frozen=True)
class Prepared:
    """Transformed train/held-out pair plus everything needed to redo it."""

    train: Dataset
    held_out: Dataset | None
    plan: TransformPlan
    params: NormalizationParams | None
    features: tuple[str, ...]


def prepare(
    train: Dataset,
    held_out: Dataset | None,
    features: Sequence[str],
    plan: TransformPlan,
    seed: int,
    resample: bool = True,
) -> Prepared:
    """Undersample the training side only, then log and scale both sides.

    Scaling bounds come from the (undersampled, logged) training side.
    """
    if resample:
        train = undersample(train, seed)
    train = select_features(train, features)
    features = train.columns
    local = plan.restricted_to(features)
    train = log_transform(train, local)
    if held_out is not None:
        held_out = log_transform(select_features(held_out, features), local)
    params = None
    if plan.normalize:
        params = fit_minmax(train)
        train = apply_minmax(train, params)
        if held_out is not None:
            held_out = apply_minmax(held_out, params)
    return Prepared(train, held_out, local, params, tuple(features))


def transform_with(d: Dataset, features: Sequence[str], plan: TransformPlan,
                   params: NormalizationParams | None) -> Dataset:
    """Apply an already-fitted preparation to new rows (no resampling)."""
    d = log_transform(select_features(d, features), plan.restricted_to(features))
    if params is not None:
        d = apply_minmax(d, params)
    return d
