"""Loading, validating, summarizing and auditing change-level datasets.

A dataset holds the fourteen change metrics of the Kamei schema (or a
subset of them after feature selection), a binary defect label per row,
and any extra columns of the source file kept as opaque string metadata.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LabelError, OutputError, ParseError, SchemaError, UnknownFeatureError

METRICS: tuple[str, ...] = (
    "ns", "nd", "nf", "entropy", "la", "ld", "lt", "fix",
    "ndev", "age", "nuc", "exp", "rexp", "sexp",
)
LABEL = "label"

# Metrics that can never be negative in a well-formed file.
NON_NEGATIVE = ("ns", "nd", "nf", "ndev", "entropy", "age")
BINARY = ("fix",)

DEFAULT_ALIASES: dict[str, str] = {
    "nm": "nd",
    "pd": "age",
    "npt": "nuc",
    "entrophy": "entropy",
    "bug": "label",
}

_TRUE = {"1", "true"}
_FALSE = {"0", "false"}


@dataclass(frozen=True)
class ColumnSchema:
    """Canonical column names plus the alias map applied on ingestion."""

    metrics: tuple[str, ...] = METRICS
    label: str = LABEL
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_ALIASES))

    def __post_init__(self):
        canonical = set(self.metrics) | {self.label}
        targets = list(self.aliases.values())
        if len(set(targets)) != len(targets):
            raise SchemaError("alias map must be injective")
        for alias, target in self.aliases.items():
            if target not in canonical:
                raise SchemaError(f"alias {alias!r} maps to unknown column {target!r}")
            if alias in canonical:
                raise SchemaError(f"alias {alias!r} shadows a canonical column")

    @property
    def required(self) -> tuple[str, ...]:
        return (*self.metrics, self.label)

    def with_aliases(self, extra: Mapping[str, str]) -> "ColumnSchema":
        """New schema where each given alias replaces any old alias of its target."""
        extra = {k.strip().lower(): v.strip().lower() for k, v in extra.items()}
        merged = {k: v for k, v in self.aliases.items() if v not in extra.values()}
        merged.update(extra)
        return ColumnSchema(self.metrics, self.label, merged)

    def canonical(self, name: str) -> str:
        key = name.strip().lower()
        return self.aliases.get(key, key)

    def display(self, column: str) -> str:
        """Name a canonical column together with its aliases, e.g. ``bug/label``."""
        alts = sorted(a for a, t in self.aliases.items() if t == column)
        return "/".join([*alts, column])


@dataclass(frozen=True)
class ChangeRecord:
    ns: float
    nd: float
    nf: float
    entropy: float
    la: float
    ld: float
    lt: float
    fix: int
    ndev: float
    age: float
    nuc: float
    exp: float
    rexp: float
    sexp: float
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of metric columns, labels and opaque metadata.

    ``values`` is an ``(n_rows, len(columns))`` float array in the order of
    ``columns``. ``meta`` maps extra column names to per-row string arrays;
    ``sources`` optionally tags each row with the project it came from.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray
    project: str = ""
    meta: Mapping[str, np.ndarray] = field(default_factory=dict)
    sources: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int8, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(labels), len(self.columns))
        if values.shape != (len(labels), len(self.columns)):
            raise SchemaError(
                f"values shape {values.shape} does not match "
                f"{len(labels)} rows x {len(self.columns)} columns"
            )
        values.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "columns", tuple(self.columns))
        meta = {}
        for name, col in self.meta.items():
            arr = np.array(col, dtype=object, copy=True)
            arr.flags.writeable = False
            meta[name] = arr
        object.__setattr__(self, "meta", meta)
        if self.sources is not None:
            src = np.array(self.sources, dtype=object, copy=True)
            src.flags.writeable = False
            object.__setattr__(self, "sources", src)
        object.__setattr__(self, "_ranges", None)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise UnknownFeatureError(name) from None

    def has(self, name: str) -> bool:
        return name in self.columns

    def column_ranges(self) -> dict[str, tuple[float, float]]:
        """Per-column (min, max), computed once and cached."""
        if self._ranges is None:
            if self.n_rows == 0:
                ranges = {}
            else:
                lo, hi = self.values.min(axis=0), self.values.max(axis=0)
                ranges = {c: (float(lo[i]), float(hi[i])) for i, c in enumerate(self.columns)}
            object.__setattr__(self, "_ranges", ranges)
        return dict(self._ranges)

    def take(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            columns=self.columns,
            values=self.values[idx],
            labels=self.labels[idx],
            project=self.project,
            meta={k: v[idx] for k, v in self.meta.items()},
            sources=None if self.sources is None else self.sources[idx],
        )

    def with_values(self, values: np.ndarray, columns: Sequence[str] | None = None) -> "Dataset":
        return Dataset(
            columns=self.columns if columns is None else tuple(columns),
            values=values,
            labels=self.labels,
            project=self.project,
            meta=self.meta,
            sources=self.sources,
        )

    def row_sources(self) -> np.ndarray:
        if self.sources is not None:
            return self.sources
        return np.full(self.n_rows, self.project, dtype=object)

    @property
    def records(self) -> list[ChangeRecord]:
        missing = [m for m in METRICS if m not in self.columns]
        if missing:
            raise SchemaError(f"records need all metrics; missing {missing}")
        order = [self.columns.index(m) for m in METRICS]
        out = []
        for row, lab in zip(self.values[:, order], self.labels):
            kw = dict(zip(METRICS, (float(v) for v in row)))
            kw["fix"] = int(kw["fix"])
            out.append(ChangeRecord(**kw, label=int(lab)))
        return out

    @classmethod
    def from_records(cls, records: Iterable[ChangeRecord], project: str = "") -> "Dataset":
        records = list(records)
        values = np.array([[getattr(r, m) for m in METRICS] for r in records], dtype=np.float64)
        labels = np.array([r.label for r in records], dtype=np.int8)
        return cls(METRICS, values.reshape(len(records), len(METRICS)), labels, project)


@dataclass(frozen=True)
class ColumnStats:
    min: float
    max: float
    mean: float


@dataclass(frozen=True)
class DatasetSummary:
    """Row and defect counts. ``pct_defect`` is ``None`` for an empty dataset."""

    n_changes: int
    n_defective: int
    pct_defect: float | None
    columns: dict[str, ColumnStats]

    def format(self) -> str:
        pct = "undefined" if self.pct_defect is None else f"{100 * self.pct_defect:.2f}%"
        lines = [f"changes: {self.n_changes}", f"defect-inducing: {self.n_defective} ({pct})"]
        for name, s in self.columns.items():
            lines.append(f"  {name:<8} min={s.min:.6g} max={s.max:.6g} mean={s.mean:.6g}")
        return "\n".join(lines)


@dataclass(frozen=True)
class AuditReport:
    raw_churn_rows: list[int]
    zero_value_counts: dict[str, int]
    notes: list[str]

    @property
    def has_findings(self) -> bool:
        return bool(self.raw_churn_rows) or any(self.zero_value_counts.values())

    def format(self) -> str:
        lines = [f"raw churn rows (lt=0, la/ld>0): {len(self.raw_churn_rows)}"]
        if self.raw_churn_rows:
            head = ", ".join(str(i) for i in self.raw_churn_rows[:20])
            tail = " ..." if len(self.raw_churn_rows) > 20 else ""
            lines.append(f"  rows: {head}{tail}")
        lines.append("zero values in log-transformed columns:")
        for name, count in self.zero_value_counts.items():
            lines.append(f"  {name:<8} {count}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _parse_binary(token: str) -> int | None:
    t = token.strip().lower()
    if t in _TRUE:
        return 1
    if t in _FALSE:
        return 0
    return None


def load_dataset(
    path: str | Path, schema: ColumnSchema | None = None, project: str | None = None
) -> Dataset:
    """Read a comma-separated change dataset into canonical form.

    Header names are matched case-insensitively and then passed through the
    schema's alias map, so a file using ``nm``, ``pd``, ``npt`` and ``bug``
    loads with ``nd``, ``age``, ``nuc`` and ``label``. Columns outside the
    schema are kept as string metadata.
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_dataset(text, schema, project if project is not None else path.stem)


def parse_dataset(text: str, schema: ColumnSchema | None = None, project: str = "") -> Dataset:
    schema = schema or ColumnSchema()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise SchemaError("missing header row")
    canonical = [schema.canonical(h) for h in header]
    seen: dict[str, int] = {}
    for i, name in enumerate(canonical):
        if name in seen and name in schema.required:
            raise SchemaError(f"column {schema.display(name)!r} appears more than once")
        seen.setdefault(name, i)
    for name in schema.required:
        if name not in seen:
            raise SchemaError(f"missing required column {schema.display(name)!r}")

    metric_pos = [seen[m] for m in schema.metrics]
    label_pos = seen[schema.label]
    meta_pos = [(i, header[i].strip()) for i, n in enumerate(canonical) if n not in schema.required]

    rows: list[list[float]] = []
    labels: list[int] = []
    meta: dict[str, list[str]] = {name: [] for _, name in meta_pos}
    for rownum, row in enumerate(reader):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {rownum}: expected {len(header)} cells, found {len(row)}")
        vals = []
        for name, pos in zip(schema.metrics, metric_pos):
            cell = row[pos].strip()
            if name in BINARY:
                b = _parse_binary(cell)
                if b is None:
                    raise ParseError(f"row {rownum}, column {name!r}: {cell!r} is not binary")
                vals.append(float(b))
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"row {rownum}, column {name!r}: {cell!r} is not a number") from None
            if not math.isfinite(v):
                raise ParseError(f"row {rownum}, column {name!r}: {cell!r} is not finite")
            if v < 0 and name in NON_NEGATIVE:
                raise ParseError(f"row {rownum}, column {name!r}: negative value {cell!r}")
            vals.append(v)
        lab = _parse_binary(row[label_pos])
        if lab is None:
            raise LabelError(
                f"row {rownum}, column {schema.display(schema.label)!r}: "
                f"{row[label_pos]!r} is not 0/1/true/false"
            )
        rows.append(vals)
        labels.append(lab)
        for pos, name in meta_pos:
            meta[name].append(row[pos])

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(schema.metrics))
    return Dataset(schema.metrics, values, np.array(labels, dtype=np.int8), project, meta)


def format_number(v: float) -> str:
    """Shortest text that reads back to the same float; integers without '.0'."""
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def dataset_to_csv(d: Dataset, include_meta: bool = True) -> str:
    """Render in canonical column order: metrics, label, then metadata."""
    order = [c for c in METRICS if c in d.columns] + [c for c in d.columns if c not in METRICS]
    idx = [d.columns.index(c) for c in order]
    meta_names = list(d.meta) if include_meta else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*order, LABEL, *meta_names])
    for r in range(d.n_rows):
        w.writerow(
            [format_number(d.values[r, i]) for i in idx]
            + [str(int(d.labels[r]))]
            + [d.meta[m][r] for m in meta_names]
        )
    return buf.getvalue()


def write_dataset(d: Dataset, path: str | Path, include_meta: bool = True) -> None:
    try:
        Path(path).write_text(dataset_to_csv(d, include_meta), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def summarize(d: Dataset) -> DatasetSummary:
    n = d.n_rows
    n_def = int(np.sum(d.labels == 1))
    stats = {}
    if n:
        lo, hi, mean = d.values.min(axis=0), d.values.max(axis=0), d.values.mean(axis=0)
        stats = {
            c: ColumnStats(float(lo[i]), float(hi[i]), float(mean[i]))
            for i, c in enumerate(d.columns)
        }
    return DatasetSummary(n, n_def, n_def / n if n else None, stats)


def select_features(d: Dataset, features: Sequence[str]) -> Dataset:
    """Keep exactly ``features`` (canonical names or aliases), in the given order."""
    schema = ColumnSchema()
    names = []
    for f in features:
        name = schema.canonical(f)
        if name not in d.columns:
            raise UnknownFeatureError(f)
        if name not in names:
            names.append(name)
    idx = [d.columns.index(n) for n in names]
    return d.with_values(d.values[:, idx], names)


def audit_dataset(d: Dataset, log_columns: Sequence[str] | None = None) -> AuditReport:
    """Flag rows storing unnormalized churn and count zeros in log columns.

    A raw churn row has ``lt == 0`` while ``la`` or ``ld`` is positive: the
    change added whole new files, so there was nothing to divide by.
    """
    if log_columns is None:
        from .preprocess import DEFAULT_LOG_COLUMNS

        log_columns = DEFAULT_LOG_COLUMNS
    notes = []
    raw_rows: list[int] = []
    if all(d.has(c) for c in ("la", "ld", "lt")):
        lt, la, ld = d.column("lt"), d.column("la"), d.column("ld")
        raw_rows = [int(i) for i in np.flatnonzero((lt == 0) & ((la > 0) | (ld > 0)))]
        if raw_rows:
            notes.append(
                f"{len(raw_rows)} row(s) keep raw la/ld because lt=0; "
                "effort-aware ranking uses these values as stored"
            )
    else:
        notes.append("la/ld/lt not all present; raw churn check skipped")

    zeros: dict[str, int] = {}
    for c in log_columns:
        if not d.has(c):
            notes.append(f"log column {c!r} not present")
            zeros[c] = 0
            continue
        zeros[c] = int(np.sum(d.column(c) == 0))
    hazardous = [c for c, k in zeros.items() if k]
    if hazardous:
        notes.append("ln(0) is -inf: strict log transform will reject " + ", ".join(hazardous))
    return AuditReport(raw_rows, zeros, notes)
