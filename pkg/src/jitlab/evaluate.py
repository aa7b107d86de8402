"""Cross-validated feature-combination experiments and effort-aware ranking."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ColumnSchema, Dataset, format_number, load_dataset
from .errors import JitError, OutputError, SpecError, TooSmallError, UndefinedMetricError
from .metrics import ConfusionCounts, precision, recall
from .mlp import TrainConfig, init_model, predict_labels, train
from .preprocess import SplitSpec, TransformPlan, combine, prepare, split
from .synth import SynthSpec, generate

log = logging.getLogger(__name__)

EFFORT_FLOOR = 1e-6

RECOMMENDED = ("ns", "nf", "entropy", "lt", "fix", "ndev", "age", "nuc", "exp", "sexp")

# Feature combinations evaluated per project.
FEATURE_GRID: tuple[tuple[str, ...], ...] = (
    ("lt", "age"),
    ("lt", "age", "sexp"),
    ("age", "sexp"),
    ("lt", "age", "entropy", "ns", "nf", "fix"),
    ("lt", "age", "entropy", "ns", "nf", "fix", "ndev"),
    ("lt", "age", "entropy", "ns", "nf", "fix", "ndev", "nuc"),
    ("lt", "age", "entropy"),
    ("lt", "age", "entropy", "ns"),
    ("lt", "age", "entropy", "ns", "nf"),
    ("lt", "age", "entropy", "ns", "nf", "fix", "ndev", "nuc", "exp"),
    ("lt", "age", "entropy", "sexp"),
    ("age", "exp", "sexp"),
    RECOMMENDED,
    ("lt", "age", "exp"),
    ("age", "exp"),
)

# Subset run on the pooled Bugzilla + Mozilla data.
COMBINED_GRID: tuple[tuple[str, ...], ...] = (
    ("lt", "age"),
    ("lt", "age", "sexp"),
    ("age", "sexp"),
    ("lt", "age", "entropy", "ns", "nf"),
    ("lt", "age", "entropy", "sexp"),
    ("lt", "age", "entropy", "ns", "nf", "fix", "ndev", "nuc", "exp"),
    RECOMMENDED,
    ("age", "exp", "sexp"),
)

PRECISION_GRID: tuple[tuple[str, ...], ...] = (
    ("lt", "age"),
    ("lt", "age", "sexp"),
    ("age", "sexp"),
    ("lt", "age", "exp"),
    ("age", "exp"),
)


def canonical_features(features: Sequence[str], schema: ColumnSchema | None = None) -> tuple[str, ...]:
    schema = schema or ColumnSchema()
    out = tuple(schema.canonical(f) for f in features)
    bad = [f for f, c in zip(features, out) if c not in schema.metrics]
    if bad:
        from .errors import UnknownFeatureError

        raise UnknownFeatureError(bad[0])
    return out


def feature_label(features: Sequence[str]) -> str:
    return ",".join(f.upper() for f in features)


@dataclass(frozen=True)
class FoldPlan:
    k: int = 10
    stratified: bool = False
    folds: tuple[tuple[int, ...], ...] = ()

    def to_dict(self) -> dict:
        return {"k": self.k, "stratified": self.stratified}


def make_folds(n: int, k: int, seed: int, labels=None, stratified: bool = False) -> FoldPlan:
    """Partition ``range(n)`` into ``k`` seeded folds whose sizes differ by at most 1."""
    if k < 2:
        raise SpecError(f"k must be >= 2, got {k}")
    if n < k:
        raise TooSmallError(f"{n} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    if stratified:
        labels = np.asarray(labels)
        pos = rng.permutation(np.flatnonzero(labels == 1))
        neg = rng.permutation(np.flatnonzero(labels != 1))
        order = np.concatenate([pos, neg])
        folds = tuple(tuple(sorted(int(i) for i in order[j::k])) for j in range(k))
    else:
        folds = tuple(tuple(sorted(int(i) for i in part))
                      for part in np.array_split(rng.permutation(n), k))
    return FoldPlan(k, stratified, folds)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to rerun an experiment byte-for-byte.

    ``datasets`` entries are ``{"path": ...}`` or ``{"synth": {...}}``;
    more than one entry means the sources are pooled with :func:`combine`.
    Repetition ``r`` uses seed ``seed + r``; fold ``i`` within it trains
    with seed ``seed + r + i``.
    """

    datasets: tuple[dict, ...]
    combinations: tuple[tuple[str, ...], ...]
    plan: TransformPlan = field(default_factory=TransformPlan)
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: FoldPlan = field(default_factory=FoldPlan)
    repetitions: int = 1
    seed: int = 0
    holdout_fraction: float | None = 0.9
    threshold: float = 0.5
    aliases: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.combinations:
            raise SpecError("experiment needs at least one feature combination")
        if not self.datasets:
            raise SpecError("experiment needs at least one dataset")
        if self.repetitions < 1:
            raise SpecError("repetitions must be >= 1")
        schema = ColumnSchema().with_aliases(self.aliases)
        combos = tuple(canonical_features(c, schema) for c in self.combinations)
        for c in combos:
            if not c:
                raise SpecError("empty feature combination")
        object.__setattr__(self, "combinations", combos)
        object.__setattr__(self, "datasets", tuple(dict(d) for d in self.datasets))
        for d in self.datasets:
            if set(d) - {"path", "synth", "project"} or ("path" in d) == ("synth" in d):
                raise SpecError(f"dataset entry needs exactly one of path/synth: {d}")
        if self.holdout_fraction is not None:
            SplitSpec(self.holdout_fraction, self.seed)

    def to_dict(self) -> dict:
        return {
            "datasets": [dict(d) for d in self.datasets],
            "combinations": [list(c) for c in self.combinations],
            "plan": self.plan.to_dict(),
            "train": self.train.to_dict(),
            "folds": self.folds.to_dict(),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "holdout_fraction": self.holdout_fraction,
            "threshold": self.threshold,
            "aliases": dict(self.aliases),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {"datasets", "combinations", "plan", "train", "folds", "repetitions",
                 "seed", "holdout_fraction", "threshold", "aliases"}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown experiment keys: {sorted(unknown)}")
        try:
            return cls(
                datasets=tuple(d.get("datasets", ())),
                combinations=tuple(tuple(c) for c in d.get("combinations", ())),
                plan=TransformPlan.from_dict(d.get("plan", {})),
                train=TrainConfig(**d.get("train", {})),
                folds=FoldPlan(**d.get("folds", {})),
                repetitions=int(d.get("repetitions", 1)),
                seed=int(d.get("seed", 0)),
                holdout_fraction=d.get("holdout_fraction", 0.9),
                threshold=float(d.get("threshold", 0.5)),
                aliases=dict(d.get("aliases", {})),
            )
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read spec {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return ExperimentSpec.from_dict(doc)


@dataclass(frozen=True)
class FoldResult:
    repetition: int
    fold: int
    recall: float
    precision: float
    n_test: int
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class CvResult:
    features: tuple[str, ...]
    folds: tuple[FoldResult, ...]

    @property
    def mean_recall(self) -> float:
        return float(np.mean([f.recall for f in self.folds]))

    @property
    def mean_precision(self) -> float:
        return float(np.mean([f.precision for f in self.folds]))


def _score(actual, predicted) -> tuple[float, float, tuple[str, ...]]:
    # Undefined ratios (no positives / no positive predictions) count as 0.
    c = ConfusionCounts.from_labels(actual, predicted)
    undefined = []
    try:
        r = recall(c)
    except UndefinedMetricError:
        r, undefined = 0.0, undefined + ["recall"]
    try:
        p = precision(c)
    except UndefinedMetricError:
        p, undefined = 0.0, undefined + ["precision"]
    return r, p, tuple(undefined)


def kfold_cv(
    train_set: Dataset,
    spec: ExperimentSpec,
    features: Sequence[str],
    seed: int | None = None,
    repetition: int = 0,
) -> CvResult:
    """k-fold CV of one feature combination.

    Per fold, only the training side is undersampled; both sides get the
    log transform, and the held-out side is scaled with bounds fitted on
    the training side.
    """
    seed = spec.seed + repetition if seed is None else seed
    features = canonical_features(features)
    plan = make_folds(train_set.n_rows, spec.folds.k, seed, train_set.labels, spec.folds.stratified)
    results = []
    all_rows = np.arange(train_set.n_rows)
    for i, held in enumerate(plan.folds):
        held_idx = np.asarray(held, dtype=np.intp)
        fit_idx = np.setdiff1d(all_rows, held_idx, assume_unique=True)
        prep = prepare(train_set.take(fit_idx), train_set.take(held_idx), features,
                       spec.plan, seed + i)
        model = init_model(len(features), seed + i)
        model, _ = train(model, prep.train, None, replace(spec.train, seed=seed + i))
        predicted, _ = predict_labels(model, prep.held_out, spec.threshold)
        r, p, undefined = _score(prep.held_out.labels, predicted)
        if undefined:
            log.debug("fold %d of %s: undefined %s scored as 0", i, features, undefined)
        results.append(FoldResult(repetition, i, r, p, len(held_idx), undefined))
    return CvResult(tuple(features), tuple(results))


def resolve_datasets(spec: ExperimentSpec, base_dir: Path | None = None) -> Dataset:
    schema = ColumnSchema().with_aliases(spec.aliases)
    loaded = []
    for ref in spec.datasets:
        if "synth" in ref:
            d = generate(SynthSpec(**{**ref["synth"],
                                      "signal_features": tuple(ref["synth"].get("signal_features", ()))}))
        else:
            path = Path(ref["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            d = load_dataset(path, schema, ref.get("project"))
        loaded.append(d)
    if len(loaded) == 1:
        return loaded[0]
    return combine(loaded, spec.seed)


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    results: tuple[CvResult, ...]
    n_rows: int = 0
    n_cv_rows: int = 0

    def config(self) -> dict:
        return {"spec": self.spec.to_dict(), "n_rows": self.n_rows, "n_cv_rows": self.n_cv_rows}


def run_experiment(spec: ExperimentSpec, data: Dataset | None = None,
                   base_dir: Path | None = None) -> ExperimentReport:
    """Cross-validate every combination in ``spec``, best mean recall first."""
    data = resolve_datasets(spec, base_dir) if data is None else data
    per_combo: dict[tuple[str, ...], list[FoldResult]] = {c: [] for c in spec.combinations}
    n_cv = 0
    for rep in range(spec.repetitions):
        rep_seed = spec.seed + rep
        cv_set = data
        if spec.holdout_fraction is not None:
            cv_set, _ = split(data, SplitSpec(spec.holdout_fraction, rep_seed))
        n_cv = cv_set.n_rows
        for combo in spec.combinations:
            try:
                res = kfold_cv(cv_set, spec, combo, rep_seed, rep)
            except JitError as exc:
                raise exc.annotate(f"while evaluating {feature_label(combo)}")
            per_combo[combo].extend(res.folds)
            log.info("rep %d %s: recall %.4f", rep, feature_label(combo), res.mean_recall)
    results = [CvResult(c, tuple(f)) for c, f in per_combo.items()]
    results.sort(key=lambda r: -r.mean_recall)
    return ExperimentReport(spec, tuple(results), data.n_rows, n_cv)


def _fold_id(f: FoldResult, k: int) -> int:
    return f.repetition * k + f.fold


def report_to_csv(r: ExperimentReport) -> str:
    buf = io.StringIO()
    buf.write("# jitlab experiment report\n")
    buf.write("# config: " + json.dumps(r.config(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["features", "fold", "recall", "precision"])
    k = r.spec.folds.k
    for res in r.results:
        for f in res.folds:
            w.writerow([feature_label(res.features), _fold_id(f, k),
                        format_number(f.recall), format_number(f.precision)])
    for res in r.results:
        w.writerow([feature_label(res.features), "mean",
                    format_number(res.mean_recall), format_number(res.mean_precision)])
    return buf.getvalue()


def report_to_text(r: ExperimentReport) -> str:
    lines = ["# jitlab experiment report",
             "# config: " + json.dumps(r.config(), sort_keys=True), ""]
    width = max(len("features"), *(len(feature_label(x.features)) for x in r.results))
    lines.append(f"{'features':<{width}}  {'recall':>8}  {'precision':>9}  folds")
    for res in r.results:
        lines.append(
            f"{feature_label(res.features):<{width}}  {100 * res.mean_recall:7.2f}%"
            f"  {100 * res.mean_precision:8.2f}%  {len(res.folds)}"
        )
    return "\n".join(lines) + "\n"


def emit_report(r: ExperimentReport, fmt: str, path: str | Path) -> None:
    if not r.results:
        raise SpecError("empty report")
    if fmt == "csv":
        text = report_to_csv(r)
    elif fmt in ("text", "structured-text", "txt"):
        text = report_to_text(r)
    else:
        raise SpecError(f"unknown report format {fmt!r}")
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def spec_from_report(path: str | Path) -> ExperimentSpec:
    """Recover the experiment spec echoed into a report's header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    for line in text.splitlines():
        if line.startswith("# config: "):
            return ExperimentSpec.from_dict(json.loads(line[len("# config: "):])["spec"])
    raise SpecError(f"{path} has no embedded config")


@dataclass(frozen=True)
class EffortScore:
    index: int
    probability: float
    effort: float
    score: float
    raw_churn: bool = False


def effort_rank(d: Dataset, scores: Sequence[float], floor: float = EFFORT_FLOOR) -> list[EffortScore]:
    """Order changes by predicted risk per line of churn, highest first.

    Effort is ``la + ld`` exactly as stored (raw counts for new-file rows),
    floored at ``floor``. Ties keep the original row order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != d.n_rows:
        raise SpecError(f"{len(scores)} scores for {d.n_rows} rows")
    effort = d.column("la") + d.column("ld")
    raw = np.zeros(d.n_rows, dtype=bool)
    if d.has("lt"):
        raw = (d.column("lt") == 0) & (effort > 0)
    ratio = scores / np.maximum(effort, floor)
    order = np.argsort(-ratio, kind="stable")
    return [EffortScore(int(i), float(scores[i]), float(effort[i]), float(ratio[i]), bool(raw[i]))
            for i in order]
