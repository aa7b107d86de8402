"""``jitlab`` command line: validate, pca, train, experiment, synth, rank.

Exit codes: 0 success, 1 error, 2 success with audit findings.
The default seed comes from ``JITLAB_SEED`` when ``--seed`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dataset import (
    ColumnSchema,
    audit_dataset,
    format_number,
    load_dataset,
    summarize,
    write_dataset,
)
from .errors import JitError, OutputError, SpecError
from .evaluate import (
    effort_rank,
    emit_report,
    feature_label,
    load_spec,
    run_experiment,
    spec_from_report,
)
from .mlp import MlpModel, TrainConfig, init_model, predict_labels, train
from .pca import export_scatter, fit_pca, project
from .preprocess import NormalizationParams, TransformPlan, prepare, transform_with
from .synth import SynthSpec, generate

SEED_ENV = "JITLAB_SEED"
EXIT_OK, EXIT_ERROR, EXIT_FINDINGS = 0, 1, 2

log = logging.getLogger("jitlab")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SpecError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _schema(args) -> ColumnSchema:
    extra = {}
    for item in getattr(args, "alias", None) or []:
        if "=" not in item:
            raise SpecError(f"--alias expects name=canonical, got {item!r}")
        k, v = item.split("=", 1)
        extra[k.strip()] = v.strip()
    return ColumnSchema().with_aliases(extra)


def _csv_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def cmd_validate(args) -> int:
    d = load_dataset(args.input, _schema(args))
    summary = summarize(d)
    log_columns = _csv_list(args.log_columns) or TransformPlan().log_columns
    audit = audit_dataset(d, log_columns)
    text = f"dataset: {args.input}\n{summary.format()}\n{audit.format()}\n"
    sys.stdout.write(text)
    if args.out:
        _write(args.out, text)
    return EXIT_FINDINGS if audit.has_findings else EXIT_OK


def cmd_pca(args) -> int:
    d = load_dataset(args.input, _schema(args))
    features = None if args.features in (None, "all") else _csv_list(args.features)
    model = fit_pca(d, features, args.components, args.standardize)
    export_scatter(project(model, d), args.out)
    loadings = args.loadings or str(Path(args.out).with_suffix(".loadings.json"))
    model.dump(loadings)
    ratios = ", ".join(f"{r:.4f}" for r in model.explained_variance_ratio[: args.components])
    print(f"features: {feature_label(model.features)}")
    print(f"explained variance ratio: {ratios}")
    for i, comp in enumerate(model.loadings()):
        top = ", ".join(f"{f}={w:+.3f}" for f, w in comp[:3])
        print(f"pc{i + 1} top loadings: {top}")
    print(f"scatter: {args.out}\nloadings: {loadings}")
    return EXIT_OK


def _read_config(path: str) -> dict:
    """Load a JSON object or ``key = value`` lines (lists comma separated)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{path}:{lineno}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k] = v
    return out


def _as_list(v) -> list[str]:
    return _csv_list(v) if isinstance(v, str) else [str(x) for x in v]


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("true", "1"):
        return True
    if str(v).lower() in ("false", "0"):
        return False
    raise SpecError(f"expected true/false, got {v!r}")


_TRAIN_KEYS = {"epochs": int, "learning_rate": float, "dropout_p": float,
               "dropout_placement": str, "batch_size": int, "seed": int}
_PLAN_KEYS = {"log_columns": _as_list, "drop_columns": _as_list, "log_mode": str,
              "normalize": _as_bool}


def cmd_train(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    plan = TransformPlan(log_mode=args.log_mode)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=seed)
    features = _csv_list(args.features)
    if args.config:
        conf = _read_config(args.config)
        unknown = set(conf) - set(_TRAIN_KEYS) - set(_PLAN_KEYS) - {"features"}
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        plan = TransformPlan.from_dict(
            {**plan.to_dict(), **{k: f(conf[k]) for k, f in _PLAN_KEYS.items() if k in conf}}
        )
        cfg = replace(cfg, **{k: f(conf[k]) for k, f in _TRAIN_KEYS.items() if k in conf})
        seed = cfg.seed
        if "features" in conf:
            features = _as_list(conf["features"])
    d = load_dataset(args.input, _schema(args))
    features = tuple(features) if features else plan.training_features(d.columns)
    prep = prepare(d, None, features, plan, seed)
    model = init_model(len(prep.features), seed)
    model, trace = train(model, prep.train, None, cfg)
    bundle = {
        "model": model.to_dict(),
        "features": list(prep.features),
        "plan": plan.to_dict(),
        "normalization": prep.params.to_dict() if prep.params else None,
        "train": cfg.to_dict(),
        "seed": seed,
        "loss_trace": trace,
    }
    _write(args.out, json.dumps(bundle) + "\n")
    print(f"seed: {seed}")
    print(f"features: {feature_label(prep.features)}")
    print(f"rows after undersampling: {prep.train.n_rows}")
    print(f"loss: first epoch {trace[0]:.6f}, last epoch {trace[-1]:.6f}")
    print(f"model: {args.out}")
    return EXIT_OK


def _load_spec_or_report(path: str):
    try:
        head = Path(path).read_text(encoding="utf-8").lstrip()[:1]
    except OSError as exc:
        raise OutputError(f"cannot read spec {path}: {exc.strerror or exc}") from exc
    # a previously emitted report carries its spec in a '# config:' header
    return spec_from_report(path) if head == "#" else load_spec(path)


def cmd_experiment(args) -> int:
    spec = _load_spec_or_report(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    print(f"seed: {spec.seed} (repetition r uses {spec.seed}+r; fold i adds i)")
    report = run_experiment(spec, base_dir=Path(args.spec).resolve().parent)
    out = Path(args.out)
    formats = _csv_list(args.format) or ["csv", "text"]
    written = []
    for fmt in formats:
        suffix = ".csv" if fmt == "csv" else ".txt"
        path = out if len(formats) == 1 and out.suffix else out.with_suffix(suffix)
        emit_report(report, fmt, path)
        written.append(str(path))
    for res in report.results:
        print(f"{feature_label(res.features):<45} recall {100 * res.mean_recall:6.2f}%"
              f"  precision {100 * res.mean_precision:6.2f}%")
    print("report: " + ", ".join(written))
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    spec = SynthSpec(
        n_rows=args.rows,
        defect_fraction=args.fraction,
        signal_features=tuple(_csv_list(args.signal) or ()),
        separation=args.separation,
        seed=seed,
    )
    write_dataset(generate(spec), args.out)
    print(f"seed: {seed}")
    print(f"wrote {spec.n_rows} rows ({spec.n_defective} defective) to {args.out}")
    return EXIT_OK


def _load_bundle(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read model {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not a model file ({exc})") from exc
    for key in ("model", "features", "plan"):
        if key not in doc:
            raise SpecError(f"{path}: model file lacks {key!r}")
    return doc


def cmd_rank(args) -> int:
    bundle = _load_bundle(args.model)
    model = MlpModel.from_dict(bundle["model"])
    plan = TransformPlan.from_dict(bundle["plan"])
    params = NormalizationParams.from_dict(bundle["normalization"]) if bundle.get("normalization") else None
    d = load_dataset(args.input, _schema(args))
    x = transform_with(d, bundle["features"], plan, params)
    _, scores = predict_labels(model, x, args.threshold)
    ranked = effort_rank(d, scores)
    meta_names = list(d.meta)
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "row", "probability", "effort", "effort_score", "raw_churn", "label",
                        *meta_names])
            for pos, r in enumerate(ranked, 1):
                w.writerow([pos, r.index, format_number(r.probability), format_number(r.effort),
                            format_number(r.score), int(r.raw_churn), int(d.labels[r.index]),
                            *(d.meta[m][r.index] for m in meta_names)])
    except OSError as exc:
        raise OutputError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    n_raw = sum(r.raw_churn for r in ranked)
    print(f"ranked {len(ranked)} changes ({n_raw} raw churn) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jitlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def with_schema(sp):
        sp.add_argument("--alias", action="append", metavar="NAME=CANONICAL",
                        help="extra header alias, repeatable")
        return sp

    sp = with_schema(sub.add_parser("validate", help="summarize and audit a dataset"))
    sp.add_argument("input")
    sp.add_argument("--log-columns", help="columns checked for log(0) hazards")
    sp.add_argument("--out", help="also write the report here")
    sp.set_defaults(func=cmd_validate)

    sp = with_schema(sub.add_parser("pca", help="PCA scatter data and loadings"))
    sp.add_argument("input")
    sp.add_argument("--features", default="all", help="comma list or 'all'")
    sp.add_argument("--components", type=int, default=2)
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--out", required=True, help="scatter CSV path")
    sp.add_argument("--loadings", help="model dump path (default: next to --out)")
    sp.set_defaults(func=cmd_pca)

    sp = with_schema(sub.add_parser("train", help="train a classifier on a whole dataset"))
    sp.add_argument("input")
    sp.add_argument("--features", help="comma list (default: all minus dropped columns)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int, default=150)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--log-mode", choices=("strict", "log1p"), default="strict")
    sp.add_argument("--config", help="key=value or JSON file; overrides flags")
    sp.add_argument("--out", required=True, help="model file")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("experiment", help="run a feature-combination experiment")
    sp.add_argument("spec", help="JSON experiment spec, or a report to rerun")
    sp.add_argument("--seed", type=int, help="override the spec's base seed")
    sp.add_argument("--format", help="csv,text (default both)")
    sp.add_argument("--out", required=True, help="report path or stem")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("synth", help="write a synthetic dataset")
    sp.add_argument("--rows", type=int, default=1000)
    sp.add_argument("--fraction", type=float, default=0.5)
    sp.add_argument("--signal", help="comma list of signal features")
    sp.add_argument("--separation", type=float, default=0.0)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = with_schema(sub.add_parser("rank", help="effort-aware ranking with a trained model"))
    sp.add_argument("input")
    sp.add_argument("--model", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_rank)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except JitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
