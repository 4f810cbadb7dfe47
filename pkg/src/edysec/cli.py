"""Command-line entry point: dataset tooling, selection, training, evaluation,
stability, explanations, the full pipeline, and the verdict service."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import explain, featsel, metrics, pipeline, service, stability
from . import neuralnet as nn
from .artifact import ModelArtifact, dataset_hash, load_artifact, predict_package, save_artifact
from .dataset import (
    FeatureManifest,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .errors import EdysecError
from .preprocess import Preprocessor

ARTIFACT_ENV = "EDYSEC_ARTIFACT"


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _load(args):
    manifest = FeatureManifest.load(args.manifest)
    return load_dataset(args.data, manifest)


def _options(args) -> pipeline.PipelineOptions:
    kwargs = {}
    for name in (
        "seed",
        "alpha",
        "epochs",
        "batch_size",
        "learning_rate",
        "threshold",
        "stability_runs",
        "explain_count",
    ):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    if getattr(args, "ratios", None):
        kwargs["ratios"] = tuple(args.ratios)
    if getattr(args, "methods", None):
        kwargs["selectors"] = tuple(args.methods)
    if getattr(args, "models", None):
        kwargs["models"] = tuple(args.models)
    if getattr(args, "mode", None):
        kwargs["stability_mode"] = args.mode
    return pipeline.PipelineOptions(**kwargs)


def _prepared(args):
    """Shared front half: load, split, fit preprocessing."""
    ds = _load(args)
    options = _options(args)
    splits = split_dataset(ds, options.ratios, options.seed)
    pre = Preprocessor.fit(splits.train)
    return ds, options, splits, pre


def _bind(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_synth(args):
    kinds = {"numeric": 1.0 - args.text_fraction}
    if args.text_fraction > 0:
        kinds["categorical"] = args.text_fraction / 2
        kinds["pattern"] = args.text_fraction / 2
    ds = generate_synthetic(
        args.rows, args.informative, args.noise, kinds=kinds, seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    data_path = os.path.join(args.out, "data.csv")
    manifest_path = os.path.join(args.out, "manifest.json")
    save_dataset(ds, data_path)
    ds.manifest.save(manifest_path)
    _emit({"data": data_path, "manifest": manifest_path, "rows": len(ds), "sha256": dataset_hash(ds)})


def cmd_split(args):
    ds = _load(args)
    splits = split_dataset(ds, tuple(args.ratios), args.seed)
    os.makedirs(args.out, exist_ok=True)
    sizes = {}
    for name, part in (("train", splits.train), ("validation", splits.validation), ("test", splits.test)):
        path = os.path.join(args.out, f"{name}.csv")
        save_dataset(part, path)
        sizes[name] = len(part)
    _emit({"out": args.out, "seed": args.seed, "sizes": sizes})


def cmd_select(args):
    _, options, splits, pre = _prepared(args)
    train_pm = pre.transform(splits.train)
    val_pm = pre.transform(splits.validation)
    results = pipeline.run_selectors(train_pm, val_pm, options)
    chosen = featsel.choose_selector(results)
    _emit({"selectors": [r.to_dict() for r in results], "chosen": chosen.method})


def cmd_train(args):
    ds, options, splits, pre = _prepared(args)
    train_pm = pre.transform(splits.train)
    val_pm = pre.transform(splits.validation)
    if args.features:
        with open(args.features, encoding="utf-8") as fh:
            selected = tuple(json.load(fh))
    else:
        selected = tuple(train_pm.source_features())
    train_sel = featsel.project(train_pm, selected)
    val_sel = featsel.project(val_pm, selected)
    spec = pipeline._network_spec(args.model, train_sel.X.shape[1])
    cfg = nn.TrainConfig(
        epochs=options.epochs,
        batch_size=options.batch_size,
        learning_rate=options.learning_rate,
        seed=options.seed,
    )
    params, history = nn.train(spec, cfg, train_sel.X, train_sel.labels, val_sel.X, val_sel.labels)
    background = explain.sample_background(train_sel, options.background_size, options.seed)
    artifact = ModelArtifact(
        manifest=ds.manifest,
        preprocessor=pre,
        selected=selected,
        selector_provenance={"method": "manual", "d_j": len(selected)},
        params=params,
        threshold=options.threshold,
        fingerprint={
            "seed": options.seed,
            "model": args.model,
            "dataset_sha256": dataset_hash(ds),
        },
        background=background,
    )
    save_artifact(artifact, args.artifact)
    last = history.epochs[-1]
    _emit({
        "artifact": args.artifact,
        "model": args.model,
        "epochs": len(history.epochs),
        "train_loss": last.train_loss,
        "val_acc": last.val_acc,
    })


def cmd_evaluate(args):
    artifact = load_artifact(args.artifact)
    manifest = FeatureManifest.load(args.manifest) if args.manifest else artifact.manifest
    ds = load_dataset(args.data, manifest)
    pm = artifact.preprocessor.transform(ds)
    projected = featsel.project(pm, artifact.selected)
    probs = nn.predict_proba(artifact.params, projected.X)
    cm = metrics.confusion(projected.labels, probs, artifact.threshold)
    auc = metrics.roc_auc(projected.labels, probs)
    report = metrics.classification_metrics(cm, auc=auc)
    _emit({
        "metrics": report.to_dict(),
        "confusion": {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn},
    })


def cmd_stability(args):
    _, options, splits, pre = _prepared(args)
    train_pm = pre.transform(splits.train)
    val_pm = pre.transform(splits.validation)
    test_pm = pre.transform(splits.test)
    if options.stability_mode == "selectors":
        selector_results = pipeline.run_selectors(train_pm, val_pm, options)
        chosen = featsel.choose_selector(selector_results)
    else:
        selector_results = []
        all_features = tuple(train_pm.source_features())
        chosen = featsel.SelectorResult("anova", all_features, len(all_features), 1.0, 1.0)
    table = pipeline._stability_table(options, train_pm, val_pm, test_pm, chosen, selector_results)
    rows = stability.stability_report(table, seed=options.seed)
    sys.stdout.write(stability.render_table(rows))
    _emit([r.display() for r in rows])


def cmd_explain(args):
    artifact = load_artifact(args.artifact)
    manifest = FeatureManifest.load(args.manifest) if args.manifest else artifact.manifest
    ds = load_dataset(args.data, manifest)
    pm = artifact.preprocessor.transform(ds)
    projected = featsel.project(pm, artifact.selected)
    if artifact.background is None:
        raise EdysecError("artifact carries no background sample for explanations")
    groups = explain.feature_groups(projected)
    model = lambda rows: nn.predict_proba(artifact.params, rows)
    count = min(args.count, projected.X.shape[0])
    records = []
    for i in range(count):
        if args.method == "shap":
            d = len(groups)
            budget = "exact" if d <= explain.KERNEL_ENUM_LIMIT else 2048
            attr = explain.kernel_shap(model, projected.X[i], artifact.background, groups, budget=budget)
        else:
            attr = explain.lime_explain(model, projected.X[i], artifact.background, groups)
        records.append({"package": projected.ids[i] if projected.ids else str(i), **attr.to_dict()})
        if args.per_package:
            sys.stdout.write(json.dumps(records[-1], sort_keys=True) + "\n")
    if not args.per_package:
        _emit(records)


def cmd_pipeline(args):
    ds = _load(args)
    options = _options(args)
    result = pipeline.run_pipeline(ds, options)
    written = pipeline.emit_reports(result, args.out)
    if args.artifact:
        save_artifact(result.artifact, args.artifact)
        written.append(args.artifact)
    _emit({
        "chosen_selector": result.chosen.method,
        "selected": list(result.chosen.selected),
        "model": result.best_model,
        "test_f1": result.evaluation.f1,
        "written": written,
    })


def cmd_predict(args):
    artifact = load_artifact(args.artifact)
    with open(args.record, encoding="utf-8") as fh:
        request = json.load(fh)
    features = request.get("features", request)
    report = predict_package(
        artifact,
        features,
        package=str(request.get("package", "package")),
        explain_verdict=args.explain,
    )
    _emit(report.to_dict())


def cmd_serve(args):
    path = args.artifact or os.environ.get(ARTIFACT_ENV)
    if not path:
        raise EdysecError(f"pass --artifact or set {ARTIFACT_ENV}")
    host, port = _bind(args.bind)
    server = service.make_server(load_artifact(path), host, port)
    sys.stderr.write(f"serving on {host}:{server.server_address[1]}\n")
    try:
        server.serve_forever()
    finally:
        server.server_close()


def cmd_report(args):
    """Human-readable rollup of a reports directory."""
    eval_path = os.path.join(args.reports, "evaluation.json")
    if os.path.exists(eval_path):
        with open(eval_path, encoding="utf-8") as fh:
            ev = json.load(fh)
        d = ev["metrics"]["display"]
        sys.stdout.write(
            f"Model {ev['model']} on {ev['features']} features: "
            f"F1 {d['f1']:.2f}, accuracy {d['accuracy']:.2f}, "
            f"FPR {d['fpr_pct']:.2f}%, FNR {d['fnr_pct']:.2f}%\n"
        )
    stab_path = os.path.join(args.reports, "stability.txt")
    if os.path.exists(stab_path):
        with open(stab_path, encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    overlap_path = os.path.join(args.reports, "overlap.json")
    if os.path.exists(overlap_path):
        with open(overlap_path, encoding="utf-8") as fh:
            ov = json.load(fh)
        sys.stdout.write(
            f"Selection/explanation overlap: {len(ov['overlap'])} features, "
            f"Jaccard {ov['jaccard']:.3f}\n"
        )


def _add_data_args(p, manifest_required=True):
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--manifest", required=manifest_required, help="manifest JSON")


def _add_split_args(p):
    p.add_argument("--ratios", type=float, nargs=3, default=None)
    p.add_argument("--seed", type=int, default=None)


def _add_train_args(p):
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edysec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trace dataset")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--informative", type=int, required=True)
    p.add_argument("--noise", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text-fraction", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="write train/validation/test CSVs")
    _add_data_args(p)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.70, 0.15, 0.15))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("select", help="run feature selectors and pick the best subset")
    _add_data_args(p)
    _add_split_args(p)
    p.add_argument("--methods", nargs="+", choices=featsel.METHODS, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train one model and save an artifact")
    _add_data_args(p)
    _add_split_args(p)
    _add_train_args(p)
    p.add_argument("--model", choices=("mlp", "nn"), default="mlp")
    p.add_argument("--features", default=None, help="JSON list of source features to keep")
    p.add_argument("--artifact", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score an artifact against a labeled CSV")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stability", help="run-to-run stability table")
    _add_data_args(p)
    _add_split_args(p)
    _add_train_args(p)
    p.add_argument("--mode", choices=("seeds", "selectors"), default="seeds")
    p.add_argument("--runs", dest="stability_runs", type=int, default=None)
    p.add_argument("--models", nargs="+", choices=("mlp", "nn"), default=None)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("explain", help="per-package explanations from an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--method", choices=("shap", "lime"), default="shap")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--per-package", action="store_true")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("pipeline", help="full end-to-end run")
    _add_data_args(p)
    _add_split_args(p)
    _add_train_args(p)
    p.add_argument("--methods", nargs="+", choices=featsel.METHODS, default=None)
    p.add_argument("--models", nargs="+", choices=("mlp", "nn"), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--mode", dest="mode", choices=("seeds", "selectors", "off"), default=None)
    p.add_argument("--runs", dest="stability_runs", type=int, default=None)
    p.add_argument("--explain-count", dest="explain_count", type=int, default=None)
    p.add_argument("--out", required=True, help="reports directory")
    p.add_argument("--artifact", default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("predict", help="score a single package record")
    p.add_argument("--artifact", required=True)
    p.add_argument("--in", dest="record", required=True, help="JSON record file")
    p.add_argument("--explain", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="start the verdict service")
    p.add_argument("--artifact", default=None, help=f"defaults to ${ARTIFACT_ENV}")
    p.add_argument("--bind", default="127.0.0.1:8730")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="print a rollup of emitted reports")
    p.add_argument("--reports", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except EdysecError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
