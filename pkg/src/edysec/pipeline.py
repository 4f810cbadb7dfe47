"""End-to-end orchestration: split, preprocess, run selectors, pick the best
subset by the performance/compactness objective, train candidate networks,
evaluate, and produce stability and explanation reports."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import explain, featsel, metrics, stability
from . import neuralnet as nn
from .artifact import ModelArtifact, dataset_hash
from .dataset import DatasetSplits, TraceDataset, split_dataset
from .preprocess import Preprocessor, ProcessedMatrix


@dataclass(frozen=True)
class PipelineOptions:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0
    alpha: float = featsel.DEFAULT_ALPHA
    selectors: tuple[str, ...] = featsel.METHODS
    anova_k: int = 12
    corr_relevance_min: float = 0.1
    corr_redundancy_max: float = 0.9
    importance_threshold: float = 0.2
    importance_repeats: int = 5
    swarm: featsel.SwarmConfig = featsel.SwarmConfig()
    baseline: featsel.BaselineConfig = featsel.BaselineConfig()
    models: tuple[str, ...] = ("mlp", "nn")
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    threshold: float = 0.5
    stability_mode: str = "seeds"  # "seeds" | "selectors" | "off"
    stability_runs: int = 10
    explain_count: int = 20
    background_size: int = 100

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["swarm"] = vars(self.swarm).copy()
        d["baseline"] = vars(self.baseline).copy()
        for key in ("ratios", "selectors", "models"):
            d[key] = list(d[key])
        return d


@dataclass
class CandidateScore:
    model: str
    val_accuracy: float
    val_f1: float
    test_f1: float | None = None


@dataclass
class PipelineResult:
    artifact: ModelArtifact
    splits: DatasetSplits
    selector_results: list[featsel.SelectorResult]
    chosen: featsel.SelectorResult
    candidates: list[CandidateScore]
    best_model: str
    evaluation: metrics.MetricsReport
    confusion: metrics.ConfusionMatrix
    stability_rows: list[stability.StabilityRow] | None
    explanations: list[explain.Attribution]
    ranking: list[str]
    overlap: tuple[set, float]
    histories: dict[str, nn.TrainHistory] = field(default_factory=dict)


def _network_spec(name: str, width: int) -> nn.NetworkSpec:
    if name == "mlp":
        return nn.NetworkSpec.mlp(width)
    if name == "nn":
        return nn.NetworkSpec.nn(width)
    raise ValueError(f"unknown model preset {name!r}")


def _val_scores(params, val_pm, threshold):
    probs = nn.predict_proba(params, val_pm.X)
    cm = metrics.confusion(val_pm.labels, probs, threshold)
    report = metrics.classification_metrics(cm)
    return report.accuracy, report.f1


def run_selectors(
    train_pm: ProcessedMatrix,
    val_pm: ProcessedMatrix,
    options: PipelineOptions,
) -> list[featsel.SelectorResult]:
    d_total = len(train_pm.source_features())
    names = train_pm.source_features()
    results = []

    def score(selected):
        return featsel.baseline_validation_accuracy(train_pm, val_pm, selected, options.baseline)

    def result(method, selected, p=None):
        p = score(selected) if p is None else p
        return featsel.SelectorResult(
            method=method,
            selected=tuple(selected),
            d_j=len(selected),
            p_j=p,
            objective=featsel.objective(p, len(selected), d_total, options.alpha),
        )

    fitness = None
    for method in options.selectors:
        if method == "anova":
            scores = featsel.anova_f_scores(train_pm)
            selected = featsel.select_anova(scores, min(options.anova_k, d_total), names)
            results.append(result("anova", selected))
        elif method == "corr":
            selected = featsel.select_corr(
                train_pm,
                relevance_min=options.corr_relevance_min,
                redundancy_max=options.corr_redundancy_max,
            )
            results.append(result("corr", selected))
        elif method == "importance":
            baseline = featsel.train_baseline(train_pm.X, train_pm.labels, options.baseline)
            importances = featsel.permutation_importance(
                baseline, val_pm, repeats=options.importance_repeats, seed=options.seed
            )
            selected = featsel.select_importance(importances, options.importance_threshold, names)
            results.append(result("importance", selected))
        elif method in ("pso", "woa"):
            if fitness is None:
                fitness = featsel.MaskFitness(train_pm, val_pm, options.alpha, options.baseline)
            runner = featsel.select_bpso if method == "pso" else featsel.select_bwoa
            run = runner(fitness, d_total, options.swarm)
            selected = tuple(n for n, bit in zip(names, run.mask) if bit)
            results.append(result(method, selected, p=fitness.validation_score(run.mask)))
        else:
            raise ValueError(f"unknown selector {method!r}")
    return results


def run_pipeline(ds: TraceDataset, options: PipelineOptions = PipelineOptions()) -> PipelineResult:
    splits = split_dataset(ds, options.ratios, options.seed)
    pre = Preprocessor.fit(splits.train)
    train_pm = pre.transform(splits.train)
    val_pm = pre.transform(splits.validation)
    test_pm = pre.transform(splits.test)

    selector_results = run_selectors(train_pm, val_pm, options)
    chosen = featsel.choose_selector(selector_results)

    train_sel = featsel.project(train_pm, chosen.selected)
    val_sel = featsel.project(val_pm, chosen.selected)
    test_sel = featsel.project(test_pm, chosen.selected)

    candidates, trained, histories = [], {}, {}
    for name in options.models:
        spec = _network_spec(name, train_sel.X.shape[1])
        cfg = nn.TrainConfig(
            epochs=options.epochs,
            batch_size=options.batch_size,
            learning_rate=options.learning_rate,
            seed=options.seed,
        )
        params, history = nn.train(spec, cfg, train_sel.X, train_sel.labels, val_sel.X, val_sel.labels)
        acc, f1 = _val_scores(params, val_sel, options.threshold)
        candidates.append(CandidateScore(name, acc, f1))
        trained[name] = params
        histories[name] = history
    best = max(candidates, key=lambda c: (c.val_accuracy, c.val_f1))
    params = trained[best.model]

    test_probs = nn.predict_proba(params, test_sel.X)
    cm = metrics.confusion(test_sel.labels, test_probs, options.threshold)
    auc = metrics.roc_auc(test_sel.labels, test_probs)
    report = metrics.classification_metrics(cm, auc=auc)

    stability_rows = None
    if options.stability_mode != "off":
        table = _stability_table(
            options, train_pm, val_pm, test_pm, chosen, selector_results
        )
        stability_rows = stability.stability_report(table, seed=options.seed)

    background = explain.sample_background(train_sel, options.background_size, options.seed)
    explanations, ranking, overlap = _explanations(
        params, test_sel, background, chosen.selected, options
    )

    artifact = ModelArtifact(
        manifest=ds.manifest,
        preprocessor=pre,
        selected=chosen.selected,
        selector_provenance={
            "method": chosen.method,
            "p_j": chosen.p_j,
            "d_j": chosen.d_j,
            "objective": chosen.objective,
            "alpha": options.alpha,
        },
        params=params,
        threshold=options.threshold,
        fingerprint={
            "seed": options.seed,
            "model": best.model,
            "options": options.to_dict(),
            "dataset_sha256": dataset_hash(ds),
        },
        background=background,
    )
    return PipelineResult(
        artifact=artifact,
        splits=splits,
        selector_results=selector_results,
        chosen=chosen,
        candidates=candidates,
        best_model=best.model,
        evaluation=report,
        confusion=cm,
        stability_rows=stability_rows,
        explanations=explanations,
        ranking=ranking,
        overlap=overlap,
        histories=histories,
    )


def _train_and_f1(name, train_sel, val_sel, test_sel, options, seed):
    spec = _network_spec(name, train_sel.X.shape[1])
    cfg = nn.TrainConfig(
        epochs=options.epochs,
        batch_size=options.batch_size,
        learning_rate=options.learning_rate,
        seed=seed,
    )
    params, _ = nn.train(spec, cfg, train_sel.X, train_sel.labels, val_sel.X, val_sel.labels)
    probs = nn.predict_proba(params, test_sel.X)
    cm = metrics.confusion(test_sel.labels, probs, options.threshold)
    return metrics.classification_metrics(cm).f1


def _stability_table(options, train_pm, val_pm, test_pm, chosen, selector_results):
    if options.stability_mode == "seeds":
        configs = tuple(f"seed_{r}" for r in range(options.stability_runs))
        train_sel = featsel.project(train_pm, chosen.selected)
        val_sel = featsel.project(val_pm, chosen.selected)
        test_sel = featsel.project(test_pm, chosen.selected)
        scores = tuple(
            tuple(
                _train_and_f1(name, train_sel, val_sel, test_sel, options, options.seed + 1000 * (r + 1))
                for r in range(options.stability_runs)
            )
            for name in options.models
        )
        return stability.ScoreTable(tuple(options.models), configs, scores)
    if options.stability_mode == "selectors":
        configs = tuple(r.method for r in selector_results)
        rows = []
        for name in options.models:
            row = []
            for res in selector_results:
                tr = featsel.project(train_pm, res.selected)
                vd = featsel.project(val_pm, res.selected)
                te = featsel.project(test_pm, res.selected)
                row.append(_train_and_f1(name, tr, vd, te, options, options.seed))
            rows.append(tuple(row))
        return stability.ScoreTable(tuple(options.models), configs, tuple(rows))
    raise ValueError(f"unknown stability mode {options.stability_mode!r}")


def _explanations(params, test_sel, background, selected, options):
    groups = explain.feature_groups(test_sel)
    d = len(groups)
    budget = "exact" if d <= explain.KERNEL_ENUM_LIMIT else 2048
    rng = np.random.default_rng(options.seed)
    n = test_sel.X.shape[0]
    count = min(options.explain_count, n)
    idx = np.sort(rng.choice(n, size=count, replace=False)) if count else []

    model = lambda rows: nn.predict_proba(params, rows)
    explanations = [
        explain.kernel_shap(model, test_sel.X[i], background, groups, budget=budget, seed=options.seed)
        for i in idx
    ]
    if explanations:
        ranking = explain.explanation_ranking(explain.global_importance(explanations))
        overlap = explain.selection_overlap(selected, ranking, min(len(selected), len(ranking)))
    else:
        ranking, overlap = [], (set(), 0.0)
    return explanations, ranking, overlap


def emit_reports(result: PipelineResult, out_dir) -> list[str]:
    """Deterministic report files: evaluation, selector table, stability,
    one explanation record per explained test sample."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def dump(name, payload):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)

    cm = result.confusion
    dump(
        "evaluation.json",
        {
            "model": result.best_model,
            "features": len(result.chosen.selected),
            "metrics": result.evaluation.to_dict(),
            "confusion": {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn},
        },
    )
    dump("selectors.json", [r.to_dict() for r in result.selector_results])
    if result.stability_rows is not None:
        dump("stability.json", [r.display() for r in result.stability_rows])
        path = os.path.join(out_dir, "stability.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(stability.render_table(result.stability_rows))
        written.append(path)

    path = os.path.join(out_dir, "explanations.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        for attr in result.explanations:
            fh.write(json.dumps(attr.to_dict(), sort_keys=True))
            fh.write("\n")
    written.append(path)

    overlap_set, score = result.overlap
    dump(
        "overlap.json",
        {"ranking": result.ranking, "overlap": sorted(overlap_set), "jaccard": score},
    )
    return written
