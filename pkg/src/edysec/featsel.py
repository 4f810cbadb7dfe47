"""Feature selection at source-feature granularity: ANOVA, correlation filter,
permutation importance, binary PSO, binary WOA, the performance/compactness
objective, and projection of processed matrices onto a selected subset."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neuralnet as nn
from .errors import BadK, EmptyResult, LayoutMismatch, UnknownFeature
from .preprocess import ProcessedMatrix

METHODS = ("anova", "corr", "importance", "pso", "woa")

DEFAULT_ALPHA = 0.95


@dataclass(frozen=True)
class SelectorResult:
    method: str
    selected: tuple[str, ...]
    d_j: int
    p_j: float
    objective: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown selector method {self.method!r}")
        if not self.selected:
            raise ValueError("selected feature set must be nonempty")
        if not (0.0 <= self.p_j <= 1.0):
            raise ValueError("validation score must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "selected": list(self.selected),
            "d_j": self.d_j,
            "p_j": self.p_j,
            "objective": self.objective,
        }


@dataclass(frozen=True)
class SwarmConfig:
    population: int = 20
    iterations: int = 50
    seed: int = 0
    # PSO
    w_start: float = 0.9
    w_end: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    v_max: float = 6.0
    # WOA
    b: float = 1.0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True)
class SwarmRun:
    """Raw swarm outcome: best mask over all evaluations plus per-iteration bests."""

    mask: np.ndarray
    fitness: float
    history: tuple[float, ...]


def source_matrix(pm: ProcessedMatrix) -> tuple[np.ndarray, list[str]]:
    """One scalar summary column per source feature: numeric features pass
    through; text features collapse to the L2 norm of their processed block."""
    names = pm.source_features()
    out = np.zeros((pm.X.shape[0], len(names)))
    for j, name in enumerate(names):
        cols = pm.feature_columns(name)
        if len(cols) == 1 and pm.column_map[cols[0]][1] == "numeric":
            out[:, j] = pm.X[:, cols[0]]
        else:
            out[:, j] = np.linalg.norm(pm.X[:, cols], axis=1)
    return out, names


def anova_f_scores(pm: ProcessedMatrix, labels=None) -> dict[str, float]:
    """One-way two-group F per source feature over the scalar summaries."""
    summary, names = source_matrix(pm)
    y = np.asarray(pm.labels if labels is None else labels)
    if len(set(y.tolist())) < 2:
        raise ValueError("both classes must be present")
    g0 = summary[y == 0]
    g1 = summary[y == 1]
    n0, n1 = len(g0), len(g1)
    grand = summary.mean(axis=0)
    between = n0 * (g0.mean(axis=0) - grand) ** 2 + n1 * (g1.mean(axis=0) - grand) ** 2
    within = ((g0 - g0.mean(axis=0)) ** 2).sum(axis=0) + ((g1 - g1.mean(axis=0)) ** 2).sum(axis=0)
    within_ms = within / (n0 + n1 - 2)
    scores = {}
    for j, name in enumerate(names):
        if within_ms[j] > 0:
            scores[name] = float(between[j] / within_ms[j])
        else:
            scores[name] = 0.0 if between[j] == 0 else float("inf")
    return scores


def _ordered(names: list[str], keys) -> list[str]:
    """Sort names by descending key, ties broken by original (manifest) order."""
    order = {name: i for i, name in enumerate(names)}
    return sorted(names, key=lambda f: (-keys[f], order[f]))


def select_anova(scores: dict[str, float], k: int, manifest_order: list[str] | None = None) -> tuple[str, ...]:
    names = manifest_order or list(scores)
    if not (1 <= k <= len(names)):
        raise BadK(f"k must be in [1, {len(names)}], got {k}")
    return tuple(_ordered(names, scores)[:k])


def _safe_corr(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def select_corr(
    pm: ProcessedMatrix,
    labels=None,
    relevance_min: float = 0.1,
    redundancy_max: float = 0.9,
) -> tuple[str, ...]:
    """Keep features with |point-biserial| >= relevance_min, then drop (ascending
    relevance) features too correlated with a kept feature."""
    if not (0.0 <= relevance_min <= 1.0 and 0.0 <= redundancy_max <= 1.0):
        raise ValueError("thresholds must lie in [0, 1]")
    summary, names = source_matrix(pm)
    y = np.asarray(pm.labels if labels is None else labels, dtype=float)
    relevance = {
        name: abs(_safe_corr(summary[:, j], y)) for j, name in enumerate(names)
    }
    kept = [name for name in names if relevance[name] >= relevance_min]
    if not kept:
        raise EmptyResult("no feature passes the relevance threshold")
    order = {name: i for i, name in enumerate(names)}
    survivors = set(kept)
    for name in sorted(kept, key=lambda f: (relevance[f], order[f])):
        col = summary[:, names.index(name)]
        for other in survivors:
            if other == name:
                continue
            if abs(_safe_corr(col, summary[:, names.index(other)])) > redundancy_max:
                survivors.discard(name)
                break
    if not survivors:
        raise EmptyResult("all features dropped as redundant")
    return tuple(name for name in names if name in survivors)


def permutation_importance(
    params: nn.NetworkParams,
    pm: ProcessedMatrix,
    labels=None,
    repeats: int = 5,
    seed: int = 0,
) -> dict[str, float]:
    """Mean accuracy drop when a feature's whole processed block is permuted."""
    if params.spec.input_width != pm.width:
        raise LayoutMismatch("model input width does not match matrix layout")
    y = np.asarray(pm.labels if labels is None else labels)
    rng = np.random.default_rng(seed)
    base_acc = float(np.mean((nn.predict_proba(params, pm.X) >= 0.5) == (y == 1)))
    importances = {}
    for name in pm.source_features():
        cols = pm.feature_columns(name)
        drops = []
        for _ in range(repeats):
            perm = rng.permutation(pm.X.shape[0])
            shuffled = pm.X.copy()
            shuffled[:, cols] = pm.X[perm][:, cols]
            acc = float(np.mean((nn.predict_proba(params, shuffled) >= 0.5) == (y == 1)))
            drops.append(base_acc - acc)
        importances[name] = float(np.mean(drops))
    return importances


def select_importance(
    importances: dict[str, float],
    threshold_fraction: float = 0.2,
    manifest_order: list[str] | None = None,
) -> tuple[str, ...]:
    if not (0.0 < threshold_fraction <= 1.0):
        raise ValueError("threshold_fraction must lie in (0, 1]")
    names = manifest_order or list(importances)
    top = max(importances.values())
    kept = [name for name in names if importances[name] >= threshold_fraction * top]
    if not kept:
        raise EmptyResult("no feature reaches the importance threshold")
    return tuple(kept)


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-np.clip(v, -60, 60)))


def _repair(mask: np.ndarray, rng) -> None:
    if not mask.any():
        mask[rng.integers(0, len(mask))] = True


def select_bpso(fitness, d_source: int, cfg: SwarmConfig = SwarmConfig()) -> SwarmRun:
    """Binary PSO with sigmoid bit sampling; returns the global best mask."""
    if d_source < 1:
        raise ValueError("d_source must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    pop, d = cfg.population, d_source
    x = rng.integers(0, 2, size=(pop, d)).astype(bool)
    for row in x:
        _repair(row, rng)
    v = rng.uniform(-1.0, 1.0, size=(pop, d))
    scores = np.array([fitness(row) for row in x])
    pbest = x.copy()
    pbest_scores = scores.copy()
    g = int(np.argmax(pbest_scores))
    gbest = pbest[g].copy()
    gbest_score = float(pbest_scores[g])
    history = [gbest_score]
    for it in range(cfg.iterations):
        frac = it / max(cfg.iterations - 1, 1)
        w = cfg.w_start + (cfg.w_end - cfg.w_start) * frac
        r1 = rng.random((pop, d))
        r2 = rng.random((pop, d))
        v = (
            w * v
            + cfg.c1 * r1 * (pbest.astype(float) - x.astype(float))
            + cfg.c2 * r2 * (gbest.astype(float) - x.astype(float))
        )
        np.clip(v, -cfg.v_max, cfg.v_max, out=v)
        x = rng.random((pop, d)) < _sigmoid(v)
        for i in range(pop):
            _repair(x[i], rng)
            score = fitness(x[i])
            if score > pbest_scores[i]:
                pbest[i] = x[i].copy()
                pbest_scores[i] = score
                if score > gbest_score:
                    gbest = x[i].copy()
                    gbest_score = float(score)
        history.append(gbest_score)
    return SwarmRun(gbest, gbest_score, tuple(history))


def select_bwoa(fitness, d_source: int, cfg: SwarmConfig = SwarmConfig()) -> SwarmRun:
    """Binary whale optimization: encircling/search and spiral moves on a
    continuous state, sigmoid bit sampling, elitist best-mask bookkeeping."""
    if d_source < 1:
        raise ValueError("d_source must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    pop, d = cfg.population, d_source
    x = rng.uniform(-1.0, 1.0, size=(pop, d))

    def binarize(row):
        mask = rng.random(d) < _sigmoid(row)
        _repair(mask, rng)
        return mask

    def anchor(mask):
        # saturate the leader's continuous state so bits sampled near it stay
        # close to the best mask (flip probability sigmoid(-4) ~ 1.8% per bit)
        return np.where(mask, 4.0, -4.0)

    masks = [binarize(x[i]) for i in range(pop)]
    scores = np.array([fitness(m) for m in masks])
    best_i = int(np.argmax(scores))
    best_mask = masks[best_i].copy()
    best_score = float(scores[best_i])
    best_x = anchor(best_mask)
    history = [best_score]
    for it in range(cfg.iterations):
        a = 2.0 * (1.0 - it / max(cfg.iterations - 1, 1))
        for i in range(pop):
            p = rng.random()
            if p < 0.5:
                A = 2.0 * a * rng.random() - a
                C = 2.0 * rng.random(d)
                if abs(A) < 1.0:
                    target = best_x
                else:
                    target = x[int(rng.integers(0, pop))]
                D = np.abs(C * target - x[i])
                x[i] = target - A * D
            else:
                l = rng.uniform(-1.0, 1.0)
                D = np.abs(best_x - x[i])
                x[i] = D * np.exp(cfg.b * l) * np.cos(2.0 * np.pi * l) + best_x
            np.clip(x[i], -10.0, 10.0, out=x[i])
            mask = binarize(x[i])
            score = fitness(mask)
            if score > best_score:
                best_score = float(score)
                best_mask = mask.copy()
                best_x = anchor(best_mask)
        history.append(best_score)
    return SwarmRun(best_mask, best_score, tuple(history))


def objective(p_j: float, d_j: int, d_total: int, alpha: float = DEFAULT_ALPHA) -> float:
    """alpha * P + (1 - alpha) * (1 - d/d_total)."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if not (1 <= d_j <= d_total):
        raise ValueError("d_j must lie in [1, d_total]")
    return alpha * p_j + (1.0 - alpha) * (1.0 - d_j / d_total)


def choose_selector(results: list[SelectorResult]) -> SelectorResult:
    """Argmax of the objective; ties broken by smaller d_j, then method order."""
    if not results:
        raise ValueError("need at least one selector result")
    return min(results, key=lambda r: (-r.objective, r.d_j, METHODS.index(r.method)))


def project(pm: ProcessedMatrix, selected) -> ProcessedMatrix:
    """Keep processed columns whose source feature is selected, order preserved."""
    selected = set(selected)
    unknown = selected - set(pm.source_features())
    if unknown:
        raise UnknownFeature(f"unknown source features: {sorted(unknown)}")
    cols = [i for i, (src, _) in enumerate(pm.column_map) if src in selected]
    return ProcessedMatrix(
        X=pm.X[:, cols],
        column_map=tuple(pm.column_map[i] for i in cols),
        labels=pm.labels,
        ids=pm.ids,
    )


# -- baseline model used to score candidate subsets -------------------------

@dataclass(frozen=True)
class BaselineConfig:
    hidden_units: int = 64
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 64
    seed: int = 0

    def train_config(self) -> nn.TrainConfig:
        return nn.TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )


def train_baseline(X: np.ndarray, y: np.ndarray, cfg: BaselineConfig = BaselineConfig()) -> nn.NetworkParams:
    spec = nn.NetworkSpec(X.shape[1], (nn.LayerSpec(cfg.hidden_units, 0.0),))
    params, _ = nn.train(spec, cfg.train_config(), X, np.asarray(y, dtype=float))
    return params


def baseline_validation_accuracy(
    train_pm: ProcessedMatrix,
    val_pm: ProcessedMatrix,
    selected,
    cfg: BaselineConfig = BaselineConfig(),
) -> float:
    tr = project(train_pm, selected)
    vd = project(val_pm, selected)
    params = train_baseline(tr.X, tr.labels, cfg)
    probs = nn.predict_proba(params, vd.X)
    return float(np.mean((probs >= 0.5) == (vd.labels == 1)))


class MaskFitness:
    """J_FS fitness over source-feature masks, caching baseline trainings."""

    def __init__(self, train_pm, val_pm, alpha=DEFAULT_ALPHA, baseline=BaselineConfig()):
        self.train_pm = train_pm
        self.val_pm = val_pm
        self.alpha = alpha
        self.baseline = baseline
        self.names = train_pm.source_features()
        self._cache: dict[bytes, tuple[float, float]] = {}

    def _evaluate(self, mask: np.ndarray) -> tuple[float, float]:
        key = np.packbits(mask).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        selected = [n for n, bit in zip(self.names, mask) if bit]
        p = baseline_validation_accuracy(self.train_pm, self.val_pm, selected, self.baseline)
        j = objective(p, len(selected), len(self.names), self.alpha)
        self._cache[key] = (p, j)
        return p, j

    def __call__(self, mask: np.ndarray) -> float:
        return self._evaluate(mask)[1]

    def validation_score(self, mask: np.ndarray) -> float:
        return self._evaluate(mask)[0]
