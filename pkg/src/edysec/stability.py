"""Run-to-run stability statistics: mean/std, percentile bootstrap CI, tied
average ranks, stability score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import TooFewScores


@dataclass(frozen=True)
class ScoreTable:
    models: tuple[str, ...]
    configs: tuple[str, ...]  # selector methods or seed labels
    scores: tuple[tuple[float, ...], ...]  # [model][config]

    def __post_init__(self):
        if len(self.scores) != len(self.models):
            raise ValueError("one score row per model required")
        if any(len(row) != len(self.configs) for row in self.scores):
            raise ValueError("every model needs a score for every config")

    def row(self, model: str) -> tuple[float, ...]:
        return self.scores[self.models.index(model)]


@dataclass(frozen=True)
class StabilityRow:
    model: str
    mean: float
    std: float
    ci_low: float
    ci_high: float
    avg_rank: float
    stability: float  # 1 - std

    def display(self) -> dict:
        return {
            "model": self.model,
            "mean": round(self.mean, 3),
            "std": round(self.std, 3),
            "avg_rank": round(self.avg_rank, 1),
            "ci": [round(self.ci_low, 3), round(self.ci_high, 3)],
            "stability": round(self.stability, 3),
        }


def population_std(scores) -> float:
    """Divide-by-n standard deviation."""
    scores = np.asarray(scores, dtype=float)
    if scores.size < 1:
        raise ValueError("need at least one score")
    return float(scores.std(ddof=0))


def sample_std(scores) -> float:
    """Divide-by-(n-1) standard deviation; the convention the report uses."""
    scores = np.asarray(scores, dtype=float)
    if scores.size < 2:
        return 0.0
    return float(scores.std(ddof=1))


def bootstrap_ci(scores, level: float = 0.95, resamples: int = 100_000, seed: int = 0):
    """Percentile bootstrap of the mean, deterministic per seed."""
    scores = np.asarray(scores, dtype=float)
    if scores.size < 2:
        raise TooFewScores("bootstrap needs at least two scores")
    if resamples < 1000:
        raise ValueError("use at least 1000 resamples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, scores.size, size=(resamples, scores.size))
    means = scores[idx].mean(axis=1)
    lo = (1.0 - level) / 2.0
    return float(np.quantile(means, lo)), float(np.quantile(means, 1.0 - lo))


def average_rank(table: ScoreTable) -> dict[str, float]:
    """Per-config descending ranks with tie-mean, averaged across configs."""
    scores = np.asarray(table.scores, dtype=float)
    ranks = np.empty_like(scores)
    for j in range(scores.shape[1]):
        ranks[:, j] = rankdata(-scores[:, j])
    avg = ranks.mean(axis=1)
    return {model: float(r) for model, r in zip(table.models, avg)}


def stability_report(
    table: ScoreTable,
    level: float = 0.95,
    resamples: int = 100_000,
    seed: int = 0,
) -> list[StabilityRow]:
    """One row per model, sorted by mean descending then average rank ascending."""
    ranks = average_rank(table)
    rows = []
    for model in table.models:
        scores = np.asarray(table.row(model), dtype=float)
        mean = float(scores.mean())
        std = sample_std(scores)
        if scores.size >= 2 and np.ptp(scores) > 0:
            lo, hi = bootstrap_ci(scores, level=level, resamples=resamples, seed=seed)
        else:
            lo = hi = mean
        rows.append(
            StabilityRow(
                model=model,
                mean=mean,
                std=std,
                ci_low=lo,
                ci_high=hi,
                avg_rank=ranks[model],
                stability=1.0 - std,
            )
        )
    rows.sort(key=lambda r: (-r.mean, r.avg_rank, r.model))
    return rows


def render_table(rows: list[StabilityRow]) -> str:
    """Plain-text table: Model, Mean F1, Std, Avg Rank, 95% CI, Stability."""
    header = f"{'Model':<14}{'Mean F1':>9}{'Std':>8}{'Avg Rank':>10}{'95% CI':>18}{'Stability':>11}"
    lines = [header, "-" * len(header)]
    for r in rows:
        d = r.display()
        ci = f"[{d['ci'][0]:.3f}, {d['ci'][1]:.3f}]"
        lines.append(
            f"{r.model:<14}{d['mean']:>9.3f}{d['std']:>8.3f}{d['avg_rank']:>10.1f}{ci:>18}{d['stability']:>11.3f}"
        )
    return "\n".join(lines) + "\n"
