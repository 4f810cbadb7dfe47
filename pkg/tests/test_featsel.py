import numpy as np
import pytest

from edysec import featsel
from edysec.dataset import generate_synthetic, split_dataset
from edysec.errors import BadK, EmptyResult, LayoutMismatch, UnknownFeature
from edysec.preprocess import Preprocessor


@pytest.fixture(scope="module")
def matrices():
    ds = generate_synthetic(300, 2, 4, seed=7)
    splits = split_dataset(ds, seed=0)
    pre = Preprocessor.fit(splits.train)
    return pre.transform(splits.train), pre.transform(splits.validation)


class TestSourceMatrix:
    def test_numeric_passthrough(self, matrices):
        train_pm, _ = matrices
        summary, names = featsel.source_matrix(train_pm)
        assert summary.shape == (train_pm.X.shape[0], len(names))
        assert np.array_equal(summary[:, 0], train_pm.X[:, 0])

    def test_text_collapses_to_norm(self):
        ds = generate_synthetic(80, 1, 2, kinds={"pattern": 1.0}, seed=3)
        pm = Preprocessor.fit(ds).transform(ds)
        summary, names = featsel.source_matrix(pm)
        cols = pm.feature_columns("noise_0")
        j = names.index("noise_0")
        assert np.allclose(summary[:, j], np.linalg.norm(pm.X[:, cols], axis=1))


class TestAnova:
    def test_informative_score_higher(self, matrices):
        train_pm, _ = matrices
        scores = featsel.anova_f_scores(train_pm)
        worst_inf = min(scores["inf_0"], scores["inf_1"])
        best_noise = max(v for k, v in scores.items() if k.startswith("noise"))
        assert worst_inf > best_noise

    def test_select_top_k(self, matrices):
        train_pm, _ = matrices
        scores = featsel.anova_f_scores(train_pm)
        top2 = featsel.select_anova(scores, 2, train_pm.source_features())
        assert set(top2) == {"inf_0", "inf_1"}
        with pytest.raises(BadK):
            featsel.select_anova(scores, 0)
        with pytest.raises(BadK):
            featsel.select_anova(scores, 99)

    def test_constant_feature(self):
        from edysec.preprocess import ProcessedMatrix

        X = np.column_stack([np.ones(10), np.arange(10.0)])
        pm = ProcessedMatrix(X, (("a", "numeric"), ("b", "numeric")), np.array([0, 1] * 5))
        scores = featsel.anova_f_scores(pm)
        assert scores["a"] == 0.0


class TestCorr:
    def test_filters_noise(self, matrices):
        train_pm, _ = matrices
        selected = featsel.select_corr(train_pm, relevance_min=0.3)
        assert set(selected) == {"inf_0", "inf_1"}

    def test_redundancy_drop(self):
        from edysec.preprocess import ProcessedMatrix

        rng = np.random.default_rng(0)
        y = np.array([0, 1] * 50)
        a = y + rng.normal(0, 0.1, 100)
        b = a + rng.normal(0, 0.01, 100)  # near-duplicate, slightly weaker
        X = np.column_stack([a, b])
        pm = ProcessedMatrix(X, (("a", "numeric"), ("b", "numeric")), y)
        selected = featsel.select_corr(pm, relevance_min=0.1, redundancy_max=0.9)
        assert len(selected) == 1

    def test_empty_result(self, matrices):
        train_pm, _ = matrices
        with pytest.raises(EmptyResult):
            featsel.select_corr(train_pm, relevance_min=1.0)


class TestImportance:
    def test_permutation_recovers_signal(self, matrices):
        train_pm, val_pm = matrices
        cfg = featsel.BaselineConfig(epochs=10)
        params = featsel.train_baseline(train_pm.X, train_pm.labels, cfg)
        imp = featsel.permutation_importance(params, val_pm, repeats=3, seed=0)
        assert min(imp["inf_0"], imp["inf_1"]) > max(
            v for k, v in imp.items() if k.startswith("noise")
        )
        selected = featsel.select_importance(imp, 0.2, val_pm.source_features())
        assert {"inf_0", "inf_1"} <= set(selected)

    def test_layout_mismatch(self, matrices):
        train_pm, val_pm = matrices
        params = featsel.train_baseline(train_pm.X[:, :3], train_pm.labels, featsel.BaselineConfig(epochs=1))
        with pytest.raises(LayoutMismatch):
            featsel.permutation_importance(params, val_pm)


def bit_match(target):
    target = np.asarray(target, dtype=bool)

    def fitness(mask):
        return float(np.sum(mask == target))

    return fitness


class TestSwarms:
    def test_bpso_finds_planted_mask(self):
        target = np.zeros(12, dtype=bool)
        target[[1, 4, 7]] = True
        cfg = featsel.SwarmConfig(population=15, iterations=40, seed=0)
        run = featsel.select_bpso(bit_match(target), 12, cfg)
        assert run.fitness == 12.0
        assert np.array_equal(run.mask, target)

    def test_bwoa_finds_planted_mask(self):
        target = np.zeros(12, dtype=bool)
        target[[0, 5, 9]] = True
        cfg = featsel.SwarmConfig(population=15, iterations=40, seed=0)
        run = featsel.select_bwoa(bit_match(target), 12, cfg)
        assert run.fitness == 12.0

    def test_history_monotone_and_deterministic(self):
        target = np.ones(8, dtype=bool)
        cfg = featsel.SwarmConfig(population=8, iterations=10, seed=5)
        for runner in (featsel.select_bpso, featsel.select_bwoa):
            a = runner(bit_match(target), 8, cfg)
            b = runner(bit_match(target), 8, cfg)
            assert a.history == b.history
            assert list(a.history) == sorted(a.history)

    def test_never_empty_mask(self):
        cfg = featsel.SwarmConfig(population=6, iterations=5, seed=2)
        run = featsel.select_bpso(lambda m: -float(m.sum()), 6, cfg)
        assert run.mask.sum() >= 1


class TestObjective:
    def test_formula(self):
        assert featsel.objective(0.99, 17, 36, alpha=0.95) == pytest.approx(
            0.95 * 0.99 + 0.05 * (1 - 17 / 36)
        )

    def test_bounds(self):
        with pytest.raises(ValueError):
            featsel.objective(0.9, 0, 36)
        with pytest.raises(ValueError):
            featsel.objective(0.9, 1, 36, alpha=1.5)

    def test_choose_selector_tiebreak(self):
        a = featsel.SelectorResult("anova", ("f1",), 1, 0.9, 0.95)
        b = featsel.SelectorResult("pso", ("f1", "f2"), 2, 0.9, 0.95)
        assert featsel.choose_selector([b, a]).method == "anova"  # smaller d_j wins


class TestProject:
    def test_projection(self, matrices):
        train_pm, _ = matrices
        out = featsel.project(train_pm, ("inf_0",))
        assert out.source_features() == ["inf_0"]
        assert out.X.shape == (train_pm.X.shape[0], 1)
        assert np.array_equal(out.labels, train_pm.labels)

    def test_idempotent(self, matrices):
        train_pm, _ = matrices
        once = featsel.project(train_pm, ("inf_0", "noise_1"))
        twice = featsel.project(once, ("inf_0", "noise_1"))
        assert np.array_equal(once.X, twice.X)

    def test_unknown_feature(self, matrices):
        train_pm, _ = matrices
        with pytest.raises(UnknownFeature):
            featsel.project(train_pm, ("nope",))


class TestMaskFitness:
    def test_matches_direct_objective(self, matrices):
        train_pm, val_pm = matrices
        fit = featsel.MaskFitness(train_pm, val_pm, alpha=0.9, baseline=featsel.BaselineConfig(epochs=3))
        mask = np.array([True, True, False, False, False, False])
        p = featsel.baseline_validation_accuracy(
            train_pm, val_pm, ("inf_0", "inf_1"), featsel.BaselineConfig(epochs=3)
        )
        expect = featsel.objective(p, 2, 6, alpha=0.9)
        assert fit(mask) == pytest.approx(expect)
        assert fit.validation_score(mask) == pytest.approx(p)
