"""Cross-validation curves, importance measures, partial dependence."""

import numpy as np
import pytest

from tailboost import gpd
from tailboost.boost import BoostConfig, fit_boosted_gpd
from tailboost.tuning import (
    cv_deviance,
    importance_report,
    partial_dependence,
    permutation_importance,
    relative_importance,
    select_depths,
)
from tailboost.util import rng_from

from test_boost import synthetic_exceedances


class TestCvDeviance:
    def test_leave_one_out_b0_unrolled(self):
        X, z = synthetic_exceedances(n=25, d=2, seed=11)
        cfg = BoostConfig(n_trees=0)
        curve = cv_deviance(X, z, cfg, folds=25, repeats=1, seed=5, fold_seeds=[5])
        manual = 0.0
        perm = rng_from(5).permutation(25)
        for test_idx in np.array_split(perm, 25):
            mask = np.ones(25, dtype=bool)
            mask[test_idx] = False
            theta = gpd.fit_unconditional_mle(z[mask])
            manual += gpd.total_deviance(z[test_idx], theta.sigma, theta.gamma)
        assert curve.dev.shape == (1,)
        assert curve.dev[0] == pytest.approx(manual, rel=1e-9)

    def test_repeats_with_identical_fold_seeds_double_the_curve(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=12)
        cfg = BoostConfig(n_trees=15, seed=2)
        one = cv_deviance(X, z, cfg, folds=4, repeats=1, fold_seeds=[9])
        two = cv_deviance(X, z, cfg, folds=4, repeats=2, fold_seeds=[9, 9])
        assert np.allclose(two.dev, 2.0 * one.dev, rtol=0, atol=1e-9)

    def test_deterministic(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=13)
        cfg = BoostConfig(n_trees=10, seed=4)
        a = cv_deviance(X, z, cfg, folds=4, repeats=2, seed=3)
        b = cv_deviance(X, z, cfg, folds=4, repeats=2, seed=3)
        assert np.array_equal(a.dev, b.dev)

    def test_argmin_stable_under_constant_shift(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=14)
        curve = cv_deviance(X, z, BoostConfig(n_trees=20, seed=1), folds=4, repeats=1, seed=2)
        shifted = curve.dev + 5.0
        assert int(np.argmin(shifted)) == curve.selected_b

    def test_tie_break_smallest_b(self):
        from tailboost.tuning import CvCurve

        curve = CvCurve(1, 0, BoostConfig(n_trees=3), dev=np.array([2.0, 1.0, 1.0, 3.0]))
        assert curve.selected_b == 1

    def test_fold_precondition(self):
        X, z = synthetic_exceedances(n=24, d=2, seed=15)
        with pytest.raises(Exception):
            cv_deviance(X, z, BoostConfig(n_trees=5), folds=2, repeats=1, seed=1)

    def test_parallel_matches_serial(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=16)
        cfg = BoostConfig(n_trees=12, seed=8)
        a = cv_deviance(X, z, cfg, folds=4, repeats=1, seed=6, jobs=1)
        b = cv_deviance(X, z, cfg, folds=4, repeats=1, seed=6, jobs=2)
        assert np.array_equal(a.dev, b.dev)


class TestSelectDepths:
    def test_single_entry_equals_cv_deviance(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=17)
        cfg = BoostConfig(n_trees=15, seed=3)
        depths, b, curves = select_depths(X, z, [(1, 0)], cfg, folds=4, repeats=1, seed=9)
        direct = cv_deviance(
            X, z, BoostConfig(n_trees=15, seed=3, depth_sigma=1, depth_gamma=0),
            folds=4, repeats=1, seed=9,
        )
        assert depths == (1, 0)
        assert b == direct.selected_b
        assert np.array_equal(curves[0].dev, direct.dev)

    def test_duplicate_entries_same_selection(self):
        X, z = synthetic_exceedances(n=120, d=3, seed=18)
        cfg = BoostConfig(n_trees=10, seed=5)
        d1, b1, _ = select_depths(X, z, [(1, 0), (1, 0), (1, 0)], cfg, folds=4, repeats=1, seed=4)
        d2, b2, _ = select_depths(X, z, [(1, 0)], cfg, folds=4, repeats=1, seed=4)
        assert (d1, b1) == (d2, b2)


class TestPermutationImportance:
    def test_constant_column_exactly_zero(self):
        X, z = synthetic_exceedances(n=300, d=4, seed=19)
        X = np.column_stack([X, np.full(300, 3.0)])  # unsplittable column
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=40, seed=2))
        scores = permutation_importance(m, X, z, seed=1)
        assert scores[-1] == 0.0
        assert scores.max() == pytest.approx(100.0)

    def test_b_zero_all_scores_zero(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=20)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=0))
        scores = permutation_importance(m, X, z, seed=1)
        assert np.all(scores == 0.0)

    def test_signal_feature_top_scored(self, m1_fit):
        report = importance_report(
            m1_fit["model"].boosted, m1_fit["X"], m1_fit["z"], seed=3
        )
        assert int(np.argmax(report.permutation)) == 0
        assert report.permutation[0] == pytest.approx(100.0)


class TestRelativeImportance:
    def test_b_zero_all_zero(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=21)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=0))
        rel_s, rel_g = relative_importance(m)
        assert np.all(rel_s == 0.0) and np.all(rel_g == 0.0)

    def test_unsplit_features_exactly_zero(self):
        # only feature 2 varies, so only it can ever be split on
        rng = rng_from(22)
        n = 300
        X = np.zeros((n, 4))
        X[:, 2] = rng.uniform(-1, 1, size=n)
        sigma = 1.0 + (X[:, 2] > 0)
        z = gpd.gpd_quantile(rng.random(n), sigma, 0.2)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=30, depth_sigma=1, depth_gamma=1, seed=7))
        rel_s, rel_g = relative_importance(m)
        for j in (0, 1, 3):
            assert rel_s[j] == 0.0 and rel_g[j] == 0.0
        perm = permutation_importance(m, X, z, seed=2)
        for j in (0, 1, 3):
            assert perm[j] == 0.0

    def test_signal_split_gains_dominate(self, m1_fit):
        rel_s, _ = relative_importance(m1_fit["model"].boosted)
        assert int(np.argmax(rel_s)) == 0


class TestPartialDependence:
    def test_constant_model_constant_curve(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=23)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=0))
        grid = np.linspace(-1, 1, 11)
        vals = partial_dependence(m, X, 0, grid, output="sigma")
        assert np.ptp(vals) == 0.0
        assert vals[0] == pytest.approx(m.theta0.sigma, abs=1e-12)

    def test_depth_zero_model_constant_curve(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=24)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=25, depth_sigma=0, depth_gamma=0, seed=1))
        for out in ("sigma", "gamma"):
            vals = partial_dependence(m, X, 1, np.linspace(-1, 1, 7), output=out)
            assert np.ptp(vals) == 0.0

    def test_unsplit_feature_constant_curve(self):
        rng = rng_from(25)
        n = 300
        X = np.zeros((n, 3))
        X[:, 1] = rng.uniform(-1, 1, size=n)
        z = gpd.gpd_quantile(rng.random(n), 1.0 + (X[:, 1] > 0), 0.2)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=20, seed=3))
        vals = partial_dependence(m, X, 0, np.linspace(-5, 5, 9), output="sigma")
        assert np.ptp(vals) == 0.0

    def test_step_scale_sigma_curve(self, m1_fit):
        model = m1_fit["model"]
        grid = np.linspace(-1, 1, 20)
        vals = partial_dependence(model, m1_fit["X"], 0, grid, output="sigma")
        assert vals[grid > 0].mean() > vals[grid < 0].mean()

    def test_two_feature_surface_shape(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=26)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=10, seed=2))
        surf = partial_dependence(m, X, (0, 1), (np.linspace(-1, 1, 4), np.linspace(-1, 1, 3)))
        assert surf.shape == (4, 3)

    def test_quantile_output_requires_pipeline_model(self):
        X, z = synthetic_exceedances(n=200, d=3, seed=27)
        m = fit_boosted_gpd(X, z, BoostConfig(n_trees=5, seed=1))
        with pytest.raises(ValueError):
            partial_dependence(m, X, 0, np.linspace(-1, 1, 3), output="quantile")


@pytest.mark.slow
class TestVaryingShapeImportancePattern:
    def test_scale_and_shape_importance_split_by_feature(self, model2_fit):
        """Features 1 and 2 drive the scale surface; only feature 1 drives
        the shape surface (generator design)."""
        rel_s, rel_g = relative_importance(model2_fit["model"].boosted)
        assert set(np.argsort(rel_s)[-2:]) == {0, 1}
        assert int(np.argmax(rel_g)) == 0


@pytest.mark.slow
class TestDepthSelectionOnStepScaleModel:
    def test_additive_depths_preferred(self):
        """The step-scale generator is additive: CV should prefer shallow
        depth pairs on most of a few seeded datasets."""
        from tailboost.benchmark import gen_model1
        from tailboost.forest import ForestConfig, fit_quantile_forest
        from tailboost.pipeline import compute_exceedances

        grid = [(1, 0), (1, 1), (2, 1), (2, 2)]
        hits = 0
        for seed in range(3):
            X, Y, _ = gen_model1(2000, seed=900 + seed)
            forest = fit_quantile_forest(X, Y, ForestConfig(n_trees=300, seed=910 + seed))
            z = compute_exceedances(forest, Y, 0.8)
            cfg = BoostConfig(n_trees=400, learning_rate_ratio=15.0, seed=920 + seed)
            depths, _, _ = select_depths(X, z, grid, cfg, folds=5, repeats=1,
                                         seed=930 + seed, jobs=2)
            hits += depths in ((1, 0), (1, 1))
        assert hits >= 2
