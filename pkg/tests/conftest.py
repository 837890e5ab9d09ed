"""Shared fixtures: fitted pipelines on simulated data, reused across
unit-test modules and the acceptance suite to keep the run affordable."""

import time

import pytest

from tailboost.benchmark import default_boost_config, gen_model1, gen_model2
from tailboost.boost import BoostConfig, fit_boosted_gpd
from tailboost.forest import ForestConfig, fit_quantile_forest
from tailboost.pipeline import ExtremeQuantileModel, compute_exceedances
from tailboost.tuning import cv_deviance
from tailboost.util import rng_from

TAU0 = 0.8


@pytest.fixture(scope="session")
def m1_fit():
    """One step-scale dataset (n=2000, d=40) with a fully fitted pipeline.

    Default boosting settings; the tree count is selected by 5-fold
    cross-validation and the boosted model truncated to it.
    """
    X, Y, truth = gen_model1(2000, seed=2024)
    forest = fit_quantile_forest(X, Y, ForestConfig(seed=2025))
    z = compute_exceedances(forest, Y, TAU0)
    cfg = BoostConfig(n_trees=500, seed=11)
    full = fit_boosted_gpd(X, z, cfg)
    curve = cv_deviance(X, z, cfg, folds=5, repeats=1, seed=13, jobs=2)
    boosted = full.truncated(curve.selected_b)
    model = ExtremeQuantileModel(forest=forest, boosted=boosted, tau0=TAU0)
    return {
        "X": X, "Y": Y, "truth": truth, "forest": forest, "z": z,
        "model": model, "boosted_full": full, "cv_curve": curve,
    }


@pytest.fixture(scope="session")
def iid_exp_forest():
    """No-signal data: exponential responses, 5 uniform noise covariates."""
    rng = rng_from(55)
    n = 2000
    X = rng.uniform(-1.0, 1.0, size=(n, 5))
    Y = rng.exponential(1.0, size=n)
    forest = fit_quantile_forest(X, Y, ForestConfig(n_trees=300, seed=56))
    return X, Y, forest


@pytest.fixture(scope="session")
def model2_fit():
    """Varying-shape dataset (n=5000, d=10) fitted at depths (3, 1) with a
    cross-validated tree count."""
    t0 = time.time()
    X, Y, truth = gen_model2(5000, seed=42)
    forest = fit_quantile_forest(X, Y, ForestConfig(seed=43))
    z = compute_exceedances(forest, Y, TAU0)
    cfg = default_boost_config(2, n_trees=500)
    full = fit_boosted_gpd(X, z, cfg)
    curve = cv_deviance(X, z, cfg, folds=5, repeats=1, seed=44, jobs=2)
    boosted = full.truncated(curve.selected_b)
    model = ExtremeQuantileModel(forest=forest, boosted=boosted, tau0=TAU0)
    return {"X": X, "Y": Y, "truth": truth, "z": z, "model": model,
            "elapsed": time.time() - t0}
