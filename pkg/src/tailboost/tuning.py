"""Model selection and diagnostics for the boosted GPD model.

Repeated K-fold cross-validation of the deviance selects the tree count
(and optionally the depth pair); permutation and split-gain importances
rank features; partial dependence sweeps one or two features through the
training rows.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import gpd
from .boost import BoostConfig, BoostedGpd, fit_boosted_gpd
from .errors import PreconditionError
from .parallel import parallel_map
from .pipeline import ExtremeQuantileModel
from .util import rng_from

DEFAULT_FOLDS = 5
DEFAULT_REPEATS = 5


@dataclass(frozen=True)
class CvCurve:
    """Cross-validation deviance as a function of the tree count."""

    depth_sigma: int
    depth_gamma: int
    config: BoostConfig
    dev: np.ndarray

    @property
    def selected_b(self) -> int:
        return int(np.argmin(self.dev))  # first minimum: smallest B on ties

    @property
    def selected_dev(self) -> float:
        return float(self.dev[self.selected_b])


def _derived_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _cv_task(args):
    X_train, z_train, X_test, z_test, config = args
    model = fit_boosted_gpd(X_train, z_train, config)
    return model.staged_deviance(X_test, z_test)


def cv_deviance(
    X,
    z,
    config: BoostConfig,
    folds: int = DEFAULT_FOLDS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    fold_seeds=None,
    jobs: int = 1,
) -> CvCurve:
    """Summed held-out deviance after 0..n_trees trees.

    Rows with z == 0 are dropped before folding (they carry no deviance).
    Each repeat partitions the positive rows into ``folds`` folds; fits on
    each complement re-estimate theta0 and use a seed derived from the
    repeat's fold seed, so repeats with identical fold seeds contribute
    identical curves.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    pos = z > 0
    Xp, zp = X[pos], z[pos]
    n = zp.size
    if folds < 2 or folds > n:
        raise PreconditionError(f"folds must be in [2, {n}]")
    if fold_seeds is None:
        fold_seeds = [_derived_seed(seed, r) for r in range(repeats)]
    if len(fold_seeds) != repeats:
        raise ValueError("fold_seeds must have one entry per repeat")

    tasks = []
    for fold_seed in fold_seeds:
        perm = rng_from(fold_seed).permutation(n)
        for k, test_idx in enumerate(np.array_split(perm, folds)):
            mask = np.ones(n, dtype=bool)
            mask[test_idx] = False
            if mask.sum() < 20:
                raise PreconditionError(
                    "training complement of a fold has fewer than 20 positive exceedances"
                )
            fit_config = replace(config, seed=_derived_seed(fold_seed, k))
            tasks.append((Xp[mask], zp[mask], Xp[test_idx], zp[test_idx], fit_config))

    curves = parallel_map(_cv_task, tasks, jobs=jobs)
    dev = np.sum(curves, axis=0)
    return CvCurve(config.depth_sigma, config.depth_gamma, config, dev)


def select_depths(
    X,
    z,
    depth_grid,
    config: BoostConfig,
    folds: int = DEFAULT_FOLDS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    jobs: int = 1,
):
    """CV over a grid of (depth_sigma, depth_gamma); global (config, B) minimizer.

    Returns ((depth_sigma, depth_gamma), selected_b, curves).  All grid
    entries share the same seed and therefore identical fold partitions.
    """
    if not depth_grid:
        raise ValueError("depth_grid must be nonempty")
    curves = []
    best = None
    for ds, dg in depth_grid:
        curve = cv_deviance(
            X, z, replace(config, depth_sigma=int(ds), depth_gamma=int(dg)),
            folds=folds, repeats=repeats, seed=seed, jobs=jobs,
        )
        curves.append(curve)
        if best is None or curve.selected_dev < best.selected_dev:
            best = curve
    return (best.depth_sigma, best.depth_gamma), best.selected_b, curves


@dataclass(frozen=True)
class ImportanceReport:
    """Permutation scores and per-parameter split-gain sums, max scaled to 100."""

    permutation: np.ndarray
    permutation_raw: np.ndarray
    relative_sigma: np.ndarray
    relative_gamma: np.ndarray


def _normalize_max_100(raw: np.ndarray) -> np.ndarray:
    m = raw.max() if raw.size else 0.0
    if m > 0:
        return raw * (100.0 / m)
    return raw.copy()


def _permutation_raw(model: BoostedGpd, X, z, seed: int) -> np.ndarray:
    sig, gam = model.predict_params(X, floored=True)
    base = gpd.total_deviance(z, sig, gam)
    rng = rng_from(seed)
    raw = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        perm = rng.permutation(X.shape[0])
        Xj = X.copy()
        Xj[:, j] = X[perm, j]
        sj, gj = model.predict_params(Xj, floored=True)
        raw[j] = gpd.total_deviance(z, sj, gj) - base
    return raw


def permutation_importance(model: BoostedGpd, X, z, seed: int = 0) -> np.ndarray:
    """Deviance increase from shuffling each feature column, max scaled to 100.

    Features absent from every split leave predictions unchanged, so their
    score is exactly zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    return _normalize_max_100(_permutation_raw(model, X, z, seed))


def relative_importance(model: BoostedGpd):
    """Per-feature sums of split RSS decrease for each tree sequence,
    normalized to max 100 within each parameter."""
    d = model.n_features
    sig_raw = np.zeros(d)
    gam_raw = np.zeros(d)
    for t in model.trees_sigma:
        sig_raw += t.split_feature_totals(d)
    for t in model.trees_gamma:
        gam_raw += t.split_feature_totals(d)
    return _normalize_max_100(sig_raw), _normalize_max_100(gam_raw)


def importance_report(model: BoostedGpd, X, z, seed: int = 0) -> ImportanceReport:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    raw = _permutation_raw(model, X, z, seed)
    rel_s, rel_g = relative_importance(model)
    return ImportanceReport(
        permutation=_normalize_max_100(raw),
        permutation_raw=raw,
        relative_sigma=rel_s,
        relative_gamma=rel_g,
    )


def partial_dependence(model, X, features, grid, output: str = "sigma", tau: float | None = None):
    """Mean prediction as one or two features sweep a grid of values.

    ``model`` is a fitted BoostedGpd (outputs sigma/gamma) or
    ExtremeQuantileModel (also quantile at ``tau``).  For a feature pair,
    ``grid`` must be a pair of value arrays and the result is a surface of
    shape (len(grid[0]), len(grid[1])).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
    if isinstance(features, (int, np.integer)):
        features = (int(features),)
    features = tuple(int(f) for f in features)
    if len(features) not in (1, 2):
        raise ValueError("partial dependence supports 1 or 2 features")

    if output in ("sigma", "gamma"):
        boosted = model.boosted if isinstance(model, ExtremeQuantileModel) else model
        which = 0 if output == "sigma" else 1

        def predict_mean(Xmod):
            return float(boosted.predict_params(Xmod, floored=True)[which].mean())

    elif output == "quantile":
        if not isinstance(model, ExtremeQuantileModel) or tau is None:
            raise ValueError("quantile output needs an ExtremeQuantileModel and tau")

        def predict_mean(Xmod):
            return float(model.predict_quantile(Xmod, tau).mean())

    else:
        raise ValueError(f"unknown output {output!r}")

    if len(features) == 1:
        values = np.asarray(grid, dtype=float)
        out = np.empty(values.size)
        for i, v in enumerate(values):
            X[:, features[0]] = v
            out[i] = predict_mean(X)
        return out

    g1 = np.asarray(grid[0], dtype=float)
    g2 = np.asarray(grid[1], dtype=float)
    out = np.empty((g1.size, g2.size))
    for i, v1 in enumerate(g1):
        X[:, features[0]] = v1
        for j, v2 in enumerate(g2):
            X[:, features[1]] = v2
            out[i, j] = predict_mean(X)
    return out
