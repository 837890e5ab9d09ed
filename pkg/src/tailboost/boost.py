"""Gradient boosting of GPD scale and shape on exceedances.

Two tree sequences are grown in parallel, one per parameter.  Each
iteration draws a subsample of the positive exceedances, evaluates the
deviance derivatives at the current parameter surfaces, fits one gradient
tree per parameter with truncated Newton leaf values, and adds the
shrunken trees to the model.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import gpd
from .errors import PreconditionError
from .tree import Tree, fit_gradient_tree
from .util import rng_from

MIN_POSITIVE_EXCEEDANCES = 20

# Evaluation-time floor on the boosted scale, as a fraction of the initial
# estimate.  The additive tree representation itself is never altered.
SIGMA_FLOOR_FRACTION = 1e-4


@dataclass(frozen=True)
class BoostConfig:
    """Hyperparameters of the two boosting sequences.

    ``learning_rate`` applies to the scale trees; the shape trees use
    ``learning_rate / learning_rate_ratio``.  ``min_leaf_sigma/gamma``
    default to max(10, n/100) resolved against the fitted sample.
    """

    n_trees: int = 500
    depth_sigma: int = 2
    depth_gamma: int = 1
    learning_rate: float = 0.01
    learning_rate_ratio: float = 7.0
    subsample_fraction: float = 0.75
    min_leaf_sigma: int | None = None
    min_leaf_gamma: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0 or self.depth_sigma < 0 or self.depth_gamma < 0:
            raise ValueError("n_trees and depths must be nonnegative")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError("learning_rate must be in (0, 1)")
        if self.learning_rate_ratio <= 0:
            raise ValueError("learning_rate_ratio must be positive")
        if not 0.0 < self.lr_gamma < 1.0:
            raise ValueError("shape learning rate must land in (0, 1)")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")

    @property
    def lr_sigma(self) -> float:
        return self.learning_rate

    @property
    def lr_gamma(self) -> float:
        return self.learning_rate / self.learning_rate_ratio

    def resolve_min_leaf(self, n: int) -> tuple[int, int]:
        default = max(10, int(round(n / 100)))
        ms = default if self.min_leaf_sigma is None else self.min_leaf_sigma
        mg = default if self.min_leaf_gamma is None else self.min_leaf_gamma
        return ms, mg


@dataclass(frozen=True)
class BoostedGpd:
    """Fitted model: theta0 plus shrunken tree sequences for (sigma, gamma).

    ``predict_params`` returns the raw additive decomposition
    theta0 + lr * sum(tree values); the evaluation-time sigma floor is
    applied by every likelihood/quantile consumer (``floored=True``).
    """

    theta0: gpd.GpdParams
    trees_sigma: tuple[Tree, ...]
    trees_gamma: tuple[Tree, ...]
    config: BoostConfig
    n_features: int
    sigma_floor: float
    training_deviance: np.ndarray = field(repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees_sigma)

    def predict_params(self, X, stage: int | None = None, floored: bool = False):
        """(sigma, gamma) arrays at the given boosting stage (default: all trees)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        stage = self.n_trees if stage is None else int(stage)
        if not 0 <= stage <= self.n_trees:
            raise ValueError(f"stage must be in [0, {self.n_trees}]")
        sig = np.full(X.shape[0], self.theta0.sigma)
        gam = np.full(X.shape[0], self.theta0.gamma)
        for b in range(stage):
            sig += self.config.lr_sigma * self.trees_sigma[b].predict(X)
            gam += self.config.lr_gamma * self.trees_gamma[b].predict(X)
        if floored:
            sig = np.maximum(sig, self.sigma_floor)
        return sig, gam

    def staged_deviance(self, X, z) -> np.ndarray:
        """Total deviance after 0..B trees, accumulated in one pass."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = np.asarray(z, dtype=float)
        sig = np.full(X.shape[0], self.theta0.sigma)
        gam = np.full(X.shape[0], self.theta0.gamma)
        out = np.empty(self.n_trees + 1)
        out[0] = gpd.total_deviance(z, np.maximum(sig, self.sigma_floor), gam)
        for b in range(self.n_trees):
            sig += self.config.lr_sigma * self.trees_sigma[b].predict(X)
            gam += self.config.lr_gamma * self.trees_gamma[b].predict(X)
            out[b + 1] = gpd.total_deviance(z, np.maximum(sig, self.sigma_floor), gam)
        return out

    def truncated(self, stage: int) -> "BoostedGpd":
        """Model using only the first ``stage`` trees of each sequence."""
        stage = int(stage)
        if not 0 <= stage <= self.n_trees:
            raise ValueError(f"stage must be in [0, {self.n_trees}]")
        return replace(
            self,
            trees_sigma=self.trees_sigma[:stage],
            trees_gamma=self.trees_gamma[:stage],
            config=replace(self.config, n_trees=stage),
            training_deviance=self.training_deviance[: stage + 1],
        )


def fit_boosted_gpd(X, z, config: BoostConfig, theta0: gpd.GpdParams | None = None) -> BoostedGpd:
    """Fit the two boosting sequences on rows with positive exceedances.

    Rows with z == 0 carry no likelihood information and are dropped before
    subsampling.  theta0 defaults to the unconditional maximum-likelihood
    estimate on the positive exceedances.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    if X.shape[0] != z.size:
        raise PreconditionError("X and z must have matching length")
    pos = z > 0
    n_pos = int(pos.sum())
    if n_pos < MIN_POSITIVE_EXCEEDANCES:
        raise PreconditionError(
            f"need at least {MIN_POSITIVE_EXCEEDANCES} positive exceedances, got {n_pos}"
        )
    Xp = X[pos]
    zp = z[pos]
    if theta0 is None:
        theta0 = gpd.fit_unconditional_mle(zp)
    sigma_floor = SIGMA_FLOOR_FRACTION * theta0.sigma
    min_leaf_sigma, min_leaf_gamma = config.resolve_min_leaf(n_pos)
    m = int(np.floor(config.subsample_fraction * n_pos))

    sig = np.full(n_pos, theta0.sigma)
    gam = np.full(n_pos, theta0.gamma)
    trees_sigma: list[Tree] = []
    trees_gamma: list[Tree] = []
    train_dev = np.empty(config.n_trees + 1)
    train_dev[0] = gpd.total_deviance(zp, np.maximum(sig, sigma_floor), gam)

    for b in range(1, config.n_trees + 1):
        rng = rng_from(config.seed, b)
        rows = rng.permutation(n_pos)[:m]
        sig_b = np.maximum(sig[rows], sigma_floor)
        gam_b = gam[rows]
        gs, gg = gpd.deviance_grad(zp[rows], sig_b, gam_b)
        hs, hg = gpd.deviance_hessian_diag(zp[rows], sig_b, gam_b)
        t_sigma = fit_gradient_tree(Xp[rows], gs, hs, config.depth_sigma, min_leaf_sigma)
        t_gamma = fit_gradient_tree(Xp[rows], gg, hg, config.depth_gamma, min_leaf_gamma)
        sig += config.lr_sigma * t_sigma.predict(Xp)
        gam += config.lr_gamma * t_gamma.predict(Xp)
        trees_sigma.append(t_sigma)
        trees_gamma.append(t_gamma)
        train_dev[b] = gpd.total_deviance(zp, np.maximum(sig, sigma_floor), gam)

    return BoostedGpd(
        theta0=theta0,
        trees_sigma=tuple(trees_sigma),
        trees_gamma=tuple(trees_gamma),
        config=config,
        n_features=X.shape[1],
        sigma_floor=sigma_floor,
        training_deviance=train_dev,
    )
