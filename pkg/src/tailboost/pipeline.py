"""End-to-end extreme quantile prediction.

Stage 1 fits a quantile forest to estimate the intermediate conditional
quantile used as a covariate-dependent threshold; exceedances at training
points are taken against out-of-bag threshold estimates.  Stage 2 boosts
GPD parameters on the rows with positive exceedances.  Predictions combine
the forest threshold (full-forest weights) with the tail extrapolation.
"""

from dataclasses import dataclass

import numpy as np

from . import gpd
from .boost import BoostConfig, BoostedGpd, fit_boosted_gpd
from .errors import PreconditionError
from .forest import ForestConfig, QuantileForest, fit_quantile_forest

DEFAULT_TAU0 = 0.8


@dataclass(frozen=True)
class ExtremeQuantileModel:
    forest: QuantileForest
    boosted: BoostedGpd
    tau0: float
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.tau0 < 1.0:
            raise ValueError("tau0 must be strictly between 0 and 1")

    def threshold_quantile(self, Xq) -> np.ndarray:
        return self.forest.predict_quantile(Xq, self.tau0)

    def predict_quantile(self, Xq, tau) -> np.ndarray:
        """Extreme conditional quantile at tau >= tau0; tau scalar or 1-d.

        Returns (nq,) for scalar tau, else (nq, len(tau)).  Equals the
        forest's intermediate quantile exactly at tau == tau0.
        """
        scalar = np.ndim(tau) == 0
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any(taus < self.tau0):
            raise ValueError("tau is below the threshold level tau0")
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        q0 = self.threshold_quantile(Xq)
        sig, gam = self.boosted.predict_params(Xq, floored=True)
        out = np.empty((Xq.shape[0], taus.size))
        for j, t in enumerate(taus):
            out[:, j] = gpd.extreme_quantile(q0, sig, gam, self.tau0, t)
        return out[:, 0] if scalar else out


def compute_exceedances(forest: QuantileForest, y, tau0: float) -> np.ndarray:
    """(y - OOB threshold)_+ at every training row of the fitted forest."""
    y = np.asarray(y, dtype=float)
    if y.size != forest.y.size:
        raise PreconditionError("y must match the forest's training responses")
    threshold = forest.oob_quantiles(tau0)
    return np.maximum(0.0, y - threshold)


def fit_extreme_model(
    X,
    y,
    tau0: float = DEFAULT_TAU0,
    forest_config: ForestConfig | None = None,
    boost_config: BoostConfig | None = None,
    theta0: gpd.GpdParams | None = None,
    feature_names=None,
) -> ExtremeQuantileModel:
    """Fit threshold forest, build exceedances, boost GPD on positive rows."""
    if not 0.0 < tau0 < 1.0:
        raise ValueError("tau0 must be strictly between 0 and 1")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    forest_config = forest_config or ForestConfig()
    boost_config = boost_config or BoostConfig()
    forest = fit_quantile_forest(X, y, forest_config)
    z = compute_exceedances(forest, y, tau0)
    pos = z > 0
    boosted = fit_boosted_gpd(X[pos], z[pos], boost_config, theta0=theta0)
    return ExtremeQuantileModel(
        forest=forest,
        boosted=boosted,
        tau0=float(tau0),
        feature_names=tuple(feature_names) if feature_names is not None else None,
    )
