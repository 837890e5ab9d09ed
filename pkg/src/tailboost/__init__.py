"""Extreme quantile regression by GPD gradient boosting above a forest threshold."""

__version__ = "0.1.0"

from .boost import BoostConfig, BoostedGpd, fit_boosted_gpd  # noqa: F401
from .forest import (  # noqa: F401
    ForestConfig,
    QuantileForest,
    fit_quantile_forest,
    multiclass_split_gain,
    weighted_quantile,
)
from .gpd import (  # noqa: F401
    GpdParams,
    deviance,
    deviance_grad,
    deviance_hessian_diag,
    extreme_quantile,
    fit_unconditional_mle,
    gpd_cdf,
    gpd_quantile,
)
from .pipeline import (  # noqa: F401
    ExtremeQuantileModel,
    compute_exceedances,
    fit_extreme_model,
)
from .tuning import (  # noqa: F401
    CvCurve,
    cv_deviance,
    importance_report,
    partial_dependence,
    permutation_importance,
    relative_importance,
    select_depths,
)
