"""Simulation benchmark: two synthetic models with analytic truth,
quasi-Monte-Carlo integrated squared error, and a method comparison
between the boosted pipeline, an unconditional-GPD baseline sharing the
same threshold, and the raw forest quantile.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import gpd
from .boost import BoostConfig, fit_boosted_gpd
from .errors import TailboostError
from .forest import ForestConfig, fit_quantile_forest
from .parallel import parallel_map
from .pipeline import compute_exceedances
from .special import student_t_quantile
from .tuning import cv_deviance
from .util import rng_from

MODEL_DIMS = {1: 40, 2: 10}
_BUILTIN_METHODS = ("boosted", "constant", "forest")

# Clamp on the uniform stream before inverse-CDF sampling; keeps the
# Student-t draws finite without measurably disturbing the law.
_U_CLIP = 1e-15


def _primes(k: int) -> list[int]:
    out = []
    cand = 2
    while len(out) < k:
        if all(cand % p for p in out):
            out.append(cand)
        cand += 1
    return out


def halton(index: int, base: int) -> float:
    """Radical-inverse value of a positive integer index in a prime base.

    Computed as one exact integer division (reversed digits over base^k),
    so results match hand-derived fractions bit for bit.
    """
    if index < 1:
        raise ValueError("index must be >= 1")
    rev = 0
    scale = 1
    i = index
    while i > 0:
        rev = rev * base + i % base
        scale *= base
        i //= base
    return rev / scale


_halton_cache: dict = {}


def halton_points(n_points: int, d: int) -> np.ndarray:
    """First n_points rows of the d-dimensional Halton sequence mapped to
    [-1, 1]^d (bases: the first d primes).  Cached and read-only."""
    key = (n_points, d)
    cached = _halton_cache.get(key)
    if cached is None:
        bases = _primes(d)
        cached = np.empty((n_points, d))
        for j, b in enumerate(bases):
            cached[:, j] = [2.0 * halton(i, b) - 1.0 for i in range(1, n_points + 1)]
        cached.setflags(write=False)
        _halton_cache[key] = cached
    return cached


def integrated_squared_error(pred, truth, d: int, n_points: int = 4096) -> float:
    """Quasi-Monte-Carlo mean of (pred - truth)^2 over [-1, 1]^d.

    ``pred`` and ``truth`` map an (N, d) point matrix to N values.  Reported
    per unit volume (no 2^d factor), so identical surfaces give exactly 0.
    """
    P = halton_points(n_points, d)
    diff = np.asarray(pred(P), dtype=float) - np.asarray(truth(P), dtype=float)
    return float(np.mean(diff * diff))


@dataclass(frozen=True)
class TailTruth:
    """Analytic conditional law of a simulation model: Y = scale(x) * T_df(x)."""

    model_id: int

    def scale(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.model_id == 1:
            return 1.0 + (X[:, 0] > 0)
        rho = 0.9
        x1, x2 = X[:, 0], X[:, 1]
        norm = 2.0 * np.pi * np.sqrt(1.0 - rho * rho)
        dens = np.exp(-(x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (2.0 * (1.0 - rho * rho))) / norm
        return 1.0 + 6.0 * dens

    def df(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.model_id == 1:
            return np.full(X.shape[0], 4.0)
        return 7.0 / (1.0 + np.exp(4.0 * X[:, 0] + 1.2)) + 3.0

    def shape(self, X) -> np.ndarray:
        """True GPD tail shape: reciprocal of the t degrees of freedom."""
        return 1.0 / self.df(X)

    def __call__(self, X, tau: float) -> np.ndarray:
        return self.scale(X) * student_t_quantile(float(tau), self.df(X))


@dataclass(frozen=True)
class SimModelSpec:
    model_id: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.model_id not in MODEL_DIMS:
            raise ValueError(f"model_id must be one of {sorted(MODEL_DIMS)}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def d(self) -> int:
        return MODEL_DIMS[self.model_id]


def _generate(model_id: int, n: int, seed) -> tuple[np.ndarray, np.ndarray, TailTruth]:
    truth = TailTruth(model_id)
    rng = rng_from(*seed) if isinstance(seed, tuple) else rng_from(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, MODEL_DIMS[model_id]))
    u = np.clip(rng.random(n), _U_CLIP, 1.0 - _U_CLIP)
    Y = truth.scale(X) * student_t_quantile(u, truth.df(X))
    return X, Y, truth


def gen_model1(n: int, seed=0):
    """Heavy-tailed step-scale model: 40 covariates, one signal."""
    return _generate(1, n, seed)


def gen_model2(n: int, seed=0):
    """Varying shape and scale with an order-2 interaction: 10 covariates."""
    return _generate(2, n, seed)


def default_forest_config(seed: int = 0) -> ForestConfig:
    return ForestConfig(seed=seed)


def default_boost_config(model_id: int, n_trees: int = 500, seed: int = 0) -> BoostConfig:
    """Benchmark settings: shared learning rate/subsample, per-model depths
    and learning-rate ratio."""
    if model_id == 1:
        return BoostConfig(
            n_trees=n_trees, depth_sigma=1, depth_gamma=1,
            learning_rate=0.01, learning_rate_ratio=15.0,
            subsample_fraction=0.75, seed=seed,
        )
    return BoostConfig(
        n_trees=n_trees, depth_sigma=3, depth_gamma=1,
        learning_rate=0.01, learning_rate_ratio=7.0,
        subsample_fraction=0.75, seed=seed,
    )


@dataclass(frozen=True)
class CvSelection:
    """How the comparison picks the tree count for the boosted method."""

    b_max: int = 500
    folds: int = 5
    repeats: int = 1


@dataclass
class ReplicationData:
    """Everything a method needs from one simulated replication."""

    spec: SimModelSpec
    X: np.ndarray
    Y: np.ndarray
    truth: TailTruth
    forest: object = None
    z: np.ndarray | None = None
    q0: np.ndarray | None = None  # threshold quantile at the evaluation points


@dataclass
class IseResult:
    method: str
    tau: float
    ise: np.ndarray
    replications: np.ndarray
    n_failed: int

    @property
    def mise(self) -> float:
        return float(np.mean(self.ise)) if self.ise.size else float("nan")


def _comparison_task(args):
    (spec, taus, rep, method_names, custom, tau0, fcfg, bcfg, cv, n_points, seed) = args
    Xq = halton_points(n_points, spec.d)
    preds: dict = {}
    errors: dict = {}
    X, Y, truth = _generate(spec.model_id, spec.n, (seed, rep))
    truth_vals = {t: truth(Xq, t) for t in taus}

    builtin = [m for m in method_names if m in _BUILTIN_METHODS]
    data = ReplicationData(spec=spec, X=X, Y=Y, truth=truth)
    shared_error = None
    if builtin:
        try:
            forest = fit_quantile_forest(X, Y, replace(fcfg, seed=_seed_of(seed, rep, 1)))
            levels = forest.predict_quantile(Xq, np.array([tau0] + list(taus)))
            data.forest = forest
            data.z = compute_exceedances(forest, Y, tau0)
            data.q0 = levels[:, 0]
        except TailboostError as exc:
            shared_error = f"{type(exc).__name__}: {exc}"

    for name in method_names:
        if name in _BUILTIN_METHODS and shared_error is not None:
            errors[name] = shared_error
            continue
        try:
            if name == "boosted":
                cfg = replace(bcfg, seed=_seed_of(seed, rep, 2))
                if cv is not None:
                    curve = cv_deviance(
                        X, data.z, replace(cfg, n_trees=cv.b_max),
                        folds=cv.folds, repeats=cv.repeats,
                        seed=_seed_of(seed, rep, 3),
                    )
                    cfg = replace(cfg, n_trees=curve.selected_b)
                model = fit_boosted_gpd(X, data.z, cfg)
                sig, gam = model.predict_params(Xq, floored=True)
                preds[name] = {
                    t: gpd.extreme_quantile(data.q0, sig, gam, tau0, t) for t in taus
                }
            elif name == "constant":
                theta = gpd.fit_unconditional_mle(data.z[data.z > 0])
                preds[name] = {
                    t: gpd.extreme_quantile(data.q0, theta.sigma, theta.gamma, tau0, t)
                    for t in taus
                }
            elif name == "forest":
                preds[name] = {t: levels[:, 1 + j] for j, t in enumerate(taus)}
            else:
                fn = custom[name]
                preds[name] = {t: np.asarray(fn(data, Xq, t), dtype=float) for t in taus}
        except TailboostError as exc:
            errors[name] = f"{type(exc).__name__}: {exc}"

    ises = {}
    for name, per_tau in preds.items():
        for t, p in per_tau.items():
            diff = p - truth_vals[t]
            ises[(name, t)] = float(np.mean(diff * diff))
    return rep, ises, errors


def _seed_of(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def run_comparison(
    spec: SimModelSpec,
    taus,
    r: int,
    methods=_BUILTIN_METHODS,
    tau0: float = 0.8,
    forest_config: ForestConfig | None = None,
    boost_config: BoostConfig | None = None,
    cv: CvSelection | None = CvSelection(),
    n_points: int = 4096,
    jobs: int = 1,
) -> list[IseResult]:
    """ISE of each method at each tau over r independent replications.

    ``methods`` is a sequence of builtin names ("boosted", "constant",
    "forest") or a mapping that may add custom callables
    fn(data, points, tau) -> predictions.  Per-replication failures are
    excluded from the ISE table and counted.
    """
    taus = [float(t) for t in taus]
    if isinstance(methods, dict):
        method_names = list(methods)
        custom = {k: v for k, v in methods.items() if k not in _BUILTIN_METHODS}
    else:
        method_names = list(methods)
        unknown = [m for m in method_names if m not in _BUILTIN_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; pass callables via a dict")
        custom = {}
    fcfg = forest_config or default_forest_config()
    bcfg = boost_config or default_boost_config(spec.model_id)

    tasks = [
        (spec, taus, rep, method_names, custom, tau0, fcfg, bcfg, cv, n_points, spec.seed)
        for rep in range(r)
    ]
    outputs = parallel_map(_comparison_task, tasks, jobs=jobs)

    results = []
    for name in method_names:
        for t in taus:
            vals, reps, failed = [], [], 0
            for rep, ises, errors in outputs:
                if (name, t) in ises:
                    vals.append(ises[(name, t)])
                    reps.append(rep)
                elif name in errors:
                    failed += 1
            results.append(IseResult(
                method=name, tau=t,
                ise=np.asarray(vals), replications=np.asarray(reps, dtype=int),
                n_failed=failed,
            ))
    return results
