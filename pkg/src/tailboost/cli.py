"""Command-line interface: fit, predict, cv, importance, pdp, simulate."""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import gpd
from .benchmark import (
    CvSelection,
    SimModelSpec,
    default_boost_config,
    default_forest_config,
    run_comparison,
)
from .boost import BoostConfig, fit_boosted_gpd
from .data import Dataset, load_csv, select_features, write_csv
from .errors import NonConvergenceError, ParseError, PreconditionError
from .forest import ForestConfig, fit_quantile_forest
from .persistence import load_model, save_model
from .pipeline import ExtremeQuantileModel, compute_exceedances
from .tuning import cv_deviance, importance_report, partial_dependence, select_depths

_BOOST_KEYS = {
    "trees": "n_trees",
    "depth_sigma": "depth_sigma",
    "depth_gamma": "depth_gamma",
    "learning_rate": "learning_rate",
    "learning_rate_ratio": "learning_rate_ratio",
    "subsample": "subsample_fraction",
    "min_leaf_sigma": "min_leaf_sigma",
    "min_leaf_gamma": "min_leaf_gamma",
}
_FOREST_KEYS = {
    "forest_trees": "n_trees",
    "forest_subsample": "subsample_fraction",
    "forest_mtry": "mtry",
    "forest_min_node": "min_node",
}


def _load_configs(config_path, seed: int) -> tuple[ForestConfig, BoostConfig]:
    raw = {}
    if config_path:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{config_path}: invalid JSON: {exc}") from None
        unknown = set(raw) - set(_BOOST_KEYS) - set(_FOREST_KEYS)
        if unknown:
            raise ParseError(f"{config_path}: unknown config keys {sorted(unknown)}")
    boost_kwargs = {v: raw[k] for k, v in _BOOST_KEYS.items() if k in raw}
    forest_kwargs = {v: raw[k] for k, v in _FOREST_KEYS.items() if k in raw}
    return (
        ForestConfig(seed=seed, **forest_kwargs),
        BoostConfig(seed=seed + 1, **boost_kwargs),
    )


def _feature_matrix(data: Dataset, model: ExtremeQuantileModel) -> np.ndarray:
    if model.feature_names:
        return select_features(data, model.feature_names)
    if data.d != model.boosted.n_features:
        raise PreconditionError(
            f"model expects {model.boosted.n_features} features, data has {data.d}"
        )
    return data.X


def _cmd_fit(args) -> int:
    data = load_csv(args.data, target=args.target)
    forest_cfg, boost_cfg = _load_configs(args.config, args.seed)
    forest = fit_quantile_forest(data.X, data.y, forest_cfg)
    z = compute_exceedances(forest, data.y, args.tau0)
    n_pos = int(np.sum(z > 0))
    selected_b = None
    if args.cv:
        curve = cv_deviance(
            data.X, z, replace(boost_cfg, n_trees=args.Bmax),
            folds=args.K, repeats=args.repeats, seed=args.seed, jobs=args.threads,
        )
        selected_b = curve.selected_b
        boost_cfg = replace(boost_cfg, n_trees=selected_b)
    boosted = fit_boosted_gpd(data.X, z, boost_cfg)
    model = ExtremeQuantileModel(
        forest=forest, boosted=boosted, tau0=args.tau0,
        feature_names=data.feature_names,
    )
    save_model(model, args.out, extra={"seed": args.seed, "target": args.target})
    print(f"theta0: sigma={boosted.theta0.sigma:.6g} gamma={boosted.theta0.gamma:.6g}")
    print(f"positive exceedances: {n_pos} of {data.n}")
    if selected_b is not None:
        print(f"selected B by cross-validation: {selected_b}")
    print(f"model written to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model, _ = load_model(args.model)
    data = load_csv(args.data)
    X = _feature_matrix(data, model)
    taus = [float(t) for t in args.tau]
    q0 = model.threshold_quantile(X)
    sig, gam = model.boosted.predict_params(X, floored=True)
    header = ["intermediate_quantile", "sigma", "gamma"] + [f"q_{t:g}" for t in taus]
    cols = [q0, sig, gam] + [
        gpd.extreme_quantile(q0, sig, gam, model.tau0, t) for t in taus
    ]
    write_csv(args.out, header, zip(*[list(map(float, c)) for c in cols]))
    print(f"predictions for {X.shape[0]} rows written to {args.out}")
    return 0


def _cmd_cv(args) -> int:
    data = load_csv(args.data, target=args.target)
    forest_cfg, boost_cfg = _load_configs(args.config, args.seed)
    forest = fit_quantile_forest(data.X, data.y, forest_cfg)
    z = compute_exceedances(forest, data.y, args.tau0)
    try:
        with open(args.grid) as fh:
            grid = [(int(a), int(b)) for a, b in json.load(fh)]
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ParseError(f"{args.grid}: expected a JSON list of [depth_sigma, depth_gamma] pairs: {exc}") from None
    depths, best_b, curves = select_depths(
        data.X, z, grid, replace(boost_cfg, n_trees=args.Bmax),
        folds=args.K, repeats=args.repeats, seed=args.seed, jobs=args.threads,
    )
    if args.out:
        rows = []
        for curve in curves:
            for b, dev in enumerate(curve.dev):
                rows.append([curve.depth_sigma, curve.depth_gamma, b, float(dev)])
        write_csv(args.out, ["depth_sigma", "depth_gamma", "B", "dev"], rows)
        print(f"curves written to {args.out}")
    print(f"selected depths=({depths[0]},{depths[1]}) B={best_b}")
    return 0


def _cmd_importance(args) -> int:
    model, meta = load_model(args.model)
    target = args.target or meta.get("target")
    if not target:
        raise PreconditionError("pass --target (the model carries no target name)")
    data = load_csv(args.data, target=target)
    X = _feature_matrix(data, model)
    same_training_data = X.shape == model.forest.X.shape and np.array_equal(X, model.forest.X)
    if same_training_data:
        z = compute_exceedances(model.forest, data.y, model.tau0)
    else:
        z = np.maximum(0.0, data.y - model.threshold_quantile(X))
    report = importance_report(model.boosted, X, z, seed=args.seed)
    names = model.feature_names or tuple(f"x{j+1}" for j in range(X.shape[1]))
    # cells stay numeric so outputs re-parse under the CSV load rules
    rows = [
        [j + 1, float(report.permutation[j]),
         float(report.relative_sigma[j]), float(report.relative_gamma[j])]
        for j in range(X.shape[1])
    ]
    write_csv(args.out, ["feature", "permutation", "relative_sigma", "relative_gamma"], rows)
    for j, name in enumerate(names):
        print(f"feature {j + 1}: {name}")
    print(f"importance table written to {args.out}")
    return 0


def _resolve_feature(name: str, model: ExtremeQuantileModel) -> int:
    if model.feature_names and name in model.feature_names:
        return model.feature_names.index(name)
    try:
        return int(name)
    except ValueError:
        raise PreconditionError(f"unknown feature {name!r}") from None


def _cmd_pdp(args) -> int:
    model, _ = load_model(args.model)
    data = load_csv(args.data)
    X = _feature_matrix(data, model)
    j1 = _resolve_feature(args.feature, model)
    grid1 = np.linspace(X[:, j1].min(), X[:, j1].max(), args.grid)
    names = model.feature_names or tuple(f"x{j+1}" for j in range(X.shape[1]))
    label = args.output if args.output != "quantile" else f"quantile_{args.tau:g}"
    if args.feature2 is None:
        values = partial_dependence(model, X, j1, grid1, output=args.output, tau=args.tau)
        rows = [[float(g), float(v)] for g, v in zip(grid1, values)]
        write_csv(args.out, [names[j1], label], rows)
    else:
        j2 = _resolve_feature(args.feature2, model)
        grid2 = np.linspace(X[:, j2].min(), X[:, j2].max(), args.grid)
        surface = partial_dependence(model, X, (j1, j2), (grid1, grid2),
                                     output=args.output, tau=args.tau)
        rows = []
        for i, g1 in enumerate(grid1):
            for j, g2 in enumerate(grid2):
                rows.append([float(g1), float(g2), float(surface[i, j])])
        write_csv(args.out, [names[j1], names[j2], label], rows)
    print(f"partial dependence written to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    spec = SimModelSpec(model_id=args.model_id, n=args.n, seed=args.seed)
    taus = [float(t) for t in args.taus.split(",") if t]
    forest_cfg = replace(default_forest_config(), n_trees=args.forest_trees)
    boost_cfg = default_boost_config(args.model_id, n_trees=args.Bmax)
    cv = None if args.no_cv else CvSelection(b_max=args.Bmax, folds=args.K, repeats=args.repeats)
    results = run_comparison(
        spec, taus, args.R,
        tau0=args.tau0, forest_config=forest_cfg, boost_config=boost_cfg,
        cv=cv, n_points=args.n_points, jobs=args.threads,
    )
    os.makedirs(args.out, exist_ok=True)
    ise_path = os.path.join(args.out, f"ise_model{args.model_id}.csv")
    mise_path = os.path.join(args.out, f"mise_model{args.model_id}.csv")
    # method ids keep the tables numeric (CSV load rules); legend on stdout
    method_ids = {}
    ise_rows = []
    mise_rows = []
    for res in results:
        mid = method_ids.setdefault(res.method, len(method_ids))
        for rep, v in zip(res.replications, res.ise):
            ise_rows.append([mid, res.tau, int(rep), float(v)])
        mise_rows.append([mid, res.tau, res.mise, int(res.ise.size), res.n_failed])
    write_csv(ise_path, ["method_id", "tau", "replication", "ise"], ise_rows)
    write_csv(mise_path, ["method_id", "tau", "mise", "n_replications", "n_failed"], mise_rows)
    for name, mid in method_ids.items():
        print(f"method {mid}: {name}")
    print(f"results written to {ise_path} and {mise_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tailboost",
        description="Extreme quantile regression with boosted GPD tails above a forest threshold",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, threads=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if threads:
            sp.add_argument("--threads", type=int, default=0,
                            help="worker processes (0 = all cores); results do not depend on it")

    sp = sub.add_parser("fit", help="fit threshold forest + boosted GPD tail")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--tau0", type=float, default=0.8)
    sp.add_argument("--out", required=True)
    sp.add_argument("--config")
    sp.add_argument("--cv", action="store_true", help="select the tree count by cross-validation")
    sp.add_argument("--Bmax", type=int, default=500)
    sp.add_argument("--K", type=int, default=5)
    sp.add_argument("--repeats", type=int, default=5)
    common(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("predict", help="predict extreme quantiles from a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--tau", action="append", required=True, type=float)
    sp.add_argument("--out", required=True)
    common(sp, seed=False, threads=False)
    sp.set_defaults(func=_cmd_predict)

    sp = sub.add_parser("cv", help="cross-validate tree count and depths")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--tau0", type=float, default=0.8)
    sp.add_argument("--grid", required=True, help="JSON list of [depth_sigma, depth_gamma] pairs")
    sp.add_argument("--Bmax", type=int, default=500)
    sp.add_argument("--K", type=int, default=5)
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--config")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=_cmd_cv)

    sp = sub.add_parser("importance", help="permutation and split-gain importance tables")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", help="response column (default: recorded in the model)")
    sp.add_argument("--out", required=True)
    common(sp, threads=False)
    sp.set_defaults(func=_cmd_importance)

    sp = sub.add_parser("pdp", help="partial dependence grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--feature", required=True)
    sp.add_argument("--feature2")
    sp.add_argument("--output", choices=["sigma", "gamma", "quantile"], default="sigma")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--grid", type=int, default=50)
    sp.add_argument("--out", required=True)
    common(sp, seed=False, threads=False)
    sp.set_defaults(func=_cmd_pdp)

    sp = sub.add_parser("simulate", help="benchmark methods on a synthetic model")
    sp.add_argument("--model-id", type=int, required=True, choices=[1, 2])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--R", type=int, default=20)
    sp.add_argument("--taus", default="0.99,0.995,0.9995")
    sp.add_argument("--tau0", type=float, default=0.8)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-points", type=int, default=4096)
    sp.add_argument("--forest-trees", type=int, default=500)
    sp.add_argument("--Bmax", type=int, default=500)
    sp.add_argument("--K", type=int, default=5)
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--no-cv", action="store_true", help="use Bmax trees without cross-validation")
    common(sp)
    sp.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error (parse): {exc}", file=sys.stderr)
        return 4
    except NonConvergenceError as exc:
        print(f"error (non-convergence): {exc}", file=sys.stderr)
        return 6
    except (PreconditionError, ValueError) as exc:
        print(f"error (precondition): {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
