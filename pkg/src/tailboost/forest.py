"""Honest subsampled quantile forest with a multiclass splitting criterion.

Each tree draws a subsample without replacement and splits it into two
halves: structure is grown on one half only; localizing weights reference
members of the other half that land in a leaf.  Responses are recoded per
node into classes by empirical node quantiles, and splits maximize the
sum of squared class counts over child sizes.  Out-of-bag prediction at a
training point keeps only trees whose subsample excluded that point.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .tree import Tree, _Builder
from .util import ragged_arange, rng_from

# Cumulative-weight comparisons tolerate this much float slack.
_CW_TOL = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    subsample_fraction: float = 0.5
    mtry: int | None = None  # default: ceil(sqrt(d))
    min_node: int = 5
    class_quantiles: tuple[float, ...] = (0.1, 0.5, 0.9)
    honest: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")
        if self.min_node < 1:
            raise ValueError("min_node must be >= 1")
        if any(not 0.0 < q < 1.0 for q in self.class_quantiles):
            raise ValueError("class quantile orders must be in (0, 1)")


def multiclass_split_gain(left_counts, right_counts) -> float:
    """Sum over classes of squared count over child size, for both children."""
    lc = np.asarray(left_counts, dtype=float)
    rc = np.asarray(right_counts, dtype=float)
    nl, nr = lc.sum(), rc.sum()
    if nl <= 0 or nr <= 0:
        raise ValueError("both children must be nonempty")
    return float(np.sum(lc * lc) / nl + np.sum(rc * rc) / nr)


def weighted_quantile(values, weights, tau) -> float:
    """Smallest data value whose cumulative weight reaches tau.

    Minimizes the weighted quantile check loss over the data values.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.ndim != 1:
        raise ValueError("values and weights must be matching 1-d arrays")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if not (1 - 1e-9) <= total <= (1 + 1e-9):
        raise ValueError(f"weights must sum to 1, got {total}")
    order = np.argsort(v, kind="stable")
    cw = np.cumsum(w[order])
    if cw[-1] >= tau - _CW_TOL:
        idx = int(np.argmax(cw >= tau - _CW_TOL))
    else:
        idx = v.size - 1
    return float(v[order][idx])


def _node_class_labels(y_node: np.ndarray, orders: tuple[float, ...]) -> np.ndarray:
    """Recode responses by position relative to node empirical quantiles."""
    ys = np.sort(y_node)
    m = ys.size
    qs = np.array([ys[min(m - 1, max(0, math.ceil(m * t) - 1))] for t in orders])
    return (y_node[:, None] <= qs[None, :]).sum(axis=1)


def _best_multiclass_split(Xn, labels, n_classes, min_node, features):
    m = labels.size
    A = Xn[:, features]
    order = np.argsort(A, axis=0, kind="stable")
    xs = np.take_along_axis(A, order, axis=0)
    ls = labels[order]
    k = np.arange(1, m)[:, None]
    valid = (xs[1:] > xs[:-1]) & (k >= min_node) & ((m - k) >= min_node)
    if not valid.any():
        return None
    nl = k.astype(float)
    nr = m - nl
    gain = np.zeros((m - 1, len(features)))
    parent = 0.0
    for c in range(n_classes):
        cum = np.cumsum(ls == c, axis=0)[:-1].astype(float)
        tot = float(np.sum(labels == c))
        gain += cum * cum / nl + (tot - cum) ** 2 / nr
        parent += tot * tot / m
    gain = np.where(valid, gain, -np.inf)

    best = None
    for col, f in enumerate(features):
        j = int(np.argmax(gain[:, col]))
        g = gain[j, col]
        if g == -np.inf:
            continue
        if best is None or g > best[2]:
            thr = 0.5 * (xs[j, col] + xs[j + 1, col])
            best = (int(f), float(thr), float(g), parent)
    return best


def _grow_forest_tree(X, y, structure_rows, min_node, mtry, orders, rng) -> Tree:
    d = X.shape[1]
    n_classes = len(orders) + 1
    b = _Builder()
    root = b.add()
    depth_out = 0
    stack = [(root, structure_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        found = None
        if rows.size >= 2 * min_node:
            labels = _node_class_labels(y[rows], orders)
            feats = np.arange(d) if mtry >= d else np.sort(rng.choice(d, size=mtry, replace=False))
            found = _best_multiclass_split(X[rows], labels, n_classes, min_node, feats)
        if found is not None:
            f, thr, gain, parent = found
            go_left = X[rows, f] <= thr
            # adjacent floats can round their midpoint onto one side
            if go_left.all() or not go_left.any():
                found = None
        if found is None:
            depth_out = max(depth_out, depth)
            continue
        lnode = b.add()
        rnode = b.add()
        b.feature[node] = f
        b.threshold[node] = thr
        b.left[node] = lnode
        b.right[node] = rnode
        b.rss[node] = max(0.0, gain - parent)
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return b.finish(depth_out)


@dataclass(frozen=True)
class ForestTree:
    """One honest tree: structure plus weight-half leaf membership."""

    tree: Tree
    in_bag: np.ndarray       # bool (n,): row was in the tree's subsample
    structure_rows: np.ndarray
    weight_rows: np.ndarray
    leaf_start: np.ndarray   # offsets into members, per node
    leaf_count: np.ndarray   # weight-half members per node
    members: np.ndarray      # weight-half training indices grouped by leaf


def _index_members(tree: Tree, X: np.ndarray, weight_rows: np.ndarray):
    n_nodes = tree.n_nodes
    leaf = tree.leaf_id(X[weight_rows])
    order = np.argsort(leaf, kind="stable")
    members = weight_rows[order].astype(np.int64)
    count = np.bincount(leaf, minlength=n_nodes).astype(np.int64)
    start = np.cumsum(count) - count
    return start, count, members


@dataclass(frozen=True)
class QuantileForest:
    trees: tuple[ForestTree, ...]
    X: np.ndarray
    y: np.ndarray
    config: ForestConfig

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def weights(self, Xq) -> np.ndarray:
        """Localizing weights over training rows for each query row.

        Per-tree weights are uniform over weight-half members of the query's
        leaf (zero for trees whose leaf holds no member); rows are normalized
        over contributing trees, so each row sums to 1 unless every tree's
        leaf is empty.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        nq = Xq.shape[0]
        W = np.zeros((nq, self.y.size))
        contrib = np.zeros(nq, dtype=np.int64)
        all_rows = np.arange(nq)
        for ft in self.trees:
            _accumulate_tree_weights(W, contrib, ft, all_rows, Xq)
        _normalize_rows(W, contrib)
        return W

    def predict_quantile(self, Xq, tau):
        """Weighted quantile prediction; tau may be a scalar or 1-d array."""
        W = self.weights(Xq)
        return _weighted_quantile_rows(self.y, W, tau)

    def oob_weights(self, rows=None) -> np.ndarray:
        """Out-of-bag weights at training rows: only trees whose subsample
        excluded the row contribute, so the self-weight is exactly zero."""
        rows = np.arange(self.y.size) if rows is None else np.asarray(rows, dtype=np.int64)
        W = np.zeros((rows.size, self.y.size))
        contrib = np.zeros(rows.size, dtype=np.int64)
        for ft in self.trees:
            keep = np.nonzero(~ft.in_bag[rows])[0]
            if keep.size == 0:
                continue
            _accumulate_tree_weights(W, contrib, ft, keep, self.X[rows[keep]])
        if np.any(contrib == 0):
            bad = int(rows[np.argmax(contrib == 0)])
            raise PreconditionError(f"no out-of-bag tree for observation {bad}")
        _normalize_rows(W, contrib)
        return W

    def oob_quantile(self, i: int, tau) -> float:
        W = self.oob_weights(np.array([i]))
        out = _weighted_quantile_rows(self.y, W, tau)
        return float(out[0]) if np.ndim(tau) == 0 else out[0]

    def oob_quantiles(self, tau, chunk: int = 1024) -> np.ndarray:
        """OOB quantile estimate at every training row (chunked)."""
        n = self.y.size
        scalar = np.ndim(tau) == 0
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty((n, taus.size))
        for lo in range(0, n, chunk):
            rows = np.arange(lo, min(lo + chunk, n))
            W = self.oob_weights(rows)
            out[rows] = _weighted_quantile_rows(self.y, W, taus)
        return out[:, 0] if scalar else out


def _accumulate_tree_weights(W, contrib, ft: ForestTree, q_rows, Xq_sub):
    leaf = ft.tree.leaf_id(Xq_sub)
    cnt = ft.leaf_count[leaf]
    ok = cnt > 0
    if not ok.any():
        return
    q = q_rows[ok]
    c = cnt[ok]
    ptr = np.repeat(ft.leaf_start[leaf[ok]], c) + ragged_arange(c)
    np.add.at(W, (np.repeat(q, c), ft.members[ptr]), np.repeat(1.0 / c, c))
    contrib[q] += 1


def _normalize_rows(W, contrib):
    nz = contrib > 0
    W[nz] /= contrib[nz, None]


def _weighted_quantile_rows(y, W, tau):
    scalar = np.ndim(tau) == 0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any((taus < 0) | (taus > 1)):
        raise ValueError("tau must be in [0, 1]")
    row_sums = W.sum(axis=1)
    if np.any(row_sums < 1 - 1e-9):
        raise PreconditionError("a query row received no forest weight")
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cw = np.cumsum(W[:, order], axis=1)
    out = np.empty((W.shape[0], taus.size))
    last = cw.shape[1] - 1
    for j, t in enumerate(taus):
        idx = np.argmax(cw >= t - _CW_TOL, axis=1)
        idx = np.where(cw[:, last] >= t - _CW_TOL, idx, last)
        out[:, j] = ys[idx]
    return out[:, 0] if scalar else out


def fit_quantile_forest(X, y, config: ForestConfig) -> QuantileForest:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if y.size != n:
        raise PreconditionError("X and y must have matching length")
    if n < 4 * config.min_node:
        raise PreconditionError(f"need n >= {4 * config.min_node} rows, got {n}")
    m = int(np.floor(config.subsample_fraction * n))
    if m < 2:
        raise PreconditionError("subsample too small; increase subsample_fraction")
    mtry = config.mtry if config.mtry is not None else math.ceil(math.sqrt(d))
    mtry = min(max(1, mtry), d)

    trees = []
    for b in range(config.n_trees):
        rng = rng_from(config.seed, b)
        draw = rng.permutation(n)[:m]
        if config.honest:
            half = math.ceil(m / 2)
            structure_rows, weight_rows = draw[:half], draw[half:]
        else:
            structure_rows = weight_rows = draw
        tr = _grow_forest_tree(X, y, structure_rows, config.min_node, mtry,
                               config.class_quantiles, rng)
        start, count, members = _index_members(tr, X, weight_rows)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[draw] = True
        trees.append(ForestTree(
            tree=tr,
            in_bag=in_bag,
            structure_rows=np.sort(structure_rows),
            weight_rows=np.sort(weight_rows),
            leaf_start=start,
            leaf_count=count,
            members=members,
        ))
    return QuantileForest(trees=tuple(trees), X=X, y=y, config=config)
