"""CART-style regression trees and gradient trees with truncated Newton leaves.

Trees are stored as flat node arrays (node 0 is the root, feature == -1
marks a leaf) so prediction vectorizes over inputs and fitted trees are
immutable and freely shareable across threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .util import rng_from

# Newton denominators at or below this are treated as uninformative and the
# leaf falls back to a clipped mean-gradient descent step.
HESSIAN_FLOOR = 1e-12

LEAF = -1


@dataclass(frozen=True)
class Tree:
    """Flat binary split tree; ``value`` holds leaf values (0 elsewhere)."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    rss_decrease: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def leaf_id(self, X: np.ndarray) -> np.ndarray:
        """Node index of the unique leaf containing each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.depth):
            f = self.feature[idx]
            active = f != LEAF
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            go_left = X[rows, f[rows]] <= self.threshold[idx[rows]]
            idx[rows] = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
        return idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_id(X)]

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def split_feature_totals(self, d: int) -> np.ndarray:
        """Per-feature sum of split RSS decreases (relative importance input)."""
        out = np.zeros(d)
        internal = self.feature != LEAF
        np.add.at(out, self.feature[internal], self.rss_decrease[internal])
        return out


@dataclass
class _Builder:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)
    rss: list = field(default_factory=list)

    def add(self) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.rss.append(0.0)
        return len(self.feature) - 1

    def finish(self, depth: int) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=float),
            rss_decrease=np.asarray(self.rss, dtype=float),
            depth=depth,
        )


def best_rss_split(Xn, t, min_leaf, features):
    """Best (feature, threshold, decrease) over midpoint candidates.

    Thresholds are midpoints of consecutive distinct sorted feature values;
    ties break to the lowest feature index, then the lowest threshold.
    Returns None when no candidate leaves min_leaf points on both sides.
    """
    m = t.size
    if m < 2 * min_leaf:
        return None
    A = Xn[:, features]
    order = np.argsort(A, axis=0, kind="stable")
    xs = np.take_along_axis(A, order, axis=0)
    ts = t[order]
    csum = np.cumsum(ts, axis=0)
    total = csum[-1, :]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        k = np.arange(1, m)[:, None]
        valid &= (k >= min_leaf) & (m - k >= min_leaf)
    if not valid.any():
        return None
    sl = csum[:-1, :]
    dec = sl * sl / n_left + (total - sl) ** 2 / n_right - (total * total) / m
    dec = np.where(valid, dec, -np.inf)

    best = None
    for col, f in enumerate(features):
        j = int(np.argmax(dec[:, col]))  # first max: lowest threshold
        d = dec[j, col]
        if d == -np.inf:
            continue
        if best is None or d > best[2]:
            thr = 0.5 * (xs[j, col] + xs[j + 1, col])
            best = (int(f), float(thr), float(d))
    return best


def _grow(X, split_targets, max_depth, min_leaf, rng, feature_subset_size, leaf_value):
    n, d = X.shape
    if n < min_leaf:
        raise PreconditionError(f"cannot form a root leaf: n={n} < min_leaf={min_leaf}")
    msub = d if feature_subset_size is None else int(feature_subset_size)
    if not 1 <= msub <= d:
        raise ValueError(f"feature_subset_size must be in [1, {d}]")
    if msub < d and rng is None:
        rng = rng_from(0)

    b = _Builder()
    root = b.add()
    depth_out = 0
    # preorder traversal; children are processed left before right
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        t = split_targets[rows]
        make_leaf = (
            depth >= max_depth
            or rows.size < 2 * min_leaf
            or np.ptp(t) == 0.0
        )
        found = None
        if not make_leaf:
            feats = np.arange(d) if msub == d else np.sort(rng.choice(d, size=msub, replace=False))
            found = best_rss_split(X[rows], t, min_leaf, feats)
        if found is not None:
            f, thr, dec = found
            go_left = X[rows, f] <= thr
            # adjacent floats can round their midpoint onto one side
            if go_left.all() or not go_left.any():
                found = None
        if found is None:
            b.value[node] = leaf_value(rows)
            depth_out = max(depth_out, depth)
            continue
        lnode = b.add()
        rnode = b.add()
        b.feature[node] = f
        b.threshold[node] = thr
        b.left[node] = lnode
        b.right[node] = rnode
        b.rss[node] = max(0.0, dec)
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return b.finish(depth_out)


def fit_regression_tree(X, targets, max_depth, min_leaf, rng=None, feature_subset_size=None) -> Tree:
    """Least-squares tree: splits maximize RSS decrease, leaves are means."""
    X = np.asarray(X, dtype=float)
    t = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(t)):
        raise PreconditionError("targets must be finite")
    return _grow(X, t, max_depth, min_leaf, rng, feature_subset_size,
                 leaf_value=lambda rows: float(t[rows].mean()))


def fit_gradient_tree(X, grads, hessians, max_depth, min_leaf, rng=None, feature_subset_size=None) -> Tree:
    """Tree split on gradients with truncated Newton leaf values.

    Structure is identical to :func:`fit_regression_tree` on (X, grads);
    each leaf value is sign(xi) * min(|xi|, 1) with
    xi = -sum(grads) / sum(hessians) over the leaf.
    """
    X = np.asarray(X, dtype=float)
    g = np.asarray(grads, dtype=float)
    h = np.asarray(hessians, dtype=float)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise PreconditionError("gradients and hessians must be finite")

    def newton_value(rows):
        gs = g[rows].sum()
        hs = h[rows].sum()
        if hs <= HESSIAN_FLOOR:
            xi = -g[rows].mean()
        else:
            xi = -gs / hs
        return float(np.clip(xi, -1.0, 1.0))

    return _grow(X, g, max_depth, min_leaf, rng, feature_subset_size, leaf_value=newton_value)
