"""CART-style trees used by the forest and boosting models.

Candidate-feature selection at each node is driven by a splitmix64 hash of
(tree key, node id, feature key) instead of a sequential RNG stream. Feature
keys default to column indices; fitting a column-permuted matrix with
correspondingly permuted keys therefore reproduces the same tree on relabeled
features, which makes importances exactly permutation-covariant.
"""

from __future__ import annotations

import numpy as np

from .rng import MASK64, fnv1a_64

_GOLDEN = 0x9E3779B97F4A7C15


def _mix(x):
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def feature_hashes(feature_keys):
    return [fnv1a_64(f"feat|{k}") for k in feature_keys]


def _feature_order(tree_key, node_id, feat_hashes):
    base = _mix(tree_key ^ _mix(node_id))
    return sorted(range(len(feat_hashes)), key=lambda j: _mix(base ^ feat_hashes[j]))


def _best_split_gini(v, onehot_cum, total_counts):
    """Best threshold on one sorted feature; returns (score, threshold) or None.

    `score` is sum_side (sum_k count_k^2 / n_side), to be maximized; it is an
    affine transform of the weighted child Gini.
    """
    n = v.size
    valid = v[:-1] < v[1:]
    if not valid.any():
        return None
    left = onehot_cum[:-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    score = (left**2).sum(axis=1) / nl + ((total_counts - left) ** 2).sum(axis=1) / nr
    score[~valid] = -np.inf
    i = int(np.argmax(score))
    # threshold = left boundary value: "x <= thr" then yields two nonempty
    # children exactly, where a rounded midpoint of adjacent floats may not
    return float(score[i]), float(v[i])


def _best_split_sse(v, y_cum, y2_total, y_total):
    """Best threshold for squared-error; returns (children_sse, threshold)."""
    n = v.size
    valid = v[:-1] < v[1:]
    if not valid.any():
        return None
    suml = y_cum[:-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    explained = suml**2 / nl + (y_total - suml) ** 2 / nr
    explained[~valid] = -np.inf
    i = int(np.argmax(explained))
    return float(y2_total - explained[i]), float(v[i])


class ClassificationTree:
    """Gini CART grown to purity (min split 2), mtry candidate features."""

    def __init__(self, n_classes, max_features=None):
        self.n_classes = n_classes
        self.max_features = max_features
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.counts = []  # leaf class counts; None for internal nodes
        self.importance_raw = None

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(None)
        return len(self.feature) - 1

    def fit(self, X, y, tree_key=0, feat_hashes=None):
        n, p = X.shape
        k = self.n_classes
        mtry = self.max_features or p
        if feat_hashes is None:
            feat_hashes = feature_hashes(range(p))
        self.importance_raw = np.zeros(p)
        # stack of (node index, row indices, path id); path ids: root 1,
        # left 2*id, right 2*id+1 -- stable under feature permutation
        root = self._new_node()
        stack = [(root, np.arange(n), 1)]
        while stack:
            node, rows, path = stack.pop()
            counts = np.bincount(y[rows], minlength=k).astype(np.float64)
            nn = rows.size
            if nn < 2 or counts.max() == nn:
                self.counts[node] = counts
                continue
            onehot = np.zeros((nn, k))
            best = None  # (score, feature, threshold)
            examined = 0
            for f in _feature_order(tree_key, path, feat_hashes):
                v = X[rows, f]
                order = np.argsort(v, kind="stable")
                vs = v[order]
                if vs[0] == vs[-1]:
                    continue  # constant here; does not consume a candidate slot
                onehot[:] = 0.0
                onehot[np.arange(nn), y[rows][order]] = 1.0
                found = _best_split_gini(vs, onehot.cumsum(axis=0), counts)
                if found is not None:
                    score, thr = found
                    if best is None or score > best[0]:
                        best = (score, f, thr)
                examined += 1
                if examined >= mtry:
                    break
            if best is None:
                self.counts[node] = counts
                continue
            score, f, thr = best
            node_gini_n = nn - (counts**2).sum() / nn  # n * gini
            child_gini_n = nn - score
            self.importance_raw[f] += node_gini_n - child_gini_n
            go_left = X[rows, f] <= thr
            self.feature[node] = f
            self.threshold[node] = thr
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((right, rows[~go_left], 2 * path + 1))
            stack.append((left, rows[go_left], 2 * path))
        return self

    def predict_proba(self, X):
        n = X.shape[0]
        out = np.zeros((n, self.n_classes))
        stack = [(0, np.arange(n))]
        while stack:
            node, rows = stack.pop()
            if not rows.size:
                continue
            if self.counts[node] is not None:
                c = self.counts[node]
                out[rows] = c / c.sum()
                continue
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out


class RegressionTree:
    """Squared-error CART with a depth cap; scans all features in order."""

    def __init__(self, max_depth):
        self.max_depth = max_depth
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.leaf_id = []  # dense leaf numbering; -1 for internal
        self.n_leaves = 0
        self.importance_raw = None

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_id.append(-1)
        return len(self.feature) - 1

    def fit(self, X, y):
        n, p = X.shape
        self.importance_raw = np.zeros(p)
        train_leaf = np.full(n, -1, dtype=np.int64)
        root = self._new_node()
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yv = y[rows]
            nn = rows.size
            best = None
            if depth < self.max_depth and nn >= 2:
                y2_total = float((yv**2).sum())
                y_total = float(yv.sum())
                parent_sse = y2_total - y_total**2 / nn
                for f in range(p):
                    v = X[rows, f]
                    order = np.argsort(v, kind="stable")
                    vs = v[order]
                    if vs[0] == vs[-1]:
                        continue
                    found = _best_split_sse(vs, yv[order].cumsum(), y2_total, y_total)
                    if found is not None:
                        sse, thr = found
                        if best is None or sse < best[0]:
                            best = (sse, f, thr)
            if best is None:
                self.leaf_id[node] = self.n_leaves
                train_leaf[rows] = self.n_leaves
                self.n_leaves += 1
                continue
            sse, f, thr = best
            self.importance_raw[f] += parent_sse - sse
            go_left = X[rows, f] <= thr
            self.feature[node] = f
            self.threshold[node] = thr
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((right, rows[~go_left], depth + 1))
            stack.append((left, rows[go_left], depth + 1))
        return train_leaf

    def apply(self, X):
        n = X.shape[0]
        out = np.empty(n, dtype=np.int64)
        stack = [(0, np.arange(n))]
        while stack:
            node, rows = stack.pop()
            if not rows.size:
                continue
            if self.leaf_id[node] >= 0:
                out[rows] = self.leaf_id[node]
                continue
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out
