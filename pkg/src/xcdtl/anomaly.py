"""Extremeness-index ground truth, isolation forest, and transfer gain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import zscore_columns
from .metrics import average_precision, binary_f1, roc_auc
from .rng import derive_seed, make_rng

_N_TREES = 100
_MAX_SUBSAMPLE = 256
_EULER = 0.5772156649
TGI_EPSILON = 1e-6


@dataclass
class AnomalyLabels:
    s: np.ndarray  # extremeness index per row
    labels: np.ndarray  # bool, True = anomalous
    threshold: float
    flags: list = field(default_factory=list)


def label_anomalies(values, mask=None):
    """Top-decile extremeness labels from uncorrupted single-domain features.

    Rows are z-scored per column (median imputation first), the index is the
    sum of absolute z-scores over all columns, and rows strictly above its
    90th percentile (linear interpolation) are anomalous.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("feature matrix must be 2-dimensional")
    if values.shape[0] < 10:
        raise ValueError(f"need at least 10 rows, got {values.shape[0]}")
    _, z, params = zscore_columns(values, mask)
    s = np.abs(z).sum(axis=1)
    threshold = float(np.quantile(s, 0.9))
    flags = []
    if params.all_missing.any():
        flags.append("all_missing_columns")
    if params.constant.any():
        flags.append("constant_columns")
    return AnomalyLabels(s=s, labels=s > threshold, threshold=threshold, flags=flags)


class IsolationForestModel:
    """Isolation forest: 100 random-split trees on 256-row subsamples."""

    def __init__(self):
        self.trees = []  # per tree: dict of parallel node arrays
        self.psi = 0
        self.width = 0
        self.seed = 0

    def fit(self, X, seed):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError("need a 2-D matrix with at least 2 rows and 1 column")
        n, self.width = X.shape
        self.seed = seed
        self.psi = min(_MAX_SUBSAMPLE, n)
        height_limit = int(np.ceil(np.log2(self.psi)))
        self.trees = []
        for t in range(_N_TREES):
            rng = make_rng(derive_seed(seed, "itree", t))
            rows = rng.choice(n, size=self.psi, replace=False)
            self.trees.append(self._build(X[rows], height_limit, rng))
        return self

    @staticmethod
    def _build(data, height_limit, rng):
        feature, split, left, right, size = [], [], [], [], []

        def new_node():
            feature.append(-1)
            split.append(0.0)
            left.append(-1)
            right.append(-1)
            size.append(0)
            return len(feature) - 1

        stack = [(new_node(), np.arange(data.shape[0]), 0)]
        while stack:
            node, rows, depth = stack.pop()
            sub = data[rows]
            if depth >= height_limit or rows.size <= 1:
                size[node] = rows.size
                continue
            lo = sub.min(axis=0)
            hi = sub.max(axis=0)
            candidates = np.flatnonzero(hi > lo)
            if candidates.size == 0:
                size[node] = rows.size
                continue
            f = int(candidates[rng.integers(candidates.size)])
            v = float(rng.uniform(lo[f], hi[f]))
            go_left = sub[:, f] < v
            feature[node] = f
            split[node] = v
            lnode = new_node()
            rnode = new_node()
            left[node] = lnode
            right[node] = rnode
            stack.append((lnode, rows[go_left], depth + 1))
            stack.append((rnode, rows[~go_left], depth + 1))
        return {
            "feature": np.asarray(feature, dtype=np.int64),
            "split": np.asarray(split, dtype=np.float64),
            "left": np.asarray(left, dtype=np.int64),
            "right": np.asarray(right, dtype=np.int64),
            "size": np.asarray(size, dtype=np.int64),
        }


def average_path_length(n):
    """Expected unsuccessful-search depth c(n) in a binary search tree."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (np.log(n - 1.0) + _EULER) - 2.0 * (n - 1.0) / n


def _tree_path_lengths(tree, X):
    n = X.shape[0]
    out = np.zeros(n)
    stack = [(0, np.arange(n), 0)]
    feature, split = tree["feature"], tree["split"]
    left, right, size = tree["left"], tree["right"], tree["size"]
    while stack:
        node, rows, depth = stack.pop()
        if not rows.size:
            continue
        if left[node] < 0:
            out[rows] = depth + average_path_length(int(size[node]))
            continue
        go_left = X[rows, feature[node]] < split[node]
        stack.append((left[node], rows[go_left], depth + 1))
        stack.append((right[node], rows[~go_left], depth + 1))
    return out


def score(model, X):
    """Anomaly scores in (0, 1); higher = more isolated."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.width:
        raise ValueError(f"expected {model.width} columns, got {X.shape}")
    total = np.zeros(X.shape[0])
    for tree in model.trees:
        total += _tree_path_lengths(tree, X)
    expected = total / len(model.trees)
    return np.power(2.0, -expected / average_path_length(model.psi))


def detect(model, train_scores, X_test, contamination=0.1):
    """Threshold test scores at the training-score (1 - contamination) quantile."""
    if not 0.0 < contamination <= 0.5:
        raise ValueError(f"contamination must be in (0, 0.5], got {contamination}")
    train_scores = np.asarray(train_scores, dtype=np.float64)
    threshold = float(np.quantile(train_scores, 1.0 - contamination))
    test_scores = score(model, X_test)
    return test_scores, test_scores > threshold, threshold


@dataclass
class DetectionMetrics:
    roc_auc: float
    average_precision: float
    f1: float
    threshold: float
    flags: list = field(default_factory=list)


def detection_metrics(scores, labels, threshold):
    """ROC-AUC, AP, and F1 of the anomaly class at the given threshold.

    Single-class labels leave AUC/AP undefined (NaN) with a flag so callers
    can exclude the cell from aggregates.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    predicted = scores > threshold
    f1 = binary_f1(predicted, labels)
    if labels.all() or not labels.any():
        return DetectionMetrics(float("nan"), float("nan"), f1, threshold, ["single_class"])
    return DetectionMetrics(
        roc_auc=roc_auc(scores, labels),
        average_precision=average_precision(scores, labels),
        f1=f1,
        threshold=threshold,
    )


def transfer_gain(m_t, m_nt):
    """Relative improvement of transfer over the no-transfer baseline."""
    if m_nt < 0:
        raise ValueError("baseline metric must be non-negative")
    return (m_t - m_nt) / (m_nt + TGI_EPSILON)
