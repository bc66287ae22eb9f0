"""Domain classifiers: random forest, gradient boosting, logistic regression.

All three expose fit/predict_proba plus a normalized feature-importance
vector, so the ranking stage can treat them interchangeably.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import accuracy, confusion_matrix, f1_macro, roc_auc_ovr_macro
from .rng import derive_seed, make_rng
from .trees import ClassificationTree, RegressionTree, feature_hashes

log = logging.getLogger(__name__)

CLASSIFIER_KINDS = ("rf", "gb", "lr")

_N_TREES = 100
_MTRY = 4
_GB_STAGES = 100
_GB_DEPTH = 3
_GB_LR = 0.1
_LR_L2 = 1.0
_LR_TOL = 1e-6
_LR_MAX_ITER = 2000


class RandomForestModel:
    """Bagged Gini trees grown to purity, 4 candidate features per split."""

    def __init__(self, n_trees=_N_TREES, max_features=_MTRY):
        self.n_trees = n_trees
        self.max_features = max_features
        self.trees = []
        self.n_classes = 0
        self.importances = None

    def fit(self, X, y, n_classes, seed, feature_keys=None):
        n, p = X.shape
        self.n_classes = n_classes
        hashes = feature_hashes(feature_keys if feature_keys is not None else range(p))
        self.trees = []
        acc = np.zeros(p)
        for t in range(self.n_trees):
            rng = make_rng(seed ^ t)  # per-tree stream: model seed xor tree index
            rows = rng.integers(0, n, size=n)
            tree = ClassificationTree(n_classes, max_features=self.max_features)
            tree.fit(X[rows], y[rows], tree_key=derive_seed(seed, "key", t), feat_hashes=hashes)
            raw = tree.importance_raw / n
            s = raw.sum()
            if s > 0:
                raw = raw / s
            acc += raw
            self.trees.append(tree)
        acc /= self.n_trees
        s = acc.sum()
        self.importances = acc / s if s > 0 else acc
        return self

    def predict_proba(self, X):
        out = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            out += tree.predict_proba(X)
        return out / len(self.trees)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoostingModel:
    """Multinomial-deviance boosting: depth-3 trees, 100 stages, rate 0.1.

    No row or feature subsampling, so the fit is fully deterministic.
    """

    def __init__(self, n_stages=_GB_STAGES, max_depth=_GB_DEPTH, learning_rate=_GB_LR):
        self.n_stages = n_stages
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.base_score = None
        self.stages = []  # list of per-class (tree, leaf value array)
        self.n_classes = 0
        self.importances = None
        self.train_deviance = None

    def fit(self, X, y, n_classes):
        n, p = X.shape
        self.n_classes = n_classes
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        prior = onehot.mean(axis=0)
        prior = np.clip(prior, 1e-12, None)
        self.base_score = np.log(prior)
        raw = np.tile(self.base_score, (n, 1))
        acc = np.zeros(p)
        deviances = []
        self.stages = []
        for _ in range(self.n_stages):
            proba = _softmax(raw)
            stage = []
            for k in range(n_classes):
                resid = onehot[:, k] - proba[:, k]
                tree = RegressionTree(self.max_depth)
                train_leaf = tree.fit(X, resid)
                # per-leaf Newton step for the multinomial deviance
                gamma = np.zeros(tree.n_leaves)
                for leaf in range(tree.n_leaves):
                    rows = train_leaf == leaf
                    num = resid[rows].sum()
                    pk = proba[rows, k]
                    den = (pk * (1.0 - pk)).sum()
                    gamma[leaf] = ((n_classes - 1) / n_classes) * num / den if den > 1e-12 else 0.0
                raw[:, k] += self.learning_rate * gamma[train_leaf]
                acc += tree.importance_raw
                stage.append((tree, gamma))
            self.stages.append(stage)
            proba = _softmax(raw)
            deviances.append(float(-np.log(np.clip(proba[np.arange(n), y], 1e-300, None)).mean()))
        self.train_deviance = np.asarray(deviances)
        s = acc.sum()
        self.importances = acc / s if s > 0 else acc
        return self

    def decision_function(self, X):
        raw = np.tile(self.base_score, (X.shape[0], 1))
        for stage in self.stages:
            for k, (tree, gamma) in enumerate(stage):
                raw[:, k] += self.learning_rate * gamma[tree.apply(X)]
        return raw

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))


class LogisticRegressionModel:
    """Multinomial softmax regression, L2 penalty on weights (not bias).

    Objective: mean cross-entropy + (l2/2)*||W||^2, minimized by gradient
    descent with backtracking line search until the gradient infinity norm
    drops below tol.
    """

    def __init__(self, l2=_LR_L2, tol=_LR_TOL, max_iter=_LR_MAX_ITER):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.W = None
        self.b = None
        self.n_classes = 0
        self.importances = None
        self.objective_path = None
        self.converged = False

    def _value_grad(self, X, onehot, W, b):
        n = X.shape[0]
        proba = _softmax(X @ W + b)
        nll = -np.log(np.clip((proba * onehot).sum(axis=1), 1e-300, None)).mean()
        value = nll + 0.5 * self.l2 * float((W**2).sum())
        diff = (proba - onehot) / n
        gw = X.T @ diff + self.l2 * W
        gb = diff.sum(axis=0)
        return value, gw, gb

    def fit(self, X, y, n_classes):
        n, p = X.shape
        self.n_classes = n_classes
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        W = np.zeros((p, n_classes))
        b = np.zeros(n_classes)
        step = 1.0
        path = []
        value, gw, gb = self._value_grad(X, onehot, W, b)
        self.converged = False
        for _ in range(self.max_iter):
            path.append(value)
            ginf = max(np.abs(gw).max(), np.abs(gb).max())
            if ginf < self.tol:
                self.converged = True
                break
            gnorm2 = float((gw**2).sum() + (gb**2).sum())
            step = min(step * 2.0, 1e6)  # allow the step to grow back
            while True:
                W2 = W - step * gw
                b2 = b - step * gb
                v2, gw2, gb2 = self._value_grad(X, onehot, W2, b2)
                if v2 <= value - 0.5 * step * gnorm2 or step < 1e-16:
                    break
                step *= 0.5
            if v2 > value:
                break  # numerical floor; keep the last descent point
            W, b, value, gw, gb = W2, b2, v2, gw2, gb2
        else:
            path.append(value)
        if not self.converged:
            log.warning("logistic regression stopped before reaching tol=%g", self.tol)
        self.W = W
        self.b = b
        self.objective_path = np.asarray(path)
        imp = np.abs(W).mean(axis=1)
        s = imp.sum()
        self.importances = imp / s if s > 0 else imp
        return self

    def predict_proba(self, X):
        return _softmax(X @ self.W + self.b)


@dataclass
class TrainedClassifier:
    kind: str
    classes: list
    model: object
    importances: np.ndarray
    seed: int
    flags: list = field(default_factory=list)

    def predict_proba(self, X):
        return self.model.predict_proba(np.asarray(X, dtype=np.float64))

    def predict(self, X):
        proba = self.predict_proba(X)
        return [self.classes[i] for i in np.argmax(proba, axis=1)]


def encode_labels(labels):
    classes = sorted(set(labels))
    index = {c: i for i, c in enumerate(classes)}
    return classes, np.asarray([index[c] for c in labels], dtype=np.int64)


def train_classifier(kind, X, labels, seed=0):
    """Fit one classifier kind on standardized features.

    Requires at least 20 rows and at least 2 distinct labels.
    """
    if kind not in CLASSIFIER_KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-dimensional")
    if len(labels) != X.shape[0]:
        raise ValueError("label count does not match row count")
    if X.shape[0] < 20:
        raise ValueError(f"need at least 20 training rows, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite values; standardize first")
    classes, y = encode_labels(labels)
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    flags = []
    if kind == "rf":
        model = RandomForestModel().fit(X, y, len(classes), seed)
    elif kind == "gb":
        model = GradientBoostingModel().fit(X, y, len(classes))
    else:
        model = LogisticRegressionModel().fit(X, y, len(classes))
        if not model.converged:
            flags.append("lr_not_converged")
    return TrainedClassifier(
        kind=kind,
        classes=classes,
        model=model,
        importances=np.asarray(model.importances, dtype=np.float64),
        seed=seed,
        flags=flags,
    )


def importance_ranks(importances):
    """Rank features by importance: 1 = most important, ties broken by index."""
    imp = np.asarray(importances, dtype=np.float64)
    order = np.lexsort((np.arange(imp.size), -imp))
    ranks = np.empty(imp.size, dtype=np.int64)
    ranks[order] = np.arange(1, imp.size + 1)
    return ranks


def evaluate_classifier(trained, X, labels):
    """Accuracy, macro F1, one-vs-rest macro ROC-AUC, confusion matrix."""
    X = np.asarray(X, dtype=np.float64)
    proba = trained.predict_proba(X)
    pred = [trained.classes[i] for i in np.argmax(proba, axis=1)]
    labels = list(labels)
    auc, skipped = roc_auc_ovr_macro(proba, labels, trained.classes)
    return {
        "accuracy": accuracy(labels, pred),
        "f1_macro": f1_macro(labels, pred),
        "roc_auc_ovr_macro": auc,
        "auc_skipped_classes": skipped,
        "confusion_matrix": confusion_matrix(labels, pred, sorted(set(labels) | set(pred))),
        "classes": trained.classes,
    }
