"""Ranking and classification metrics shared by the classifier and anomaly paths.

ROC-AUC uses the Mann-Whitney statistic with midranks, so score ties count
0.5. Average precision is the step-wise construction over descending score
thresholds (tied scores collapse into one step). F1-style ratios define
0/0 as 0.
"""

from __future__ import annotations

import numpy as np


def rankdata(values):
    """Average ranks (1-based) with midrank tie handling."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels):
    """Binary ROC-AUC via the Mann-Whitney U with tie correction."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels):
    """Area under precision-recall via rank-descending steps."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise ValueError("average_precision needs both classes")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        tp += int(y[i : j + 1].sum())
        seen = j + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(ap)


def binary_f1(predictions, labels):
    predictions = np.asarray(predictions, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    tp = int((predictions & labels).sum())
    fp = int((predictions & ~labels).sum())
    fn = int((~predictions & labels).sum())
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def accuracy(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return float((y_true == y_pred).mean())


def f1_macro(y_true, y_pred):
    """Macro F1 over the union of classes present in truth or prediction."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    classes = np.unique(np.concatenate([y_true, y_pred]))
    scores = [binary_f1(y_pred == c, y_true == c) for c in classes]
    return float(np.mean(scores))


def confusion_matrix(y_true, y_pred, classes):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        out[index[t], index[p]] += 1
    return out


def roc_auc_ovr_macro(probabilities, y_true, classes):
    """Macro one-vs-rest AUC; classes missing a positive or negative side are
    skipped and reported."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    y_true = np.asarray(y_true)
    aucs = []
    skipped = []
    for j, c in enumerate(classes):
        pos = y_true == c
        if pos.all() or not pos.any():
            skipped.append(c)
            continue
        aucs.append(roc_auc(probabilities[:, j], pos))
    if not aucs:
        raise ValueError("no class with both positives and negatives")
    return float(np.mean(aucs)), skipped
