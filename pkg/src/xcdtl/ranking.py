"""Borda consensus, directed transfer scores, and anchor selection.

Features with HIGH mean importance rank (weakly discriminative of domain
identity) score high; the score is weighted by cross-domain correlation
consistency and penalized by standardized mean shift. The top 8 features of
a directed pair are its anchors; a degenerate pair falls back to the global
consensus anchors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES
from .stats import spearman

N_ANCHORS = 8


@dataclass
class BordaScore:
    b: np.ndarray  # per-feature mean rank over models and seeds
    per_model: dict  # kind -> per-feature mean rank over seeds
    n_seeds: dict  # kind -> number of rank vectors averaged

    @property
    def n_features(self):
        return self.b.size


@dataclass
class IITTable:
    source: str
    target: str
    b: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    iit: np.ndarray
    anchors: list  # feature indices, best first
    mean_iit: float
    degenerate: bool


@dataclass
class GlobalConsensus:
    iit_g: np.ndarray
    anchors: list
    mean_b: np.ndarray
    mean_rho: np.ndarray
    mean_delta: np.ndarray
    flags: list = field(default_factory=list)


def borda_scores(rank_vectors):
    """Mean importance rank per feature.

    `rank_vectors` maps model kind -> sequence of rank vectors (one per
    seed). Models are weighted equally: B is the mean over models of each
    model's seed-averaged ranks.
    """
    if not rank_vectors:
        raise ValueError("no rank vectors given")
    per_model = {}
    n_seeds = {}
    width = None
    for kind in sorted(rank_vectors):
        vectors = [np.asarray(v, dtype=np.float64) for v in rank_vectors[kind]]
        if not vectors:
            raise ValueError(f"model {kind!r} has no rank vectors")
        for v in vectors:
            if width is None:
                width = v.size
            elif v.size != width:
                raise ValueError("inconsistent feature counts across rank vectors")
        per_model[kind] = np.mean(vectors, axis=0)
        n_seeds[kind] = len(vectors)
    b = np.mean([per_model[k] for k in sorted(per_model)], axis=0)
    return BordaScore(b=b, per_model=per_model, n_seeds=n_seeds)


def rho_consistency(S, T, i):
    """Correlation-profile consistency of feature i across two domains.

    Within each domain, feature i's profile is its vector of Spearman
    correlations with every other feature; the result is the Spearman
    correlation between the two profiles. Constant inputs contribute 0.
    """
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if S.shape[1] != T.shape[1]:
        raise ValueError("feature count mismatch")
    if S.shape[0] < 3 or T.shape[0] < 3:
        raise ValueError("need at least 3 rows per domain")
    others = [j for j in range(S.shape[1]) if j != i]
    prof_s = np.array([spearman(S[:, i], S[:, j]) for j in others])
    prof_t = np.array([spearman(T[:, i], T[:, j]) for j in others])
    return spearman(prof_s, prof_t)


def mean_shift(S, T, i):
    """Absolute difference of the two domains' means of pooled z-scores.

    Pooled moments are combined from per-domain sums, so the result is
    bitwise symmetric in (S, T). A pooled sigma below 1e-12 gives 0.
    """
    s = np.asarray(S, dtype=np.float64)[:, i]
    t = np.asarray(T, dtype=np.float64)[:, i]
    n = s.size + t.size
    mu = (s.sum() + t.sum()) / n
    ss = ((s - mu) ** 2).sum() + ((t - mu) ** 2).sum()
    sigma = np.sqrt(ss / n)
    if sigma < 1e-12:
        return 0.0
    return float(abs((s.mean() - mu) / sigma - (t.mean() - mu) / sigma))


def iit_score(b, rho, delta):
    return b * rho / (1.0 + delta)


def _top_anchors(scores):
    order = np.lexsort((np.arange(scores.size), -scores))
    return [int(f) for f in order[:N_ANCHORS]]


def iit_table(S, T, borda, source="S", target="T"):
    """Directed transfer-score table for a source/target domain pair."""
    S = np.asarray(S, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    p = borda.n_features
    if S.shape[1] != p or T.shape[1] != p:
        raise ValueError("feature count mismatch with Borda scores")
    rho = np.array([rho_consistency(S, T, i) for i in range(p)])
    delta = np.array([mean_shift(S, T, i) for i in range(p)])
    iit = iit_score(borda.b, rho, delta)
    anchors = _top_anchors(iit)
    return IITTable(
        source=source,
        target=target,
        b=borda.b.copy(),
        rho=rho,
        delta=delta,
        iit=iit,
        anchors=anchors,
        mean_iit=float(iit[anchors].mean()),
        degenerate=int((iit > 0).sum()) < N_ANCHORS,
    )


def global_consensus(tables):
    """Per-feature mean of the directed scores over all 12 ordered pairs."""
    pairs = {(t.source, t.target) for t in tables}
    domains = sorted({d for pair in pairs for d in pair})
    expected = {(s, t) for s in domains for t in domains if s != t}
    if len(domains) != 4 or pairs != expected or len(tables) != 12:
        missing = sorted(expected - pairs)
        raise ValueError(f"need exactly the 12 ordered domain pairs; missing {missing}")
    ordered = sorted(tables, key=lambda t: (t.source, t.target))
    iit_g = np.mean([t.iit for t in ordered], axis=0)
    return GlobalConsensus(
        iit_g=iit_g,
        anchors=_top_anchors(iit_g),
        mean_b=np.mean([t.b for t in ordered], axis=0),
        mean_rho=np.mean([t.rho for t in ordered], axis=0),
        mean_delta=np.mean([t.delta for t in ordered], axis=0),
    )


def select_anchors(pair_table, consensus):
    """Pair anchors, or the global anchors when the pair is degenerate.

    Returns (anchor list, fallback flag). Callers also retry with the
    global anchors when alignment signals ill-conditioning.
    """
    if pair_table.degenerate:
        return list(consensus.anchors), True
    return list(pair_table.anchors), False


_IIT_HEADER = ["source", "target", "feature", "B", "rho", "delta", "iit", "is_anchor"]


def _fmt(x):
    # shortest round-trip form: reloading a table reproduces it bitwise
    return repr(float(x))


def save_iit_table(table, path):
    anchor_set = set(table.anchors)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_IIT_HEADER)
        for i, name in enumerate(FEATURE_NAMES):
            writer.writerow(
                [
                    table.source,
                    table.target,
                    name,
                    _fmt(table.b[i]),
                    _fmt(table.rho[i]),
                    _fmt(table.delta[i]),
                    _fmt(table.iit[i]),
                    "true" if i in anchor_set else "false",
                ]
            )


def save_global_consensus(consensus, path):
    anchor_set = set(consensus.anchors)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_IIT_HEADER)
        for i, name in enumerate(FEATURE_NAMES):
            writer.writerow(
                [
                    "global",
                    "global",
                    name,
                    _fmt(consensus.mean_b[i]),
                    _fmt(consensus.mean_rho[i]),
                    _fmt(consensus.mean_delta[i]),
                    _fmt(consensus.iit_g[i]),
                    "true" if i in anchor_set else "false",
                ]
            )


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _IIT_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = list(reader)
    if len(rows) != len(FEATURE_NAMES):
        raise ValueError(f"{path}: expected {len(FEATURE_NAMES)} rows, got {len(rows)}")
    for i, row in enumerate(rows):
        if row[2] != FEATURE_NAMES[i]:
            raise ValueError(f"{path}: row {i} names feature {row[2]!r}")
    return rows


def load_iit_table(path):
    rows = _read_rows(path)
    iit = np.array([float(r[6]) for r in rows])
    anchors = sorted(
        (i for i, r in enumerate(rows) if r[7] == "true"),
        key=lambda i: (-iit[i], i),
    )
    return IITTable(
        source=rows[0][0],
        target=rows[0][1],
        b=np.array([float(r[3]) for r in rows]),
        rho=np.array([float(r[4]) for r in rows]),
        delta=np.array([float(r[5]) for r in rows]),
        iit=iit,
        anchors=anchors,
        mean_iit=float(iit[anchors].mean()) if anchors else 0.0,
        degenerate=int((iit > 0).sum()) < N_ANCHORS,
    )


def load_global_consensus(path):
    rows = _read_rows(path)
    iit_g = np.array([float(r[6]) for r in rows])
    anchors = sorted(
        (i for i, r in enumerate(rows) if r[7] == "true"),
        key=lambda i: (-iit_g[i], i),
    )
    return GlobalConsensus(
        iit_g=iit_g,
        anchors=anchors,
        mean_b=np.array([float(r[3]) for r in rows]),
        mean_rho=np.array([float(r[4]) for r in rows]),
        mean_delta=np.array([float(r[5]) for r in rows]),
    )
