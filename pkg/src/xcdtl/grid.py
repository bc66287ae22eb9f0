"""Stress-test grid: corruption, NT/T scenarios, pairs x seeds x alpha x eta.

Every cell derives its own RNG streams from the seed entry and the cell key,
so results are independent of execution order and worker count. Rows are
streamed to CSV in sorted order through a small reordering buffer, and an
existing results file is reused row-by-row (resume) instead of recomputed.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass

import numpy as np

from . import alignment, anomaly
from .graphs import DOMAINS
from .rng import derive_seed, fmt_param, make_rng

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (1, 24, 42, 50, 123, 501, 700, 800, 920, 999)
DEFAULT_LEVELS = (0.1, 0.5, 0.9)

RESULTS_HEADER = (
    "source,target,seed,alpha,eta,nt_roc,nt_ap,nt_f1,"
    "t_roc,t_ap,t_f1,tgi_roc,tgi_ap,tgi_f1,fallback,status"
)


@dataclass
class GridConfig:
    seeds: tuple = DEFAULT_SEEDS
    alphas: tuple = DEFAULT_LEVELS
    etas: tuple = DEFAULT_LEVELS
    missing_frac: float = 0.05
    contamination: float = 0.1
    feature_mode: str = "anchors8"
    master_pool: int = 1000
    train_pool: int = 500
    test_size: int = 250
    domains: tuple = DOMAINS
    master_seed: int = 20240

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.alphas = tuple(float(a) for a in self.alphas)
        self.etas = tuple(float(e) for e in self.etas)
        self.domains = tuple(self.domains)
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for name, levels in (("alphas", self.alphas), ("etas", self.etas)):
            if any(not 0.0 < x <= 1.0 for x in levels):
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0.0 <= self.missing_frac < 1.0:
            raise ValueError("missing_frac must lie in [0, 1)")
        if not 0.0 < self.contamination <= 0.5:
            raise ValueError("contamination must lie in (0, 0.5]")
        if self.feature_mode not in ("anchors8", "all12"):
            raise ValueError("feature_mode must be anchors8 or all12")
        unknown = set(self.domains) - set(DOMAINS)
        if unknown:
            raise ValueError(f"unknown domains {sorted(unknown)}")
        if self.train_pool + self.test_size > self.master_pool:
            raise ValueError("train_pool + test_size exceeds master_pool")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**raw)

    def to_json(self, path):
        payload = {
            "seeds": list(self.seeds),
            "alphas": list(self.alphas),
            "etas": list(self.etas),
            "missing_frac": self.missing_frac,
            "contamination": self.contamination,
            "feature_mode": self.feature_mode,
            "master_pool": self.master_pool,
            "train_pool": self.train_pool,
            "test_size": self.test_size,
            "domains": list(self.domains),
            "master_seed": self.master_seed,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def corrupt(X, eta, missing_frac, seed):
    """Additive per-feature Gaussian noise, then random missingness + impute.

    Noise scale is eta times each column's standard deviation over the input
    rows. Exactly floor(missing_frac * cells) uniformly chosen cells go
    missing and are median-imputed from the corrupted non-missing entries.
    """
    X = np.asarray(X, dtype=np.float64)
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if not 0.0 <= missing_frac < 1.0:
        raise ValueError("missing_frac must lie in [0, 1)")
    if eta == 0.0 and missing_frac == 0.0:
        return X.copy()
    n, p = X.shape
    rng = make_rng(seed)
    sigma = X.std(axis=0)
    out = X + rng.standard_normal((n, p)) * (eta * sigma)
    n_missing = int(np.floor(missing_frac * n * p))
    if n_missing > 0:
        flat = rng.choice(n * p, size=n_missing, replace=False)
        out.flat[flat] = np.nan
        for j in range(p):
            col = out[:, j]
            gone = np.isnan(col)
            if not gone.any():
                continue
            kept = col[~gone]
            med = float(np.median(kept)) if kept.size else float(np.median(X[:, j]))
            col[gone] = med
    return out


@dataclass
class DomainSplit:
    """Per (domain, seed): sampled indices into the master pool plus labels."""

    train_idx: np.ndarray  # 500 master-pool row indices
    test_idx: np.ndarray  # 250 master-pool row indices
    train_labels: np.ndarray
    test_labels: np.ndarray


def make_split(values, mask, config, domain, seed):
    """Sample train-pool + test rows and freeze uncorrupted anomaly labels."""
    n_rows = values.shape[0]
    take = config.train_pool + config.test_size
    rng = make_rng(derive_seed(seed, "split", domain))
    perm = rng.permutation(n_rows)[:take]
    labels = anomaly.label_anomalies(values[perm], mask[perm])
    return DomainSplit(
        train_idx=perm[: config.train_pool],
        test_idx=perm[config.train_pool :],
        train_labels=labels.labels[: config.train_pool],
        test_labels=labels.labels[config.train_pool :],
    )


@dataclass
class GridRuntime:
    """Everything a worker needs; built once and shared via fork."""

    config: GridConfig
    imputed: dict  # domain -> (master_pool, 12) raw post-imputation matrix
    splits: dict  # (domain, seed) -> DomainSplit
    pair_anchors: dict  # (source, target) -> (anchor list, selection fallback flag)
    global_anchors: list


@dataclass
class CellResult:
    source: str
    target: str
    seed: int
    alpha: float
    eta: float
    nt: anomaly.DetectionMetrics | None
    t: anomaly.DetectionMetrics | None
    tgi: dict
    fallback: bool
    status: str
    n_train_source: int = 0
    n_train_target: int = 0


def _nan_metrics():
    return anomaly.DetectionMetrics(float("nan"), float("nan"), float("nan"), float("nan"))


def _scenario(train_parts, test_matrix, forest_seed, contamination):
    """Fit alignment + forest on training rows; score held-out rows."""
    first = train_parts[0]
    second = train_parts[1] if len(train_parts) > 1 else first[:0]
    proj = alignment.fit_alignment(first, second)
    aligned_train = np.vstack([alignment.project(proj, m) for m in train_parts])
    forest = anomaly.IsolationForestModel().fit(aligned_train, forest_seed)
    train_scores = anomaly.score(forest, aligned_train)
    test_scores, _, threshold = anomaly.detect(
        forest, train_scores, alignment.project(proj, test_matrix), contamination
    )
    return proj, test_scores, threshold


def run_cell(runtime, source, target, seed, alpha, eta):
    """One grid cell: corrupt target subset, run NT and T, compute TGIs."""
    config = runtime.config
    split_t = runtime.splits[(target, seed)]
    x_target_pool = runtime.imputed[target][split_t.train_idx]
    x_source = runtime.imputed[source][runtime.splits[(source, seed)].train_idx]
    x_test = runtime.imputed[target][split_t.test_idx]
    y_test = split_t.test_labels

    a_s, e_s = fmt_param(alpha), fmt_param(eta)
    n_sub = int(np.floor(alpha * config.train_pool))
    order = make_rng(derive_seed(seed, source, target, a_s, e_s, "subset")).permutation(
        config.train_pool
    )
    subset = x_target_pool[order[:n_sub]]
    corrupted = corrupt(
        subset, eta, config.missing_frac, derive_seed(seed, source, target, a_s, e_s, "corrupt")
    )

    anchors, fallback = runtime.pair_anchors[(source, target)]
    nt_seed = derive_seed(seed, source, target, a_s, e_s, "nt")
    t_seed = derive_seed(seed, source, target, a_s, e_s, "t")

    def attempt(anchor_list):
        cols = np.asarray(anchor_list, dtype=np.int64)
        nt_proj, nt_scores, nt_thr = _scenario(
            [corrupted[:, cols]], x_test[:, cols], nt_seed, config.contamination
        )
        t_proj, t_scores, t_thr = _scenario(
            [x_source[:, cols], corrupted[:, cols]], x_test[:, cols], t_seed, config.contamination
        )
        return nt_proj, t_proj, (nt_scores, nt_thr), (t_scores, t_thr)

    nt_proj, t_proj, nt_out, t_out = attempt(anchors)
    if (nt_proj.fallback_triggered or t_proj.fallback_triggered) and list(anchors) != list(
        runtime.global_anchors
    ):
        fallback = True
        nt_proj, t_proj, nt_out, t_out = attempt(runtime.global_anchors)
    elif nt_proj.fallback_triggered or t_proj.fallback_triggered:
        fallback = True

    nt = anomaly.detection_metrics(nt_out[0], y_test, nt_out[1])
    t = anomaly.detection_metrics(t_out[0], y_test, t_out[1])
    tgi = {
        "roc": anomaly.transfer_gain(t.roc_auc, nt.roc_auc) if _usable(nt.roc_auc) else float("nan"),
        "ap": anomaly.transfer_gain(t.average_precision, nt.average_precision)
        if _usable(nt.average_precision)
        else float("nan"),
        "f1": anomaly.transfer_gain(t.f1, nt.f1),
    }
    status = "ok" if not (nt.flags or t.flags) else "single_class"
    n_train_t = corrupted.shape[0]
    n_train_s = x_source.shape[0]
    log.debug(
        "cell %s->%s seed=%d a=%s e=%s: N/p NT=%.2f T=%.2f",
        source,
        target,
        seed,
        a_s,
        e_s,
        n_train_t / len(anchors),
        (n_train_t + n_train_s) / len(anchors),
    )
    return CellResult(
        source=source,
        target=target,
        seed=seed,
        alpha=alpha,
        eta=eta,
        nt=nt,
        t=t,
        tgi=tgi,
        fallback=fallback,
        status=status,
        n_train_source=n_train_s,
        n_train_target=n_train_t,
    )


def _usable(x):
    return np.isfinite(x)


def cell_keys(config, pairs=None):
    """Sorted cell list: (source idx, target idx, seed, alpha, eta)."""
    domains = [d for d in DOMAINS if d in config.domains]
    wanted = None
    if pairs is not None:
        wanted = {(s, t) for s, t in pairs}
    cells = []
    for src in domains:
        for tgt in domains:
            if src == tgt:
                continue
            if wanted is not None and (src, tgt) not in wanted:
                continue
            for seed in sorted(config.seeds):
                for alpha in sorted(config.alphas):
                    for eta in sorted(config.etas):
                        cells.append((src, tgt, seed, alpha, eta))
    index = {d: i for i, d in enumerate(DOMAINS)}
    cells.sort(key=lambda c: (index[c[0]], index[c[1]], c[2], c[3], c[4]))
    return cells


def result_row(res):
    def fmt(x):
        return f"{float(x):.12g}"

    return [
        res.source,
        res.target,
        str(res.seed),
        fmt_param(res.alpha),
        fmt_param(res.eta),
        fmt(res.nt.roc_auc),
        fmt(res.nt.average_precision),
        fmt(res.nt.f1),
        fmt(res.t.roc_auc),
        fmt(res.t.average_precision),
        fmt(res.t.f1),
        fmt(res.tgi["roc"]),
        fmt(res.tgi["ap"]),
        fmt(res.tgi["f1"]),
        "true" if res.fallback else "false",
        res.status,
    ]


def _error_row(cell, exc):
    src, tgt, seed, alpha, eta = cell
    msg = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    return [
        src,
        tgt,
        str(seed),
        fmt_param(alpha),
        fmt_param(eta),
        *(["nan"] * 9),
        "false",
        msg,
    ]


def _row_key(row):
    return (row[0], row[1], row[2], row[3], row[4])


def _read_existing(path):
    if not os.path.exists(path):
        return {}
    existing = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER.split(","):
            raise ValueError(f"{path}: unexpected results header")
        for row in reader:
            existing[_row_key(row)] = row
    return existing


_WORKER_RUNTIME = None


def _worker(args):
    cell_index, cell = args
    try:
        res = run_cell(_WORKER_RUNTIME, *cell)
        return cell_index, result_row(res)
    except Exception as exc:  # per-cell failures land in the status column
        log.exception("cell %s failed", cell)
        return cell_index, _error_row(cell, exc)


def resolve_jobs(requested):
    """Worker count: the request, capped by XCDTL_THREADS and CPU count."""
    jobs = requested if requested and requested > 0 else (os.cpu_count() or 1)
    cap = os.environ.get("XCDTL_THREADS")
    if cap:
        try:
            cap_n = int(cap)
        except ValueError as exc:
            raise ValueError(f"XCDTL_THREADS must be an integer, got {cap!r}") from exc
        if cap_n < 1:
            raise ValueError("XCDTL_THREADS must be >= 1")
        jobs = min(jobs, cap_n)
    return max(1, min(jobs, os.cpu_count() or 1))


class _OrderedWriter:
    """Buffers out-of-order rows, flushing the contiguous prefix to disk."""

    def __init__(self, fh, total):
        self.writer = csv.writer(fh, lineterminator="\n")
        self.fh = fh
        self.pending = {}
        self.next_index = 0
        self.total = total

    def add(self, index, row):
        self.pending[index] = row
        while self.next_index in self.pending:
            self.writer.writerow(self.pending.pop(self.next_index))
            self.next_index += 1
        self.fh.flush()

    def done(self):
        return self.next_index == self.total and not self.pending


def run_grid(runtime, out_path, pairs=None, jobs=1, resume=True):
    """Run (or resume) the grid, writing the sorted results CSV atomically."""
    global _WORKER_RUNTIME
    config = runtime.config
    cells = cell_keys(config, pairs)
    existing = _read_existing(out_path) if resume else {}
    rows = [None] * len(cells)
    todo = []
    for i, cell in enumerate(cells):
        src, tgt, seed, alpha, eta = cell
        key = (src, tgt, str(seed), fmt_param(alpha), fmt_param(eta))
        if key in existing:
            rows[i] = existing[key]
        else:
            todo.append((i, cell))
    log.info("grid: %d cells total, %d cached, %d to run", len(cells), len(cells) - len(todo), len(todo))

    jobs = resolve_jobs(jobs)
    tmp_path = out_path + ".tmp"
    with open(tmp_path, "w", newline="") as fh:
        writer = _OrderedWriter(fh, len(cells))
        writer.writer.writerow(RESULTS_HEADER.split(","))
        for i, row in enumerate(rows):
            if row is not None:
                writer.add(i, row)
        if todo:
            if jobs == 1:
                _WORKER_RUNTIME = runtime
                try:
                    for item in todo:
                        index, row = _worker(item)
                        writer.add(index, row)
                finally:
                    _WORKER_RUNTIME = None
            else:
                _WORKER_RUNTIME = runtime  # shared with forked workers
                try:
                    with ProcessPoolExecutor(max_workers=jobs) as pool:
                        futures = {pool.submit(_worker, item) for item in todo}
                        while futures:
                            finished, futures = wait(futures, return_when=FIRST_COMPLETED)
                            for fut in finished:
                                index, row = fut.result()
                                writer.add(index, row)
                finally:
                    _WORKER_RUNTIME = None
        if not writer.done():
            raise RuntimeError("grid writer finished with missing rows")
    os.replace(tmp_path, out_path)
    return len(cells)
