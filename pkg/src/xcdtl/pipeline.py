"""End-to-end plumbing: pools -> features -> classifiers -> ranking -> grid.

Each stage persists its outputs under the working directory (pools/,
features/, classify/, rank/) and is skipped when its files already exist,
so a transfer run can resume and the report stage can audit intermediates.
All caches round-trip exactly; a resumed run matches a fresh one bitwise.
"""

from __future__ import annotations

import csv
import logging
import os

import numpy as np

from .classifiers import (
    CLASSIFIER_KINDS,
    evaluate_classifier,
    importance_ranks,
    train_classifier,
)
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    features_for_ensemble,
    load_feature_matrix,
    save_feature_matrix,
    zscore_columns,
)
from .graphs import generate_ensemble, load_ensemble, save_ensemble
from .grid import GridRuntime, make_split
from .ranking import (
    borda_scores,
    global_consensus,
    iit_table,
    load_global_consensus,
    load_iit_table,
    save_global_consensus,
    save_iit_table,
    select_anchors,
)
from .rng import derive_seed

log = logging.getLogger(__name__)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def ensure_pools(config, workdir):
    """Generate (or load) the per-domain master graph pools.

    A cached pool is reused only if it matches the config: the graph ids
    embed the generation seed, so a pool generated under a different
    master_seed (or size) is regenerated rather than silently reused.
    """
    pool_dir = _ensure_dir(os.path.join(workdir, "pools"))
    ensembles = {}
    for domain in config.domains:
        path = os.path.join(pool_dir, f"{domain}.jsonl")
        seed = derive_seed(config.master_seed, "pool", domain)
        if os.path.exists(path):
            ens = load_ensemble(path)
            if (
                len(ens.graphs) == config.master_pool
                and ens.graphs[0].graph_id == f"{domain}-{seed}-0000"
            ):
                ensembles[domain] = ens
                continue
            log.warning("%s: cached pool does not match config, regenerating", path)
        log.info("generating %s pool (%d graphs)", domain, config.master_pool)
        ens = generate_ensemble(domain, config.master_pool, seed)
        save_ensemble(ens, path)
        ensembles[domain] = ens
    return ensembles


def ensure_features(config, workdir):
    """Per-domain master feature matrices, plus their CSV artifacts.

    Features are always recomputed from the (exactly persisted) graph pools
    rather than reloaded from CSV: the CSV interface rounds to 12 significant
    digits, and downstream results must not depend on whether a cache file
    existed. The CSV artifact is rewritten each run (same pool, same bytes).
    """
    feat_dir = _ensure_dir(os.path.join(workdir, "features"))
    ensembles = ensure_pools(config, workdir)
    matrices = {}
    for domain in config.domains:
        path = os.path.join(feat_dir, f"{domain}.csv")
        log.info("computing %s features", domain)
        fm = features_for_ensemble(ensembles[domain])
        save_feature_matrix(fm, path)
        matrices[domain] = fm
    return matrices


_RANKS_HEADER = ["model", "seed"] + [f"rank_{f}" for f in FEATURE_NAMES]
_METRICS_HEADER = ["model", "seed", "accuracy", "f1_macro", "roc_auc"]


def classification_data(config, matrices, seed):
    """Standardized train/test split for one seed's domain-classification task.

    Training rows are the four domains' train pools; the held-out rows are
    the disjoint test samples. Standardization is fit on training rows only.
    """
    train_vals, train_labels, test_vals, test_labels = [], [], [], []
    for domain in config.domains:
        fm = matrices[domain]
        imputed, _, _ = zscore_columns(fm.values, fm.mask)
        split = make_split(fm.values, fm.mask, config, domain, seed)
        train_vals.append(imputed[split.train_idx])
        train_labels += [domain] * split.train_idx.size
        test_vals.append(imputed[split.test_idx])
        test_labels += [domain] * split.test_idx.size
    x_train = np.vstack(train_vals)
    _, z_train, params = zscore_columns(x_train)
    x_test = np.vstack(test_vals)
    live = ~params.constant
    z_test = np.zeros_like(x_test)
    z_test[:, live] = (x_test[:, live] - params.mean[live]) / params.std[live]
    return z_train, train_labels, z_test, test_labels


def run_classifiers(config, out_dir, matrices):
    """Fit RF/GB/LR per seed; persist rank vectors, metrics, confusions.

    A cached ranks.csv is reused only when it covers exactly the configured
    seeds; otherwise everything is retrained and stale files are replaced.
    """
    _ensure_dir(out_dir)
    ranks_path = os.path.join(out_dir, "ranks.csv")
    if os.path.exists(ranks_path):
        cached, cached_seeds = load_rank_vectors(ranks_path, with_seeds=True)
        if cached_seeds == sorted(config.seeds):
            return cached
        log.warning("%s: cached ranks cover different seeds, retraining", ranks_path)
        for name in os.listdir(out_dir):
            if name.startswith("confusion_") and name.endswith(".csv"):
                os.remove(os.path.join(out_dir, name))
    rank_vectors = {kind: [] for kind in CLASSIFIER_KINDS}
    metric_rows = []
    for seed in sorted(config.seeds):
        z_train, y_train, z_test, y_test = classification_data(config, matrices, seed)
        for kind in CLASSIFIER_KINDS:
            log.info("training %s (seed %d)", kind, seed)
            model = train_classifier(kind, z_train, y_train, seed=seed)
            ranks = importance_ranks(model.importances)
            rank_vectors[kind].append(ranks)
            scores = evaluate_classifier(model, z_test, y_test)
            metric_rows.append(
                [
                    kind,
                    str(seed),
                    repr(float(scores["accuracy"])),
                    repr(float(scores["f1_macro"])),
                    repr(float(scores["roc_auc_ovr_macro"])),
                ]
            )
            cm_path = os.path.join(out_dir, f"confusion_{kind}_{seed}.csv")
            with open(cm_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["true\\pred"] + list(scores["classes"]))
                for cls, row in zip(scores["classes"], scores["confusion_matrix"]):
                    writer.writerow([cls] + [str(int(v)) for v in row])
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRICS_HEADER)
        writer.writerows(metric_rows)
    with open(ranks_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RANKS_HEADER)
        for kind in CLASSIFIER_KINDS:
            for seed, ranks in zip(sorted(config.seeds), rank_vectors[kind]):
                writer.writerow([kind, str(seed)] + [str(int(r)) for r in ranks])
    return rank_vectors


def load_rank_vectors(path, with_seeds=False):
    rank_vectors = {kind: [] for kind in CLASSIFIER_KINDS}
    seen_seeds = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _RANKS_HEADER:
            raise ValueError(f"{path}: unexpected header")
        for row in reader:
            kind = row[0]
            if kind not in rank_vectors:
                raise ValueError(f"{path}: unknown model kind {kind!r}")
            if kind == CLASSIFIER_KINDS[0]:
                seen_seeds.append(int(row[1]))
            rank_vectors[kind].append(np.asarray([float(v) for v in row[2:]]))
    for kind, vectors in rank_vectors.items():
        if not vectors:
            raise ValueError(f"{path}: no rank vectors for model {kind!r}")
    if with_seeds:
        return rank_vectors, seen_seeds
    return rank_vectors


_BORDA_HEADER = ["feature"] + list(CLASSIFIER_KINDS) + ["borda"]


def save_borda(borda, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_BORDA_HEADER)
        for i, name in enumerate(FEATURE_NAMES):
            row = [name]
            row += [repr(float(borda.per_model[k][i])) for k in CLASSIFIER_KINDS]
            row.append(repr(float(borda.b[i])))
            writer.writerow(row)


def load_feature_dir(domains, feat_dir):
    """Load per-domain feature matrices from a directory of CSVs."""
    missing = [
        os.path.join(feat_dir, f"{d}.csv")
        for d in domains
        if not os.path.exists(os.path.join(feat_dir, f"{d}.csv"))
    ]
    if missing:
        raise FileNotFoundError(
            "missing feature files:\n" + "\n".join(f"  {p}" for p in missing)
        )
    return {d: load_feature_matrix(os.path.join(feat_dir, f"{d}.csv")) for d in domains}


def load_borda_input(path):
    """BordaScore from either a ranks.csv (per model+seed) or a borda.csv."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == _RANKS_HEADER:
        return borda_scores(load_rank_vectors(path))
    if header == _BORDA_HEADER:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows = list(reader)
        if len(rows) != len(FEATURE_NAMES):
            raise ValueError(f"{path}: expected {len(FEATURE_NAMES)} feature rows")
        per_model = {
            kind: np.array([float(r[1 + k]) for r in rows])
            for k, kind in enumerate(CLASSIFIER_KINDS)
        }
        b = np.array([float(r[1 + len(CLASSIFIER_KINDS)]) for r in rows])
        from .ranking import BordaScore

        return BordaScore(b=b, per_model=per_model, n_seeds={k: 1 for k in per_model})
    raise ValueError(f"{path}: not a ranks or borda CSV (header {header!r})")


def run_ranking(config, out_dir, matrices, borda):
    """The 12 directed tables and the global consensus from a Borda input."""
    _ensure_dir(out_dir)
    save_borda(borda, os.path.join(out_dir, "borda.csv"))
    pairs = [(s, t) for s in config.domains for t in config.domains if s != t]
    tables = {}
    imputed = {}

    def pair_table(src, tgt):
        # cached tables are valid only for the borda in hand (B column
        # round-trips exactly, so equality is a safe staleness check)
        path = os.path.join(out_dir, f"iit_{src}_{tgt}.csv")
        if os.path.exists(path):
            table = load_iit_table(path)
            if np.array_equal(table.b, borda.b):
                return table
            log.warning("%s: cached table is stale, recomputing", path)
        if not imputed:
            for domain in config.domains:
                fm = matrices[domain]
                imputed[domain], _, _ = zscore_columns(fm.values, fm.mask)
        table = iit_table(imputed[src], imputed[tgt], borda, source=src, target=tgt)
        save_iit_table(table, path)
        return table

    for src, tgt in pairs:
        tables[(src, tgt)] = pair_table(src, tgt)
    global_path = os.path.join(out_dir, "iit_global.csv")
    if len(tables) == 12:
        consensus = global_consensus(list(tables.values()))
        save_global_consensus(consensus, global_path)
    elif os.path.exists(global_path):
        consensus = load_global_consensus(global_path)
    else:
        raise ValueError(
            "global consensus needs all 12 domain pairs; "
            f"have {len(tables)} (a domain-restricted config cannot rank)"
        )
    return tables, consensus


def build_runtime(config, workdir, pairs=None):
    """Prepare everything grid cells need, computing missing stages."""
    matrices = ensure_features(config, workdir)
    rank_vectors = run_classifiers(config, os.path.join(workdir, "classify"), matrices)
    tables, consensus = run_ranking(
        config, os.path.join(workdir, "rank"), matrices, borda_scores(rank_vectors)
    )

    imputed = {}
    for domain in config.domains:
        fm = matrices[domain]
        imputed[domain], _, _ = zscore_columns(fm.values, fm.mask)

    splits = {}
    for domain in config.domains:
        fm = matrices[domain]
        for seed in config.seeds:
            splits[(domain, seed)] = make_split(fm.values, fm.mask, config, domain, seed)

    pair_anchors = {}
    if config.feature_mode == "all12":
        global_anchors = list(range(N_FEATURES))
        for key in tables:
            pair_anchors[key] = (list(range(N_FEATURES)), False)
    else:
        global_anchors = list(consensus.anchors)
        for key, table in tables.items():
            pair_anchors[key] = select_anchors(table, consensus)

    wanted = pairs if pairs is not None else list(tables)
    for pair in wanted:
        if pair not in pair_anchors:
            raise ValueError(f"pair {pair} not covered by ranking outputs")

    return GridRuntime(
        config=config,
        imputed=imputed,
        splits=splits,
        pair_anchors=pair_anchors,
        global_anchors=global_anchors,
    )
