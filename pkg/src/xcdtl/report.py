"""Aggregate grid results into tables, regression data, stats, and a digest.

Everything here is a pure function of the input files; rerunning over the
same inputs reproduces the output files byte for byte.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

from .anomaly import transfer_gain
from .features import FEATURE_NAMES
from .graphs import DOMAINS
from .grid import RESULTS_HEADER
from .ranking import load_global_consensus, load_iit_table
from .stats import dunn_posthoc, kruskal_wallis, paired_t_test, regression

log = logging.getLogger(__name__)

REGIMES = (
    ("full", None, None),
    ("high_purity", 0.1, 0.1),  # alpha, eta
    ("high_noise", 0.9, 0.9),
)

_METRICS = ("roc", "ap", "f1")


@dataclass
class ResultRow:
    source: str
    target: str
    seed: int
    alpha: float
    eta: float
    nt: dict
    t: dict
    tgi: dict
    fallback: bool
    status: str


def load_results(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER.split(","):
            raise ValueError(f"{path}: unexpected results header {header!r}")
        for raw in reader:
            rows.append(
                ResultRow(
                    source=raw[0],
                    target=raw[1],
                    seed=int(raw[2]),
                    alpha=float(raw[3]),
                    eta=float(raw[4]),
                    nt={m: float(raw[5 + i]) for i, m in enumerate(_METRICS)},
                    t={m: float(raw[8 + i]) for i, m in enumerate(_METRICS)},
                    tgi={m: float(raw[11 + i]) for i, m in enumerate(_METRICS)},
                    fallback=raw[14] == "true",
                    status=raw[15],
                )
            )
    if not rows:
        raise ValueError(f"{path}: no result rows")
    return rows


def _ok(rows):
    return [r for r in rows if r.status == "ok"]


def _in_regime(row, alpha, eta):
    if alpha is None:
        return True
    return row.alpha == alpha and row.eta == eta


def _fmt(x):
    return repr(float(x))


def _mean(vals):
    arr = np.asarray([v for v in vals if np.isfinite(v)], dtype=np.float64)
    return float(arr.mean()) if arr.size else float("nan")


def _aggregate(rows):
    """Scenario means plus TGIs recomputed from those means."""
    out = {}
    for scen in ("nt", "t"):
        for m in _METRICS:
            out[f"{scen}_{m}"] = _mean([getattr(r, scen)[m] for r in rows])
    for m in _METRICS:
        nt, t = out[f"nt_{m}"], out[f"t_{m}"]
        out[f"tgi_{m}"] = transfer_gain(t, nt) if np.isfinite(nt) and np.isfinite(t) else float("nan")
    out["n_cells"] = len(rows)
    return out


def pair_table(rows):
    """Per directed pair: NT/T means and TGIs over all its usable cells."""
    ok = _ok(rows)
    index = {d: i for i, d in enumerate(DOMAINS)}
    pairs = sorted(
        {(r.source, r.target) for r in rows},
        key=lambda p: (index.get(p[0], 99), index.get(p[1], 99)),
    )
    table = []
    for src, tgt in pairs:
        cells = [r for r in ok if r.source == src and r.target == tgt]
        agg = _aggregate(cells)
        agg["source"], agg["target"] = src, tgt
        table.append(agg)
    return table


def regime_table(rows):
    ok = _ok(rows)
    table = []
    for name, alpha, eta in REGIMES:
        cells = [r for r in ok if _in_regime(r, alpha, eta)]
        agg = _aggregate(cells)
        agg["regime"] = name
        table.append(agg)
    return table


def regression_by_regime(rows, iit_tables):
    """Per regime: (pair mean anchor score, pair mean TGI-ROC) points + OLS."""
    ok = _ok(rows)
    index = {d: i for i, d in enumerate(DOMAINS)}
    pairs = sorted(
        {(r.source, r.target) for r in rows},
        key=lambda p: (index.get(p[0], 99), index.get(p[1], 99)),
    )
    out = {}
    for name, alpha, eta in REGIMES:
        points = []
        for src, tgt in pairs:
            cells = [
                r
                for r in ok
                if r.source == src and r.target == tgt and _in_regime(r, alpha, eta)
            ]
            tgis = [r.tgi["roc"] for r in cells if np.isfinite(r.tgi["roc"])]
            if not tgis:
                continue
            points.append((src, tgt, iit_tables[(src, tgt)].mean_iit, _mean(tgis)))
        flags = []
        if len(points) >= 3:
            x = np.array([p[2] for p in points])
            y = np.array([p[3] for p in points])
            summary = regression(x, y)
        else:
            summary = None
            flags.append("too_few_pairs")
        out[name] = {"points": points, "summary": summary, "flags": flags}
    return out


def _scenario_regime_groups(rows, metric):
    """Cells grouped by (scenario x regime); the stats-test grouping."""
    ok = _ok(rows)
    groups, labels = [], []
    for name, alpha, eta in REGIMES:
        cells = [r for r in ok if _in_regime(r, alpha, eta)]
        for scen in ("nt", "t"):
            vals = [getattr(r, scen)[metric] for r in cells]
            vals = [v for v in vals if np.isfinite(v)]
            groups.append(vals)
            labels.append(f"{scen}_{name}")
    keep = [(g, label) for g, label in zip(groups, labels) if len(g) >= 1]
    return [g for g, _ in keep], [label for _, label in keep]


def run_stats(rows):
    """Kruskal-Wallis + Dunn over scenario x regime groups, paired NT/T tests."""
    ok = _ok(rows)
    results = []
    dunn = None
    dunn_labels = None
    for metric in ("f1", "roc"):
        groups, labels = _scenario_regime_groups(rows, metric)
        if len(groups) >= 2 and sum(len(g) for g in groups) >= 5:
            kw = kruskal_wallis(groups)
            results.append((f"kruskal_wallis_{metric}", kw, ";".join(labels)))
            if metric == "f1" and len(groups) >= 3:
                dunn = dunn_posthoc(groups)
                dunn_labels = labels
    for name, alpha, eta in REGIMES:
        cells = [r for r in ok if _in_regime(r, alpha, eta)]
        pairs = [
            (r.t["f1"], r.nt["f1"])
            for r in cells
            if np.isfinite(r.t["f1"]) and np.isfinite(r.nt["f1"])
        ]
        if len(pairs) >= 2:
            t_vals = [p[0] for p in pairs]
            nt_vals = [p[1] for p in pairs]
            res = paired_t_test(t_vals, nt_vals)
            results.append((f"paired_t_f1_t_vs_nt_{name}", res, f"n={len(pairs)}"))
    return results, dunn, dunn_labels


def _require_inputs(results_dir):
    results_csv = os.path.join(results_dir, "results.csv")
    rank_dir = os.path.join(results_dir, "rank")
    needed = [results_csv, os.path.join(rank_dir, "iit_global.csv")]
    for src in DOMAINS:
        for tgt in DOMAINS:
            if src != tgt:
                needed.append(os.path.join(rank_dir, f"iit_{src}_{tgt}.csv"))
    missing = [p for p in needed if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(
            "missing report inputs:\n" + "\n".join(f"  {p}" for p in missing)
        )
    return results_csv, rank_dir


def emit_report(results_dir, out_dir, render_figures=True):
    """Write all report tables, stats, digest, and figures; returns file list."""
    results_csv, rank_dir = _require_inputs(results_dir)
    os.makedirs(out_dir, exist_ok=True)
    rows = load_results(results_csv)
    iit_tables = {}
    for src in DOMAINS:
        for tgt in DOMAINS:
            if src != tgt:
                iit_tables[(src, tgt)] = load_iit_table(
                    os.path.join(rank_dir, f"iit_{src}_{tgt}.csv")
                )
    consensus = load_global_consensus(os.path.join(rank_dir, "iit_global.csv"))
    written = []

    def _write(name, header, data_rows):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(data_rows)
        written.append(path)
        return path

    # (a) per-pair table
    pairs = pair_table(rows)
    agg_cols = [f"{s}_{m}" for s in ("nt", "t", "tgi") for m in _METRICS]
    _write(
        "pair_table.csv",
        ["source", "target"] + agg_cols + ["n_cells"],
        [
            [p["source"], p["target"]]
            + [_fmt(p[c]) for c in agg_cols]
            + [str(p["n_cells"])]
            for p in pairs
        ],
    )

    # (b) regime comparison
    regimes = regime_table(rows)
    _write(
        "regime_table.csv",
        ["regime"] + agg_cols + ["n_cells"],
        [
            [g["regime"]] + [_fmt(g[c]) for c in agg_cols] + [str(g["n_cells"])]
            for g in regimes
        ],
    )

    # (c) global ranking
    order = np.lexsort((np.arange(len(FEATURE_NAMES)), -consensus.iit_g))
    anchor_set = set(consensus.anchors)
    _write(
        "global_ranking.csv",
        ["rank", "feature", "iit_global", "is_anchor"],
        [
            [
                str(rank + 1),
                FEATURE_NAMES[i],
                _fmt(consensus.iit_g[i]),
                "true" if i in anchor_set else "false",
            ]
            for rank, i in enumerate(int(i) for i in order)
        ],
    )

    # (d) regression per regime
    reg = regression_by_regime(rows, iit_tables)
    summary_rows = []
    for name, _, _ in REGIMES:
        data = reg[name]
        _write(
            f"regression_{name}.csv",
            ["source", "target", "mean_iit", "mean_tgi_roc"],
            [[s, t, _fmt(x), _fmt(y)] for s, t, x, y in data["points"]],
        )
        s = data["summary"]
        if s is None:
            summary_rows.append([name, "nan", "nan", "nan", "nan", "0", ";".join(data["flags"])])
        else:
            summary_rows.append(
                [
                    name,
                    _fmt(s.slope),
                    _fmt(s.intercept),
                    _fmt(s.pearson_r),
                    _fmt(s.spearman_rho),
                    str(s.n),
                    ";".join(s.flags + data["flags"]),
                ]
            )
    _write(
        "regression_summary.csv",
        ["regime", "slope", "intercept", "pearson_r", "spearman_rho", "n", "flags"],
        summary_rows,
    )

    # (e) statistical tests
    stat_results, dunn, dunn_labels = run_stats(rows)
    _write(
        "stats.csv",
        ["test", "statistic", "p_value", "group_sizes", "notes"],
        [
            [name, _fmt(res.statistic), _fmt(res.p_value), ";".join(map(str, res.group_sizes)), notes]
            for name, res, notes in stat_results
        ],
    )
    if dunn is not None:
        _write(
            "dunn_f1.csv",
            ["group"] + dunn_labels,
            [
                [dunn_labels[i]] + [_fmt(v) for v in dunn.pairwise_p[i]]
                for i in range(len(dunn_labels))
            ],
        )

    digest_path = os.path.join(out_dir, "digest.md")
    _write_digest(digest_path, rows, regimes, reg, stat_results, consensus)
    written.append(digest_path)

    if render_figures:
        from .figures import render_all

        written += render_all(out_dir, consensus, regimes, reg)
    return written


def _write_digest(path, rows, regimes, reg, stat_results, consensus):
    ok = len(_ok(rows))
    lines = []
    lines.append("# Cross-domain transfer stress-test digest")
    lines.append("")
    lines.append(f"Cells: {len(rows)} total, {ok} usable (status ok).")
    lines.append("")
    lines.append("## Regime comparison (means over usable cells)")
    lines.append("")
    lines.append("| regime | n | NT ROC | T ROC | NT F1 | T F1 | TGI F1 |")
    lines.append("|---|---|---|---|---|---|---|")
    for g in regimes:
        lines.append(
            "| {} | {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:+.4f} |".format(
                g["regime"], g["n_cells"], g["nt_roc"], g["t_roc"], g["nt_f1"], g["t_f1"], g["tgi_f1"]
            )
        )
    lines.append("")
    lines.append(
        "TGI columns are recomputed from the NT/T means in the same row: "
        "tgi = (t - nt) / (nt + 1e-06)."
    )
    lines.append("")
    lines.append("## Anchor consensus")
    lines.append("")
    anchor_names = [FEATURE_NAMES[i] for i in consensus.anchors]
    lines.append("Global anchors (best first): " + ", ".join(anchor_names) + ".")
    lines.append("")
    lines.append("## Score-vs-gain regression (pair means, TGI of ROC-AUC)")
    lines.append("")
    lines.append("| regime | n pairs | slope | pearson r | spearman rho |")
    lines.append("|---|---|---|---|---|")
    for name, _, _ in REGIMES:
        s = reg[name]["summary"]
        if s is None:
            lines.append(f"| {name} | {len(reg[name]['points'])} | - | - | - |")
        else:
            lines.append(
                "| {} | {} | {:.4f} | {:.4f} | {:.4f} |".format(
                    name, s.n, s.slope, s.pearson_r, s.spearman_rho
                )
            )
    lines.append("")
    lines.append("## Statistical tests")
    lines.append("")
    lines.append(
        "Groups for the omnibus tests are cells split by scenario (NT/T) "
        "crossed with regime (full, high_purity, high_noise)."
    )
    lines.append("")
    lines.append("| test | statistic | p |")
    lines.append("|---|---|---|")
    for name, res, _ in stat_results:
        lines.append("| {} | {:.4f} | {:.3g} |".format(name, res.statistic, res.p_value))
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
