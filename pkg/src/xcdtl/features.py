"""Twelve-descriptor topological fingerprints and ensemble standardization.

Descriptor order is fixed and shared by every downstream consumer. Metrics
that are undefined for a graph (path metrics on disconnected graphs,
assortativity on degree-regular graphs, pairwise/spectral metrics on n=1)
are reported as non-computable via the mask and median-imputed at
standardization time.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from .louvain import louvain_modularity

FEATURE_NAMES = (
    "n_nodes",
    "n_edges",
    "density",
    "avg_clustering",
    "transitivity",
    "assortativity",
    "efficiency",
    "avg_shortest_path",
    "diameter",
    "spectral_radius",
    "lambda_2",
    "modularity",
)

N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

_EIG_TOL = 1e-10


@dataclass
class FeatureVector:
    values: np.ndarray  # 12 floats, NaN where non-computable
    mask: np.ndarray  # 12 bools, True = computed


@dataclass
class Standardization:
    medians: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool: column had sigma < 1e-12
    all_missing: np.ndarray  # bool: column had no computed entries


@dataclass
class FeatureMatrix:
    graph_ids: list
    domains: list
    values: np.ndarray  # (N, 12) raw, NaN where non-computable
    mask: np.ndarray  # (N, 12) bool
    imputed: np.ndarray = None  # raw after median imputation
    z: np.ndarray = None  # standardized values
    params: Standardization = None

    def __len__(self):
        return self.values.shape[0]


def _bfs_distances(g, source):
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        du = dist[u]
        for v in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = du + 1
                q.append(v)
    return dist


def compute_features(g):
    """FeatureVector for one graph; see FEATURE_NAMES for the order."""
    n = g.n
    if n == 0:
        raise ValueError("empty graph")
    values = np.full(N_FEATURES, np.nan)
    mask = np.zeros(N_FEATURES, dtype=bool)

    def put(name, val):
        values[FEATURE_INDEX[name]] = val
        mask[FEATURE_INDEX[name]] = True

    deg = g.degrees()
    m = int(deg.sum()) // 2
    put("n_nodes", float(n))
    put("n_edges", float(m))

    # local clustering and triangle/triple counts share neighbor intersections
    tri2 = 0  # sum over u of 2*(triangles through u)
    clustering_sum = 0.0
    for u in range(n):
        k = deg[u]
        if k < 2:
            continue
        nu = g.neighbors(u)
        links2 = sum(len(nu & g.neighbors(v)) for v in nu)  # 2 * links among N(u)
        tri2 += links2
        clustering_sum += links2 / (k * (k - 1))
    put("avg_clustering", clustering_sum / n)
    triples = int((deg * (deg - 1) // 2).sum())
    put("transitivity", (tri2 / 2) / triples if triples > 0 else 0.0)
    put("modularity", louvain_modularity(g))

    if n >= 2:
        put("density", 2.0 * m / (n * (n - 1)))

        if m > 0:
            ends = np.array([(deg[u], deg[v]) for u, v in g.edges()], dtype=np.float64)
            x = np.concatenate([ends[:, 0], ends[:, 1]])
            y = np.concatenate([ends[:, 1], ends[:, 0]])
            sx, sy = x.std(), y.std()
            if sx > 0 and sy > 0:
                put("assortativity", float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy)))

        inv_sum = 0.0
        path_sum = 0
        diameter = 0
        reachable = True
        for u in range(n):
            dist = _bfs_distances(g, u)
            if (dist < 0).any():
                reachable = False
            pos = dist[dist > 0]
            inv_sum += float((1.0 / pos).sum())
            path_sum += int(pos.sum())
            if pos.size:
                diameter = max(diameter, int(pos.max()))
        pairs = n * (n - 1)
        put("efficiency", inv_sum / pairs)
        if reachable:
            put("avg_shortest_path", path_sum / pairs)
            put("diameter", float(diameter))

        a = g.adjacency_matrix()
        eig_a = np.linalg.eigvalsh(a)
        put("spectral_radius", float(eig_a[-1]))
        lap = np.diag(deg.astype(np.float64)) - a
        eig_l = np.linalg.eigvalsh(lap)
        lam2 = float(eig_l[1])
        put("lambda_2", 0.0 if abs(lam2) < _EIG_TOL else lam2)

    return FeatureVector(values=values, mask=mask)


def features_for_ensemble(ensemble):
    """FeatureMatrix over an ensemble's graphs (raw, unstandardized)."""
    rows = [compute_features(g) for g in ensemble.graphs]
    return FeatureMatrix(
        graph_ids=[g.graph_id for g in ensemble.graphs],
        domains=[g.domain for g in ensemble.graphs],
        values=np.array([r.values for r in rows]),
        mask=np.array([r.mask for r in rows]),
    )


def zscore_columns(values, mask=None):
    """Median-impute masked-out cells, then z-score columns (population sigma).

    Returns (imputed, z, Standardization). Constant columns (sigma < 1e-12)
    standardize to zero and are flagged; all-missing columns impute to 0.
    """
    values = np.asarray(values, dtype=np.float64)
    n, p = values.shape
    if n < 2:
        raise ValueError("standardize needs at least 2 rows")
    if mask is None:
        mask = np.ones_like(values, dtype=bool)
    imputed = values.copy()
    medians = np.zeros(p)
    all_missing = np.zeros(p, dtype=bool)
    for j in range(p):
        col_mask = mask[:, j]
        if not col_mask.any():
            medians[j] = 0.0
            all_missing[j] = True
        else:
            medians[j] = float(np.median(values[col_mask, j]))
        imputed[~col_mask, j] = medians[j]
    mean = imputed.mean(axis=0)
    std = imputed.std(axis=0)
    constant = std < 1e-12
    z = np.zeros_like(imputed)
    live = ~constant
    z[:, live] = (imputed[:, live] - mean[live]) / std[live]
    params = Standardization(
        medians=medians, mean=mean, std=std, constant=constant, all_missing=all_missing
    )
    return imputed, z, params


def standardize(matrix):
    """Standardized copy of a FeatureMatrix carrying imputed, z and params."""
    imputed, z, params = zscore_columns(matrix.values, matrix.mask)
    return FeatureMatrix(
        graph_ids=list(matrix.graph_ids),
        domains=list(matrix.domains),
        values=matrix.values,
        mask=matrix.mask,
        imputed=imputed,
        z=z,
        params=params,
    )


def apply_standardization(params, values, mask=None):
    """Apply fitted medians/mu/sigma to new rows; never refits."""
    arr = np.atleast_2d(np.asarray(values, dtype=np.float64)).copy()
    if mask is not None:
        mk = np.atleast_2d(np.asarray(mask, dtype=bool))
        for j in range(arr.shape[1]):
            arr[~mk[:, j], j] = params.medians[j]
    z = np.zeros_like(arr)
    live = ~params.constant
    z[:, live] = (arr[:, live] - params.mean[live]) / params.std[live]
    return z


def save_feature_matrix(matrix, path):
    header = ["graph_id", "domain"] + list(FEATURE_NAMES) + [f"mask_{f}" for f in FEATURE_NAMES]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(matrix)):
            row = [matrix.graph_ids[i], matrix.domains[i]]
            row += [f"{v:.12g}" for v in matrix.values[i]]
            row += ["true" if b else "false" for b in matrix.mask[i]]
            writer.writerow(row)


def load_feature_matrix(path):
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["graph_id", "domain"] + list(FEATURE_NAMES) + [f"mask_{f}" for f in FEATURE_NAMES]
        if header != expected:
            raise ValueError(f"{path}: unexpected feature CSV header")
        ids, domains, values, mask = [], [], [], []
        for row in reader:
            if len(row) != len(expected):
                raise ValueError(f"{path}: malformed row {row!r}")
            ids.append(row[0])
            domains.append(row[1])
            values.append([float(x) for x in row[2 : 2 + N_FEATURES]])
            mask.append([x == "true" for x in row[2 + N_FEATURES :]])
    if not ids:
        raise ValueError(f"{path}: empty feature matrix")
    return FeatureMatrix(
        graph_ids=ids,
        domains=domains,
        values=np.array(values),
        mask=np.array(mask, dtype=bool),
    )
