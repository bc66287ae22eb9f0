"""Deterministic two-phase Louvain community detection (resolution 1).

Determinism contract: nodes visited in ascending id, a move is accepted only
on a strict modularity gain > 1e-12 over staying, and equal-gain candidates
resolve to the lowest community id. Aggregated communities are renumbered in
ascending order of their old ids, so the whole procedure is a pure function
of the input graph.
"""

from __future__ import annotations

_GAIN_EPS = 1e-12


def _one_level(nbrs, loops, k, m):
    """Phase 1 on one aggregated graph. Returns (community array, moved?)."""
    n = len(nbrs)
    comm = list(range(n))
    sigma_tot = list(k)
    moved_any = False
    while True:
        moved = False
        for u in range(n):
            c0 = comm[u]
            links = {}
            for v, w in nbrs[u].items():
                links[comm[v]] = links.get(comm[v], 0.0) + w
            sigma_tot[c0] -= k[u]
            candidates = sorted(set(links) | {c0})
            best_c, best_s = None, None
            for c in candidates:
                s = links.get(c, 0.0) - k[u] * sigma_tot[c] / (2.0 * m)
                if best_s is None or s > best_s:
                    best_c, best_s = c, s
            stay_s = links.get(c0, 0.0) - k[u] * sigma_tot[c0] / (2.0 * m)
            if best_c != c0 and (best_s - stay_s) / m > _GAIN_EPS:
                comm[u] = best_c
                moved = True
                moved_any = True
            sigma_tot[comm[u]] += k[u]
        if not moved:
            return comm, moved_any


def _aggregate(nbrs, loops, comm):
    old_ids = sorted(set(comm))
    remap = {c: i for i, c in enumerate(old_ids)}
    nc = len(old_ids)
    new_nbrs = [dict() for _ in range(nc)]
    new_loops = [0.0] * nc
    for u, adj in enumerate(nbrs):
        cu = remap[comm[u]]
        new_loops[cu] += loops[u]
        for v, w in adj.items():
            cv = remap[comm[v]]
            if cu == cv:
                if u < v:
                    new_loops[cu] += w
            else:
                new_nbrs[cu][cv] = new_nbrs[cu].get(cv, 0.0) + w
    return new_nbrs, new_loops, remap


def louvain_partition(g):
    """Final-level partition of g's nodes and its Newman modularity Q."""
    n = g.n
    m = float(g.m)
    if m == 0:
        return [0] * n, 0.0
    nbrs = [{v: 1.0 for v in g.neighbors(u)} for u in range(n)]
    loops = [0.0] * n
    node_comm = list(range(n))  # original node -> current community label
    while True:
        k = [sum(adj.values()) + 2.0 * loops[u] for u, adj in enumerate(nbrs)]
        comm, moved = _one_level(nbrs, loops, k, m)
        if not moved:
            break
        nbrs, loops, remap = _aggregate(nbrs, loops, comm)
        node_comm = [remap[comm[c]] for c in node_comm]
        if len(nbrs) == 1:
            break
    return node_comm, _modularity(g, node_comm, m)


def _modularity(g, comm, m):
    internal = {}
    deg_sum = {}
    for u in range(g.n):
        deg_sum[comm[u]] = deg_sum.get(comm[u], 0) + len(g.neighbors(u))
        for v in g.neighbors(u):
            if u < v and comm[u] == comm[v]:
                internal[comm[u]] = internal.get(comm[u], 0) + 1
    q = 0.0
    for c in deg_sum:
        q += internal.get(c, 0) / m - (deg_sum[c] / (2.0 * m)) ** 2
    return q


def louvain_modularity(g):
    """Modularity Q of the Louvain partition; 0 for edgeless graphs."""
    return louvain_partition(g)[1]


def modularity_of(g, comm):
    """Newman modularity of an arbitrary node->community assignment."""
    m = float(g.m)
    if m == 0:
        return 0.0
    return _modularity(g, comm, m)
