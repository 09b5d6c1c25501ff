"""Merge trees over spanning forests, reachability plots, and flat cuts.

A dendrogram over an n-point MST has n leaves (leaf id = point id) and
n - 1 internal nodes, each recording the MST edge whose removal splits
its cluster, the edge's weight as the node height, and the subtree point
count. Heights never decrease toward the root.

Two constructions are provided. The sequential one unions edges in
ascending (weight, min id, max id) order and leaves the child order
unspecified; it is the oracle. The parallel one recurses top-down: the
heaviest tenth of the edges forms one contracted subproblem whose
vertices are the connected components of the remaining light edges, each
light component recurses independently, and block-allocated node ids
let every subproblem write its slice of the output without
synchronization. Children are ordered by unweighted hop distance from a
chosen start vertex, which makes the in-order leaf walk equal to Prim's
visitation order from that vertex, so the reachability plot falls out of
a single traversal.

Cuts at a height threshold recover the DBSCAN* partition: maximal
subtrees of height at most epsilon are candidate clusters and points
whose core distance exceeds epsilon are noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import _threads
from .mst import SpanningForest

__all__ = [
    "Clustering",
    "Dendrogram",
    "ReachabilityPlot",
    "cut",
    "dendrogram_parallel",
    "dendrogram_sequential",
    "reachability_plot",
    "vertex_distances",
]

_SEQUENTIAL_FLOOR = 64


class Dendrogram:
    """Flat-array merge tree; ids < n are leaves, the rest internal."""

    def __init__(self, n: int):
        self.n = int(n)
        total = 2 * self.n - 1
        self.left = np.full(total, -1, np.int64)
        self.right = np.full(total, -1, np.int64)
        self.height = np.zeros(total, np.float64)
        self.size = np.ones(total, np.int64)
        self.edge_u = np.full(total, -1, np.int64)
        self.edge_v = np.full(total, -1, np.int64)
        self.root = total - 1
        self.ordered = False
        self.start: Optional[int] = None

    @property
    def n_nodes(self) -> int:
        return 2 * self.n - 1

    def is_leaf(self, node: int) -> bool:
        return node < self.n

    def internal_ids(self) -> np.ndarray:
        return np.arange(self.n, self.n_nodes, dtype=np.int64)


@dataclass(frozen=True)
class ReachabilityPlot:
    """Points in Prim order with their attachment weights; first is +inf."""

    point_ids: np.ndarray
    values: np.ndarray
    start: int

    def __len__(self) -> int:
        return int(self.point_ids.shape[0])


@dataclass(frozen=True)
class Clustering:
    """Per-point labels; -1 marks noise."""

    labels: np.ndarray
    epsilon: float
    minpts: int

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if (self.labels >= 0).any() else 0


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _local_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _merge_kernel(handles, eu, ev, ew, eou, eov, order, hop, use_hop,
                  left, right, height, size, edge_u, edge_v, base):
    k = handles.shape[0]
    parent = np.arange(k)
    node_of = handles.copy()
    for t in range(order.shape[0]):
        e = order[t]
        ru = _local_find(parent, eu[e])
        rv = _local_find(parent, ev[e])
        nid = base + t
        cu = node_of[ru]
        cv = node_of[rv]
        if use_hop == 1 and hop[eov[e]] < hop[eou[e]]:
            cl = cv
            cr = cu
        else:
            cl = cu
            cr = cv
        left[nid] = cl
        right[nid] = cr
        height[nid] = ew[e]
        size[nid] = size[cl] + size[cr]
        edge_u[nid] = eou[e]
        edge_v[nid] = eov[e]
        parent[rv] = ru
        node_of[ru] = nid


@njit(cache=True)
def _union_edges(parent, eu, ev):
    for i in range(eu.shape[0]):
        ru = _local_find(parent, eu[i])
        rv = _local_find(parent, ev[i])
        if ru != rv:
            parent[rv] = ru


@njit(cache=True)
def _find_all(parent, out):
    for i in range(parent.shape[0]):
        out[i] = _local_find(parent, i)


@njit(cache=True)
def _csr_fill(eu, ev, indptr, adj):
    cursor = indptr[:-1].copy()
    for i in range(eu.shape[0]):
        adj[cursor[eu[i]]] = ev[i]
        cursor[eu[i]] += 1
        adj[cursor[ev[i]]] = eu[i]
        cursor[ev[i]] += 1


@njit(cache=True)
def _bfs(indptr, adj, s, dist):
    n = dist.shape[0]
    queue = np.empty(n, np.int64)
    queue[0] = s
    dist[s] = 0
    head = 0
    tail = 1
    while head < tail:
        x = queue[head]
        head += 1
        for t in range(indptr[x], indptr[x + 1]):
            y = adj[t]
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue[tail] = y
                tail += 1


@njit(cache=True)
def _inorder_reach(left, right, height, root, out_ids, out_vals):
    cap = 2 * out_ids.shape[0] + 2
    st_node = np.empty(cap, np.int64)
    st_val = np.empty(cap, np.float64)
    st_node[0] = root
    st_val[0] = np.inf
    top = 1
    i = 0
    while top > 0:
        top -= 1
        node = st_node[top]
        val = st_val[top]
        if left[node] < 0:
            out_ids[i] = node
            out_vals[i] = val
            i += 1
        else:
            st_node[top] = right[node]
            st_val[top] = height[node]
            st_node[top + 1] = left[node]
            st_val[top + 1] = val
            top += 2


@njit(cache=True)
def _cut_labels(left, right, height, root, n, eps, cd, labels):
    total = left.shape[0]
    croot = np.full(total, -1, np.int64)
    if height[root] <= eps:
        croot[root] = root
    # parents always carry larger ids than children, so descending order
    # visits each parent before its children
    for node in range(total - 1, n - 1, -1):
        l = left[node]
        if l < 0:
            continue
        c = croot[node]
        r = right[node]
        if c >= 0:
            croot[l] = c
            croot[r] = c
        else:
            if height[l] <= eps:
                croot[l] = l
            if height[r] <= eps:
                croot[r] = r
    remap = np.full(total, -1, np.int64)
    nxt = 0
    for p in range(n):
        if cd[p] > eps:
            labels[p] = -1
            continue
        r = croot[p]
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        labels[p] = remap[r]


# ---------------------------------------------------------------------------
# public operations

def _spanning_edges(forest: SpanningForest):
    if forest.count != max(0, forest.n - 1):
        raise ValueError("disconnected forest")
    return forest.edge_arrays()


def vertex_distances(forest: SpanningForest, s: int) -> np.ndarray:
    """Unweighted hop count from ``s`` to every point over the forest."""
    n = forest.n
    if not 0 <= s < n:
        raise ValueError("start vertex out of range")
    u, v, _ = _spanning_edges(forest)
    deg = np.bincount(u, minlength=n) + np.bincount(v, minlength=n)
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(deg, out=indptr[1:])
    adj = np.empty(2 * u.shape[0], np.int64)
    _csr_fill(u, v, indptr, adj)
    dist = np.full(n, -1, np.int64)
    _bfs(indptr, adj, s, dist)
    return dist


def _edge_order(ew, eou, eov) -> np.ndarray:
    lo = np.minimum(eou, eov)
    hi = np.maximum(eou, eov)
    return np.lexsort((hi, lo, ew))


_NO_HOP = np.zeros(1, np.int64)


def dendrogram_sequential(forest: SpanningForest) -> Dendrogram:
    """Bottom-up merge in ascending edge order; the unordered oracle."""
    u, v, w = _spanning_edges(forest)
    n = forest.n
    dendro = Dendrogram(n)
    if n == 1:
        return dendro
    order = _edge_order(w, u, v)
    handles = np.arange(n, dtype=np.int64)
    _merge_kernel(handles, u, v, w, u, v, order, _NO_HOP, 0,
                  dendro.left, dendro.right, dendro.height, dendro.size,
                  dendro.edge_u, dendro.edge_v, n)
    return dendro


def _select_heavy(ew, lo, hi, h) -> np.ndarray:
    """Mask of the h heaviest edges by (weight, min id, max id).

    Selection plus a sort of only the weight ties at the boundary, so the
    heavy set is deterministic without fully sorting the edge list.
    """
    m = ew.shape[0]
    if h >= m:
        return np.ones(m, bool)
    thresh = np.partition(ew, m - h)[m - h]
    mask = ew > thresh
    need = h - int(mask.sum())
    if need > 0:
        tied = np.nonzero(ew == thresh)[0]
        order = np.lexsort((hi[tied], lo[tied]))
        mask[tied[order[-need:]]] = True
    return mask


def _solve(dendro: Dendrogram, hop: np.ndarray, half_n: float, fraction: float,
           handles, eu, ev, ew, eou, eov, base: int, pool) -> None:
    m = ew.shape[0]
    h = int(np.ceil(m * fraction))
    if m + 1 < half_n or m < _SEQUENTIAL_FLOOR or h >= m:
        order = _edge_order(ew, eou, eov)
        _merge_kernel(handles, eu, ev, ew, eou, eov, order, hop, 1,
                      dendro.left, dendro.right, dendro.height, dendro.size,
                      dendro.edge_u, dendro.edge_v, base)
        return
    k = handles.shape[0]
    lo = np.minimum(eou, eov)
    hi = np.maximum(eou, eov)
    heavy = _select_heavy(ew, lo, hi, h)
    light_idx = np.nonzero(~heavy)[0]
    heavy_idx = np.nonzero(heavy)[0]
    parent = np.arange(k)
    _union_edges(parent, eu[light_idx], ev[light_idx])
    comp = np.empty(k, np.int64)
    _find_all(parent, comp)
    roots, inv = np.unique(comp, return_inverse=True)
    nsup = roots.shape[0]
    if nsup != h + 1:
        raise RuntimeError("light components inconsistent with a tree input")
    counts_v = np.bincount(inv, minlength=nsup)
    starts_v = np.zeros(nsup + 1, np.int64)
    np.cumsum(counts_v, out=starts_v[1:])
    order_v = np.argsort(inv, kind="stable")
    relabel = np.empty(k, np.int64)
    relabel[order_v] = np.arange(k, dtype=np.int64) - starts_v[inv[order_v]]
    le_sup = inv[eu[light_idx]]
    counts_e = np.bincount(le_sup, minlength=nsup)
    starts_e = np.zeros(nsup + 1, np.int64)
    np.cumsum(counts_e, out=starts_e[1:])
    order_e = np.argsort(le_sup, kind="stable")
    sup_handles = np.empty(nsup, np.int64)
    tasks = []
    cur = base
    for i in range(nsup):
        ce = int(counts_e[i])
        if ce == 0:
            sup_handles[i] = handles[order_v[starts_v[i]]]
            continue
        sup_handles[i] = cur + ce - 1
        # the subproblem root's size is already known: prefill so the
        # contracted problem never waits on this one
        dendro.size[cur + ce - 1] = int(counts_v[i])
        eidx = light_idx[order_e[starts_e[i]:starts_e[i] + ce]]
        members = order_v[starts_v[i]:starts_v[i] + counts_v[i]]
        tasks.append((handles[members], relabel[eu[eidx]], relabel[ev[eidx]],
                      ew[eidx], eou[eidx], eov[eidx], cur))
        cur += ce
    heavy_base = cur
    tasks.append((sup_handles, inv[eu[heavy_idx]], inv[ev[heavy_idx]],
                  ew[heavy_idx], eou[heavy_idx], eov[heavy_idx], heavy_base))
    if pool is not None and len(tasks) > 1:
        futures = [pool.submit(_solve, dendro, hop, half_n, fraction, *t,
                               None) for t in tasks]
        for f in futures:
            f.result()
    else:
        for t in tasks:
            _solve(dendro, hop, half_n, fraction, *t, None)


def _canonical_ids(dendro: Dendrogram) -> None:
    """Renumber internal nodes by ascending defining-edge tiebreak.

    Block allocation gives subproblems disjoint but schedule-dependent id
    ranges; renumbering makes the ids match the sequential construction,
    so results are comparable array-for-array regardless of schedule.
    """
    n = dendro.n
    if n < 2:
        return
    internal = dendro.internal_ids()
    order = _edge_order(dendro.height[internal], dendro.edge_u[internal],
                        dendro.edge_v[internal])
    perm = np.empty(dendro.n_nodes, np.int64)
    perm[:n] = np.arange(n)
    perm[internal[order]] = internal
    pi = perm[internal]
    for name in ("left", "right"):
        arr = getattr(dendro, name)
        new = arr.copy()
        new[pi] = perm[arr[internal]]
        setattr(dendro, name, new)
    for name in ("height", "size", "edge_u", "edge_v"):
        arr = getattr(dendro, name)
        new = arr.copy()
        new[pi] = arr[internal]
        setattr(dendro, name, new)
    dendro.root = int(perm[dendro.root])


def dendrogram_parallel(forest: SpanningForest, s: int,
                        heavy_fraction: float = 0.1) -> Dendrogram:
    """Ordered dendrogram built by heavy/light recursion.

    The in-order leaf sequence equals Prim's visitation order from ``s``
    under the (weight, min id, max id) tiebreak. ``heavy_fraction``
    changes only the subproblem schedule, never the result; internal node
    ids always follow ascending defining-edge order, matching
    :func:`dendrogram_sequential`.
    """
    if not 0.0 < heavy_fraction <= 1.0:
        raise ValueError("heavy_fraction must be in (0, 1]")
    u, v, w = _spanning_edges(forest)
    n = forest.n
    if not 0 <= s < n:
        raise ValueError("start vertex out of range")
    dendro = Dendrogram(n)
    dendro.ordered = True
    dendro.start = int(s)
    if n == 1:
        return dendro
    hop = vertex_distances(forest, s)
    handles = np.arange(n, dtype=np.int64)
    pool = None
    if _threads.get_threads() > 1 and n > 4 * _SEQUENTIAL_FLOOR:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=_threads.get_threads())
    try:
        _solve(dendro, hop, n / 2.0, heavy_fraction,
               handles, u, v, w, u, v, n, pool)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    _canonical_ids(dendro)
    return dendro


def reachability_plot(dendro: Dendrogram) -> ReachabilityPlot:
    """Leaves in order with the height at which each joins the prefix."""
    if not dendro.ordered or dendro.start is None:
        raise ValueError("ordered dendrogram required")
    ids = np.empty(dendro.n, np.int64)
    vals = np.empty(dendro.n, np.float64)
    _inorder_reach(dendro.left, dendro.right, dendro.height, dendro.root,
                   ids, vals)
    return ReachabilityPlot(point_ids=ids, values=vals, start=dendro.start)


def cut(dendro: Dendrogram, core, epsilon: float) -> Clustering:
    """Flat clustering at height ``epsilon``.

    Components of MST edges with weight at most epsilon become clusters;
    a point whose core distance exceeds epsilon is noise (label -1), and
    a singleton component whose point is core forms a singleton cluster.
    Cluster ids are assigned by first appearance in point-id order.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    cd = np.ascontiguousarray(getattr(core, "cd", core), dtype=np.float64)
    if cd.shape[0] != dendro.n:
        raise ValueError("core distance array does not match the dataset")
    labels = np.empty(dendro.n, np.int64)
    _cut_labels(dendro.left, dendro.right, dendro.height, dendro.root,
                dendro.n, float(epsilon), cd, labels)
    return Clustering(labels=labels, epsilon=float(epsilon),
                      minpts=int(getattr(core, "minpts", 1)))
