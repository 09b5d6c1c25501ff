"""Minimum spanning forests over well-separated pair decompositions.

Four drivers share one edge currency and one union-find:

* ``emst_naive``: compute every pair's closest-pair edge, then Kruskal.
* ``gfk``: filtered Kruskal over a materialized pair list. Rounds process
  pairs in cardinality batches (``beta`` doubling from 2); a round only
  accepts edges no heavier than the smallest sphere gap among the deferred
  big pairs, so acceptance stays globally ordered, and pairs whose sides
  are already connected are dropped without ever computing their edge.
* ``memogfk``: the same schedule without keeping the pair list. Each round
  re-traverses the tree twice: ``get_rho`` finds the round's safe weight
  ceiling, ``get_pairs`` materializes only the pairs whose closest-pair
  weight can fall inside the round's window.
* closest-pair primitives ``bccp`` (Euclidean) and ``bccp_star`` (mutual
  reachability) used by all of the above.

Every edge comparison uses the key (weight, min id, max id), which makes
the forest unique and bit-identical across thread counts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from . import _threads
from .kdtree import KdNode, KdTree, _sphere_dmax, _sphere_gap
from .wspd import (
    SeparationPredicate,
    WspdPairs,
    _cdn_arrays,
    _pred_accepts,
    _require_annotation,
    _split_side,
    wspd,
)

__all__ = [
    "BccpCache",
    "EdgeCandidate",
    "SpanningForest",
    "UnionFind",
    "bccp",
    "bccp_star",
    "emst_naive",
    "get_pairs",
    "get_rho",
    "gfk",
    "kruskal_batch",
    "memogfk",
]

_METRICS = ("euclidean", "mutual-reachability")


@dataclass(frozen=True)
class EdgeCandidate:
    """Weighted edge with the deterministic comparison key."""

    u: int
    v: int
    weight: float

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError("self-loops are not valid edge candidates")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("edge weight must be finite and nonnegative")

    @property
    def tiebreak(self) -> tuple[float, int, int]:
        return (self.weight, min(self.u, self.v), max(self.u, self.v))


class UnionFind:
    """Array-backed disjoint sets with union by rank.

    Rank ties are broken toward the smaller root id so union order alone
    determines the final parent array. Finds compress paths; during
    parallel phases callers only read a flattened snapshot, never the live
    structure.
    """

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int32)
        self.rank = np.zeros(n, dtype=np.int8)
        self.n_components = n

    def find(self, x: int) -> int:
        return int(_uf_find(self.parent, x))

    def union(self, a: int, b: int) -> bool:
        merged = bool(_uf_union(self.parent, self.rank, a, b))
        if merged:
            self.n_components -= 1
        return merged

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def flatten(self) -> np.ndarray:
        """Fully compress and return the parent array (parent == root)."""
        _uf_flatten(self.parent)
        return self.parent


class SpanningForest:
    """Accepted edges in acceptance order plus run statistics."""

    def __init__(self, n: int):
        self.n = int(n)
        m = max(0, self.n - 1)
        self._u = np.empty(m, np.int64)
        self._v = np.empty(m, np.int64)
        self._w = np.empty(m, np.float64)
        self.count = 0
        self.stats: dict = {}
        self.core = None  # CoreDistances when built by an hdbscan pipeline

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.count
        return self._u[:c], self._v[:c], self._w[:c]

    @property
    def edges(self) -> list[EdgeCandidate]:
        u, v, w = self.edge_arrays()
        return [EdgeCandidate(int(u[i]), int(v[i]), float(w[i]))
                for i in range(self.count)]

    @property
    def total_weight(self) -> float:
        return float(self._w[:self.count].sum())

    @property
    def is_spanning(self) -> bool:
        return self.count == max(0, self.n - 1)

    def __len__(self) -> int:
        return self.count


class BccpCache:
    """Exact closest-pair edges keyed by (min node id, max node id).

    Entries are never evicted within a run; a cache can be carried across
    driver invocations on the same tree to skip recomputation.
    """

    def __init__(self):
        self._map: dict[tuple[int, int], tuple[int, int, float]] = {}

    @staticmethod
    def key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def get(self, a: int, b: int) -> Optional[tuple[int, int, float]]:
        return self._map.get(self.key(a, b))

    def put(self, a: int, b: int, u: int, v: int, w: float) -> None:
        self._map[self.key(a, b)] = (int(u), int(v), float(w))

    def __len__(self) -> int:
        return len(self._map)

    def items(self):
        return self._map.items()


# ---------------------------------------------------------------------------
# union-find kernels

@njit(cache=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _uf_union(parent, rank, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra == rb:
        return False
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    elif rank[ra] == rank[rb]:
        if rb < ra:
            ra, rb = rb, ra
        rank[ra] += 1
    parent[rb] = ra
    return True


@njit(cache=True)
def _uf_flatten(parent):
    for i in range(parent.shape[0]):
        _uf_find(parent, i)


@njit(cache=True)
def _kruskal_accept(order, eu, ev, ew, parent, rank, fu, fv, fw, cnt0):
    cnt = cnt0
    for t in range(order.shape[0]):
        e = order[t]
        if _uf_union(parent, rank, eu[e], ev[e]):
            fu[cnt] = eu[e]
            fv[cnt] = ev[e]
            fw[cnt] = ew[e]
            cnt += 1
    return cnt


@njit(cache=True)
def _component_ids(parent, idx, start, end, left, right, comp):
    """Per-node component id, or -1 when a node spans several components.

    ``parent`` must be flattened. Children carry larger preorder ids than
    their parent, so one reverse scan fills children before parents.
    """
    for node in range(start.shape[0] - 1, -1, -1):
        l = left[node]
        if l < 0:
            c = parent[idx[start[node]]]
            for t in range(start[node] + 1, end[node]):
                if parent[idx[t]] != c:
                    c = -1
                    break
            comp[node] = c
        else:
            cl = comp[l]
            if cl >= 0 and cl == comp[right[node]]:
                comp[node] = cl
            else:
                comp[node] = -1


def _fresh_component_ids(tree: KdTree, uf: UnionFind) -> np.ndarray:
    parent = uf.flatten()
    comp = np.empty(tree.n_nodes, np.int32)
    _component_ids(parent, tree.idx, tree.start, tree.end, tree.left,
                   tree.right, comp)
    return comp


# ---------------------------------------------------------------------------
# closest-pair kernels

@njit(cache=True, inline="always")
def _edge_better(w1, lo1, hi1, w2, lo2, hi2):
    """True when (w1, lo1, hi1) sorts before (w2, lo2, hi2)."""
    if w1 != w2:
        return w1 < w2
    if lo1 != lo2:
        return lo1 < lo2
    return hi1 < hi2


@njit(cache=True, parallel=True)
def _bccp_batch(pa, pb, coords, idx, start, end, left, right, center, radius,
                core, cdn_min, use_mr, stack_cap, n_chunks,
                out_u, out_v, out_w):
    m = pa.shape[0]
    d = coords.shape[1]
    chunk = (m + n_chunks - 1) // n_chunks
    for c in prange(n_chunks):
        st = np.empty((stack_cap, 2), np.int64)
        i0 = c * chunk
        i1 = min(m, i0 + chunk)
        for i in range(i0, i1):
            best_w = np.inf
            best_u = np.int64(-1)
            best_v = np.int64(-1)
            best_lo = np.int64(-1)
            best_hi = np.int64(-1)
            st[0, 0] = pa[i]
            st[0, 1] = pb[i]
            top = 1
            while top > 0:
                top -= 1
                a = st[top, 0]
                b = st[top, 1]
                bound = _sphere_gap(center, radius, a, b)
                if use_mr == 1:
                    if cdn_min[a] > bound:
                        bound = cdn_min[a]
                    if cdn_min[b] > bound:
                        bound = cdn_min[b]
                # equal bounds must still descend: a tied pair with smaller
                # point ids may be hiding below
                if bound > best_w:
                    continue
                la = left[a]
                lb = left[b]
                if la < 0 and lb < 0:
                    for ta in range(start[a], end[a]):
                        u = np.int64(idx[ta])
                        for tb in range(start[b], end[b]):
                            v = np.int64(idx[tb])
                            acc = 0.0
                            for j in range(d):
                                t = coords[u, j] - coords[v, j]
                                acc += t * t
                            w = np.sqrt(acc)
                            if use_mr == 1:
                                if core[u] > w:
                                    w = core[u]
                                if core[v] > w:
                                    w = core[v]
                            if u < v:
                                lo_ = u
                                hi_ = v
                            else:
                                lo_ = v
                                hi_ = u
                            if _edge_better(w, lo_, hi_, best_w, best_lo,
                                            best_hi):
                                best_w = w
                                best_u = u
                                best_v = v
                                best_lo = lo_
                                best_hi = hi_
                else:
                    if la < 0:
                        split_b = True
                    elif lb < 0:
                        split_b = False
                    elif radius[b] > radius[a]:
                        split_b = True
                    elif radius[a] > radius[b]:
                        split_b = False
                    else:
                        split_b = b > a
                    if split_b:
                        c1 = left[b]
                        c2 = right[b]
                        g1 = _sphere_gap(center, radius, a, c1)
                        g2 = _sphere_gap(center, radius, a, c2)
                        if g1 <= g2:
                            st[top, 0] = a
                            st[top, 1] = c2
                            st[top + 1, 0] = a
                            st[top + 1, 1] = c1
                        else:
                            st[top, 0] = a
                            st[top, 1] = c1
                            st[top + 1, 0] = a
                            st[top + 1, 1] = c2
                    else:
                        c1 = left[a]
                        c2 = right[a]
                        g1 = _sphere_gap(center, radius, c1, b)
                        g2 = _sphere_gap(center, radius, c2, b)
                        if g1 <= g2:
                            st[top, 0] = c2
                            st[top, 1] = b
                            st[top + 1, 0] = c1
                            st[top + 1, 1] = b
                        else:
                            st[top, 0] = c1
                            st[top, 1] = b
                            st[top + 1, 0] = c2
                            st[top + 1, 1] = b
                    top += 2
            out_u[i] = best_u
            out_v[i] = best_v
            out_w[i] = best_w


def _dummy_core() -> np.ndarray:
    return np.zeros(1, np.float64)


def _run_bccp_batch(tree: KdTree, pa, pb, use_mr: bool,
                    core: Optional[np.ndarray]):
    m = pa.shape[0]
    out_u = np.empty(m, np.int64)
    out_v = np.empty(m, np.int64)
    out_w = np.empty(m, np.float64)
    if m == 0:
        return out_u, out_v, out_w
    if use_mr:
        core_arr = core
        cdn_min = tree.cd_node_min
        if cdn_min is None:
            cdn_min = np.zeros(tree.n_nodes, np.float64)
    else:
        core_arr = _dummy_core()
        cdn_min = _dummy_core()
    n_chunks = max(1, min(m, _threads.get_threads() * 8))
    _bccp_batch(pa, pb, tree.points, tree.idx, tree.start, tree.end,
                tree.left, tree.right, tree.center, tree.radius,
                core_arr, cdn_min, 1 if use_mr else 0,
                2 * tree.max_depth + 8, n_chunks, out_u, out_v, out_w)
    return out_u, out_v, out_w


def _core_array(core) -> np.ndarray:
    arr = getattr(core, "cd", core)
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("core distances must form a flat per-point array")
    return arr


def bccp(a: KdNode, b: KdNode) -> EdgeCandidate:
    """Exact closest pair across two nodes under Euclidean distance.

    Dual descent over the node pair, pruning branches whose sphere gap
    exceeds the best distance found; ties resolve to the smallest
    (weight, min id, max id) key.
    """
    if a.tree is not b.tree:
        raise ValueError("nodes must belong to the same tree")
    pa = np.array([a.id], np.int32)
    pb = np.array([b.id], np.int32)
    u, v, w = _run_bccp_batch(a.tree, pa, pb, use_mr=False, core=None)
    return EdgeCandidate(int(u[0]), int(v[0]), float(w[0]))


def bccp_star(a: KdNode, b: KdNode, core) -> EdgeCandidate:
    """Exact closest pair under mutual reachability distance.

    ``core`` is the per-point core-distance array (or CoreDistances).
    Branch pruning additionally uses the subtree core-distance minima when
    the tree carries annotations.
    """
    if a.tree is not b.tree:
        raise ValueError("nodes must belong to the same tree")
    pa = np.array([a.id], np.int32)
    pb = np.array([b.id], np.int32)
    u, v, w = _run_bccp_batch(a.tree, pa, pb, use_mr=True,
                              core=_core_array(core))
    return EdgeCandidate(int(u[0]), int(v[0]), float(w[0]))


# ---------------------------------------------------------------------------
# Kruskal

def _as_edge_arrays(edges):
    if isinstance(edges, tuple) and len(edges) == 3:
        eu, ev, ew = edges
        return (np.ascontiguousarray(eu, np.int64),
                np.ascontiguousarray(ev, np.int64),
                np.ascontiguousarray(ew, np.float64))
    eu = np.array([e.u for e in edges], np.int64)
    ev = np.array([e.v for e in edges], np.int64)
    ew = np.array([e.weight for e in edges], np.float64)
    return eu, ev, ew


def _kruskal_arrays(eu, ev, ew, uf: UnionFind, forest: SpanningForest) -> None:
    if eu.shape[0] == 0:
        return
    lo = np.minimum(eu, ev)
    hi = np.maximum(eu, ev)
    order = np.lexsort((hi, lo, ew))
    before = forest.count
    forest.count = int(_kruskal_accept(order, eu, ev, ew, uf.parent, uf.rank,
                                       forest._u, forest._v, forest._w,
                                       forest.count))
    uf.n_components -= forest.count - before


def kruskal_batch(edges, uf: UnionFind, out: SpanningForest) -> SpanningForest:
    """Sort a batch by (weight, min id, max id) and union what connects.

    ``edges`` may be a sequence of EdgeCandidate or a (u, v, w) array
    triple. Accepted edges are appended to ``out`` in sorted order; unions
    apply sequentially so the result is deterministic for a given batch.
    """
    eu, ev, ew = _as_edge_arrays(edges)
    _kruskal_arrays(eu, ev, ew, uf, out)
    return out


# ---------------------------------------------------------------------------
# driver helpers

def _validate_metric(pred: SeparationPredicate, metric: str, core,
                     tree: KdTree) -> np.ndarray:
    """Returns the core array for mutual-reachability runs (dummy otherwise)."""
    if metric not in _METRICS:
        raise ValueError(f"unknown metric: {metric!r}")
    if metric == "euclidean":
        if pred.mode == "hdbscan":
            raise ValueError(
                "inconsistent metric/pair combination: the hdbscan "
                "separation predicate only covers mutual-reachability MSTs")
        return _dummy_core()
    if core is None:
        raise ValueError("core distances missing")
    arr = _core_array(core)
    if arr.shape[0] != tree.n:
        raise ValueError("core distance array does not match the dataset")
    minpts = getattr(core, "minpts", None)
    if (minpts is not None and tree.annotated_minpts is not None
            and tree.annotated_minpts != minpts):
        raise ValueError("tree annotation was built for a different minpts")
    if pred.mode == "hdbscan":
        _require_annotation(tree, pred)
    return arr


def _pair_node_distances(tree: KdTree, pa, pb) -> np.ndarray:
    delta = tree.center[pa] - tree.center[pb]
    gap = np.sqrt((delta * delta).sum(axis=1))
    gap -= tree.radius[pa] + tree.radius[pb]
    return np.maximum(gap, 0.0)


def emst_naive(tree: KdTree) -> SpanningForest:
    """Closest-pair edge of every well-separated pair, then one Kruskal."""
    t0 = time.perf_counter()
    pairs = wspd(tree, SeparationPredicate())
    t1 = time.perf_counter()
    forest = SpanningForest(tree.n)
    uf = UnionFind(tree.n)
    eu, ev, ew = _run_bccp_batch(tree, pairs.a_ids, pairs.b_ids,
                                 use_mr=False, core=None)
    pairs.edge_u[:] = eu
    pairs.edge_v[:] = ev
    pairs.edge_w[:] = ew
    _kruskal_arrays(eu, ev, ew, uf, forest)
    t2 = time.perf_counter()
    forest.stats = {
        "rounds": 1,
        "pairs_total": len(pairs),
        "pairs_peak": len(pairs),
        "filtered_without_bccp": 0,
        "phase_seconds": {"wspd": t1 - t0, "kruskal": t2 - t1},
    }
    return forest


def gfk(pairs: WspdPairs, metric: str = "euclidean", core=None,
        cache: Optional[BccpCache] = None) -> SpanningForest:
    """Filtered Kruskal over a materialized pair list.

    Rounds split the live pairs by cardinality at ``beta`` (doubling from
    2). The round ceiling ``rho_hi`` is the smallest sphere gap among the
    deferred big pairs; closest-pair edges at most the ceiling are safe to
    accept now. Pairs whose sides are already in one component are dropped
    at the top of each round, skipping their closest-pair computation
    entirely. Edges computed for pairs that outweigh the ceiling are kept
    for later rounds, never recomputed.
    """
    t0 = time.perf_counter()
    tree = pairs.tree
    core_arr = _validate_metric(pairs.pred, metric, core, tree)
    use_mr = metric == "mutual-reachability"
    n = tree.n
    uf = UnionFind(n)
    forest = SpanningForest(n)
    m = len(pairs)
    pa = pairs.a_ids
    pb = pairs.b_ids
    sizes = tree.node_sizes
    card = sizes[pa] + sizes[pb]
    nd = _pair_node_distances(tree, pa, pb)
    evaluated = np.zeros(m, bool)
    if cache is not None and len(cache) > 0:
        for i in range(m):
            hit = cache.get(int(pa[i]), int(pb[i]))
            if hit is not None:
                pairs.edge_u[i], pairs.edge_v[i], pairs.edge_w[i] = hit
                evaluated[i] = True
    alive = np.ones(m, bool)
    beta = 2
    rounds = 0
    filtered_blind = 0
    while forest.count < n - 1:
        comp = _fresh_component_ids(tree, uf)
        conn = (comp[pa] >= 0) & (comp[pa] == comp[pb])
        dropped = alive & conn
        filtered_blind += int((dropped & ~evaluated).sum())
        alive &= ~conn
        small = card <= beta
        s_upper = alive & ~small
        rho_hi = float(nd[s_upper].min()) if s_upper.any() else np.inf
        need = alive & small & ~evaluated
        if need.any():
            ids = np.nonzero(need)[0]
            eu, ev, ew = _run_bccp_batch(tree, pa[ids], pb[ids], use_mr,
                                         core_arr if use_mr else None)
            pairs.edge_u[ids] = eu
            pairs.edge_v[ids] = ev
            pairs.edge_w[ids] = ew
            evaluated[ids] = True
            if cache is not None:
                for t, i in enumerate(ids):
                    cache.put(int(pa[i]), int(pb[i]), int(eu[t]), int(ev[t]),
                              float(ew[t]))
        submit = alive & small & (pairs.edge_w <= rho_hi)
        if submit.any():
            _kruskal_arrays(pairs.edge_u[submit], pairs.edge_v[submit],
                            pairs.edge_w[submit], uf, forest)
        alive &= ~submit
        rounds += 1
        beta *= 2
        if forest.count < n - 1 and not alive.any():
            raise RuntimeError("pair set exhausted before the forest spanned")
    forest.stats = {
        "rounds": rounds,
        "pairs_total": m,
        "pairs_peak": m,
        "filtered_without_bccp": filtered_blind,
        # pair materialization happened in the caller's wspd() call
        "phase_seconds": {"wspd": 0.0,
                          "kruskal": time.perf_counter() - t0},
    }
    return forest


# ---------------------------------------------------------------------------
# memoized traversals

@njit(cache=True, parallel=True)
def _rho_step(fa, fb, sizes, comp, left, right, center, radius,
              cdn_min, cdn_max, mode, s, beta, rho_cur,
              kind, child_a, child_b, nd_out):
    m = fa.shape[0]
    for i in prange(m):
        a = fa[i]
        b = fb[i]
        if sizes[a] + sizes[b] <= beta:
            kind[i] = 0
            continue
        ca = comp[a]
        if ca >= 0 and ca == comp[b]:
            kind[i] = 0
            continue
        if _pred_accepts(mode, s, center, radius, cdn_min, cdn_max, a, b):
            kind[i] = 1
            nd_out[i] = _sphere_gap(center, radius, a, b)
            continue
        if _sphere_gap(center, radius, a, b) >= rho_cur:
            kind[i] = 0
            continue
        kind[i] = 2
        sp = _split_side(radius, a, b)
        other = b if sp == a else a
        child_a[2 * i] = left[sp]
        child_b[2 * i] = other
        child_a[2 * i + 1] = right[sp]
        child_b[2 * i + 1] = other


@njit(cache=True, parallel=True)
def _pairs_step(fa, fb, sizes, comp, left, right, center, radius,
                cdn_min, cdn_max, mode, s, beta, rho_lo, rho_hi, use_mr,
                kind, child_a, child_b):
    m = fa.shape[0]
    for i in prange(m):
        a = fa[i]
        b = fb[i]
        ca = comp[a]
        if ca >= 0 and ca == comp[b]:
            kind[i] = 0
            continue
        gap = _sphere_gap(center, radius, a, b)
        if gap >= rho_hi:
            # every cross distance, and so every descendant's closest
            # pair, is at least the gap
            kind[i] = 0
            continue
        dmax = _sphere_dmax(center, radius, a, b)
        if use_mr == 1:
            if cdn_max[a] > dmax:
                dmax = cdn_max[a]
            if cdn_max[b] > dmax:
                dmax = cdn_max[b]
        if dmax < rho_lo:
            # every descendant's closest pair already settled below the
            # window
            kind[i] = 0
            continue
        if _pred_accepts(mode, s, center, radius, cdn_min, cdn_max, a, b):
            if sizes[a] + sizes[b] <= beta:
                kind[i] = 1
            else:
                kind[i] = 0
            continue
        kind[i] = 2
        sp = _split_side(radius, a, b)
        other = b if sp == a else a
        child_a[2 * i] = left[sp]
        child_b[2 * i] = other
        child_a[2 * i + 1] = right[sp]
        child_b[2 * i + 1] = other


def _seed_rows(tree: KdTree, comp: np.ndarray):
    """Seed pairs (left, right) of internal nodes, minus settled subtrees."""
    internal = tree.internal_node_ids()
    internal = internal[comp[internal] < 0]
    return (tree.left[internal].astype(np.int32),
            tree.right[internal].astype(np.int32))


def _rho_scan(tree: KdTree, beta: int, comp: np.ndarray,
              pred: SeparationPredicate) -> float:
    cdn_min, cdn_max = _cdn_arrays(tree)
    sizes = tree.node_sizes
    fa, fb = _seed_rows(tree, comp)
    rho = np.inf
    while fa.shape[0] > 0:
        m = fa.shape[0]
        kind = np.empty(m, np.int8)
        child_a = np.empty(2 * m, np.int32)
        child_b = np.empty(2 * m, np.int32)
        nd_out = np.empty(m, np.float64)
        _rho_step(fa, fb, sizes, comp, tree.left, tree.right, tree.center,
                  tree.radius, cdn_min, cdn_max, pred.mode_code, pred.s,
                  beta, rho, kind, child_a, child_b, nd_out)
        ws = kind == 1
        if ws.any():
            level_min = float(nd_out[ws].min())
            if level_min < rho:
                rho = level_min
        split = np.repeat(kind == 2, 2)
        fa = child_a[split]
        fb = child_b[split]
    return rho


def _pairs_scan(tree: KdTree, beta: int, rho_lo: float, rho_hi: float,
                comp: np.ndarray, pred: SeparationPredicate, use_mr: bool):
    cdn_min, cdn_max = _cdn_arrays(tree)
    sizes = tree.node_sizes
    fa, fb = _seed_rows(tree, comp)
    out_a: list[np.ndarray] = []
    out_b: list[np.ndarray] = []
    while fa.shape[0] > 0:
        m = fa.shape[0]
        kind = np.empty(m, np.int8)
        child_a = np.empty(2 * m, np.int32)
        child_b = np.empty(2 * m, np.int32)
        _pairs_step(fa, fb, sizes, comp, tree.left, tree.right, tree.center,
                    tree.radius, cdn_min, cdn_max, pred.mode_code, pred.s,
                    beta, rho_lo, rho_hi, 1 if use_mr else 0,
                    kind, child_a, child_b)
        emit = kind == 1
        if emit.any():
            out_a.append(fa[emit])
            out_b.append(fb[emit])
        split = np.repeat(kind == 2, 2)
        fa = child_a[split]
        fb = child_b[split]
    if out_a:
        return np.concatenate(out_a), np.concatenate(out_b)
    return np.empty(0, np.int32), np.empty(0, np.int32)


def get_rho(tree: KdTree, beta: int, uf: UnionFind,
            pred: Optional[SeparationPredicate] = None) -> float:
    """Safe weight ceiling for a round processing cardinality <= beta.

    Walks the decomposition recursion without materializing it, pruning
    subproblems that are small enough to process now, already connected,
    or provably no closer than the running minimum; returns the smallest
    sphere gap over the surviving well-separated pairs, or +inf when no
    pair exceeds the cardinality bound.
    """
    if pred is None:
        pred = SeparationPredicate()
    _require_annotation(tree, pred)
    comp = _fresh_component_ids(tree, uf)
    return _rho_scan(tree, int(beta), comp, pred)


def get_pairs(tree: KdTree, beta: int, rho_lo: float, rho_hi: float,
              uf: UnionFind, pred: Optional[SeparationPredicate] = None,
              metric: str = "euclidean", core=None) -> WspdPairs:
    """Materialize the round's pairs with closest-pair weight in a window.

    Returns exactly the well-separated pairs (under ``pred``) whose sides
    are not yet connected, whose cardinality is at most ``beta``, and
    whose closest-pair weight lies in [rho_lo, rho_hi); each returned pair
    carries its computed edge.
    """
    if pred is None:
        pred = SeparationPredicate()
    if rho_lo > rho_hi:
        raise ValueError("rho_lo exceeds rho_hi")
    _require_annotation(tree, pred)
    core_arr = _validate_metric(pred, metric, core, tree)
    use_mr = metric == "mutual-reachability"
    comp = _fresh_component_ids(tree, uf)
    pa, pb = _pairs_scan(tree, int(beta), float(rho_lo), float(rho_hi), comp,
                         pred, use_mr)
    eu, ev, ew = _run_bccp_batch(tree, pa, pb, use_mr,
                                 core_arr if use_mr else None)
    inside = (ew >= rho_lo) & (ew < rho_hi)
    pa, pb = pa[inside], pb[inside]
    eu, ev, ew = eu[inside], ev[inside], ew[inside]
    lo = np.minimum(pa, pb)
    hi = np.maximum(pa, pb)
    order = np.lexsort((hi, lo))
    result = WspdPairs(tree, pred, lo[order], hi[order])
    result.edge_u[:] = eu[order]
    result.edge_v[:] = ev[order]
    result.edge_w[:] = ew[order]
    return result


def memogfk(tree: KdTree, pred: Optional[SeparationPredicate] = None,
            metric: str = "euclidean", core=None) -> SpanningForest:
    """Filtered Kruskal that re-traverses instead of materializing.

    Follows the same round schedule as :func:`gfk` but never holds more
    than one round's pairs: each round computes its weight ceiling with
    :func:`get_rho`-style traversal, materializes only the pairs whose
    closest-pair weight can fall in [rho_lo, rho_hi), feeds their edges to
    Kruskal, then advances the window and doubles ``beta``.
    """
    if pred is None:
        pred = SeparationPredicate()
    _require_annotation(tree, pred)
    core_arr = _validate_metric(pred, metric, core, tree)
    use_mr = metric == "mutual-reachability"
    n = tree.n
    uf = UnionFind(n)
    forest = SpanningForest(n)
    beta = 2
    rho_lo = 0.0
    rounds = 0
    peak = 0
    total = 0
    phase = {"wspd": 0.0, "kruskal": 0.0}
    while forest.count < n - 1:
        t0 = time.perf_counter()
        comp = _fresh_component_ids(tree, uf)
        rho_hi = _rho_scan(tree, beta, comp, pred)
        pa, pb = _pairs_scan(tree, beta, rho_lo, rho_hi, comp, pred, use_mr)
        eu, ev, ew = _run_bccp_batch(tree, pa, pb, use_mr,
                                     core_arr if use_mr else None)
        mcand = int(pa.shape[0])
        peak = max(peak, mcand)
        total += mcand
        inside = (ew >= rho_lo) & (ew < rho_hi)
        t1 = time.perf_counter()
        _kruskal_arrays(eu[inside], ev[inside], ew[inside], uf, forest)
        t2 = time.perf_counter()
        phase["wspd"] += t1 - t0
        phase["kruskal"] += t2 - t1
        if forest.count < n - 1 and rho_hi == np.inf and mcand == 0:
            raise RuntimeError("traversal exhausted before the forest spanned")
        rho_lo = rho_hi
        beta *= 2
        rounds += 1
    forest.stats = {
        "rounds": rounds,
        "pairs_total": total,
        "pairs_peak": peak,
        "filtered_without_bccp": 0,
        "phase_seconds": phase,
    }
    return forest
