"""Spatial-median kd-trees with bounding spheres and exact all-points k-NN.

The tree lives in flat parallel arrays indexed by node id. Ids are assigned
in depth-first preorder, so a node's children always carry larger ids than
the node itself; bottom-up passes can therefore run as a single reverse scan.
``idx`` holds a permutation of the point ids and every node owns the
contiguous slice ``idx[start:end]``.

Splitting rule: cut at the midpoint of the widest bounding-box dimension.
Points whose coordinate equals the split value go left; when every point in
a node coincides along the split dimension the index range is halved
instead, which keeps recursion finite on duplicate-heavy data. Each node
carries a tight axis-aligned bounding box plus the sphere circumscribing it
(center = box center, radius = half the box diagonal).

Distances are squared internally wherever only comparisons matter; rooted
values appear only in returned results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit, prange

from . import _threads

__all__ = [
    "BoundingSphere",
    "KdNode",
    "KdTree",
    "KnnResult",
    "build_kdtree",
    "knn",
    "node_distance",
]


@dataclass(frozen=True)
class BoundingSphere:
    """Sphere guaranteed to contain every point of the owning node."""

    center: np.ndarray
    radius: float

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class KdNode:
    """Read-only view of one tree node.

    ``cd_min``/``cd_max`` are the subtree core-distance bounds; they are
    populated by :func:`geomst.hdbscan.core_distances` and are ``None``
    until then.
    """

    tree: "KdTree"
    id: int

    @property
    def point_range(self) -> tuple[int, int]:
        return int(self.tree.start[self.id]), int(self.tree.end[self.id])

    @property
    def size(self) -> int:
        return int(self.tree.end[self.id] - self.tree.start[self.id])

    @property
    def is_leaf(self) -> bool:
        return self.tree.left[self.id] < 0

    @property
    def children(self) -> tuple[Optional["KdNode"], Optional["KdNode"]]:
        if self.is_leaf:
            return (None, None)
        return (
            self.tree.node(int(self.tree.left[self.id])),
            self.tree.node(int(self.tree.right[self.id])),
        )

    @property
    def split_dim(self) -> int:
        return int(self.tree.split_dim[self.id])

    @property
    def split_value(self) -> float:
        return float(self.tree.split_value[self.id])

    @property
    def sphere(self) -> BoundingSphere:
        return BoundingSphere(
            center=self.tree.center[self.id].copy(),
            radius=float(self.tree.radius[self.id]),
        )

    @property
    def diameter(self) -> float:
        return 2.0 * float(self.tree.radius[self.id])

    @property
    def point_ids(self) -> np.ndarray:
        lo, hi = self.point_range
        return self.tree.idx[lo:hi].astype(np.int64)

    @property
    def cd_min(self) -> Optional[float]:
        if self.tree.cd_node_min is None:
            return None
        return float(self.tree.cd_node_min[self.id])

    @property
    def cd_max(self) -> Optional[float]:
        if self.tree.cd_node_max is None:
            return None
        return float(self.tree.cd_node_max[self.id])


@dataclass(frozen=True)
class KnnResult:
    """Per-point neighbor lists, ascending by (distance, id), self included.

    ``ids[i, 0] == i`` always: a point is its own nearest neighbor at
    distance zero, and among further coincident points smaller ids come
    first.
    """

    ids: np.ndarray
    dists: np.ndarray

    @property
    def k(self) -> int:
        return self.ids.shape[1]


class KdTree:
    """Immutable array-backed kd-tree over a fixed point set.

    After construction the tree is shared read-only by any number of
    threads; the only later mutation is the optional core-distance
    annotation, which happens in a single bulk pass before parallel use.
    """

    def __init__(self, points, idx, start, end, left, right, split_dim,
                 split_value, bbox_lo, bbox_hi, max_depth, leaf_capacity):
        self.points = points
        self.idx = idx
        self.start = start
        self.end = end
        self.left = left
        self.right = right
        self.split_dim = split_dim
        self.split_value = split_value
        self.bbox_lo = bbox_lo
        self.bbox_hi = bbox_hi
        self.center = (bbox_lo + bbox_hi) * 0.5
        self.radius = 0.5 * np.sqrt(((bbox_hi - bbox_lo) ** 2).sum(axis=1))
        self.max_depth = max_depth
        self.leaf_capacity = leaf_capacity
        # populated by core_distances(); None means "no annotation yet"
        self.cd_node_min: Optional[np.ndarray] = None
        self.cd_node_max: Optional[np.ndarray] = None
        self.annotated_minpts: Optional[int] = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.start.shape[0]

    @property
    def node_sizes(self) -> np.ndarray:
        return (self.end - self.start).astype(np.int64)

    @property
    def root(self) -> KdNode:
        return self.node(0)

    def node(self, i: int) -> KdNode:
        if not 0 <= i < self.n_nodes:
            raise IndexError(f"node id {i} out of range")
        return KdNode(tree=self, id=int(i))

    def internal_node_ids(self) -> np.ndarray:
        return np.nonzero(self.left >= 0)[0].astype(np.int32)


@njit(cache=True)
def _build_arena(coords, idx, leaf_capacity, start, end, left, right,
                 split_dim, split_value, bbox_lo, bbox_hi):
    n = idx.shape[0]
    d = coords.shape[1]
    scratch = np.empty(n, np.int32)
    # work rows: lo, hi, parent, is_left, depth
    stack = np.empty((n + 2, 5), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = -1
    stack[0, 3] = 0
    stack[0, 4] = 0
    top = 1
    node_count = 0
    max_depth = 0
    while top > 0:
        top -= 1
        lo = stack[top, 0]
        hi = stack[top, 1]
        parent = stack[top, 2]
        is_left = stack[top, 3]
        depth = stack[top, 4]
        node = node_count
        node_count += 1
        if parent >= 0:
            if is_left == 1:
                left[parent] = node
            else:
                right[parent] = node
        if depth > max_depth:
            max_depth = depth
        start[node] = lo
        end[node] = hi
        p0 = idx[lo]
        for j in range(d):
            bbox_lo[node, j] = coords[p0, j]
            bbox_hi[node, j] = coords[p0, j]
        for t in range(lo + 1, hi):
            p = idx[t]
            for j in range(d):
                v = coords[p, j]
                if v < bbox_lo[node, j]:
                    bbox_lo[node, j] = v
                elif v > bbox_hi[node, j]:
                    bbox_hi[node, j] = v
        m = hi - lo
        if m <= leaf_capacity:
            left[node] = -1
            right[node] = -1
            split_dim[node] = -1
            split_value[node] = np.nan
            continue
        # widest dimension; first index wins ties
        wj = 0
        wext = bbox_hi[node, 0] - bbox_lo[node, 0]
        for j in range(1, d):
            ext = bbox_hi[node, j] - bbox_lo[node, j]
            if ext > wext:
                wext = ext
                wj = j
        if wext == 0.0:
            # all points coincident: halve the id-ordered slice (stable
            # partitions keep equal points in ascending original order)
            nl = (m + 1) // 2
            sv = bbox_lo[node, wj]
        else:
            sv = bbox_lo[node, wj] + 0.5 * wext
            if sv >= bbox_hi[node, wj]:
                # 1-ulp extents can round the midpoint up to the top edge;
                # pin to the low edge so both children stay nonempty
                sv = bbox_lo[node, wj]
            nl = 0
            for t in range(lo, hi):
                if coords[idx[t], wj] <= sv:
                    nl += 1
            li = 0
            ri = nl
            for t in range(lo, hi):
                p = idx[t]
                if coords[p, wj] <= sv:
                    scratch[li] = p
                    li += 1
                else:
                    scratch[ri] = p
                    ri += 1
            for t in range(m):
                idx[lo + t] = scratch[t]
        split_dim[node] = wj
        split_value[node] = sv
        # push right first so the left child is processed next (preorder)
        stack[top, 0] = lo + nl
        stack[top, 1] = hi
        stack[top, 2] = node
        stack[top, 3] = 0
        stack[top, 4] = depth + 1
        top += 1
        stack[top, 0] = lo
        stack[top, 1] = lo + nl
        stack[top, 2] = node
        stack[top, 3] = 1
        stack[top, 4] = depth + 1
        top += 1
    return node_count, max_depth


def build_kdtree(points, leaf_capacity: int = 1) -> KdTree:
    """Build a spatial-median kd-tree over ``points``.

    Parameters
    ----------
    points : array-like of shape (n, d)
        Input coordinates; must be finite.
    leaf_capacity : int
        Maximum points per leaf. Well-separated decompositions require the
        default of 1; k-NN queries work with any capacity.

    The construction is sequential and therefore identical across runs and
    thread counts; the returned tree is immutable and safe to share.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        pts = np.atleast_2d(pts)
    if pts.size == 0:
        raise ValueError("empty dataset")
    if not np.isfinite(pts).all():
        raise ValueError("invalid coordinate")
    if leaf_capacity < 1:
        raise ValueError("leaf_capacity must be a positive integer")
    n = pts.shape[0]
    cap = 2 * n - 1 if n > 0 else 1
    idx = np.arange(n, dtype=np.int32)
    start = np.empty(cap, np.int32)
    end = np.empty(cap, np.int32)
    left = np.empty(cap, np.int32)
    right = np.empty(cap, np.int32)
    split_dim = np.empty(cap, np.int32)
    split_value = np.empty(cap, np.float64)
    bbox_lo = np.empty((cap, pts.shape[1]), np.float64)
    bbox_hi = np.empty((cap, pts.shape[1]), np.float64)
    count, max_depth = _build_arena(pts, idx, leaf_capacity, start, end, left,
                                    right, split_dim, split_value, bbox_lo,
                                    bbox_hi)
    if count != cap:
        start = start[:count].copy()
        end = end[:count].copy()
        left = left[:count].copy()
        right = right[:count].copy()
        split_dim = split_dim[:count].copy()
        split_value = split_value[:count].copy()
        bbox_lo = bbox_lo[:count].copy()
        bbox_hi = bbox_hi[:count].copy()
    return KdTree(pts, idx, start, end, left, right, split_dim, split_value,
                  bbox_lo, bbox_hi, int(max_depth), int(leaf_capacity))


def node_distance(a: KdNode, b: KdNode) -> float:
    """Lower bound on the minimum inter-point distance between two nodes.

    Computed from the bounding spheres as
    ``max(0, |center_a - center_b| - radius_a - radius_b)``.
    """
    ca, cb = a.sphere, b.sphere
    if ca.center.shape != cb.center.shape:
        raise ValueError("dimension mismatch")
    gap = float(np.sqrt(((ca.center - cb.center) ** 2).sum()))
    gap -= ca.radius + cb.radius
    return gap if gap > 0.0 else 0.0


@njit(cache=True, inline="always")
def _sphere_gap(center, radius, a, b):
    """node_distance on raw arrays; used by every traversal kernel."""
    acc = 0.0
    for j in range(center.shape[1]):
        t = center[a, j] - center[b, j]
        acc += t * t
    g = np.sqrt(acc) - radius[a] - radius[b]
    return g if g > 0.0 else 0.0


@njit(cache=True, inline="always")
def _sphere_dmax(center, radius, a, b):
    """Upper bound on the maximum inter-point distance between two nodes."""
    acc = 0.0
    for j in range(center.shape[1]):
        t = center[a, j] - center[b, j]
        acc += t * t
    return np.sqrt(acc) + radius[a] + radius[b]


@njit(cache=True, inline="always")
def _box_d2(coords, q, bbox_lo, bbox_hi, node):
    acc = 0.0
    for j in range(coords.shape[1]):
        v = coords[q, j]
        lo = bbox_lo[node, j]
        hi = bbox_hi[node, j]
        if v < lo:
            t = lo - v
            acc += t * t
        elif v > hi:
            t = v - hi
            acc += t * t
    return acc


@njit(cache=True, inline="always")
def _pair_worse(d1, r1, d2, r2):
    """True when (d1, r1) sorts after (d2, r2) lexicographically."""
    return d1 > d2 or (d1 == d2 and r1 > r2)


@njit(cache=True, parallel=True)
def _knn_all(coords, idx, start, end, left, right, bbox_lo, bbox_hi,
             k, stack_cap, n_chunks, out_ids, out_d2):
    n = coords.shape[0]
    d = coords.shape[1]
    chunk = (n + n_chunks - 1) // n_chunks
    for c in prange(n_chunks):
        stack = np.empty(stack_cap, np.int64)
        hd = np.empty(k, np.float64)   # max-heap keyed on (distance^2, rank)
        hr = np.empty(k, np.int64)     # rank: -1 for the query itself, else id
        q0 = c * chunk
        q1 = min(n, q0 + chunk)
        for q in range(q0, q1):
            size = 0
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                nd = stack[top]
                if size == k:
                    # equal box distance must still be visited: a tied
                    # candidate with a smaller rank can displace the worst
                    if _box_d2(coords, q, bbox_lo, bbox_hi, nd) > hd[0]:
                        continue
                l = left[nd]
                if l < 0:
                    for t in range(start[nd], end[nd]):
                        p = idx[t]
                        acc = 0.0
                        for j in range(d):
                            dv = coords[q, j] - coords[p, j]
                            acc += dv * dv
                        rank = -1 if p == q else np.int64(p)
                        if size < k:
                            i = size
                            hd[i] = acc
                            hr[i] = rank
                            size += 1
                            while i > 0:
                                par = (i - 1) >> 1
                                if _pair_worse(hd[i], hr[i], hd[par], hr[par]):
                                    hd[i], hd[par] = hd[par], hd[i]
                                    hr[i], hr[par] = hr[par], hr[i]
                                    i = par
                                else:
                                    break
                        elif _pair_worse(hd[0], hr[0], acc, rank):
                            hd[0] = acc
                            hr[0] = rank
                            i = 0
                            while True:
                                lc = 2 * i + 1
                                if lc >= size:
                                    break
                                m_ = lc
                                rc = lc + 1
                                if rc < size and _pair_worse(hd[rc], hr[rc],
                                                             hd[lc], hr[lc]):
                                    m_ = rc
                                if _pair_worse(hd[m_], hr[m_], hd[i], hr[i]):
                                    hd[i], hd[m_] = hd[m_], hd[i]
                                    hr[i], hr[m_] = hr[m_], hr[i]
                                    i = m_
                                else:
                                    break
                else:
                    r = right[nd]
                    dl = _box_d2(coords, q, bbox_lo, bbox_hi, l)
                    dr = _box_d2(coords, q, bbox_lo, bbox_hi, r)
                    # push the farther child first so the nearer one pops next
                    if dl <= dr:
                        stack[top] = r
                        stack[top + 1] = l
                    else:
                        stack[top] = l
                        stack[top + 1] = r
                    top += 2
            # in-place heapsort yields ascending (distance^2, rank) order
            sz = size
            while sz > 1:
                sz -= 1
                hd[0], hd[sz] = hd[sz], hd[0]
                hr[0], hr[sz] = hr[sz], hr[0]
                i = 0
                while True:
                    lc = 2 * i + 1
                    if lc >= sz:
                        break
                    m_ = lc
                    rc = lc + 1
                    if rc < sz and _pair_worse(hd[rc], hr[rc], hd[lc], hr[lc]):
                        m_ = rc
                    if _pair_worse(hd[m_], hr[m_], hd[i], hr[i]):
                        hd[i], hd[m_] = hd[m_], hd[i]
                        hr[i], hr[m_] = hr[m_], hr[i]
                        i = m_
                    else:
                        break
            for t in range(k):
                out_ids[q, t] = q if hr[t] == -1 else hr[t]
                out_d2[q, t] = hd[t]


def knn(tree: KdTree, k: int) -> KnnResult:
    """Exact k nearest neighbors (self included) for every point.

    Lists are ascending by distance; equal distances are broken by smaller
    id, except that each point always heads its own list. The query loop is
    parallel per point and its output is independent of the thread count.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > tree.n:
        raise ValueError("k exceeds dataset size")
    n = tree.n
    out_ids = np.empty((n, k), np.int64)
    out_d2 = np.empty((n, k), np.float64)
    n_chunks = max(1, min(n, _threads.get_threads() * 8))
    _knn_all(tree.points, tree.idx, tree.start, tree.end, tree.left,
             tree.right, tree.bbox_lo, tree.bbox_hi, k,
             tree.max_depth + 2, n_chunks, out_ids, out_d2)
    return KnnResult(ids=out_ids, dists=np.sqrt(out_d2))
