"""Well-separated pair decompositions with pluggable separation predicates.

Two predicates are supported. The standard geometric one accepts a node
pair when the gap between their bounding spheres is at least ``s`` times
the larger radius (with ``s = 2`` this is "gap at least the larger
diameter"). The density-aware one used for mutual-reachability MSTs
accepts when the pair is geometrically separated, or when it is mutually
unreachable: the smallest possible mutual-reachability distance across the
pair already dominates every within-node one, so a single representative
edge suffices. The second predicate terminates recursion no later than the
first and typically emits far fewer pairs on clustered data.

The traversal is a frontier-at-a-time breadth-first walk: each level is
evaluated by a parallel kernel over the current frontier and compacted
with prefix sums, so the emitted pair sequence is identical for every
thread count. Pair order is then normalized by sorting on
(min node id, max node id).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from numba import njit, prange

from .kdtree import KdNode, KdTree, _sphere_gap

__all__ = [
    "SeparationPredicate",
    "WspdPair",
    "WspdPairs",
    "is_geometrically_separated",
    "is_mutually_unreachable",
    "wspd",
    "wspd_count",
]

_MODE_STANDARD = 0
_MODE_HDBSCAN = 1


@dataclass(frozen=True)
class SeparationPredicate:
    """Configuration for what counts as a well-separated node pair.

    mode "standard" uses the geometric sphere-gap test with separation
    constant ``s`` (only s = 2 is exercised by the shipped pipelines);
    mode "hdbscan" uses the disjunction of geometric separation and mutual
    unreachability and requires core-distance annotations on the tree.
    """

    mode: str = "standard"
    s: float = 2.0

    def __post_init__(self):
        if self.mode not in ("standard", "hdbscan"):
            raise ValueError(f"unknown separation mode: {self.mode!r}")
        if self.s <= 0:
            raise ValueError("separation constant must be positive")

    @property
    def mode_code(self) -> int:
        return _MODE_STANDARD if self.mode == "standard" else _MODE_HDBSCAN

    def accepts(self, a: KdNode, b: KdNode) -> bool:
        """Evaluate this predicate on two node views."""
        if self.mode == "standard":
            from .kdtree import node_distance
            return node_distance(a, b) >= self.s * max(a.sphere.radius,
                                                       b.sphere.radius)
        return is_geometrically_separated(a, b) or is_mutually_unreachable(a, b)


@dataclass(frozen=True)
class WspdPair:
    """One well-separated pair, plus its cached closest-pair edge if known."""

    a: KdNode
    b: KdNode
    cached_edge: Optional[tuple[int, int, float]] = None


def is_geometrically_separated(a: KdNode, b: KdNode) -> bool:
    """Gap between the node spheres at least the larger sphere diameter."""
    from .kdtree import node_distance
    return node_distance(a, b) >= max(a.diameter, b.diameter)


def is_mutually_unreachable(a: KdNode, b: KdNode) -> bool:
    """Smallest cross mutual-reachability bound dominates both nodes.

    Evaluates ``max(d(A,B), cd_min(A), cd_min(B)) >=
    max(diam(A), diam(B), cd_max(A), cd_max(B))`` from the node
    annotations written by core-distance computation.
    """
    from .kdtree import node_distance
    if a.cd_min is None or b.cd_min is None:
        raise ValueError("core distances missing")
    lhs = max(node_distance(a, b), a.cd_min, b.cd_min)
    rhs = max(a.diameter, b.diameter, a.cd_max, b.cd_max)
    return lhs >= rhs


class WspdPairs:
    """Pair collection backed by flat node-id arrays.

    ``a_ids``/``b_ids`` are canonicalized (a < b) and sorted by
    (a, b). ``edge_u``/``edge_v``/``edge_w`` hold cached closest-pair
    edges once a driver has computed them; entries are -1/NaN until then.
    """

    def __init__(self, tree: KdTree, pred: SeparationPredicate,
                 a_ids: np.ndarray, b_ids: np.ndarray):
        lo = np.minimum(a_ids, b_ids)
        hi = np.maximum(a_ids, b_ids)
        order = np.lexsort((hi, lo))
        self.tree = tree
        self.pred = pred
        self.a_ids = np.ascontiguousarray(lo[order], dtype=np.int32)
        self.b_ids = np.ascontiguousarray(hi[order], dtype=np.int32)
        self.edge_u = np.full(len(self.a_ids), -1, np.int64)
        self.edge_v = np.full(len(self.a_ids), -1, np.int64)
        self.edge_w = np.full(len(self.a_ids), np.nan, np.float64)

    def __len__(self) -> int:
        return int(self.a_ids.shape[0])

    def __getitem__(self, i: int) -> WspdPair:
        if not 0 <= i < len(self):
            raise IndexError(i)
        cached = None
        if self.edge_u[i] >= 0:
            cached = (int(self.edge_u[i]), int(self.edge_v[i]),
                      float(self.edge_w[i]))
        return WspdPair(a=self.tree.node(int(self.a_ids[i])),
                        b=self.tree.node(int(self.b_ids[i])),
                        cached_edge=cached)

    def __iter__(self) -> Iterator[WspdPair]:
        for i in range(len(self)):
            yield self[i]


@njit(cache=True, inline="always")
def _pred_accepts(mode, s, center, radius, cdn_min, cdn_max, a, b):
    gap = _sphere_gap(center, radius, a, b)
    ra = radius[a]
    rb = radius[b]
    rmax = ra if ra > rb else rb
    if mode == 0:
        return gap >= s * rmax
    # geometric separation with s = 2 written via diameters
    if gap >= 2.0 * rmax:
        return True
    lhs = gap
    if cdn_min[a] > lhs:
        lhs = cdn_min[a]
    if cdn_min[b] > lhs:
        lhs = cdn_min[b]
    rhs = 2.0 * rmax
    if cdn_max[a] > rhs:
        rhs = cdn_max[a]
    if cdn_max[b] > rhs:
        rhs = cdn_max[b]
    return lhs >= rhs


@njit(cache=True, inline="always")
def _split_side(radius, a, b):
    """Pick the node to split: larger radius, ties to the larger id."""
    if radius[a] > radius[b]:
        return a
    if radius[b] > radius[a]:
        return b
    return a if a > b else b


@njit(cache=True, parallel=True)
def _wspd_step(fa, fb, left, right, center, radius, cdn_min, cdn_max,
               mode, s, kind, child_a, child_b):
    """Classify one frontier level.

    kind[i] = 1 emits row i as a pair; kind[i] = 0 splits it into the two
    child rows stored at slots 2i and 2i+1.
    """
    m = fa.shape[0]
    for i in prange(m):
        a = fa[i]
        b = fb[i]
        if _pred_accepts(mode, s, center, radius, cdn_min, cdn_max, a, b):
            kind[i] = 1
        else:
            kind[i] = 0
            sp = _split_side(radius, a, b)
            other = b if sp == a else a
            child_a[2 * i] = left[sp]
            child_b[2 * i] = other
            child_a[2 * i + 1] = right[sp]
            child_b[2 * i + 1] = other


def _seed_frontier(tree: KdTree) -> tuple[np.ndarray, np.ndarray]:
    internal = tree.internal_node_ids()
    return (tree.left[internal].astype(np.int32),
            tree.right[internal].astype(np.int32))


def _require_annotation(tree: KdTree, pred: SeparationPredicate) -> None:
    if pred.mode == "hdbscan" and tree.cd_node_min is None:
        raise ValueError("core distances missing")


def _cdn_arrays(tree: KdTree) -> tuple[np.ndarray, np.ndarray]:
    if tree.cd_node_min is None:
        z = np.zeros(1, np.float64)
        return z, z
    return tree.cd_node_min, tree.cd_node_max


def _traverse(tree: KdTree, pred: SeparationPredicate, collect: bool):
    """Run the full decomposition walk; returns (pairs or None, count)."""
    _require_annotation(tree, pred)
    cdn_min, cdn_max = _cdn_arrays(tree)
    fa, fb = _seed_frontier(tree)
    out_a: list[np.ndarray] = []
    out_b: list[np.ndarray] = []
    total = 0
    while fa.shape[0] > 0:
        m = fa.shape[0]
        kind = np.empty(m, np.int8)
        child_a = np.empty(2 * m, np.int32)
        child_b = np.empty(2 * m, np.int32)
        _wspd_step(fa, fb, tree.left, tree.right, tree.center, tree.radius,
                   cdn_min, cdn_max, pred.mode_code, pred.s, kind,
                   child_a, child_b)
        emit = kind == 1
        total += int(emit.sum())
        if collect and emit.any():
            out_a.append(fa[emit])
            out_b.append(fb[emit])
        split = np.repeat(kind == 0, 2)
        fa = child_a[split]
        fb = child_b[split]
    if not collect:
        return None, total
    if out_a:
        a_ids = np.concatenate(out_a)
        b_ids = np.concatenate(out_b)
    else:
        a_ids = np.empty(0, np.int32)
        b_ids = np.empty(0, np.int32)
    return (a_ids, b_ids), total


def wspd(tree: KdTree, pred: Optional[SeparationPredicate] = None) -> WspdPairs:
    """Compute the well-separated pair decomposition of ``tree``.

    The returned pairs form an exact cover: every unordered pair of
    distinct points appears in the cross product of exactly one pair. The
    tree must be built with leaf_capacity 1; "hdbscan" mode additionally
    requires core-distance annotations.
    """
    if pred is None:
        pred = SeparationPredicate()
    if tree.leaf_capacity != 1:
        raise ValueError("wspd requires a tree built with leaf_capacity 1")
    (a_ids, b_ids), _ = _traverse(tree, pred, collect=True)
    return WspdPairs(tree, pred, a_ids, b_ids)


def wspd_count(tree: KdTree, pred: Optional[SeparationPredicate] = None) -> int:
    """Pair count of the decomposition without materializing it."""
    if pred is None:
        pred = SeparationPredicate()
    if tree.leaf_capacity != 1:
        raise ValueError("wspd requires a tree built with leaf_capacity 1")
    return _traverse(tree, pred, collect=False)[1]
