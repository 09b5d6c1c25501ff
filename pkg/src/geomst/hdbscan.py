"""Density-based MST pipelines over the mutual reachability metric.

The mutual reachability distance between two points is the largest of
their two core distances and their Euclidean distance, where the core
distance of a point is the distance to its minpts-th nearest neighbor
counting the point itself. An MST under this metric is the heart of the
HDBSCAN* hierarchy.

Two pipelines are provided. The baseline pairs up the tree with the
plain geometric separation test and computes one exact closest pair per
pair of nodes under the mutual reachability metric. The second pipeline
additionally accepts node pairs that are mutually unreachable (every
cross distance is dominated by core distances), which produces far fewer
pairs on variable-density data. Both feed the same windowed Kruskal
driver and produce MSTs of equal weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .kdtree import KdTree, knn
from .mst import EdgeCandidate, SpanningForest, memogfk
from .wspd import SeparationPredicate

__all__ = [
    "CoreDistances",
    "MutualReachabilityEdge",
    "core_distances",
    "hdbscan_mst",
    "hdbscan_mst_gantao",
    "mutual_reachability",
]


@dataclass(frozen=True)
class CoreDistances:
    """Per-point core distances for a fixed minpts."""

    cd: np.ndarray
    minpts: int

    def __post_init__(self):
        if self.minpts < 1:
            raise ValueError("minpts must be a positive integer")
        if np.any(self.cd < 0):
            raise ValueError("core distances must be nonnegative")

    def __len__(self) -> int:
        return int(self.cd.shape[0])


@dataclass(frozen=True)
class MutualReachabilityEdge(EdgeCandidate):
    """EdgeCandidate whose weight is the mutual reachability distance."""


def mutual_reachability(points: np.ndarray, core: CoreDistances,
                        u: int, v: int) -> MutualReachabilityEdge:
    """Single mutual-reachability edge, computed from the definition."""
    d = float(np.sqrt(((points[u] - points[v]) ** 2).sum()))
    w = max(d, float(core.cd[u]), float(core.cd[v]))
    return MutualReachabilityEdge(int(u), int(v), w)


@njit(cache=True)
def _annotate(idx, start, end, left, right, cd, out_min, out_max):
    # children have larger preorder ids, so a reverse scan is bottom-up
    for node in range(start.shape[0] - 1, -1, -1):
        l = left[node]
        if l < 0:
            mn = np.inf
            mx = -np.inf
            for t in range(start[node], end[node]):
                c = cd[idx[t]]
                if c < mn:
                    mn = c
                if c > mx:
                    mx = c
            out_min[node] = mn
            out_max[node] = mx
        else:
            r = right[node]
            out_min[node] = min(out_min[l], out_min[r])
            out_max[node] = max(out_max[l], out_max[r])


def core_distances(tree: KdTree, minpts: int) -> CoreDistances:
    """kNN-derived core distances; annotates the tree as a side effect.

    Every tree node receives the min and max core distance over its
    subtree, which the separation predicate and the traversal pruning
    consume. Annotations are overwritten on every call, so a tree can be
    reused across minpts values.
    """
    result = knn(tree, minpts)
    cd = np.ascontiguousarray(result.dists[:, minpts - 1])
    out_min = np.empty(tree.n_nodes, np.float64)
    out_max = np.empty(tree.n_nodes, np.float64)
    _annotate(tree.idx, tree.start, tree.end, tree.left, tree.right, cd,
              out_min, out_max)
    tree.cd_node_min = out_min
    tree.cd_node_max = out_max
    tree.annotated_minpts = int(minpts)
    return CoreDistances(cd=cd, minpts=int(minpts))


def hdbscan_mst_gantao(tree: KdTree, minpts: int) -> SpanningForest:
    """Baseline mutual-reachability MST: geometric pairs, exact edges.

    Pairs come from the plain separation test; each pair contributes its
    exact closest pair under mutual reachability. The windowed driver
    keeps the memory footprint to one round of pairs at a time.
    """
    core = core_distances(tree, minpts)
    forest = memogfk(tree, SeparationPredicate(mode="standard"),
                     metric="mutual-reachability", core=core)
    forest.core = core
    return forest


def hdbscan_mst(tree: KdTree, minpts: int) -> SpanningForest:
    """Mutual-reachability MST with the relaxed pair acceptance.

    Node pairs are accepted either when geometrically separated or when
    mutually unreachable (core distances dominate every cross distance),
    which cuts the pair count sharply on clustered variable-density data
    while leaving the resulting MST weight identical to the baseline's.
    """
    core = core_distances(tree, minpts)
    forest = memogfk(tree, SeparationPredicate(mode="hdbscan"),
                     metric="mutual-reachability", core=core)
    forest.core = core
    return forest
