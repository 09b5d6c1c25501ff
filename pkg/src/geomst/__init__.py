"""geomst: parallel Euclidean MSTs and HDBSCAN hierarchies.

Computes Euclidean minimum spanning trees and density-based clustering
hierarchies (MST over the mutual-reachability graph, ordered dendrogram,
reachability plot, epsilon-cut clusterings) using well-separated pair
decompositions over kd-trees and a filtered Kruskal driver, with exact
brute-force oracles used throughout the test suite.
"""

from . import _threads  # must precede any numba-importing sibling
from ._threads import get_threads, max_threads, set_threads
from .kdtree import (
    BoundingSphere,
    KdNode,
    KdTree,
    KnnResult,
    build_kdtree,
    knn,
    node_distance,
)
from .wspd import (
    SeparationPredicate,
    WspdPair,
    WspdPairs,
    is_geometrically_separated,
    is_mutually_unreachable,
    wspd,
    wspd_count,
)
from .mst import (
    BccpCache,
    EdgeCandidate,
    SpanningForest,
    UnionFind,
    bccp,
    bccp_star,
    emst_naive,
    get_pairs,
    get_rho,
    gfk,
    kruskal_batch,
    memogfk,
)
from .hdbscan import (
    CoreDistances,
    MutualReachabilityEdge,
    core_distances,
    hdbscan_mst,
    hdbscan_mst_gantao,
)
from .dendrogram import (
    Clustering,
    Dendrogram,
    ReachabilityPlot,
    cut,
    dendrogram_parallel,
    dendrogram_sequential,
    reachability_plot,
    vertex_distances,
)
from .io import (
    Dataset,
    gen_uniform,
    gen_varden,
    read_points,
    write_points,
)

__version__ = "0.1.0"

__all__ = [
    "BccpCache",
    "BoundingSphere",
    "Clustering",
    "CoreDistances",
    "Dataset",
    "Dendrogram",
    "EdgeCandidate",
    "KdNode",
    "KdTree",
    "KnnResult",
    "MutualReachabilityEdge",
    "ReachabilityPlot",
    "SeparationPredicate",
    "SpanningForest",
    "UnionFind",
    "WspdPair",
    "WspdPairs",
    "bccp",
    "bccp_star",
    "build_kdtree",
    "core_distances",
    "cut",
    "dendrogram_parallel",
    "dendrogram_sequential",
    "emst_naive",
    "gen_uniform",
    "gen_varden",
    "get_pairs",
    "get_rho",
    "get_threads",
    "gfk",
    "hdbscan_mst",
    "hdbscan_mst_gantao",
    "is_geometrically_separated",
    "is_mutually_unreachable",
    "knn",
    "kruskal_batch",
    "max_threads",
    "memogfk",
    "node_distance",
    "read_points",
    "reachability_plot",
    "set_threads",
    "vertex_distances",
    "wspd",
    "wspd_count",
    "write_points",
    "__version__",
]
