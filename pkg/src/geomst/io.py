"""Dataset ingestion, synthetic generators, and text output formats.

All formats are plain text with 17-significant-digit decimals, which
round-trip IEEE doubles exactly; infinities print as "inf". Outputs are
deterministic for a fixed input, seed, and flag set, independent of
thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dendrogram import Clustering, Dendrogram, ReachabilityPlot
from .mst import SpanningForest

__all__ = [
    "Dataset",
    "gen_uniform",
    "gen_varden",
    "read_clustering",
    "read_dendrogram",
    "read_mst",
    "read_points",
    "read_reachability",
    "write_clustering",
    "write_dendrogram",
    "write_mst",
    "write_points",
    "write_reachability",
]


@dataclass
class Dataset:
    """Row-major point buffer with an optional source path."""

    points: np.ndarray
    source: Optional[str] = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("empty dataset")
        if not np.isfinite(pts).all():
            raise ValueError("invalid coordinate")
        self.points = pts

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])


def read_points(path, format: str = "csv") -> Dataset:
    """Parse one point per line, comma or whitespace delimited.

    A first line with any non-numeric token is treated as a header and
    skipped; the dimension is inferred from the first data line.
    """
    if format != "csv":
        raise ValueError(f"unsupported format: {format!r}")
    rows: list[list[float]] = []
    d = None
    may_skip_header = True
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            s = raw.strip()
            if not s:
                continue
            tokens = s.replace(",", " ").split()
            try:
                vals = [float(t) for t in tokens]
            except ValueError:
                if may_skip_header and not rows:
                    may_skip_header = False
                    continue
                raise ValueError(
                    f"{path}, line {ln}: non-numeric value") from None
            may_skip_header = False
            if d is None:
                d = len(vals)
            elif len(vals) != d:
                raise ValueError(
                    f"{path}, line {ln}: expected {d} values, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    pts = np.array(rows, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise ValueError(f"{path}: invalid coordinate")
    return Dataset(points=pts, source=str(path))


def gen_uniform(n: int, d: int, seed: int) -> Dataset:
    """Uniform points in the hypercube [0, sqrt(n))^d; deterministic."""
    if n < 1:
        raise ValueError("empty dataset")
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    side = float(np.sqrt(n))
    return Dataset(points=rng.random((n, d)) * side)


def gen_varden(n: int, d: int, seed: int, clusters: int = 10) -> Dataset:
    """Clustered variable-density data; deterministic for a fixed seed.

    An explicit approximation of seed-spreader-style data, which emits
    quantized coordinates: each cluster is a patch of grid sites at a
    per-cluster pitch, placed uniformly in the domain. Pitches are
    powers of two spanning a 64x range, so cluster densities differ by
    orders of magnitude, and coordinates within a cluster are exact
    pitch multiples, the quantized regime that exercises the
    reachability-aware separation predicate.
    """
    if n < 1:
        raise ValueError("empty dataset")
    if d < 1:
        raise ValueError("dimension must be positive")
    if clusters < 1:
        raise ValueError("clusters must be positive")
    k = min(clusters, n)
    rng = np.random.Generator(np.random.Philox(seed))
    side = float(np.sqrt(n))
    counts = np.full(k, n // k, np.int64)
    counts[: n % k] += 1
    parts = []
    for i in range(k):
        m = int(counts[i])
        c = int(np.ceil(m ** (1.0 / d)))
        # power-of-two pitch keeps every coordinate exactly representable
        want = side / (2.0 * max(c, 1)) / float(2 ** ((6 * i) // max(k - 1, 1)))
        pitch = float(2.0 ** np.floor(np.log2(want))) if want > 0 else 1.0
        axes = [np.arange(c, dtype=np.float64)] * d
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        sites = grid.reshape(-1, d)[:m]
        base = np.floor(rng.random(d) * side / pitch)
        parts.append((base + sites) * pitch)
    return Dataset(points=np.concatenate(parts, axis=0))


# ---------------------------------------------------------------------------
# writers

def _write_lines(path, lines) -> None:
    with open(path, "w") as f:
        f.write("\n".join(lines))
        f.write("\n")


def write_points(path, dataset: Dataset) -> None:
    lines = [",".join(f"{x:.17g}" for x in row) for row in dataset.points]
    _write_lines(path, lines)


def write_mst(path, forest: SpanningForest) -> None:
    """Lines "u v weight" with u < v, sorted by (weight, u, v)."""
    u, v, w = forest.edge_arrays()
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    order = np.lexsort((hi, lo, w))
    lines = [f"{lo[i]} {hi[i]} {w[i]:.17g}" for i in order]
    _write_lines(path, lines)


def write_dendrogram(path, dendro: Dendrogram) -> None:
    """Header line "n", then 2n-1 lines "id left right height size"."""
    lines = [str(dendro.n)]
    left, right = dendro.left, dendro.right
    height, size = dendro.height, dendro.size
    for i in range(dendro.n_nodes):
        lines.append(f"{i} {left[i]} {right[i]} {height[i]:.17g} {size[i]}")
    _write_lines(path, lines)


def write_reachability(path, plot: ReachabilityPlot) -> None:
    """Lines "point_id value" in plot order; the first value is "inf"."""
    lines = [f"{plot.point_ids[i]} {plot.values[i]:.17g}"
             for i in range(len(plot))]
    _write_lines(path, lines)


def write_clustering(path, clustering: Clustering) -> None:
    """Lines "point_id label" in point order; -1 marks noise."""
    lines = [f"{p} {lab}" for p, lab in enumerate(clustering.labels)]
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# readers (round-trip helpers)

def read_mst(path):
    """Inverse of write_mst: returns (u, v, weight) arrays."""
    u, v, w = [], [], []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            a, b, c = line.split()
            u.append(int(a))
            v.append(int(b))
            w.append(float(c))
    return (np.array(u, np.int64), np.array(v, np.int64),
            np.array(w, np.float64))


def read_dendrogram(path) -> Dendrogram:
    """Inverse of write_dendrogram; ordering metadata is not serialized."""
    with open(path) as f:
        lines = [ln for ln in (l.strip() for l in f) if ln]
    n = int(lines[0])
    dendro = Dendrogram(n)
    if len(lines) - 1 != 2 * n - 1:
        raise ValueError(f"{path}: expected {2 * n - 1} node lines")
    is_child = np.zeros(2 * n - 1, bool)
    for ln in lines[1:]:
        i, l, r, h, sz = ln.split()
        i = int(i)
        dendro.left[i] = int(l)
        dendro.right[i] = int(r)
        dendro.height[i] = float(h)
        dendro.size[i] = int(sz)
        if int(l) >= 0:
            is_child[int(l)] = True
            is_child[int(r)] = True
    roots = np.nonzero(~is_child)[0]
    dendro.root = int(roots[-1])
    return dendro


def read_reachability(path) -> ReachabilityPlot:
    ids, vals = [], []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            a, b = line.split()
            ids.append(int(a))
            vals.append(float(b))
    return ReachabilityPlot(point_ids=np.array(ids, np.int64),
                            values=np.array(vals, np.float64),
                            start=int(ids[0]) if ids else 0)


def read_clustering(path) -> np.ndarray:
    labels = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            p, lab = line.split()
            labels[int(p)] = int(lab)
    out = np.full(max(labels) + 1 if labels else 0, -1, np.int64)
    for p, lab in labels.items():
        out[p] = lab
    return out
