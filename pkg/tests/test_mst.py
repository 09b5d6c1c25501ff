import numpy as np
import pytest

from geomst import (BccpCache, SeparationPredicate, SpanningForest,
                    UnionFind, bccp, bccp_star, build_kdtree, emst_naive,
                    get_pairs, get_rho, gfk, kruskal_batch, memogfk, wspd)
from geomst import io as gio
from geomst.hdbscan import core_distances

import oracles


def drivers(tree_factory):
    yield "naive", emst_naive(tree_factory())
    yield "gfk", gfk(wspd(tree_factory()))
    yield "memogfk", memogfk(tree_factory())


@pytest.mark.parametrize("gen,n,d", [
    (gio.gen_uniform, 300, 2),
    (gio.gen_uniform, 150, 5),
    (gio.gen_varden, 300, 3),
])
def test_total_weight_matches_prim(gen, n, d):
    pts = gen(n, d, 9).points
    want = oracles.prim_weight(pts, np.zeros(n))
    for name, forest in drivers(lambda: build_kdtree(pts)):
        assert forest.total_weight == pytest.approx(want, rel=1e-9), name


def test_drivers_agree_edge_for_edge_on_generic_data():
    pts = gio.gen_uniform(500, 3, 2).points
    results = [oracles.canon_edges(f)
               for _, f in drivers(lambda: build_kdtree(pts))]
    for pair_ids, weights in results[1:]:
        assert np.array_equal(pair_ids, results[0][0])
        assert np.array_equal(weights, results[0][1])


def test_forest_shape_and_spanning():
    tree = build_kdtree(gio.gen_uniform(200, 2, 3).points)
    forest = memogfk(tree)
    u, v, w = forest.edge_arrays()
    assert len(forest) == 199
    assert forest.is_spanning
    uf = UnionFind(200)
    for a, b in zip(u.tolist(), v.tolist()):
        assert uf.union(int(a), int(b))  # acyclic: every union merges


def test_acceptance_order_is_lexicographic():
    tree = build_kdtree(gio.gen_uniform(300, 3, 4).points)
    forest = memogfk(tree)
    u, v, w = forest.edge_arrays()
    keys = list(zip(w.tolist(), np.minimum(u, v).tolist(),
                    np.maximum(u, v).tolist()))
    assert keys == sorted(keys)


def test_single_point_and_pair():
    single = memogfk(build_kdtree(np.zeros((1, 2))))
    assert len(single) == 0 and single.is_spanning
    two = memogfk(build_kdtree(np.array([[0.0, 0.0], [3.0, 4.0]])))
    u, v, w = two.edge_arrays()
    assert w.tolist() == [5.0]


def test_bccp_matches_brute_force():
    pts = gio.gen_uniform(200, 3, 5).points
    tree = build_kdtree(pts)
    rng = np.random.Generator(np.random.Philox(1))
    for _ in range(50):
        a = tree.node(int(rng.integers(tree.n_nodes)))
        b = tree.node(int(rng.integers(tree.n_nodes)))
        if np.intersect1d(a.point_ids, b.point_ids).size:
            continue
        edge = bccp(a, b)
        w, lo, hi = oracles.brute_cross_pair(pts, a.point_ids, b.point_ids)
        assert (edge.weight, min(edge.u, edge.v), max(edge.u, edge.v)) \
            == (w, lo, hi)


def test_bccp_star_matches_brute_force():
    pts = gio.gen_varden(200, 2, 7).points
    tree = build_kdtree(pts)
    core = core_distances(tree, 10)
    rng = np.random.Generator(np.random.Philox(2))
    for _ in range(50):
        a = tree.node(int(rng.integers(tree.n_nodes)))
        b = tree.node(int(rng.integers(tree.n_nodes)))
        if np.intersect1d(a.point_ids, b.point_ids).size:
            continue
        edge = bccp_star(a, b, core)
        w, lo, hi = oracles.brute_cross_pair(pts, a.point_ids, b.point_ids,
                                             cd=core.cd)
        assert (edge.weight, min(edge.u, edge.v), max(edge.u, edge.v)) \
            == (w, lo, hi)


def test_bccp_rejects_foreign_nodes():
    t1 = build_kdtree(gio.gen_uniform(10, 2, 0).points)
    t2 = build_kdtree(gio.gen_uniform(10, 2, 1).points)
    with pytest.raises(ValueError, match="same tree"):
        bccp(t1.root, t2.root)


def test_get_rho_is_a_safe_ceiling():
    """Every deferred pair's edge weighs at least the returned ceiling."""
    pts = gio.gen_uniform(200, 2, 8).points
    tree = build_kdtree(pts)
    uf = UnionFind(200)
    for beta in (2, 8, 32):
        rho = get_rho(tree, beta, uf)
        pairs = wspd(build_kdtree(pts))
        sizes = tree.node_sizes
        for a, b, in zip(pairs.a_ids.tolist(), pairs.b_ids.tolist()):
            if sizes[a] + sizes[b] > beta:
                edge = bccp(tree.node(a), tree.node(b))
                assert edge.weight >= rho - 1e-12


def test_get_pairs_matches_filtered_enumeration():
    pts = gio.gen_uniform(150, 3, 9).points
    tree = build_kdtree(pts)
    uf = UnionFind(150)
    beta = 8
    rho_hi = get_rho(tree, beta, uf)
    got = get_pairs(tree, beta, 0.0, rho_hi, uf)
    # oracle: full decomposition, filter by cardinality and window
    full = wspd(build_kdtree(pts))
    sizes = tree.node_sizes
    want = set()
    for a, b in zip(full.a_ids.tolist(), full.b_ids.tolist()):
        if sizes[a] + sizes[b] > beta:
            continue
        edge = bccp(tree.node(a), tree.node(b))
        if 0.0 <= edge.weight < rho_hi:
            want.add((a, b))
    assert set(zip(got.a_ids.tolist(), got.b_ids.tolist())) == want
    for pair in got:
        assert pair.cached_edge is not None
        a, b = pair.a, pair.b
        assert pair.cached_edge[2] == bccp(a, b).weight


def test_get_pairs_window_validation():
    tree = build_kdtree(gio.gen_uniform(20, 2, 0).points)
    with pytest.raises(ValueError, match="rho_lo exceeds rho_hi"):
        get_pairs(tree, 4, 2.0, 1.0, UnionFind(20))


def test_gfk_cache_reuse_is_exact():
    pts = gio.gen_uniform(400, 3, 10).points
    cache = BccpCache()
    first = gfk(wspd(build_kdtree(pts)), cache=cache)
    assert len(cache) > 0
    second = gfk(wspd(build_kdtree(pts)), cache=cache)
    ids1, w1 = oracles.canon_edges(first)
    ids2, w2 = oracles.canon_edges(second)
    assert np.array_equal(ids1, ids2) and np.array_equal(w1, w2)


def test_driver_stats_accounting():
    pts = gio.gen_uniform(600, 3, 11).points
    naive = emst_naive(build_kdtree(pts))
    pairs = wspd(build_kdtree(pts))
    batched = gfk(pairs)
    windowed = memogfk(build_kdtree(pts))
    assert naive.stats["pairs_total"] == len(pairs)
    assert batched.stats["pairs_total"] == len(pairs)
    assert batched.stats["rounds"] >= 1
    assert batched.stats["filtered_without_bccp"] > 0
    assert windowed.stats["pairs_peak"] <= windowed.stats["pairs_total"]
    assert windowed.stats["pairs_peak"] < len(pairs)
    for forest in (naive, batched, windowed):
        assert set(forest.stats["phase_seconds"]) == {"wspd", "kruskal"}


def test_metric_requires_matching_annotation():
    tree = build_kdtree(gio.gen_uniform(100, 2, 12).points)
    with pytest.raises(ValueError, match="core distances missing"):
        memogfk(tree, metric="mutual-reachability")
    core = core_distances(tree, 5)
    core_distances(tree, 7)  # stale: annotation now belongs to minpts=7
    with pytest.raises(ValueError, match="different minpts"):
        memogfk(tree, metric="mutual-reachability", core=core)
    with pytest.raises(ValueError, match="unknown metric"):
        memogfk(tree, metric="manhattan")


def test_kruskal_batch_tiebreak():
    uf = UnionFind(4)
    out = SpanningForest(4)
    eu = np.array([2, 0, 1], np.int64)
    ev = np.array([3, 1, 2], np.int64)
    ew = np.array([1.0, 1.0, 1.0])
    kruskal_batch((eu, ev, ew), uf, out)
    u, v, w = out.edge_arrays()
    assert np.minimum(u, v).tolist() == [0, 1, 2]
    assert np.maximum(u, v).tolist() == [1, 2, 3]
