import numpy as np
import pytest

from geomst import build_kdtree, memogfk
from geomst.hdbscan import (CoreDistances, core_distances, hdbscan_mst,
                            hdbscan_mst_gantao)
from geomst import io as gio

import oracles


@pytest.mark.parametrize("minpts", [1, 2, 7, 40])
def test_core_distances_match_brute_force(minpts):
    pts = gio.gen_uniform(200, 3, minpts).points
    tree = build_kdtree(pts)
    core = core_distances(tree, minpts)
    want = oracles.brute_core(pts, minpts)
    assert np.allclose(core.cd, want, rtol=0, atol=1e-12)
    assert core.minpts == minpts
    assert len(core) == 200


def test_core_distance_edge_cases():
    pts = gio.gen_uniform(50, 2, 0).points
    tree = build_kdtree(pts)
    assert (core_distances(tree, 1).cd == 0.0).all()
    full = core_distances(tree, 50).cd
    assert np.allclose(full, oracles.sorted_distance_rows(pts)[:, -1])
    with pytest.raises(ValueError):
        core_distances(tree, 0)
    with pytest.raises(ValueError, match="exceeds"):
        core_distances(tree, 51)


def test_annotation_bounds_subtree_core_distances():
    pts = gio.gen_varden(300, 2, 1).points
    tree = build_kdtree(pts)
    core = core_distances(tree, 10)
    for i in range(tree.n_nodes):
        node = tree.node(i)
        sub = core.cd[node.point_ids]
        assert node.cd_min == sub.min()
        assert node.cd_max == sub.max()


@pytest.mark.parametrize("gen,n,d,minpts", [
    (gio.gen_uniform, 250, 2, 10),
    (gio.gen_uniform, 150, 5, 3),
    (gio.gen_varden, 250, 3, 10),
])
def test_pipelines_match_brute_prim(gen, n, d, minpts):
    pts = gen(n, d, 13).points
    cd = oracles.brute_core(pts, minpts)
    want = oracles.prim_weight(pts, cd)
    improved = hdbscan_mst(build_kdtree(pts), minpts)
    baseline = hdbscan_mst_gantao(build_kdtree(pts), minpts)
    assert improved.total_weight == pytest.approx(want, rel=1e-9)
    assert baseline.total_weight == pytest.approx(want, rel=1e-9)


def test_edge_weights_obey_reachability_formula():
    """Every MST edge weighs max(distance, cd(u), cd(v)) exactly."""
    pts = gio.gen_varden(400, 3, 3).points
    forest = hdbscan_mst(build_kdtree(pts), 10)
    cd = oracles.brute_core(pts, 10)
    u, v, w = forest.edge_arrays()
    for a, b, weight in zip(u.tolist(), v.tolist(), w.tolist()):
        dist = float(np.sqrt(((pts[a] - pts[b]) ** 2).sum()))
        assert weight == max(dist, cd[a], cd[b])


def test_total_weight_monotone_in_minpts():
    pts = gio.gen_uniform(300, 2, 4).points
    weights = []
    for minpts in (1, 2, 5, 10, 50):
        weights.append(hdbscan_mst(build_kdtree(pts), minpts).total_weight)
    assert weights == sorted(weights)


def test_minpts_one_reduces_to_emst_exactly():
    for seed in (0, 1, 2):
        pts = gio.gen_uniform(400, 3, seed).points
        plain = memogfk(build_kdtree(pts))
        density = hdbscan_mst(build_kdtree(pts), 1)
        assert plain.total_weight == density.total_weight
        ids1, w1 = oracles.canon_edges(plain)
        ids2, w2 = oracles.canon_edges(density)
        assert np.array_equal(ids1, ids2) and np.array_equal(w1, w2)


def test_pipelines_attach_core_distances():
    tree = build_kdtree(gio.gen_uniform(100, 2, 5).points)
    forest = hdbscan_mst(tree, 10)
    assert isinstance(forest.core, CoreDistances)
    assert forest.core.minpts == 10


def test_improved_pipeline_explores_fewer_pairs():
    pts = gio.gen_varden(3000, 3, 1).points
    improved = hdbscan_mst(build_kdtree(pts), 10)
    baseline = hdbscan_mst_gantao(build_kdtree(pts), 10)
    assert improved.stats["pairs_total"] < baseline.stats["pairs_total"]
    # identical weight regardless of the decomposition
    assert improved.total_weight == pytest.approx(baseline.total_weight,
                                                  rel=1e-12)


def test_core_distances_validation():
    with pytest.raises(ValueError, match="positive"):
        CoreDistances(cd=np.zeros(3), minpts=0)
    with pytest.raises(ValueError, match="nonnegative"):
        CoreDistances(cd=np.array([-1.0]), minpts=1)
