import numpy as np
import pytest

from geomst import build_kdtree
from geomst.cli import RunConfig, main
from geomst.dendrogram import cut, dendrogram_parallel
from geomst.hdbscan import hdbscan_mst
from geomst import io as gio


def mst_total(path):
    with open(path) as f:
        return sum(float(line.split()[2]) for line in f)


def test_emst_writes_spanning_tree(tmp_path):
    out = tmp_path / "run"
    assert main(["emst", "--gen", "uniform:1000:2:seed=1",
                 "--out", str(out)]) == 0
    with open(f"{out}.mst") as f:
        assert sum(1 for _ in f) == 999


def test_algorithms_agree_on_weight(tmp_path):
    totals = []
    for algo in ("naive", "gfk", "memogfk"):
        out = tmp_path / algo
        assert main(["emst", "--gen", "uniform:5000:2:seed=3",
                     "--algo", algo, "--out", str(out)]) == 0
        totals.append(mst_total(f"{out}.mst"))
    assert totals[0] == pytest.approx(totals[1], rel=1e-9)
    assert totals[0] == pytest.approx(totals[2], rel=1e-9)


def test_hdbscan_outputs_and_cut(tmp_path):
    out = tmp_path / "h"
    assert main(["hdbscan", "--gen", "varden:500:3:seed=2",
                 "--minpts", "10", "--epsilon", "2.5",
                 "--out", str(out)]) == 0
    for ext in (".mst", ".dendro", ".reach", ".clusters"):
        assert (tmp_path / f"h{ext}").exists()
    # the clustering file reproduces the library cut
    forest = hdbscan_mst(build_kdtree(gio.gen_varden(500, 3, 2).points), 10)
    labels = cut(dendrogram_parallel(forest, 0), forest.core, 2.5).labels
    assert np.array_equal(gio.read_clustering(f"{out}.clusters"), labels)


def test_hdbscan_minpts_one_equals_emst(tmp_path):
    assert main(["hdbscan", "--gen", "uniform:400:2:seed=4", "--minpts", "1",
                 "--out", str(tmp_path / "h")]) == 0
    assert main(["emst", "--gen", "uniform:400:2:seed=4",
                 "--out", str(tmp_path / "e")]) == 0
    h = (tmp_path / "h.mst").read_bytes()
    e = (tmp_path / "e.mst").read_bytes()
    assert h == e


def test_single_linkage_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["single-linkage", "--gen", "uniform:300:2:seed=5",
                 "--out", str(out)]) == 0
    assert (tmp_path / "s.mst").exists()
    dendro = gio.read_dendrogram(f"{out}.dendro")
    assert dendro.n == 300
    assert not (tmp_path / "s.reach").exists()


def test_file_input_equals_generator(tmp_path):
    ds = gio.gen_uniform(200, 2, 9)
    gio.write_points(tmp_path / "pts.csv", ds)
    assert main(["emst", "--input", str(tmp_path / "pts.csv"),
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["emst", "--gen", "uniform:200:2:seed=9",
                 "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.mst").read_bytes() == (tmp_path / "b.mst").read_bytes()


def test_bench_table_shape(capsys):
    assert main(["bench", "--gen", "uniform:1500:2:seed=1",
                 "--threads", "1,4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "phase\twall_seconds\tthreads\tpairs"
    rows = [line.split("\t") for line in lines[1:]]
    assert len(rows) == 10
    phases = ["tree-build", "core-dist", "wspd", "kruskal", "dendrogram"]
    assert [r[0] for r in rows[:5]] == phases
    assert [r[0] for r in rows[5:]] == phases
    assert sorted({r[2] for r in rows}) == ["1", "4"]
    assert all(float(r[1]) >= 0.0 for r in rows)
    assert all(int(r[3]) > 0 for r in rows)
    assert float(rows[1][1]) == 0.0  # no core-distance phase for emst


def test_bench_density_pipeline_counts(capsys):
    assert main(["bench", "--gen", "varden:2000:3:seed=1", "--algo", "gantao",
                 "--threads", "1"]) == 0
    baseline = capsys.readouterr().out.strip().splitlines()
    assert main(["bench", "--gen", "varden:2000:3:seed=1",
                 "--algo", "memogfk", "--minpts", "10",
                 "--threads", "1"]) == 0
    improved = capsys.readouterr().out.strip().splitlines()
    assert float(baseline[2].split("\t")[1]) > 0.0  # core-dist phase timed
    pairs_baseline = int(baseline[1].split("\t")[3])
    pairs_improved = int(improved[1].split("\t")[3])
    assert pairs_improved < pairs_baseline


def test_bench_memogfk_materializes_fewer_pairs_than_naive(capsys):
    assert main(["bench", "--gen", "varden:2000:3:seed=1", "--algo", "naive",
                 "--threads", "1"]) == 0
    naive = int(capsys.readouterr().out.strip().splitlines()[1].split("\t")[3])
    assert main(["bench", "--gen", "varden:2000:3:seed=1",
                 "--algo", "memogfk", "--threads", "1"]) == 0
    memo = int(capsys.readouterr().out.strip().splitlines()[1].split("\t")[3])
    assert memo < naive


@pytest.mark.parametrize("argv", [
    ["emst", "--out", "x"],                                    # no input
    ["emst", "--gen", "uniform:10:2", "--input", "p", "--out", "x"],
    ["emst", "--gen", "bogus:10:2", "--out", "x"],
    ["emst", "--gen", "uniform:10", "--out", "x"],
    ["emst", "--gen", "uniform:ten:2", "--out", "x"],
    ["emst", "--gen", "uniform:10:2:speed=1", "--out", "x"],
    ["emst", "--gen", "uniform:10:2:clusters=3", "--out", "x"],
    ["emst", "--gen", "uniform:10:2"],                         # no --out
    ["emst", "--gen", "uniform:10:2", "--threads", "1,4", "--out", "x"],
    ["emst", "--gen", "uniform:10:2", "--threads", "zero", "--out", "x"],
    ["emst", "--gen", "uniform:10:2", "--epsilon", "1", "--out", "x"],
    ["emst", "--gen", "uniform:10:2", "--algo", "gantao", "--out", "x"],
    ["hdbscan", "--gen", "uniform:10:2", "--minpts", "0", "--out", "x"],
    ["hdbscan", "--gen", "uniform:10:2", "--epsilon", "-1", "--out", "x"],
    ["hdbscan", "--gen", "uniform:10:2", "--algo", "naive", "--out", "x"],
    ["bench", "--gen", "uniform:10:2", "--algo", "naive", "--minpts", "5"],
    ["unknown-command"],
])
def test_usage_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_errors_exit_one(tmp_path, capsys):
    missing = str(tmp_path / "nope.csv")
    assert main(["emst", "--input", missing,
                 "--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["hdbscan", "--gen", "uniform:10:2", "--minpts", "50",
                 "--out", str(tmp_path / "x")]) == 1
    assert main(["single-linkage", "--gen", "uniform:10:2", "--start", "99",
                 "--out", str(tmp_path / "x")]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "usage" in capsys.readouterr().out


def test_gen_spec_seed_flag_interplay(tmp_path):
    # inline seed wins over --seed; --seed fills in when absent
    assert main(["emst", "--gen", "uniform:100:2:seed=3", "--seed", "8",
                 "--out", str(tmp_path / "inline")]) == 0
    assert main(["emst", "--gen", "uniform:100:2", "--seed", "3",
                 "--out", str(tmp_path / "flag")]) == 0
    assert ((tmp_path / "inline.mst").read_bytes()
            == (tmp_path / "flag.mst").read_bytes())


def test_env_threads_honored_flag_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOMST_THREADS", "2")
    out1 = tmp_path / "env"
    assert main(["emst", "--gen", "uniform:200:2:seed=1",
                 "--out", str(out1)]) == 0
    monkeypatch.setenv("GEOMST_THREADS", "bogus-value")
    assert main(["emst", "--gen", "uniform:200:2:seed=1",
                 "--threads", "2", "--out", str(tmp_path / "flag")]) == 0
    assert ((tmp_path / "env.mst").read_bytes()
            == (tmp_path / "flag.mst").read_bytes())


def test_runconfig_validation():
    with pytest.raises(ValueError, match="minpts"):
        RunConfig(command="hdbscan", gen="uniform:10:2", minpts=0)
    with pytest.raises(ValueError, match="epsilon"):
        RunConfig(command="hdbscan", gen="uniform:10:2", epsilon=-2.0)
    with pytest.raises(ValueError, match="thread"):
        RunConfig(command="emst", gen="uniform:10:2", threads=(0,))
