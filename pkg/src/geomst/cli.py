"""Command-line front end for the clustering pipelines.

Subcommands compose the library drivers. ``emst`` writes a Euclidean
minimum spanning tree, ``single-linkage`` adds the ordered dendrogram
over it, ``hdbscan`` runs the density pipeline (mutual-reachability
MST, ordered dendrogram, reachability plot, and a flat cut when an
epsilon is given), and ``bench`` prints a phase-timing table to
standard output instead of writing files.

Every output file is deterministic: rerunning with a different
``--threads`` value changes timings only, never a single output byte.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from . import io as _io
from ._threads import set_threads
from .dendrogram import cut, dendrogram_parallel, reachability_plot
from .hdbscan import core_distances, hdbscan_mst, hdbscan_mst_gantao
from .kdtree import build_kdtree
from .mst import emst_naive, gfk, memogfk
from .wspd import SeparationPredicate, wspd

_EMST_ALGOS = ("naive", "gfk", "memogfk")
_HDBSCAN_ALGOS = ("memogfk", "gantao")
_PHASES = ("tree-build", "core-dist", "wspd", "kruskal", "dendrogram")


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved command invocation."""

    command: str
    input: Optional[str] = None
    gen: Optional[str] = None
    out: Optional[str] = None
    minpts: Optional[int] = None
    epsilon: Optional[float] = None
    algo: str = "memogfk"
    start: int = 0
    threads: tuple = (1,)
    seed: int = 0

    def __post_init__(self):
        if self.minpts is not None and self.minpts < 1:
            raise ValueError("minpts must be a positive integer")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.threads or any(t < 1 for t in self.threads):
            raise ValueError("thread counts must be positive integers")


def _parse_gen_spec(spec: str, default_seed: int):
    """Split ``kind:n:d`` with optional ``seed=S`` and ``clusters=K``."""
    parts = spec.split(":")
    if len(parts) < 3:
        raise ValueError(
            f"bad --gen spec {spec!r}: want kind:n:d[:seed=S][:clusters=K]")
    kind = parts[0]
    if kind not in ("uniform", "varden"):
        raise ValueError(f"unknown generator {kind!r}: want uniform or varden")
    try:
        n = int(parts[1])
        d = int(parts[2])
    except ValueError:
        raise ValueError(
            f"bad --gen spec {spec!r}: n and d must be integers") from None
    seed = default_seed
    clusters = 10
    saw_clusters = False
    for tok in parts[3:]:
        key, eq, val = tok.partition("=")
        try:
            if key == "seed" and eq:
                seed = int(val)
            elif key == "clusters" and eq:
                clusters = int(val)
                saw_clusters = True
            else:
                raise ValueError
        except ValueError:
            raise ValueError(
                f"bad --gen field {tok!r}: want seed=S or clusters=K"
            ) from None
    if saw_clusters and kind != "varden":
        raise ValueError("clusters= is only valid for the varden generator")
    return kind, n, d, seed, clusters


def _load_dataset(config: RunConfig) -> _io.Dataset:
    if config.input is not None:
        return _io.read_points(config.input)
    kind, n, d, seed, clusters = _parse_gen_spec(config.gen, config.seed)
    if kind == "uniform":
        return _io.gen_uniform(n, d, seed)
    return _io.gen_varden(n, d, seed, clusters)


def _emst_forest(tree, algo: str):
    if algo == "naive":
        return emst_naive(tree)
    if algo == "gfk":
        return gfk(wspd(tree))
    return memogfk(tree)


def _ensure_parent(prefix: str) -> None:
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def run(config: RunConfig) -> int:
    """Execute one command; returns 0 iff every requested output exists."""
    set_threads(config.threads[0])
    if config.command == "bench":
        return bench(config)
    ds = _load_dataset(config)
    tree = build_kdtree(ds.points)
    _ensure_parent(config.out)
    if config.command == "emst":
        forest = _emst_forest(tree, config.algo)
        _io.write_mst(config.out + ".mst", forest)
        return 0
    if config.command == "single-linkage":
        forest = _emst_forest(tree, config.algo)
        dendro = dendrogram_parallel(forest, config.start)
        _io.write_mst(config.out + ".mst", forest)
        _io.write_dendrogram(config.out + ".dendro", dendro)
        return 0
    if config.command == "hdbscan":
        make = hdbscan_mst if config.algo == "memogfk" else hdbscan_mst_gantao
        forest = make(tree, config.minpts)
        dendro = dendrogram_parallel(forest, config.start)
        _io.write_mst(config.out + ".mst", forest)
        _io.write_dendrogram(config.out + ".dendro", dendro)
        _io.write_reachability(config.out + ".reach",
                               reachability_plot(dendro))
        if config.epsilon is not None:
            _io.write_clustering(config.out + ".clusters",
                                 cut(dendro, forest.core, config.epsilon))
        return 0
    raise ValueError(f"unknown command {config.command!r}")


def _timed_pipeline(ds, algo: str, minpts: Optional[int], start: int):
    """Run one full pipeline, returning per-phase seconds and pair peak."""
    t0 = time.perf_counter()
    tree = build_kdtree(ds.points)
    t1 = time.perf_counter()
    phase = {"tree-build": t1 - t0, "core-dist": 0.0}
    core = None
    if minpts is not None:
        core = core_distances(tree, minpts)
        phase["core-dist"] = time.perf_counter() - t1
    if algo == "naive":
        forest = emst_naive(tree)
        inner = forest.stats["phase_seconds"]
        phase["wspd"] = inner["wspd"]
        phase["kruskal"] = inner["kruskal"]
    elif algo == "gfk":
        tw = time.perf_counter()
        pairs = wspd(tree)
        materialize = time.perf_counter() - tw
        forest = gfk(pairs)
        inner = forest.stats["phase_seconds"]
        phase["wspd"] = materialize + inner["wspd"]
        phase["kruskal"] = inner["kruskal"]
    else:
        if minpts is None:
            forest = memogfk(tree)
        else:
            mode = "hdbscan" if algo == "memogfk" else "standard"
            forest = memogfk(tree, SeparationPredicate(mode=mode),
                             metric="mutual-reachability", core=core)
        inner = forest.stats["phase_seconds"]
        phase["wspd"] = inner["wspd"]
        phase["kruskal"] = inner["kruskal"]
    td = time.perf_counter()
    dendrogram_parallel(forest, start)
    phase["dendrogram"] = time.perf_counter() - td
    return phase, int(forest.stats["pairs_peak"])


def bench(config: RunConfig) -> int:
    """Print the TSV timing table, one block of phase rows per count."""
    ds = _load_dataset(config)
    minpts = config.minpts
    if config.algo == "gantao" and minpts is None:
        minpts = 10
    sys.stdout.write("phase\twall_seconds\tthreads\tpairs\n")
    for want in config.threads:
        applied = set_threads(want)
        phase, pairs_peak = _timed_pipeline(ds, config.algo, minpts,
                                            config.start)
        for name in _PHASES:
            sys.stdout.write(
                f"{name}\t{phase[name]:.6f}\t{applied}\t{pairs_peak}\n")
    return 0


def _add_common(p: argparse.ArgumentParser, with_out: bool = True,
                threads_list: bool = False) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH",
                     help="point file, one comma- or space-separated "
                          "coordinate row per point")
    src.add_argument("--gen", metavar="SPEC",
                     help="synthetic input, kind:n:d[:seed=S][:clusters=K] "
                          "with kind uniform or varden")
    p.add_argument("--seed", type=int, default=0,
                   help="generator seed when the --gen spec carries none "
                        "(default 0)")
    if threads_list:
        p.add_argument("--threads", metavar="N[,N...]",
                       help="comma-separated counts to benchmark; wins over "
                            "GEOMST_THREADS (default: all cores)")
    else:
        p.add_argument("--threads", metavar="N",
                       help="worker count; wins over the GEOMST_THREADS "
                            "environment variable (default: all cores)")
    if with_out:
        p.add_argument("--out", required=True, metavar="PREFIX",
                       help="output path prefix")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geomst",
        description="Parallel Euclidean MSTs and density-based hierarchies.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    p = sub.add_parser("emst",
                       help="Euclidean minimum spanning tree -> PREFIX.mst")
    _add_common(p)
    p.add_argument("--algo", choices=_EMST_ALGOS, default="memogfk",
                   help="MST driver (default memogfk)")

    p = sub.add_parser("single-linkage",
                       help="EMST plus ordered dendrogram -> "
                            "PREFIX.mst PREFIX.dendro")
    _add_common(p)
    p.add_argument("--algo", choices=_EMST_ALGOS, default="memogfk",
                   help="MST driver (default memogfk)")
    p.add_argument("--start", type=int, default=0,
                   help="ordering start vertex (default 0)")

    p = sub.add_parser("hdbscan",
                       help="density hierarchy -> PREFIX.mst PREFIX.dendro "
                            "PREFIX.reach [PREFIX.clusters]")
    _add_common(p)
    p.add_argument("--algo", choices=_HDBSCAN_ALGOS, default="memogfk",
                   help="pair decomposition (default memogfk)")
    p.add_argument("--minpts", type=int, default=10,
                   help="density smoothing parameter (default 10)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="flat cut height; writes PREFIX.clusters")
    p.add_argument("--start", type=int, default=0,
                   help="reachability start vertex (default 0)")

    p = sub.add_parser("bench",
                       help="phase timing table (TSV) to standard output")
    _add_common(p, with_out=False, threads_list=True)
    p.add_argument("--algo", choices=_EMST_ALGOS + ("gantao",),
                   default="memogfk",
                   help="driver to time (default memogfk)")
    p.add_argument("--minpts", type=int, default=None,
                   help="time the density pipeline at this minpts "
                        "(gantao implies 10)")
    p.add_argument("--start", type=int, default=0,
                   help="dendrogram start vertex (default 0)")
    return parser


def _resolve_threads(parser, text: Optional[str], allow_list: bool) -> tuple:
    if text is None:
        text = os.environ.get("GEOMST_THREADS") or str(os.cpu_count() or 1)
    try:
        vals = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        parser.error(f"bad --threads value {text!r}")
    if not vals or any(v < 1 for v in vals):
        parser.error("--threads wants positive integers")
    if len(vals) > 1 and not allow_list:
        parser.error("a comma-separated --threads list is only valid "
                     "for bench")
    return vals


def _config_from_args(parser: argparse.ArgumentParser,
                      args: argparse.Namespace) -> RunConfig:
    threads = _resolve_threads(parser, args.threads,
                               allow_list=args.command == "bench")
    minpts = getattr(args, "minpts", None)
    if minpts is not None and minpts < 1:
        parser.error("--minpts must be a positive integer")
    epsilon = getattr(args, "epsilon", None)
    if epsilon is not None and epsilon < 0:
        parser.error("--epsilon must be nonnegative")
    if args.command == "bench" and minpts is not None \
            and args.algo in ("naive", "gfk"):
        parser.error(f"--minpts needs a mutual-reachability driver, "
                     f"not {args.algo}")
    if args.gen is not None:
        try:
            _parse_gen_spec(args.gen, args.seed)
        except ValueError as exc:
            parser.error(str(exc))
    return RunConfig(
        command=args.command,
        input=args.input,
        gen=args.gen,
        out=getattr(args, "out", None),
        minpts=minpts,
        epsilon=epsilon,
        algo=args.algo,
        start=getattr(args, "start", 0),
        threads=threads,
        seed=args.seed,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments and run; never raises, returns the exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(parser, args)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return run(config)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"geomst: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
