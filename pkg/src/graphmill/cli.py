"""Command line entry point.

Five subcommands: `gen-graph` writes a synthetic edge list, `generate`
dumps sampled subgraphs, `train` runs the threaded cluster, `verify` runs
the oracle gates, and `bench` produces the scaling CSVs. One `--rng-seed`
feeds every random decision; per-purpose seeds are derived from it, so a
whole experiment reproduces from the command line alone.

Exit codes: 0 success, 1 verification mismatch, 2 usage or configuration
error, 3 runtime fault.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import warnings

from .bench import (
    GEN_FIELDS,
    KERNEL_FIELDS,
    REDUCE_FIELDS,
    bench_generation,
    bench_kernels,
    bench_reduction,
    flag_regressions,
    write_csv,
)
from .errors import ConfigError, GraphMillError
from .features import make_provider
from .graph import Graph, load_edge_list
from .learn import TrainConfig
from .reduction import HotNodePolicy
from .rng import SplitMix64, stream_seed
from .runtime import ClusterConfig, PipelineConfig, spawn_cluster
from .sampling import FanoutConfig, SamplePlan, generate_for_worker, write_dump
from .scheduler import SeedSet, build_balance_table, load_seed_file
from .synth import SynthSpec, degree_summary, synth_edges, synth_graph, write_edges
from .verify import run_verify

# sub-seed derivation tags, one per consumer of --rng-seed
_TAG_SEEDSET = 0x53454544
_TAG_FEATURES = 0x46454154
_TAG_MODEL = 0x4D4F444C

_DESK_NODES = 5000
_DESK_EDGES = 50_000


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _sample_seeds(g: Graph, rng_seed: int, count: int) -> SeedSet:
    """Uniform sample of `count` distinct nodes via a seeded shuffle."""
    if not 1 <= count <= g.num_nodes:
        raise ConfigError(f"seed count {count} out of range [1, {g.num_nodes}]")
    order = list(range(g.num_nodes))
    rng = SplitMix64(stream_seed(rng_seed, _TAG_SEEDSET))
    for i in range(g.num_nodes - 1, 0, -1):
        j = rng.next_below(i + 1)
        order[i], order[j] = order[j], order[i]
    return SeedSet(tuple(sorted(order[:count])),
                   rng_seed=stream_seed(rng_seed, _TAG_SEEDSET, 1))


def default_seed_set(g: Graph, rng_seed: int) -> SeedSet:
    """The documented default: 10% of nodes, at least one."""
    return _sample_seeds(g, rng_seed, max(1, g.num_nodes // 10))


def _resolve_graph(args) -> Graph:
    if getattr(args, "graph", None):
        if not os.path.exists(args.graph):
            raise ConfigError(f"graph file {args.graph!r} does not exist")
        return load_edge_list(args.graph)
    print(f"no --graph given; synthesizing {args.nodes} nodes / {args.edges} edges "
          f"({args.model})")
    return synth_graph(SynthSpec(args.nodes, args.edges, args.model, args.rng_seed))


def _resolve_seeds(args, g: Graph) -> SeedSet:
    if getattr(args, "seeds", None):
        if not os.path.exists(args.seeds):
            raise ConfigError(f"seed file {args.seeds!r} does not exist")
        listed = load_seed_file(args.seeds)
        return SeedSet(tuple(listed), rng_seed=stream_seed(args.rng_seed, _TAG_SEEDSET, 1))
    if getattr(args, "num_seeds", None):
        return _sample_seeds(g, args.rng_seed, args.num_seeds)
    return default_seed_set(g, args.rng_seed)


def _cluster_config(args) -> ClusterConfig:
    return ClusterConfig(
        fanouts=FanoutConfig(args.fanouts),
        plan=SamplePlan(base_rng_seed=args.rng_seed),
        train=TrainConfig(
            max_epochs=args.epochs,
            learning_rate=args.lr,
            loss_threshold=args.loss_threshold,
            num_classes=args.classes,
            feature_dim=args.feature_dim,
            hidden=args.hidden,
        ),
        pipeline=PipelineConfig(
            queue_capacity=args.queue_capacity,
            mode=args.mode,
            regen_per_epoch=args.regen_per_epoch,
            timeout_s=args.timeout_s,
        ),
        hot_policy=HotNodePolicy(degree_threshold=args.hot_threshold),
        provider_kind=args.provider,
        feature_rng_seed=stream_seed(args.rng_seed, _TAG_FEATURES),
        model_rng_seed=stream_seed(args.rng_seed, _TAG_MODEL),
        tree_arity=args.tree_arity,
        topology=args.topology,
        kernel=None if args.kernel == "auto" else args.kernel,
    )


# ------------------------------------------------------------- subcommands


def cmd_gen_graph(args) -> int:
    spec = SynthSpec(args.nodes, args.edges, args.model, args.rng_seed,
                     exponent=args.exponent)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pairs = synth_edges(spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_edges(args.out, pairs)
    g = load_edge_list(args.out)
    stats = degree_summary(g)
    print(f"wrote {args.out}: {g.num_nodes} nodes, {pairs.shape[0]} edges "
          f"({g.num_edges} arcs), mean degree {stats['mean_degree']:.1f}, "
          f"max {stats['max_degree']} ({stats['max_over_mean']:.0f}x mean)")
    return 0


def cmd_generate(args) -> int:
    g = _resolve_graph(args)
    ss = _resolve_seeds(args, g)
    table = build_balance_table(ss, args.workers)
    provider = make_provider(args.provider, stream_seed(args.rng_seed, _TAG_FEATURES),
                             args.feature_dim, args.classes)
    cfg = FanoutConfig(args.fanouts)
    plan = SamplePlan(base_rng_seed=args.rng_seed)
    kernel = None if args.kernel == "auto" else args.kernel

    class _Collect:
        def __init__(self):
            self.items = []

        def put(self, sg):
            self.items.append(sg)

    sink = _Collect()
    for w in range(args.workers):
        generate_for_worker(g, table, w, cfg, plan, provider, sink, kernel)
    if args.dump:
        write_dump(sink.items, args.dump)
        print(f"dumped {len(sink.items)} subgraphs to {args.dump}")
    nodes = sum(sg.num_nodes for sg in sink.items)
    edges = sum(sg.num_edges for sg in sink.items)
    print(f"generated {len(sink.items)} subgraphs over {args.workers} workers "
          f"({len(table.discarded)} seeds discarded for balance): "
          f"{nodes} nodes, {edges} edges")
    return 0


def cmd_train(args) -> int:
    g = _resolve_graph(args)
    ss = _resolve_seeds(args, g)
    table = build_balance_table(ss, args.workers)
    cluster = spawn_cluster(g, table, _cluster_config(args))
    report = cluster.run()
    cluster.audit_exactly_once()
    for epoch, loss in enumerate(report.epochs):
        print(f"epoch {epoch}: mean loss {loss:.6f}")
    print(f"trained {report.totals['trained']} steps on "
          f"{report.totals['generated']} subgraphs in {report.wall_s['run']:.2f}s")
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"metrics written to {args.metrics}")
    return 0


def cmd_verify(args) -> int:
    g = _resolve_graph(args)
    ss = _resolve_seeds(args, g)
    cfg = _cluster_config(args)
    if args.corrupt_seed is not None:
        if args.corrupt_seed not in ss.seeds:
            raise ConfigError(
                f"--corrupt-seed {args.corrupt_seed} is not in the seed set "
                f"(try one of {list(ss.seeds[:5])})"
            )
        cfg = dataclasses.replace(
            cfg, plan=SamplePlan(base_rng_seed=args.rng_seed,
                                 corrupt_seed=args.corrupt_seed))
    report = run_verify(g, ss, cfg, worker_counts=args.worker_counts,
                        reduction_trials=args.reduction_trials)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def cmd_bench(args) -> int:
    g = _resolve_graph(args)
    ss = _resolve_seeds(args, g)
    provider = make_provider(args.provider, stream_seed(args.rng_seed, _TAG_FEATURES),
                             args.feature_dim, args.classes)
    cfg = FanoutConfig(args.fanouts)
    plan = SamplePlan(base_rng_seed=args.rng_seed)
    kernel = None if args.kernel == "auto" else args.kernel
    os.makedirs(args.out_dir, exist_ok=True)

    rows = bench_generation(g, ss, cfg, plan, provider,
                            worker_counts=args.worker_counts, kernel=kernel)
    gen_csv = os.path.join(args.out_dir, "gen_scaling.csv")
    write_csv(gen_csv, GEN_FIELDS, rows)
    for r in rows:
        print(f"workers={r.workers}: {r.subgraphs} subgraphs, "
              f"{r.subgraphs_per_s:.1f}/s, {r.nodes_per_s:.0f} nodes/s, "
              f"speedup {r.speedup:.2f}x")
    for note in flag_regressions(rows):
        print(f"regression: {note}")

    red_csv = os.path.join(args.out_dir, "reduction_sweep.csv")
    write_csv(red_csv, REDUCE_FIELDS,
              bench_reduction(args.reduction_workers, args.arities,
                              rng_seed=args.rng_seed))

    k_csv = os.path.join(args.out_dir, "kernels.csv")
    k_rows = bench_kernels(g, ss, cfg, plan, provider)
    write_csv(k_csv, KERNEL_FIELDS, k_rows)
    for row in k_rows:
        print(f"kernel {row['kernel']}: {row['subgraphs_per_s']} subgraphs/s")

    print(f"CSV written to {gen_csv}, {red_csv}, {k_csv}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphmill",
        description="Distributed subgraph generation and GCN training, desk scale.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--rng-seed", type=int, default=0,
                       help="master seed; every random choice derives from it")

    def add_graph_source(p):
        p.add_argument("--graph", default=None,
                       help="edge-list file; omit to synthesize one")
        p.add_argument("--nodes", type=int, default=_DESK_NODES,
                       help="node count for the synthesized graph")
        p.add_argument("--edges", type=int, default=_DESK_EDGES,
                       help="edge count for the synthesized graph")
        p.add_argument("--model", choices=("uniform", "powerlaw"), default="uniform",
                       help="edge model for the synthesized graph")

    def add_seed_source(p):
        p.add_argument("--seeds", default=None,
                       help="seed-node file, one id per line; omit to sample 10%% of nodes")
        p.add_argument("--num-seeds", type=int, default=None,
                       help="truncate or extend the sampled seed set to this count")

    def add_sampling(p):
        p.add_argument("--fanouts", type=_int_list, default=(40, 20),
                       help="per-hop neighbor caps, comma separated")
        p.add_argument("--kernel", choices=("auto", "compiled", "pure"), default="auto",
                       help="expansion kernel; auto prefers the compiled extension")
        p.add_argument("--provider", choices=("hash", "linear"), default="hash",
                       help="feature/label source (linear is the recoverable task)")
        p.add_argument("--feature-dim", type=int, default=16,
                       help="feature vector width")
        p.add_argument("--classes", type=int, default=4,
                       help="label classes")

    def add_training(p, epochs_default=50):
        p.add_argument("--workers", type=int, default=4, help="worker count")
        p.add_argument("--epochs", type=int, default=epochs_default,
                       help="training epochs")
        p.add_argument("--lr", type=float, default=0.01, help="SGD learning rate")
        p.add_argument("--hidden", type=int, default=32, help="hidden layer width")
        p.add_argument("--loss-threshold", type=float, default=0.0,
                       help="stop early when the epoch mean loss drops below this")
        p.add_argument("--mode", choices=("pipelined", "staged"), default="pipelined",
                       help="overlap generation with training, or stage them")
        p.add_argument("--queue-capacity", type=int, default=64,
                       help="per-worker subgraph queue bound")
        p.add_argument("--regen-per-epoch", action="store_true", default=False,
                       help="regenerate subgraphs every epoch instead of replaying")
        p.add_argument("--hot-threshold", type=int, default=10_000,
                       help="degree at which a node counts as hot")
        p.add_argument("--tree-arity", type=int, default=2,
                       help="fan-in of the reduction tree")
        p.add_argument("--topology", choices=("ring", "tree"), default="ring",
                       help="allreduce transport")
        p.add_argument("--timeout-s", type=float, default=30.0,
                       help="collective timeout in seconds")

    p = sub.add_parser("gen-graph", help="write a synthetic edge list",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_common(p)
    p.add_argument("--nodes", type=int, default=_DESK_NODES, help="node count")
    p.add_argument("--edges", type=int, default=_DESK_EDGES, help="edge count")
    p.add_argument("--model", choices=("uniform", "powerlaw"), default="uniform",
                   help="edge model")
    p.add_argument("--exponent", type=float, default=0.75,
                   help="powerlaw weight exponent")
    p.add_argument("--out", required=True, help="output edge-list path")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("generate", help="sample subgraphs and dump them",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_common(p)
    add_graph_source(p)
    add_seed_source(p)
    add_sampling(p)
    p.add_argument("--workers", type=int, default=4, help="worker count")
    p.add_argument("--dump", default=None, help="write line-JSON subgraph records here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="run the threaded training cluster",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_common(p)
    add_graph_source(p)
    add_seed_source(p)
    add_sampling(p)
    add_training(p)
    p.add_argument("--metrics", default=None, help="write the metrics report JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the oracle equivalence gates",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_common(p)
    add_graph_source(p)
    add_seed_source(p)
    add_sampling(p)
    add_training(p, epochs_default=3)
    p.add_argument("--worker-counts", type=_int_list, default=(1, 2, 4),
                   help="worker counts the generation diff covers")
    p.add_argument("--reduction-trials", type=int, default=20,
                   help="random shard sets per (workers, arity) pair")
    p.add_argument("--corrupt-seed", type=int, default=None,
                   help="fault-injection hook: corrupt this seed's subgraph")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="measure scaling and write CSV reports",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    add_common(p)
    add_graph_source(p)
    add_seed_source(p)
    add_sampling(p)
    p.add_argument("--worker-counts", type=_int_list, default=(1, 2, 4, 8),
                   help="worker counts for the generation scaling rows")
    p.add_argument("--arities", type=_int_list, default=(2, 3, 4),
                   help="reduction tree arities to sweep")
    p.add_argument("--reduction-workers", type=int, default=32,
                   help="largest worker count in the reduction sweep")
    p.add_argument("--out-dir", default="bench_out", help="directory for the CSV files")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GraphMillError as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
