"""Benchmark harness: generation scaling, reduction sweep, kernel duel.

Three measurements, each dumped as CSV by the `bench` CLI subcommand:

* generation throughput across worker counts, with a speedup column
  against the single-worker baseline,
* tree reduction cost across (workers, arity) pairs,
* compiled extension kernel against the pure-Python twin on the same
  seed sweep.

Wall times move with the machine; subgraph and node counts are pure
functions of the rng seed and must not.
"""

from __future__ import annotations

import csv
import threading
import time
from dataclasses import dataclass

from .graph import Graph
from .kernels import available_kernels
from .reduction import NeighborShard, build_tree, tree_reduce
from .rng import SplitMix64, stream_seed
from .sampling import FanoutConfig, SamplePlan, generate_for_worker
from .scheduler import SeedSet, build_balance_table

GEN_FIELDS = ("workers", "subgraphs", "nodes", "wall_s",
              "subgraphs_per_s", "nodes_per_s", "speedup")
REDUCE_FIELDS = ("workers", "arity", "messages", "critical_path", "wall_time_us")
KERNEL_FIELDS = ("kernel", "subgraphs", "nodes", "wall_s", "subgraphs_per_s")


class _CountSink:
    """Swallows subgraphs, keeping only the totals the bench reports."""

    def __init__(self):
        self.subgraphs = 0
        self.nodes = 0

    def put(self, sg) -> None:
        self.subgraphs += 1
        self.nodes += sg.num_nodes


@dataclass
class GenRow:
    workers: int
    subgraphs: int
    nodes: int
    wall_s: float
    subgraphs_per_s: float
    nodes_per_s: float
    speedup: float = 1.0

    def as_csv(self) -> dict:
        return {
            "workers": self.workers,
            "subgraphs": self.subgraphs,
            "nodes": self.nodes,
            "wall_s": f"{self.wall_s:.6f}",
            "subgraphs_per_s": f"{self.subgraphs_per_s:.2f}",
            "nodes_per_s": f"{self.nodes_per_s:.2f}",
            "speedup": f"{self.speedup:.3f}",
        }


def bench_generation(
    g: Graph,
    seed_set: SeedSet,
    cfg: FanoutConfig,
    plan: SamplePlan,
    provider,
    worker_counts=(1, 2, 4, 8),
    kernel: str | None = None,
) -> list[GenRow]:
    """One row per worker count; workers are plain threads released
    together off a barrier, so the wall clock covers only expansion."""
    rows = []
    for count in worker_counts:
        table = build_balance_table(seed_set, count)
        sinks = [_CountSink() for _ in range(count)]
        barrier = threading.Barrier(count + 1)

        def body(w: int) -> None:
            barrier.wait()
            generate_for_worker(g, table, w, cfg, plan, provider, sinks[w], kernel)

        threads = [
            threading.Thread(target=body, args=(w,), name=f"bench-gen-{w}")
            for w in range(count)
        ]
        for t in threads:
            t.start()
        barrier.wait()
        t0 = time.perf_counter()
        for t in threads:
            t.join()
        wall = time.perf_counter() - t0

        subgraphs = sum(s.subgraphs for s in sinks)
        nodes = sum(s.nodes for s in sinks)
        rows.append(GenRow(
            workers=count,
            subgraphs=subgraphs,
            nodes=nodes,
            wall_s=wall,
            subgraphs_per_s=subgraphs / wall if wall > 0 else 0.0,
            nodes_per_s=nodes / wall if wall > 0 else 0.0,
        ))

    base = next((r for r in rows if r.workers == 1), rows[0])
    for r in rows:
        r.speedup = (r.subgraphs_per_s / base.subgraphs_per_s
                     if base.subgraphs_per_s > 0 else 0.0)
    return rows


def flag_regressions(rows: list[GenRow]) -> list[str]:
    """Human-readable notes for worker counts that got slower."""
    notes = []
    ordered = sorted(rows, key=lambda r: r.workers)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.subgraphs_per_s < prev.subgraphs_per_s:
            notes.append(
                f"throughput fell from {prev.subgraphs_per_s:.1f}/s at "
                f"{prev.workers} workers to {cur.subgraphs_per_s:.1f}/s at "
                f"{cur.workers} workers"
            )
    return notes


def bench_reduction(
    max_workers: int = 32,
    arities=(2, 3, 4),
    neighbors_per_shard: int = 64,
    rng_seed: int = 0,
) -> list[dict]:
    """Tree reduction cost per (workers, arity); wall time in microseconds."""
    rng = SplitMix64(stream_seed(rng_seed, 0x42454E43))
    rows = []
    for workers in range(1, max_workers + 1):
        shards = []
        for _ in range(workers):
            picks = sorted(set(
                rng.next_below(neighbors_per_shard * 8)
                for _ in range(neighbors_per_shard)
            ))
            shards.append(NeighborShard(0, tuple(picks)))
        for arity in arities:
            tree = build_tree(workers, arity)
            t0 = time.perf_counter()
            _, stats = tree_reduce(tree, shards)
            wall_us = (time.perf_counter() - t0) * 1e6
            rows.append({
                "workers": workers,
                "arity": arity,
                "messages": stats.messages,
                "critical_path": stats.critical_path,
                "wall_time_us": f"{wall_us:.1f}",
            })
    return rows


def bench_kernels(
    g: Graph,
    seed_set: SeedSet,
    cfg: FanoutConfig,
    plan: SamplePlan,
    provider,
) -> list[dict]:
    """Single-threaded seed sweep, once per importable kernel."""
    table = build_balance_table(seed_set, 1)
    rows = []
    for kind in available_kernels():
        sink = _CountSink()
        t0 = time.perf_counter()
        generate_for_worker(g, table, 0, cfg, plan, provider, sink, kind)
        wall = time.perf_counter() - t0
        rows.append({
            "kernel": kind,
            "subgraphs": sink.subgraphs,
            "nodes": sink.nodes,
            "wall_s": f"{wall:.6f}",
            "subgraphs_per_s": f"{sink.subgraphs / wall:.2f}" if wall > 0 else "0",
        })
    return rows


def write_csv(path: str, fields, rows) -> None:
    """Rows are dicts or objects with as_csv(); header always written."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields))
        writer.writeheader()
        for row in rows:
            writer.writerow(row if isinstance(row, dict) else row.as_csv())
