"""Oracle checks: an independent reference sampler plus equivalence gates.

The reference sampler here shares nothing with the expansion kernels except
the documented contract (derived RNG streams, the partial Fisher-Yates
selection rule, the hop-start membership snapshot). It works on a plain
dict adjacency with Python sets, so a bug in the CSR walk, the candidate
filter, or the compiled kernel shows up as a digest mismatch.

Three gates, mirrored by the `verify` CLI subcommand:

* generation: distributed output for several worker counts against the
  reference, first divergent seed named,
* reduction: tree aggregation against a flat union over random shard sets,
  with the message-count law checked,
* training: the threaded cluster against a serial data-parallel loop,
  bitwise weight equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import TAG_SAMPLE, make_provider
from .graph import Graph
from .learn import GcnModel, train
from .reduction import NeighborShard, build_tree, flat_reduce, tree_reduce
from .rng import SplitMix64, stream_seed
from .runtime import ClusterConfig, spawn_cluster
from .sampling import FanoutConfig, SamplePlan, Subgraph, generate_for_worker
from .scheduler import SeedSet, build_balance_table


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class VerifyReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def lines(self) -> list[str]:
        return [
            f"[{'PASS' if c.ok else 'FAIL'}] {c.name}" + (f": {c.detail}" if c.detail else "")
            for c in self.checks
        ]


# ------------------------------------------------------- reference sampler


def _adjacency(g: Graph) -> dict[int, list[int]]:
    return {v: g.neighbors(v).tolist() for v in range(g.num_nodes)}


def _pick(candidates: list[int], fanout: int, stream: SplitMix64) -> list[int]:
    # the documented selection rule, restated: partial Fisher-Yates over
    # positions, chosen ids returned sorted
    d = len(candidates)
    if d <= fanout:
        return list(candidates)
    idx = list(range(d))
    for i in range(fanout):
        j = i + stream.next_below(d - i)
        idx[i], idx[j] = idx[j], idx[i]
    return sorted(candidates[t] for t in idx[:fanout])


def reference_subgraph(
    adj: dict[int, list[int]],
    seed: int,
    cfg: FanoutConfig,
    plan: SamplePlan,
    provider,
) -> Subgraph:
    """Sequential dict-and-set sampler; never applies the corruption hook."""
    hop_at = {seed: 0}
    order = [seed]
    edges: list[tuple[int, int]] = []
    frontier = [seed]
    for h, fanout in enumerate(cfg.fanouts, start=1):
        members_at_start = set(hop_at)
        nxt: list[int] = []
        for v in frontier:
            candidates = [u for u in adj[v] if u not in members_at_start]
            if not candidates:
                continue
            stream = SplitMix64(stream_seed(plan.base_rng_seed, TAG_SAMPLE, seed, h, v))
            for u in _pick(candidates, fanout, stream):
                edges.append((v, u))
                if u not in hop_at:
                    hop_at[u] = h
                    order.append(u)
                    nxt.append(u)
        frontier = nxt
    nodes = np.array(order, dtype=np.int64)
    return Subgraph(
        seed=seed,
        nodes=nodes,
        hops=np.array([hop_at[n] for n in order], dtype=np.int32),
        edge_src=np.array([e[0] for e in edges], dtype=np.int64),
        edge_dst=np.array([e[1] for e in edges], dtype=np.int64),
        features=provider.features(nodes),
        label=provider.label(seed),
    )


def reference_digests(
    g: Graph, seeds, cfg: FanoutConfig, plan: SamplePlan, provider
) -> dict[int, str]:
    adj = _adjacency(g)
    return {
        s: reference_subgraph(adj, s, cfg, plan, provider).digest()
        for s in seeds
    }


# ------------------------------------------------------------------ gates


class _ListSink:
    def __init__(self):
        self.items: list[Subgraph] = []

    def put(self, sg: Subgraph) -> None:
        self.items.append(sg)


def check_generation(
    g: Graph,
    seed_set: SeedSet,
    cfg: FanoutConfig,
    plan: SamplePlan,
    provider,
    worker_counts=(1, 2, 4, 8),
    kernel: str | None = None,
) -> CheckResult:
    """Distributed generation vs the reference, per worker count."""
    ref = reference_digests(g, seed_set.seeds, cfg, plan, provider)
    compared = 0
    for count in worker_counts:
        table = build_balance_table(seed_set, count)
        got: dict[int, str] = {}
        for w in range(count):
            sink = _ListSink()
            generate_for_worker(g, table, w, cfg, plan, provider, sink, kernel)
            for sg in sink.items:
                got[sg.seed] = sg.digest()
        for seed in sorted(got):
            compared += 1
            if got[seed] != ref[seed]:
                return CheckResult(
                    "generation", False,
                    f"seed {seed} diverges from the reference with "
                    f"{count} workers ({got[seed][:12]} != {ref[seed][:12]})",
                )
    return CheckResult(
        "generation", True,
        f"{compared} subgraph digests match across workers {list(worker_counts)}",
    )


def _random_shards(
    rng: SplitMix64, num_workers: int, hot_node: int, universe: int
) -> list[NeighborShard]:
    shards = []
    for _ in range(num_workers):
        count = rng.next_below(universe // 2 + 1)
        picks = sorted(set(rng.next_below(universe) for _ in range(count)))
        shards.append(NeighborShard(hot_node, tuple(picks)))
    return shards


def check_reduction(
    max_workers: int = 8,
    arities=(2, 3, 4),
    trials: int = 20,
    rng_seed: int = 0,
) -> CheckResult:
    """tree_reduce == flat union and messages == workers - 1, randomized."""
    rng = SplitMix64(stream_seed(rng_seed, 0x52454455))
    cases = 0
    for workers in range(1, max_workers + 1):
        for arity in arities:
            tree = build_tree(workers, arity)
            for _ in range(trials):
                shards = _random_shards(rng, workers, hot_node=7, universe=60)
                merged, stats = tree_reduce(tree, shards)
                flat, flat_stats = flat_reduce(shards)
                cases += 1
                if merged.neighbors != flat.neighbors:
                    return CheckResult(
                        "reduction", False,
                        f"tree and flat disagree at workers={workers} arity={arity}",
                    )
                if stats.messages != workers - 1:
                    return CheckResult(
                        "reduction", False,
                        f"message count {stats.messages} != {workers - 1} "
                        f"at workers={workers} arity={arity}",
                    )
    return CheckResult("reduction", True, f"{cases} randomized cases agree")


def check_training(
    g: Graph,
    seed_set: SeedSet,
    cluster_cfg: ClusterConfig,
    num_workers: int = 4,
) -> CheckResult:
    """Threaded cluster weights vs a serial data-parallel loop, bitwise."""
    table = build_balance_table(seed_set, num_workers)
    cluster = spawn_cluster(g, table, cluster_cfg)
    cluster.run()

    # serial twin: same batches in assignment order, no threads anywhere
    base = GcnModel.init(
        cluster_cfg.train.feature_dim, cluster_cfg.train.hidden,
        cluster_cfg.train.num_classes, cluster_cfg.model_rng_seed,
    )
    models = [base.copy() for _ in range(num_workers)]
    batches = []
    for w in range(num_workers):
        sink = _ListSink()
        generate_for_worker(
            g, table, w, cluster_cfg.fanouts, cluster_cfg.plan,
            cluster.provider, sink, cluster_cfg.kernel,
        )
        batches.append(sink.items)
    train(models, batches, cluster_cfg.train, topology=cluster_cfg.topology)

    for w in range(num_workers):
        threaded = cluster.workers[w].model
        for layer, (a, b) in enumerate(zip(threaded.weights, models[w].weights)):
            if a.tobytes() != b.tobytes():
                diff = float(np.abs(a.astype(np.float64) - b.astype(np.float64)).max())
                return CheckResult(
                    "training", False,
                    f"worker {w} layer {layer} differs from the serial loop "
                    f"(max abs {diff:.3e})",
                )
    return CheckResult(
        "training", True,
        f"{num_workers}-worker cluster matches the serial loop bitwise",
    )


def run_verify(
    g: Graph,
    seed_set: SeedSet,
    cluster_cfg: ClusterConfig,
    worker_counts=(1, 2, 4),
    reduction_trials: int = 20,
) -> VerifyReport:
    report = VerifyReport()
    report.checks.append(check_generation(
        g, seed_set, cluster_cfg.fanouts, cluster_cfg.plan,
        make_provider_like(cluster_cfg), worker_counts, cluster_cfg.kernel,
    ))
    report.checks.append(check_reduction(
        max_workers=max(worker_counts), trials=reduction_trials,
        rng_seed=cluster_cfg.plan.base_rng_seed,
    ))
    report.checks.append(check_training(
        g, seed_set, cluster_cfg, num_workers=max(worker_counts),
    ))
    return report


def make_provider_like(cfg: ClusterConfig):
    return make_provider(
        cfg.provider_kind, cfg.feature_rng_seed,
        cfg.train.feature_dim, cfg.train.num_classes,
    )
