"""Fanout-limited k-hop subgraph generation.

Each seed yields a self-contained Subgraph: the sampled nodes with their
discovery hop, the sampled edges (replicated per subgraph, never shared),
a synthetic feature matrix, and the seed's label. Generation is a pure
function of (graph, seed, fanouts, rng seed), so any worker arrangement
produces the same subgraphs; that property is what the verify oracle and
the multi-worker determinism tests pin down.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .features import TAG_SAMPLE
from .graph import Graph
from .rng import SplitMix64, stream_seed
from .scheduler import BalanceTable, seeds_for_worker


@dataclass(frozen=True)
class FanoutConfig:
    """Per-hop neighbor caps; the list length is the hop count."""

    fanouts: tuple[int, ...] = (40, 20)

    def __post_init__(self):
        if len(self.fanouts) < 1:
            raise ConfigError("at least one hop required")
        if any(f < 1 for f in self.fanouts):
            raise ConfigError("every fanout must be >= 1")

    @property
    def num_hops(self) -> int:
        return len(self.fanouts)

    @classmethod
    def parse(cls, text: str) -> "FanoutConfig":
        try:
            return cls(tuple(int(t) for t in text.split(",") if t.strip()))
        except ValueError:
            raise ConfigError(f"bad fanout list {text!r}") from None

    def max_nodes(self) -> int:
        total, level = 1, 1
        for f in self.fanouts:
            level *= f
            total += level
        return total


@dataclass(frozen=True)
class SamplePlan:
    """Determinism layer: one base seed, per-expansion derived streams.

    corrupt_seed is a verification test hook: the generator drops one edge
    from that seed's subgraph so oracle diffs have something to catch.
    """

    base_rng_seed: int
    corrupt_seed: int | None = None

    def sample_stream(self, seed_node: int, hop: int, frontier_node: int) -> SplitMix64:
        return SplitMix64(
            stream_seed(self.base_rng_seed, TAG_SAMPLE, seed_node, hop, frontier_node)
        )


@dataclass
class Subgraph:
    """Seed-rooted sampled subgraph; nodes are in discovery order, seed first."""

    seed: int
    nodes: np.ndarray
    hops: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    features: np.ndarray
    label: int
    seq: int = 0

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edge_src.shape[0])

    @property
    def seed_row(self) -> int:
        return 0

    def canonical_bytes(self) -> bytes:
        """Sorted structural encoding plus a digest of features and label."""
        order = np.argsort(self.nodes, kind="stable")
        lines = [f"s {self.seed}"]
        lines += [f"n {self.nodes[i]} {self.hops[i]}" for i in order]
        ekeys = sorted(zip(self.edge_src.tolist(), self.edge_dst.tolist()))
        lines += [f"e {u} {v}" for u, v in ekeys]
        lines.append(f"l {self.label}")
        feat = hashlib.sha256(np.ascontiguousarray(self.features[order]).tobytes())
        lines.append(f"f {feat.hexdigest()}")
        return "\n".join(lines).encode()

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def to_record(self) -> dict:
        order = np.argsort(self.nodes, kind="stable")
        return {
            "seed": int(self.seed),
            "nodes": [[int(self.nodes[i]), int(self.hops[i])] for i in order],
            "edges": sorted(
                [int(u), int(v)] for u, v in zip(self.edge_src, self.edge_dst)
            ),
        }


def sample_neighbors(g: Graph, v: int, fanout: int, stream: SplitMix64) -> np.ndarray:
    """All neighbors when degree(v) <= fanout, else a uniform sorted
    sample of size fanout drawn without replacement from the stream."""
    span = g.neighbors(v)
    if span.shape[0] <= fanout:
        return span.copy()
    picked = sample_from_sorted(span.tolist(), fanout, stream)
    return np.array(picked, dtype=np.int64)


def sample_from_sorted(candidates: list[int], fanout: int, stream: SplitMix64) -> list[int]:
    """Partial Fisher-Yates over candidate positions; output sorted."""
    d = len(candidates)
    if d <= fanout:
        return list(candidates)
    idx = list(range(d))
    for i in range(fanout):
        j = i + stream.next_below(d - i)
        idx[i], idx[j] = idx[j], idx[i]
    return sorted(candidates[t] for t in idx[:fanout])


class SubgraphGenerator:
    """Reusable per-worker generator wrapping the active expansion kernel."""

    def __init__(
        self,
        g: Graph,
        cfg: FanoutConfig,
        plan: SamplePlan,
        provider,
        kernel: str | None = None,
    ):
        self.graph = g
        self.cfg = cfg
        self.plan = plan
        self.provider = provider
        mod = kernels.load_kernel(kernel)
        self.kernel_kind = mod.KIND
        self._expander = mod.Expander(
            g.csr_offsets,
            g.csr_targets,
            g.num_nodes,
            cfg.fanouts,
            plan.base_rng_seed,
            provider.feat_seed,
            provider.feature_dim,
        )

    def generate(self, seed: int, seq: int = 0) -> Subgraph:
        self.graph._check_node(seed)
        nodes, hops, esrc, edst, feats = self._expander.expand(seed)
        if self.plan.corrupt_seed is not None and seed == self.plan.corrupt_seed and esrc.shape[0]:
            esrc, edst = esrc[:-1], edst[:-1]
        return Subgraph(
            seed=seed,
            nodes=nodes,
            hops=hops,
            edge_src=esrc,
            edge_dst=edst,
            features=feats,
            label=self.provider.label(seed),
            seq=seq,
        )


def generate_subgraph(
    g: Graph, seed: int, cfg: FanoutConfig, plan: SamplePlan, provider, kernel: str | None = None
) -> Subgraph:
    return SubgraphGenerator(g, cfg, plan, provider, kernel).generate(seed)


def generate_for_worker(
    g: Graph,
    table: BalanceTable,
    worker: int,
    cfg: FanoutConfig,
    plan: SamplePlan,
    provider,
    sink,
    kernel: str | None = None,
) -> int:
    """Emit one Subgraph per assigned seed, in assignment order; returns
    the emitted count. `sink` needs only a put() method."""
    gen = SubgraphGenerator(g, cfg, plan, provider, kernel)
    count = 0
    for seq, seed in enumerate(seeds_for_worker(table, worker)):
        sink.put(gen.generate(seed, seq=seq))
        count += 1
    return count


def write_dump(subgraphs, path: str) -> None:
    """Line-delimited JSON records, sorted by seed, for diffing."""
    records = sorted((s.to_record() for s in subgraphs), key=lambda r: r["seed"])
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def read_dump(path: str) -> dict[int, dict]:
    out: dict[int, dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["seed"]] = rec
    return out
