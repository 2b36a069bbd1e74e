"""Tree reduction of per-worker neighbor shards for high-degree nodes.

Workers are arranged as a complete arity-ary tree in breadth-first layout
(worker 0 at the root, parent of i is (i - 1) // arity). Each worker merges
its own shard with whatever its children forward, then sends one message up,
so a full reduction always costs num_workers - 1 messages and its critical
path is the tree depth. The flat single-aggregator reduce lives alongside as
the equivalence oracle and as the baseline the bench sweep compares against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollectiveTimeout, ConfigError
from .graph import EdgePartition, Graph


@dataclass(frozen=True)
class HotNodePolicy:
    """Degree cutoff above which adjacency is gathered via tree reduction."""

    degree_threshold: int = 10_000

    def __post_init__(self):
        if self.degree_threshold < 1:
            raise ConfigError("degree_threshold must be >= 1")

    def is_hot(self, degree: int) -> bool:
        return degree >= self.degree_threshold


def hot_nodes(g: Graph, policy: HotNodePolicy) -> list[int]:
    """Node ids whose degree meets the policy threshold, ascending."""
    return np.flatnonzero(g.degrees >= policy.degree_threshold).tolist()


@dataclass(frozen=True)
class NeighborShard:
    """One worker's contribution to a hot node's adjacency list."""

    hot_node: int
    neighbors: tuple[int, ...]

    def __post_init__(self):
        ns = self.neighbors
        if any(ns[i] >= ns[i + 1] for i in range(len(ns) - 1)):
            raise ConfigError("shard neighbors must be sorted and unique")


def make_shard(hot_node: int, neighbors) -> NeighborShard:
    """Normalize an arbitrary iterable into a sorted deduplicated shard."""
    return NeighborShard(hot_node, tuple(sorted(set(int(v) for v in neighbors))))


def merge_shards(a: NeighborShard, b: NeighborShard) -> NeighborShard:
    if a.hot_node != b.hot_node:
        raise ConfigError(
            f"cannot merge shards for nodes {a.hot_node} and {b.hot_node}"
        )
    return NeighborShard(
        a.hot_node, tuple(sorted(set(a.neighbors) | set(b.neighbors)))
    )


@dataclass(frozen=True)
class ReductionTree:
    """Complete arity-ary tree over workers 0..n-1, breadth-first layout."""

    num_workers: int
    arity: int
    parent: tuple[int, ...] = field(repr=False)
    children: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def root(self) -> int:
        return 0

    def depth_of(self, worker: int) -> int:
        d = 0
        while worker != 0:
            worker = self.parent[worker]
            d += 1
        return d

    @property
    def depth(self) -> int:
        """Longest root-to-node path in edges (0 for a single worker)."""
        return self.depth_of(self.num_workers - 1) if self.num_workers > 1 else 0

    @property
    def num_levels(self) -> int:
        return self.depth + 1

    def levels(self) -> list[list[int]]:
        """Workers grouped by depth; breadth-first layout keeps each
        group a contiguous index range."""
        out: list[list[int]] = [[] for _ in range(self.num_levels)]
        for w in range(self.num_workers):
            out[self.depth_of(w)].append(w)
        return out

    def subtree_size(self, worker: int) -> int:
        return 1 + sum(self.subtree_size(c) for c in self.children[worker])


def build_tree(num_workers: int, arity: int = 2) -> ReductionTree:
    if num_workers < 1:
        raise ConfigError("num_workers must be >= 1")
    if arity < 2:
        raise ConfigError("tree arity must be >= 2")
    parent = tuple(0 if i == 0 else (i - 1) // arity for i in range(num_workers))
    children = tuple(
        tuple(c for c in range(arity * i + 1, arity * i + arity + 1) if c < num_workers)
        for i in range(num_workers)
    )
    return ReductionTree(num_workers, arity, parent, children)


@dataclass(frozen=True)
class ReduceStats:
    """Cost accounting for one reduction."""

    messages: int
    critical_path: int


def tree_reduce(
    tree: ReductionTree, shards: list[NeighborShard | None]
) -> tuple[NeighborShard, ReduceStats]:
    """Bottom-up merge along the tree; the root's accumulator is the result.

    In breadth-first layout every child index exceeds its parent's, so one
    descending pass visits each worker after all of its children. A missing
    contribution surfaces as CollectiveTimeout naming the worker, matching
    what the threaded runtime raises when a channel stays empty.
    """
    n = tree.num_workers
    if len(shards) != n:
        raise ConfigError(f"expected {n} shards, got {len(shards)}")
    for w, s in enumerate(shards):
        if s is None:
            raise CollectiveTimeout(w, "tree reduction")
    node = shards[0].hot_node
    for w, s in enumerate(shards):
        if s.hot_node != node:
            raise ConfigError(
                f"worker {w} contributed a shard for node {s.hot_node}, expected {node}"
            )

    acc = list(shards)
    messages = 0
    for w in range(n - 1, 0, -1):
        p = tree.parent[w]
        acc[p] = merge_shards(acc[p], acc[w])
        messages += 1
    return acc[0], ReduceStats(messages=messages, critical_path=tree.depth)


def flat_reduce(
    shards: list[NeighborShard | None],
) -> tuple[NeighborShard, ReduceStats]:
    """Single central aggregator: every worker sends straight to worker 0."""
    if not shards:
        raise ConfigError("no shards to reduce")
    for w, s in enumerate(shards):
        if s is None:
            raise CollectiveTimeout(w, "flat reduction")
    acc = shards[0]
    for s in shards[1:]:
        acc = merge_shards(acc, s)
    n = len(shards)
    return acc, ReduceStats(messages=n - 1, critical_path=1 if n > 1 else 0)


def local_shard(part: EdgePartition, v: int) -> NeighborShard:
    """Extract v's neighbors from one worker's edge partition."""
    return NeighborShard(v, tuple(part.local_neighbors(v).tolist()))


def gather_hot_neighbors(
    partitions: list[EdgePartition],
    v: int,
    policy: HotNodePolicy,
    tree: ReductionTree,
) -> list[int]:
    """Assemble a hot node's full adjacency from per-worker partitions.

    Callers are expected to have routed v here via policy.is_hot; cold nodes
    go straight to the CSR. The result equals Graph.neighbors(v) because the
    partitions jointly cover every arc leaving v.
    """
    if len(partitions) != tree.num_workers:
        raise ConfigError(
            f"{len(partitions)} partitions for a {tree.num_workers}-worker tree"
        )
    shards = [local_shard(p, v) for p in partitions]
    merged, _ = tree_reduce(tree, shards)
    return list(merged.neighbors)
