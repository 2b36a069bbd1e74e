"""Pure-Python subgraph expansion kernel.

Fallback twin of the compiled `graphmill._kernel` extension. Both produce
bit-identical output for the same graph and plan; this one is the portable
reference, the compiled one releases the GIL so worker threads can expand
subgraphs in parallel.

Expansion semantics (shared contract):

* frontier 0 is the seed; at hop h each frontier node v samples from the
  neighbors of v that were NOT yet in the subgraph when hop h started
  (nodes discovered earlier in the same hop remain eligible: the edge into
  them is kept, they are not re-added),
* a candidate set of size <= fanout is taken whole; otherwise a partial
  Fisher-Yates pass over candidate positions picks `fanout` of them without
  replacement and the chosen ids are emitted sorted ascending,
* the per-expansion RNG stream is seeded from
  (base, TAG_SAMPLE, seed_node, hop, frontier_node) so the result does not
  depend on worker count or interleaving,
* feature row of node n is hash(feat_seed, n, j) mapped to [-1, 1),
  computed in float64 and stored as float32.
"""

from __future__ import annotations

import numpy as np

from .features import TAG_SAMPLE
from .rng import GOLDEN, SplitMix64, mix64_np, stream_seed, u64_to_unit_np

KIND = "pure"


def _sample_sorted(candidates: list[int], fanout: int, stream: SplitMix64) -> list[int]:
    d = len(candidates)
    if d <= fanout:
        return candidates
    idx = list(range(d))
    for i in range(fanout):
        j = i + stream.next_below(d - i)
        idx[i], idx[j] = idx[j], idx[i]
    return sorted(candidates[t] for t in idx[:fanout])


class Expander:
    """Per-worker expansion context over a shared CSR graph."""

    def __init__(
        self,
        offsets: np.ndarray,
        targets: np.ndarray,
        num_nodes: int,
        fanouts: tuple[int, ...],
        sample_base: int,
        feat_seed: int,
        feature_dim: int,
    ):
        self.offsets = offsets
        self.targets = targets
        self.num_nodes = num_nodes
        self.fanouts = fanouts
        self.sample_base = sample_base
        self.feat_seed = feat_seed
        self.feature_dim = feature_dim
        # hop_of[v] = hop at which v entered the current subgraph, else -1
        self._hop_of = np.full(num_nodes, -1, dtype=np.int64)

    def expand(self, seed: int):
        offsets, targets = self.offsets, self.targets
        hop_of = self._hop_of

        nodes = [seed]
        hops = [0]
        esrc: list[int] = []
        edst: list[int] = []
        hop_of[seed] = 0
        frontier = [seed]

        for h, fanout in enumerate(self.fanouts, start=1):
            next_frontier: list[int] = []
            for v in frontier:
                span = targets[offsets[v] : offsets[v + 1]]
                candidates = [int(u) for u in span if hop_of[u] < 0 or hop_of[u] == h]
                if not candidates:
                    continue
                stream = SplitMix64(stream_seed(self.sample_base, TAG_SAMPLE, seed, h, v))
                for u in _sample_sorted(candidates, fanout, stream):
                    esrc.append(v)
                    edst.append(u)
                    if hop_of[u] < 0:
                        hop_of[u] = h
                        nodes.append(u)
                        hops.append(h)
                        next_frontier.append(u)
            frontier = next_frontier

        hop_of[nodes] = -1  # reset touched entries only

        nodes_arr = np.array(nodes, dtype=np.int64)
        return (
            nodes_arr,
            np.array(hops, dtype=np.int32),
            np.array(esrc, dtype=np.int64),
            np.array(edst, dtype=np.int64),
            self._features(nodes_arr),
        )

    def _features(self, nodes: np.ndarray) -> np.ndarray:
        h = mix64_np((np.uint64(self.feat_seed) ^ nodes.astype(np.uint64)) + np.uint64(GOLDEN))
        dims = np.arange(self.feature_dim, dtype=np.uint64)
        grid = mix64_np((h[:, None] ^ dims[None, :]) + np.uint64(GOLDEN))
        return (u64_to_unit_np(grid) * 2.0 - 1.0).astype(np.float32)
