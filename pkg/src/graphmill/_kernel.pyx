# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled subgraph expansion kernel.

Twin of graphmill._kernel_py with identical semantics and bit-identical
output; see that module's docstring for the expansion contract. The whole
per-seed expansion runs without the GIL so worker threads scale across
cores.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport qsort

KIND = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15u
cdef uint64_t TAG_SAMPLE = 0x534D504Cu


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9u
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBu
    return z ^ (z >> 31)


cdef inline uint64_t _fold(uint64_t h, uint64_t w) noexcept nogil:
    return _mix64((h ^ w) + GOLDEN)


cdef inline uint64_t _next_u64(uint64_t* state) noexcept nogil:
    state[0] = state[0] + GOLDEN
    return _mix64(state[0])


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef int64_t x = (<const int64_t*>a)[0]
    cdef int64_t y = (<const int64_t*>b)[0]
    return (x > y) - (x < y)


cdef class Expander:
    """Per-worker expansion context; holds reusable scratch buffers."""

    cdef int64_t[::1] offsets
    cdef int64_t[::1] targets
    cdef int64_t num_nodes
    cdef int64_t[::1] fanouts
    cdef uint64_t sample_base
    cdef uint64_t feat_seed
    cdef int feat_dim
    cdef int num_hops
    # scratch
    cdef int32_t[::1] hop_of
    cdef int64_t[::1] cand
    cdef int64_t[::1] idx
    cdef int64_t[::1] sel
    cdef int64_t[::1] buf_nodes
    cdef int32_t[::1] buf_hops
    cdef int64_t[::1] buf_esrc
    cdef int64_t[::1] buf_edst

    def __init__(
        self,
        offsets,
        targets,
        num_nodes,
        fanouts,
        sample_base,
        feat_seed,
        feature_dim,
    ):
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        self.targets = np.ascontiguousarray(targets, dtype=np.int64)
        self.num_nodes = num_nodes
        self.fanouts = np.ascontiguousarray(list(fanouts), dtype=np.int64)
        self.num_hops = len(fanouts)
        self.sample_base = sample_base & 0xFFFFFFFFFFFFFFFF
        self.feat_seed = feat_seed & 0xFFFFFFFFFFFFFFFF
        self.feat_dim = feature_dim

        degs = np.diff(np.asarray(self.offsets))
        cdef int64_t max_deg = int(degs.max()) if num_nodes > 0 else 0
        cdef int64_t max_fan = int(max(fanouts))

        # Capacity: the hop-h frontier holds at most prod(fanouts[:h]) new
        # nodes (and never more than the graph); each frontier node emits at
        # most fanout edges, and distinct frontier nodes can emit at most
        # one edge per adjacency entry, so |E| also bounds a hop's edges.
        num_edges = int(self.targets.shape[0])
        node_cap, edge_cap, level = 1, 0, 1
        for f in fanouts:
            edge_cap += min(level * int(f), num_edges)
            level = min(level * int(f), int(num_nodes))
            node_cap += level
        node_cap = max(1, min(node_cap, int(num_nodes)))

        self.hop_of = np.full(num_nodes, -1, dtype=np.int32)
        self.cand = np.empty(max(max_deg, 1), dtype=np.int64)
        self.idx = np.empty(max(max_deg, 1), dtype=np.int64)
        self.sel = np.empty(max(max_fan, 1), dtype=np.int64)
        self.buf_nodes = np.empty(node_cap, dtype=np.int64)
        self.buf_hops = np.empty(node_cap, dtype=np.int32)
        self.buf_esrc = np.empty(max(edge_cap, 1), dtype=np.int64)
        self.buf_edst = np.empty(max(edge_cap, 1), dtype=np.int64)

    def expand(self, seed):
        cdef int64_t seed_node = seed
        cdef int64_t n_nodes = 0
        cdef int64_t n_edges = 0
        with nogil:
            n_nodes, n_edges = self._expand_core(seed_node)

        nodes = np.asarray(self.buf_nodes[:n_nodes]).copy()
        hops = np.asarray(self.buf_hops[:n_nodes]).copy()
        esrc = np.asarray(self.buf_esrc[:n_edges]).copy()
        edst = np.asarray(self.buf_edst[:n_edges]).copy()
        feats = np.empty((n_nodes, self.feat_dim), dtype=np.float32)

        cdef int64_t[::1] nv = nodes
        cdef float[:, ::1] fv = feats
        with nogil:
            self._fill_features(nv, fv)
        return nodes, hops, esrc, edst, feats

    cdef (int64_t, int64_t) _expand_core(self, int64_t seed_node) noexcept nogil:
        cdef int64_t n = 0
        cdef int64_t m = 0
        cdef int64_t level_start, level_end, fi, v, t, u, d_cand, take, i, j
        cdef int32_t h
        cdef int64_t fanout
        cdef uint64_t state

        self.buf_nodes[0] = seed_node
        self.buf_hops[0] = 0
        self.hop_of[seed_node] = 0
        n = 1
        level_start = 0
        level_end = 1

        for h in range(1, self.num_hops + 1):
            fanout = self.fanouts[h - 1]
            for fi in range(level_start, level_end):
                v = self.buf_nodes[fi]
                d_cand = 0
                for t in range(self.offsets[v], self.offsets[v + 1]):
                    u = self.targets[t]
                    if self.hop_of[u] < 0 or self.hop_of[u] == h:
                        self.cand[d_cand] = u
                        d_cand += 1
                if d_cand == 0:
                    continue
                if d_cand <= fanout:
                    # candidates already ascend (filtered sorted span)
                    take = d_cand
                    for i in range(take):
                        self.sel[i] = self.cand[i]
                else:
                    take = fanout
                    state = _fold(_fold(_fold(_fold(
                        self.sample_base, TAG_SAMPLE), <uint64_t>seed_node),
                        <uint64_t>h), <uint64_t>v)
                    for i in range(d_cand):
                        self.idx[i] = i
                    for i in range(take):
                        j = i + <int64_t>(_next_u64(&state) % <uint64_t>(d_cand - i))
                        self.idx[i], self.idx[j] = self.idx[j], self.idx[i]
                    for i in range(take):
                        self.sel[i] = self.cand[self.idx[i]]
                    qsort(&self.sel[0], take, sizeof(int64_t), _cmp_i64)
                for i in range(take):
                    u = self.sel[i]
                    self.buf_esrc[m] = v
                    self.buf_edst[m] = u
                    m += 1
                    if self.hop_of[u] < 0:
                        self.hop_of[u] = h
                        self.buf_nodes[n] = u
                        self.buf_hops[n] = h
                        n += 1
            level_start = level_end
            level_end = n

        for i in range(n):
            self.hop_of[self.buf_nodes[i]] = -1
        return n, m

    cdef void _fill_features(self, int64_t[::1] nodes, float[:, ::1] feats) noexcept nogil:
        cdef int64_t i
        cdef int j
        cdef uint64_t hbase, u
        cdef double unit
        for i in range(nodes.shape[0]):
            hbase = _fold(self.feat_seed, <uint64_t>nodes[i])
            for j in range(self.feat_dim):
                u = _fold(hbase, <uint64_t>j)
                unit = (<double>(u >> 11)) * (1.0 / 9007199254740992.0)
                feats[i, j] = <float>(unit * 2.0 - 1.0)
