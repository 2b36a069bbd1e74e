"""Immutable CSR graph, edge-list I/O, and edge partitioning.

The graph is canonical after load: node ids are remapped to a dense
0..num_nodes-1 range in first-appearance order, duplicate edges are
collapsed, and each node's target span is sorted ascending. Every other
module shares the same Graph instance by reference.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, EdgeListParseError

_MAX_NODE_ID = (1 << 63) - 1


class Edge(NamedTuple):
    src: int
    dst: int


@dataclass(frozen=True)
class Graph:
    """CSR adjacency over dense node ids.

    csr_offsets has length num_nodes + 1; the targets of node v are
    csr_targets[csr_offsets[v]:csr_offsets[v+1]], sorted ascending.
    original_ids maps dense id -> id as it appeared in the input file.
    """

    num_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    original_ids: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.csr_targets.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self.csr_offsets[v + 1] - self.csr_offsets[v])

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted target span of v; zero-length for isolated nodes."""
        self._check_node(v)
        return self.csr_targets[self.csr_offsets[v] : self.csr_offsets[v + 1]]

    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.num_nodes else 0

    def edge_array(self) -> np.ndarray:
        """All edges as an (num_edges, 2) int64 array in CSR order."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        return np.column_stack([src, self.csr_targets])

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.num_nodes:
            raise ConfigError(f"node id {v} out of range [0, {self.num_nodes})")


def neighbors(g: Graph, v: int) -> np.ndarray:
    return g.neighbors(v)


def _parse_edge_lines(lines: Iterator[str]) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise EdgeListParseError(line_no, f"expected 'src dst', got {stripped!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(line_no, f"non-integer field in {stripped!r}") from None
        if u < 0 or v < 0:
            raise EdgeListParseError(line_no, "negative node id")
        if u > _MAX_NODE_ID or v > _MAX_NODE_ID:
            raise EdgeListParseError(line_no, "node id overflows 63-bit index range")
        pairs.append((u, v))
    return pairs


def load_edge_list(path: str, directedness: str = "undirected") -> Graph:
    """Load an edge-list text file into a canonical CSR graph.

    Lines are `src<whitespace>dst`; `#` lines are comments. Node ids are
    remapped densely in first-appearance order (scanning src before dst on
    each line). In undirected mode each edge (u, v) with u != v also yields
    (v, u). Duplicate edges collapse to one.
    """
    if directedness not in ("directed", "undirected"):
        raise ConfigError(f"unknown directedness {directedness!r}")
    with open(path, "r", encoding="utf-8") as fh:
        pairs = _parse_edge_lines(fh)
    if not pairs:
        raise EdgeListParseError(0, "no edges in file")
    return _build_graph(pairs, directedness == "undirected")


def load_edge_text(text: str, directedness: str = "undirected") -> Graph:
    """Same as load_edge_list but from an in-memory string."""
    pairs = _parse_edge_lines(io.StringIO(text))
    if not pairs:
        raise EdgeListParseError(0, "no edges in input")
    return _build_graph(pairs, directedness == "undirected")


def _build_graph(pairs: list[tuple[int, int]], symmetrize: bool) -> Graph:
    remap: dict[int, int] = {}
    for u, v in pairs:
        if u not in remap:
            remap[u] = len(remap)
        if v not in remap:
            remap[v] = len(remap)
    num_nodes = len(remap)

    arr = np.array(pairs, dtype=np.int64)
    # Vector remap through a lookup table keyed by sorted original id.
    orig = np.fromiter(remap.keys(), dtype=np.int64, count=num_nodes)
    dense = np.fromiter(remap.values(), dtype=np.int64, count=num_nodes)
    order = np.argsort(orig, kind="stable")
    sorted_orig, lut = orig[order], dense[order]
    src = lut[np.searchsorted(sorted_orig, arr[:, 0])]
    dst = lut[np.searchsorted(sorted_orig, arr[:, 1])]

    if symmetrize:
        loop = src == dst
        src, dst = (
            np.concatenate([src, dst[~loop]]),
            np.concatenate([dst, src[~loop]]),
        )

    # Canonicalize: sort by (src, dst), drop duplicates.
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if src.size > 1:
        keep = np.concatenate([[True], (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])])
        src, dst = src[keep], dst[keep]

    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=offsets[1:])
    return Graph(
        num_nodes=num_nodes,
        csr_offsets=offsets,
        csr_targets=dst,
        original_ids=orig,
    )


def save_edge_list(g: Graph, path: str) -> None:
    """Write the CSR edge set as text, one `src dst` arc per line."""
    edges = g.edge_array()
    with open(path, "w", encoding="utf-8") as fh:
        for start in range(0, edges.shape[0], 65536):
            chunk = edges[start : start + 65536]
            fh.write("\n".join(f"{u} {v}" for u, v in chunk))
            fh.write("\n")


@dataclass
class EdgePartition:
    """The slice of the global edge set owned by one worker."""

    worker_id: int
    src: np.ndarray
    dst: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])

    def edges(self) -> list[Edge]:
        return [Edge(int(u), int(v)) for u, v in zip(self.src, self.dst)]

    def local_neighbors(self, v: int) -> np.ndarray:
        """Sorted unique targets of v within this partition."""
        return np.unique(self.dst[self.src == v])


@dataclass
class PartitionReport:
    sizes: list[int]
    max_min_ratio: float


def partition_edges(
    g: Graph, num_workers: int, strategy: str = "src_hash"
) -> tuple[list[EdgePartition], PartitionReport]:
    """Split the edge set into disjoint per-worker partitions.

    src_hash sends edge (u, v) to worker u mod num_workers; block hands out
    contiguous ranges of the canonical edge order, sized as evenly as
    possible (first num_edges mod num_workers ranges get one extra).
    """
    if num_workers < 1:
        raise ConfigError("num_workers must be >= 1")
    edges = g.edge_array()
    src, dst = edges[:, 0], edges[:, 1]

    parts: list[EdgePartition] = []
    if strategy == "src_hash":
        owner = src % num_workers
        for w in range(num_workers):
            mask = owner == w
            parts.append(EdgePartition(w, src[mask].copy(), dst[mask].copy()))
    elif strategy == "block":
        base, extra = divmod(len(src), num_workers)
        start = 0
        for w in range(num_workers):
            stop = start + base + (1 if w < extra else 0)
            parts.append(EdgePartition(w, src[start:stop].copy(), dst[start:stop].copy()))
            start = stop
    else:
        raise ConfigError(f"unknown partition strategy {strategy!r}")

    sizes = [p.num_edges for p in parts]
    smallest = min(sizes)
    ratio = float("inf") if smallest == 0 else max(sizes) / smallest
    return parts, PartitionReport(sizes=sizes, max_min_ratio=ratio)
