import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphmill.errors import ConfigError, EdgeListParseError
from graphmill.graph import (
    load_edge_list,
    load_edge_text,
    partition_edges,
    save_edge_list,
)

from conftest import random_edge_text


def naive_adjacency(text: str, undirected: bool) -> dict[int, set[int]]:
    """Independent hash-map adjacency with the same remap rule."""
    remap: dict[int, int] = {}
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        u, v = (int(t) for t in line.split())
        for x in (u, v):
            if x not in remap:
                remap[x] = len(remap)
        pairs.append((remap[u], remap[v]))
    adj: dict[int, set[int]] = {i: set() for i in range(len(remap))}
    for u, v in pairs:
        adj[u].add(v)
        if undirected and u != v:
            adj[v].add(u)
    return adj


def test_two_edge_path_symmetric_closure():
    g = load_edge_text("0 1\n1 2\n", "undirected")
    assert g.num_nodes == 3
    assert g.num_edges == 4
    assert g.degree(1) == 2


def test_directed_self_loop():
    g = load_edge_text("0 0\n", "directed")
    assert g.num_nodes == 1
    assert g.num_edges == 1
    assert g.degree(0) == 1


def test_csr_matches_naive_adjacency_oracle():
    text = random_edge_text(1000, 5000, seed=3)
    for mode in ("undirected", "directed"):
        g = load_edge_text(text, mode)
        adj = naive_adjacency(text, mode == "undirected")
        assert g.num_nodes == len(adj)
        for v in range(g.num_nodes):
            assert g.neighbors(v).tolist() == sorted(adj[v])


def test_remap_preserves_first_appearance_order():
    g = load_edge_text("10 7\n7 99\n", "directed")
    assert g.original_ids.tolist() == [10, 7, 99]


def test_parse_errors_report_line():
    with pytest.raises(EdgeListParseError) as ei:
        load_edge_text("0 1\nbogus line here\n")
    assert "line 2" in str(ei.value)
    with pytest.raises(EdgeListParseError):
        load_edge_text("")
    with pytest.raises(EdgeListParseError):
        load_edge_text(f"0 {2**63}\n")


def test_load_file_roundtrip(tmp_path, random_graph):
    p = tmp_path / "g.txt"
    save_edge_list(random_graph, str(p))
    # reloading remaps ids by first appearance in the file; undo that with
    # original_ids and the arc set must come back exactly
    g2 = load_edge_list(str(p), "directed")
    assert g2.num_nodes == random_graph.num_nodes
    back = g2.original_ids
    arcs2 = {(int(back[u]), int(back[v])) for u, v in g2.edge_array()}
    arcs1 = {(int(u), int(v)) for u, v in random_graph.edge_array()}
    assert arcs2 == arcs1


def test_degree_conservation(random_graph):
    assert int(random_graph.degrees.sum()) == random_graph.num_edges


def test_neighbors_path_and_isolated():
    g = load_edge_text("0 1\n1 2\n3 3\n", "undirected")
    assert g.neighbors(1).tolist() == [0, 2]
    # node 3 only has a self loop
    assert g.neighbors(3).tolist() == [3]
    with pytest.raises(ConfigError):
        g.neighbors(99)


def test_partition_single_worker(random_graph):
    parts, report = partition_edges(random_graph, 1, "src_hash")
    assert len(parts) == 1
    assert parts[0].num_edges == random_graph.num_edges
    assert report.max_min_ratio == 1.0


def test_partition_src_hash_mod2():
    g = load_edge_text("0 1\n1 2\n2 3\n3 0\n", "directed")
    parts, _ = partition_edges(g, 2, "src_hash")
    assert sorted(set(parts[0].src.tolist())) == [0, 2]
    assert sorted(set(parts[1].src.tolist())) == [1, 3]


def test_partition_block_equal_sizes():
    text = random_edge_text(2000, 100_000, seed=11)
    g = load_edge_text(text, "directed")
    # collapses duplicates; rebuild an exactly-100k-edge graph is not needed,
    # block sizing rule is exercised on whatever edge count remains
    parts, report = partition_edges(g, 8, "block")
    sizes = [p.num_edges for p in parts]
    base = g.num_edges // 8
    assert all(s in (base, base + 1) for s in sizes)
    assert sum(sizes) == g.num_edges
    if g.num_edges % 8 == 0:
        assert report.max_min_ratio == 1.0


def test_partition_errors(random_graph):
    with pytest.raises(ConfigError):
        partition_edges(random_graph, 0)
    with pytest.raises(ConfigError):
        partition_edges(random_graph, 2, "metis")


@settings(max_examples=40, deadline=None)
@given(
    num_nodes=st.integers(2, 30),
    num_edges=st.integers(1, 120),
    workers=st.integers(1, 9),
    strategy=st.sampled_from(["src_hash", "block"]),
    seed=st.integers(0, 2**32),
)
def test_partition_disjoint_cover(num_nodes, num_edges, workers, strategy, seed):
    g = load_edge_text(random_edge_text(num_nodes, num_edges, seed), "undirected")
    parts, _ = partition_edges(g, workers, strategy)
    merged = sorted(
        (int(u), int(v)) for p in parts for u, v in zip(p.src, p.dst)
    )
    expected = sorted(map(tuple, g.edge_array().tolist()))
    assert merged == expected
