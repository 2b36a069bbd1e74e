import numpy as np
import pytest

from graphmill.graph import load_edge_text
from graphmill.rng import SplitMix64

# Verdict lines collected by the release-gate checks (test_acceptance.py);
# echoed in a terminal section at the end of the run so they stay visible
# even with output capture on.
GATE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if GATE_VERDICTS:
        terminalreporter.section("release gate")
        for line in GATE_VERDICTS:
            terminalreporter.write_line(line)


def random_edge_text(num_nodes: int, num_edges: int, seed: int) -> str:
    """Edge-list text with ids drawn uniformly (duplicates and loops allowed)."""
    rng = SplitMix64(seed)
    lines = []
    for _ in range(num_edges):
        u = rng.next_below(num_nodes)
        v = rng.next_below(num_nodes)
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def path_graph():
    # 0 - 1 - 2 - 3 undirected path
    return load_edge_text("0 1\n1 2\n2 3\n", "undirected")


@pytest.fixture
def star_graph():
    # center 0 with 5 leaves
    return load_edge_text("\n".join(f"0 {i}" for i in range(1, 6)), "undirected")


@pytest.fixture
def random_graph():
    return load_edge_text(random_edge_text(200, 800, seed=7), "undirected")
