"""Coordinator-side seed-to-worker balance table.

Seeds are shuffled with a deterministic Fisher-Yates pass, then handed out
round-robin. When the seed count is not a multiple of the worker count, the
trailing remainder is discarded (and reported) so that every worker ends up
with exactly the same number of seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .rng import SplitMix64, shuffle


@dataclass(frozen=True)
class SeedSet:
    """Ordered seed nodes plus the shuffle seed; duplicates are rejected."""

    seeds: tuple[int, ...]
    rng_seed: int

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seed nodes are not allowed")

    def __len__(self) -> int:
        return len(self.seeds)

    def validate_against(self, num_nodes: int) -> None:
        for s in self.seeds:
            if not 0 <= s < num_nodes:
                raise ConfigError(f"seed {s} out of range [0, {num_nodes})")


@dataclass(frozen=True)
class BalanceTable:
    """Seed -> worker assignment with exact per-worker balance.

    worker_seeds[w] lists worker w's seeds in shuffled-assignment order;
    every list has the same length floor(|S| / num_workers).
    """

    num_workers: int
    assignment: dict[int, int]
    worker_seeds: tuple[tuple[int, ...], ...]
    discarded: tuple[int, ...]

    @property
    def per_worker_counts(self) -> list[int]:
        return [len(ws) for ws in self.worker_seeds]

    @property
    def seeds_per_worker(self) -> int:
        return len(self.worker_seeds[0]) if self.worker_seeds else 0


def build_balance_table(seeds: SeedSet, num_workers: int) -> BalanceTable:
    """Shuffle seeds and assign them round-robin; discard the remainder."""
    if num_workers < 1:
        raise ConfigError("num_workers must be >= 1")
    if len(seeds) == 0:
        raise ConfigError("seed set is empty")

    shuffled = list(seeds.seeds)
    shuffle(shuffled, SplitMix64(seeds.rng_seed))

    kept = (len(shuffled) // num_workers) * num_workers
    assignment: dict[int, int] = {}
    worker_seeds: list[list[int]] = [[] for _ in range(num_workers)]
    for i in range(kept):
        assignment[shuffled[i]] = i % num_workers
        worker_seeds[i % num_workers].append(shuffled[i])
    return BalanceTable(
        num_workers=num_workers,
        assignment=assignment,
        worker_seeds=tuple(tuple(ws) for ws in worker_seeds),
        discarded=tuple(shuffled[kept:]),
    )


def seeds_for_worker(table: BalanceTable, worker: int) -> tuple[int, ...]:
    if not 0 <= worker < table.num_workers:
        raise ConfigError(f"worker {worker} out of range [0, {table.num_workers})")
    return table.worker_seeds[worker]


def load_seed_file(path: str) -> list[int]:
    """One node id per line; blank lines and `#` comments skipped."""
    out: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                out.append(int(stripped))
            except ValueError:
                raise ConfigError(f"seed file line {line_no}: not an integer: {stripped!r}") from None
    return out
