"""Tests for the oracle runner: the checks pass on healthy inputs and
catch injected corruption, naming where it happened."""

import pytest

from graphmill.features import make_provider
from graphmill.learn import TrainConfig
from graphmill.reduction import HotNodePolicy
from graphmill.rng import SplitMix64
from graphmill.runtime import ClusterConfig, PipelineConfig
from graphmill.sampling import FanoutConfig, SamplePlan, generate_subgraph
from graphmill.scheduler import SeedSet
from graphmill.synth import SynthSpec, synth_graph
from graphmill.verify import (
    check_generation,
    check_reduction,
    check_training,
    reference_digests,
    reference_subgraph,
    run_verify,
    _adjacency,
)


@pytest.fixture(scope="module")
def graph():
    return synth_graph(SynthSpec(num_nodes=400, num_edges=2400,
                                 model="powerlaw", rng_seed=17))


@pytest.fixture(scope="module")
def seed_set(graph):
    rng = SplitMix64(5)
    seeds = sorted(set(rng.next_below(graph.num_nodes) for _ in range(48)))
    return SeedSet(tuple(seeds), rng_seed=2)


def make_cluster_cfg(plan=None):
    return ClusterConfig(
        fanouts=FanoutConfig((5, 3)),
        plan=plan or SamplePlan(base_rng_seed=21),
        train=TrainConfig(hidden=8, num_classes=3, feature_dim=10,
                          max_epochs=3, learning_rate=0.05, loss_threshold=0.0),
        pipeline=PipelineConfig(queue_capacity=16, mode="staged", timeout_s=20.0),
        hot_policy=HotNodePolicy(degree_threshold=5000),
        feature_rng_seed=9,
        model_rng_seed=4,
    )


def test_reference_matches_kernel_per_seed(graph):
    # spot check: reference digest equals the kernel-built subgraph digest
    cfg = FanoutConfig((5, 3))
    plan = SamplePlan(base_rng_seed=21)
    provider = make_provider("hash", 9, 10, 3)
    adj = _adjacency(graph)
    for seed in (0, 7, 133, 399):
        ref = reference_subgraph(adj, seed, cfg, plan, provider)
        got = generate_subgraph(graph, seed, cfg, plan, provider)
        assert ref.digest() == got.digest(), seed


def test_generation_check_passes(graph, seed_set):
    provider = make_provider("hash", 9, 10, 3)
    result = check_generation(
        graph, seed_set, FanoutConfig((5, 3)), SamplePlan(21), provider,
        worker_counts=(1, 2, 4),
    )
    assert result.ok, result.detail


def test_generation_check_names_corrupted_seed(graph, seed_set):
    provider = make_provider("hash", 9, 10, 3)
    victim = seed_set.seeds[3]
    plan = SamplePlan(base_rng_seed=21, corrupt_seed=victim)
    result = check_generation(
        graph, seed_set, FanoutConfig((5, 3)), plan, provider,
        worker_counts=(1,),
    )
    assert not result.ok
    assert str(victim) in result.detail


def test_reference_ignores_corruption_hook(graph):
    # the oracle must not inherit the fault it is supposed to catch
    provider = make_provider("hash", 9, 10, 3)
    cfg = FanoutConfig((5, 3))
    clean = reference_digests(graph, [11], cfg, SamplePlan(21), provider)
    hooked = reference_digests(
        graph, [11], cfg, SamplePlan(21, corrupt_seed=11), provider)
    assert clean == hooked


def test_reduction_check_passes():
    result = check_reduction(max_workers=6, trials=10, rng_seed=1)
    assert result.ok, result.detail


def test_training_check_passes(graph, seed_set):
    result = check_training(graph, seed_set, make_cluster_cfg(), num_workers=3)
    assert result.ok, result.detail


def test_run_verify_all_green(graph, seed_set):
    report = run_verify(graph, seed_set, make_cluster_cfg(),
                        worker_counts=(1, 3), reduction_trials=5)
    assert report.ok
    lines = report.lines()
    assert len(lines) == 3
    assert all(line.startswith("[PASS]") for line in lines)


def test_run_verify_red_on_corruption(graph, seed_set):
    victim = seed_set.seeds[0]
    cfg = make_cluster_cfg(plan=SamplePlan(21, corrupt_seed=victim))
    report = run_verify(graph, seed_set, cfg,
                        worker_counts=(1,), reduction_trials=3)
    assert not report.ok
    assert any(line.startswith("[FAIL] generation") for line in report.lines())
