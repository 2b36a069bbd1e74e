"""graphmill: distributed k-hop subgraph sampling with in-memory GCN training.

A desk-scale coordinator/worker engine: the coordinator partitions an
immutable CSR graph and balances seed nodes across workers; workers expand
fanout-sampled subgraphs concurrently with training, aggregate hot-node
neighbor lists through a reduction tree, and keep model replicas bitwise
identical through fixed-order AllReduce.
"""

__version__ = "0.1.0"

from .graph import Edge, EdgePartition, Graph, load_edge_list, neighbors, partition_edges
from .learn import GcnModel, TrainConfig, train, train_epoch
from .reduction import HotNodePolicy, NeighborShard, build_tree, tree_reduce
from .runtime import ClusterConfig, PipelineConfig, spawn_cluster
from .sampling import FanoutConfig, SamplePlan, Subgraph, generate_subgraph
from .scheduler import BalanceTable, SeedSet, build_balance_table, seeds_for_worker
from .synth import SynthSpec, synth_graph

__all__ = [
    "Edge",
    "EdgePartition",
    "Graph",
    "load_edge_list",
    "neighbors",
    "partition_edges",
    "GcnModel",
    "TrainConfig",
    "train",
    "train_epoch",
    "HotNodePolicy",
    "NeighborShard",
    "build_tree",
    "tree_reduce",
    "ClusterConfig",
    "PipelineConfig",
    "spawn_cluster",
    "FanoutConfig",
    "SamplePlan",
    "Subgraph",
    "generate_subgraph",
    "BalanceTable",
    "SeedSet",
    "build_balance_table",
    "seeds_for_worker",
    "SynthSpec",
    "synth_graph",
    "__version__",
]
