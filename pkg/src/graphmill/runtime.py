"""In-process cluster: worker threads, typed channels, and the pipeline.

One worker = one training context plus (in pipelined mode) a generator
thread feeding a bounded queue. Inter-worker traffic is message passing
only: a ring link for gradient allgather, tree up/down links for hierarchical
reduction, and the per-worker subgraph queue between a worker's own
generator and trainer. All shared inputs (Graph, BalanceTable, partitions)
are immutable, so determinism reduces to fixed-order local arithmetic,
which the replica-consistency and mode-equivalence tests pin down.

Nothing here depends on thread scheduling for correctness: gather results
are keyed by origin and averaged in ascending worker order, and merges are
commutative, so any interleaving yields bitwise-identical models.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CollectiveTimeout,
    ConfigError,
    TrainingDiverged,
    VerificationFailed,
    WorkerFault,
)
from .features import make_provider
from .graph import EdgePartition, Graph, partition_edges
from .learn import (
    GcnModel,
    GradientSet,
    TrainConfig,
    average_gradients,
    local_grads,
    sgd_step,
)
from .reduction import (
    HotNodePolicy,
    NeighborShard,
    ReductionTree,
    build_tree,
    hot_nodes,
    local_shard,
    merge_shards,
)
from .rng import SplitMix64, stream_seed
from .sampling import FanoutConfig, SamplePlan, Subgraph, SubgraphGenerator
from .scheduler import BalanceTable, seeds_for_worker

TAG_JITTER = 0x4A495454

_VARIANT_PAYLOAD = {
    "ShardContribution": NeighborShard,
    "ReduceResult": NeighborShard,
    "GradChunk": tuple,
    "SubgraphReady": Subgraph,
    "Shutdown": type(None),
}


@dataclass(frozen=True)
class Message:
    """Typed envelope for everything that crosses a channel."""

    variant: str
    sender: int
    payload: object = None

    def __post_init__(self):
        want = _VARIANT_PAYLOAD.get(self.variant)
        if want is None:
            raise ConfigError(f"unknown message variant {self.variant!r}")
        if not isinstance(self.payload, want):
            raise ConfigError(
                f"{self.variant} payload must be {want.__name__}, "
                f"got {type(self.payload).__name__}"
            )


class Channel:
    """Bounded FIFO with abort-aware blocking and timeout diagnostics."""

    def __init__(self, name: str, capacity: int = 0, abort: threading.Event | None = None):
        self._q: queue.Queue = queue.Queue(maxsize=capacity)
        self.name = name
        self._abort = abort if abort is not None else threading.Event()

    def put(self, msg: Message, timeout_s: float, owner: int) -> None:
        deadline = time.monotonic() + timeout_s
        while True:
            if self._abort.is_set():
                raise CollectiveTimeout(owner, f"send on {self.name} (run aborted)")
            try:
                self._q.put(msg, timeout=0.05)
                return
            except queue.Full:
                if time.monotonic() > deadline:
                    raise CollectiveTimeout(owner, f"send on {self.name}") from None

    def get(self, timeout_s: float, owner: int) -> Message:
        deadline = time.monotonic() + timeout_s
        while True:
            if self._abort.is_set():
                raise CollectiveTimeout(owner, f"receive on {self.name} (run aborted)")
            try:
                return self._q.get(timeout=0.05)
            except queue.Empty:
                if time.monotonic() > deadline:
                    raise CollectiveTimeout(owner, f"receive on {self.name}") from None

    def qsize(self) -> int:
        return self._q.qsize()

    def try_get(self) -> Message | None:
        try:
            return self._q.get(timeout=0.05)
        except queue.Empty:
            return None


@dataclass(frozen=True)
class PipelineConfig:
    """How generation feeds training.

    queue_capacity bounds the per-worker subgraph queue; mode `pipelined`
    overlaps generation with first-epoch training, `staged` finishes all
    generation first. regen_per_epoch regenerates instead of replaying from
    memory. gen_jitter_s/train_jitter_s inject deterministic per-event
    sleeps for the backpressure stress tests.
    """

    queue_capacity: int = 64
    mode: str = "pipelined"
    regen_per_epoch: bool = False
    timeout_s: float = 30.0
    gen_jitter_s: float = 0.0
    train_jitter_s: float = 0.0

    def __post_init__(self):
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.mode not in ("pipelined", "staged"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")


@dataclass(frozen=True)
class ClusterConfig:
    """Everything a run needs beyond the graph and the balance table."""

    fanouts: FanoutConfig = FanoutConfig()
    plan: SamplePlan = SamplePlan(0)
    train: TrainConfig = TrainConfig()
    pipeline: PipelineConfig = PipelineConfig()
    hot_policy: HotNodePolicy = HotNodePolicy()
    provider_kind: str = "hash"
    feature_rng_seed: int = 0
    model_rng_seed: int = 0
    tree_arity: int = 2
    topology: str = "ring"
    partition_strategy: str = "src_hash"
    kernel: str | None = None

    def __post_init__(self):
        if self.topology not in ("ring", "tree"):
            raise ConfigError(f"unknown allreduce topology {self.topology!r}")


@dataclass
class WorkerCounters:
    generated: int = 0
    trained: int = 0
    nodes_sampled: int = 0
    busy_s: float = 0.0
    grad_messages: int = 0
    reduce_messages: int = 0
    queue_occupancy: list[int] = field(default_factory=list)


class WorkerContext:
    """One worker's private state plus its channel endpoints."""

    def __init__(self, wid: int, seeds, partition: EdgePartition, model: GcnModel,
                 abort: threading.Event, queue_capacity: int):
        self.id = wid
        self.seeds = tuple(seeds)
        self.partition = partition
        self.model = model
        self.sub_queue = Channel(f"subq[{wid}]", queue_capacity, abort)
        self.ring_in = Channel(f"ring->{wid}", 0, abort)
        self.tree_up_in = Channel(f"up->{wid}", 0, abort)
        self.tree_down_in = Channel(f"down->{wid}", 0, abort)
        # the hot gather gets its own up-channel so a leaf that finishes
        # the phase early cannot interleave gradient traffic into a parent
        # still collecting shards
        self.gather_in = Channel(f"gather->{wid}", 0, abort)
        self.counters = WorkerCounters()
        self.replay: list[Subgraph] = []
        self.consumed: dict[int, list[int]] = {}
        self.loss_history: list[float] = []
        self.threads: list[threading.Thread] = []
        self.fault: BaseException | None = None


@dataclass
class MetricsReport:
    """Run accounting; serialized to JSON by the CLI.

    Schema: {subgraphs_per_s, nodes_per_s, wall_s: {gather, run},
    totals: {generated, trained, nodes_sampled, grad_messages,
    reduce_messages}, per_worker: [{worker, generated, trained,
    nodes_sampled, busy_fraction, queue_occupancy}], epochs: [mean_loss]}
    """

    subgraphs_per_s: float
    nodes_per_s: float
    wall_s: dict[str, float]
    totals: dict[str, int]
    per_worker: list[dict]
    epochs: list[float]

    def to_dict(self) -> dict:
        return {
            "subgraphs_per_s": self.subgraphs_per_s,
            "nodes_per_s": self.nodes_per_s,
            "wall_s": self.wall_s,
            "totals": self.totals,
            "per_worker": self.per_worker,
            "epochs": self.epochs,
        }


class Cluster:
    """Coordinator handle over the worker contexts of one run."""

    def __init__(self, graph: Graph, table: BalanceTable, cfg: ClusterConfig):
        if table.num_workers < 1:
            raise ConfigError("cluster needs at least one worker")
        self.graph = graph
        self.table = table
        self.cfg = cfg
        self.abort = threading.Event()
        self.tree: ReductionTree = build_tree(table.num_workers, cfg.tree_arity)
        self.provider = make_provider(
            cfg.provider_kind, cfg.feature_rng_seed,
            cfg.train.feature_dim, cfg.train.num_classes,
        )
        partitions, self.partition_report = partition_edges(
            graph, table.num_workers, cfg.partition_strategy
        )
        base = GcnModel.init(
            cfg.train.feature_dim, cfg.train.hidden, cfg.train.num_classes,
            cfg.model_rng_seed,
        )
        self.workers = [
            WorkerContext(
                w, seeds_for_worker(table, w), partitions[w], base.copy(),
                self.abort, cfg.pipeline.queue_capacity,
            )
            for w in range(table.num_workers)
        ]
        self.hot_results = Channel("hot-results", 0, self.abort)
        self.hot_list = hot_nodes(graph, cfg.hot_policy)
        self.epoch_losses: list[float] = []
        self.wall: dict[str, float] = {}
        self._ran = False

    # ------------------------------------------------------------ plumbing

    def _jitter(self, tag_worker: int, event: int, amount: float) -> None:
        if amount <= 0:
            return
        u = SplitMix64(
            stream_seed(self.cfg.plan.base_rng_seed, TAG_JITTER, tag_worker, event)
        ).next_unit()
        time.sleep(u * amount)

    def _send_ring(self, w: int, payload: tuple) -> None:
        nxt = self.workers[(w + 1) % len(self.workers)]
        nxt.ring_in.put(
            Message("GradChunk", w, payload), self.cfg.pipeline.timeout_s, w
        )
        self.workers[w].counters.grad_messages += 1

    def _allgather(self, w: int, item) -> dict[int, object]:
        """Collect every worker's item, keyed by origin, over the
        configured topology. Used for both gradients and loss stats."""
        n = len(self.workers)
        timeout = self.cfg.pipeline.timeout_s
        me = self.workers[w]
        if n == 1:
            return {0: item}
        if self.cfg.topology == "ring":
            got: dict[int, object] = {w: item}
            carry = (w, item)
            for _ in range(n - 1):
                self._send_ring(w, carry)
                msg = me.ring_in.get(timeout, w)
                origin, obj = msg.payload
                got[origin] = obj
                carry = (origin, obj)
            return got
        # tree: gather up to the root, then broadcast the full dict down
        got = {w: item}
        for _ in self.tree.children[w]:
            msg = me.tree_up_in.get(timeout, w)
            got.update(msg.payload[1])
        if w != 0:
            parent = self.workers[self.tree.parent[w]]
            parent.tree_up_in.put(
                Message("GradChunk", w, (w, got)), timeout, w
            )
            me.counters.grad_messages += 1
            full = me.tree_down_in.get(timeout, w).payload[1]
        else:
            full = got
        for c in self.tree.children[w]:
            self.workers[c].tree_down_in.put(
                Message("GradChunk", w, (w, full)), timeout, w
            )
            me.counters.grad_messages += 1
        return full

    # ------------------------------------------------------- phase: gather

    def _hot_gather(self, w: int) -> None:
        """Tree-reduce each hot node's adjacency from the edge partitions.

        The values duplicate what the CSR already knows, and the root
        verifies exactly that; the point is running the reduction protocol
        over real channels with real counters every run.
        """
        me = self.workers[w]
        timeout = self.cfg.pipeline.timeout_s
        children = set(self.tree.children[w])
        hot_set = set(self.hot_list)
        # children advance through the hot list at their own pace, so a
        # fast subtree's shard for a later node can arrive before a slow
        # sibling's shard for the current one; stash those
        pending: dict[tuple[int, int], NeighborShard] = {}
        for v in self.hot_list:
            shard = local_shard(me.partition, v)
            expect = set(children)
            while expect:
                ready = next((c for c in expect if (c, v) in pending), None)
                if ready is not None:
                    shard = merge_shards(shard, pending.pop((ready, v)))
                    expect.discard(ready)
                    continue
                msg = me.gather_in.get(timeout, w)
                node = msg.payload.hot_node
                if msg.sender not in children or node not in hot_set:
                    raise ConfigError(
                        f"unexpected shard from worker {msg.sender} at {w} "
                        f"(node {node})"
                    )
                if msg.sender in expect and node == v:
                    shard = merge_shards(shard, msg.payload)
                    expect.discard(msg.sender)
                else:
                    pending[(msg.sender, node)] = msg.payload
            if w == 0:
                full = self.graph.neighbors(v)
                if list(shard.neighbors) != full.tolist():
                    raise VerificationFailed(
                        f"hot gather for node {v}: tree result disagrees with CSR"
                    )
                self.hot_results.put(
                    Message("ReduceResult", 0, shard), timeout, w
                )
            else:
                parent = self.workers[self.tree.parent[w]]
                parent.gather_in.put(
                    Message("ShardContribution", w, shard), timeout, w
                )
                me.counters.reduce_messages += 1

    # --------------------------------------------------- phase: generation

    def _generate(
        self, w: int, push: bool, epoch: int = 0, stop: threading.Event | None = None
    ) -> list[Subgraph]:
        me = self.workers[w]
        gen = SubgraphGenerator(
            self.graph, self.cfg.fanouts, self.cfg.plan, self.provider,
            self.cfg.kernel,
        )
        out: list[Subgraph] = []
        for seq, seed in enumerate(me.seeds):
            if stop is not None and stop.is_set():
                return out
            t0 = time.perf_counter()
            sg = gen.generate(seed, seq=seq)
            me.counters.busy_s += time.perf_counter() - t0
            me.counters.generated += 1
            me.counters.nodes_sampled += sg.num_nodes
            self._jitter(w, epoch * len(me.seeds) + seq, self.cfg.pipeline.gen_jitter_s)
            if push:
                me.counters.queue_occupancy.append(me.sub_queue.qsize())
                me.sub_queue.put(
                    Message("SubgraphReady", w, sg), self.cfg.pipeline.timeout_s, w
                )
            else:
                out.append(sg)
        if push:
            me.sub_queue.put(
                Message("Shutdown", w), self.cfg.pipeline.timeout_s, w
            )
        return out

    def _generator_body(self, w: int, stop: threading.Event) -> None:
        epochs = self.cfg.train.max_epochs if self.cfg.pipeline.regen_per_epoch else 1
        for epoch in range(epochs):
            if stop.is_set():
                return
            self._generate(w, push=True, epoch=epoch, stop=stop)

    # ----------------------------------------------------- phase: training

    def _train_step(self, w: int, sub: Subgraph) -> float:
        me = self.workers[w]
        t0 = time.perf_counter()
        loss, grads = local_grads(me.model, sub)
        if not np.isfinite(loss) or not grads.is_finite():
            raise TrainingDiverged(
                f"worker {w} diverged on seed {sub.seed} (loss {loss})"
            )
        gathered = self._allgather(w, grads)
        if len(gathered) != len(self.workers):
            raise CollectiveTimeout(w, "gradient allgather")
        mean = average_gradients([gathered[i] for i in sorted(gathered)])
        sgd_step(me.model, mean, self.cfg.train.learning_rate)
        me.counters.busy_s += time.perf_counter() - t0
        me.counters.trained += 1
        self._jitter(w, 1_000_000 + me.counters.trained, self.cfg.pipeline.train_jitter_s)
        return loss

    def _epoch_mean(self, w: int, loss_sum: float, steps: int) -> float:
        """Global mean loss, identical on every worker, for the early stop."""
        pairs = self._allgather(w, (loss_sum, steps))
        total = 0.0
        count = 0
        for origin in sorted(pairs):
            s, c = pairs[origin]
            total += s
            count += c
        return total / count if count else float("nan")

    def _pull_epoch(self, w: int, epoch: int) -> float:
        """Consume one epoch's subgraphs from the queue, train, audit."""
        me = self.workers[w]
        timeout = self.cfg.pipeline.timeout_s
        consumed: list[int] = []
        loss_sum = 0.0
        keep = not self.cfg.pipeline.regen_per_epoch
        for _ in range(len(me.seeds)):
            msg = me.sub_queue.get(timeout, w)
            if msg.variant != "SubgraphReady":
                raise ConfigError(f"worker {w} expected a subgraph, got {msg.variant}")
            sub = msg.payload
            if keep:
                me.replay.append(sub)
            consumed.append(sub.seq)
            loss_sum += self._train_step(w, sub)
        tail = me.sub_queue.get(timeout, w)
        if tail.variant != "Shutdown":
            raise ConfigError(f"worker {w} queue not drained after epoch {epoch}")
        me.consumed[epoch] = consumed
        return loss_sum

    def _worker_body(self, w: int) -> None:
        me = self.workers[w]
        cfg = self.cfg
        self._hot_gather(w)

        stop = threading.Event()
        gen_thread = None
        pulls_from_queue = 0
        if cfg.pipeline.mode == "pipelined":
            gen_thread = threading.Thread(
                target=self._run_guarded, args=(w, self._generator_body, w, stop),
                name=f"generator-{w}", daemon=True,
            )
            me.threads.append(gen_thread)
            gen_thread.start()
            pulls_from_queue = cfg.train.max_epochs if cfg.pipeline.regen_per_epoch else 1
        elif not cfg.pipeline.regen_per_epoch:
            me.replay = self._generate(w, push=False)

        try:
            for epoch in range(cfg.train.max_epochs):
                if epoch < pulls_from_queue:
                    loss_sum = self._pull_epoch(w, epoch)
                else:
                    batch = me.replay
                    if cfg.pipeline.mode == "staged" and cfg.pipeline.regen_per_epoch:
                        batch = self._generate(w, push=False, epoch=epoch)
                    loss_sum = 0.0
                    consumed = []
                    for sub in batch:
                        consumed.append(sub.seq)
                        loss_sum += self._train_step(w, sub)
                    me.consumed[epoch] = consumed
                mean = self._epoch_mean(w, loss_sum, len(me.seeds))
                me.loss_history.append(mean)
                if mean < cfg.train.loss_threshold:
                    break
        finally:
            stop.set()
            if gen_thread is not None:
                # free a generator blocked on a full queue after an early
                # stop, then let it notice the stop flag and exit
                while gen_thread.is_alive():
                    me.sub_queue.try_get()
                while me.sub_queue.try_get() is not None:
                    pass

    def _run_guarded(self, w: int, fn, *args) -> None:
        try:
            fn(*args)
        except BaseException as exc:  # noqa: BLE001 - forwarded to coordinator
            if self.workers[w].fault is None:
                self.workers[w].fault = exc
            self.abort.set()

    # -------------------------------------------------------------- driver

    def run(self) -> MetricsReport:
        """Execute gather, generation, and training; join everything."""
        if self._ran:
            raise ConfigError("cluster already ran; spawn a fresh one")
        self._ran = True
        t_start = time.monotonic()
        for me in self.workers:
            t = threading.Thread(
                target=self._run_guarded, args=(me.id, self._worker_body, me.id),
                name=f"worker-{me.id}", daemon=True,
            )
            me.threads.insert(0, t)
        for me in self.workers:
            me.threads[0].start()
        for me in self.workers:
            for t in me.threads:
                t.join(timeout=max(60.0, self.cfg.pipeline.timeout_s * 4))
        self.wall["run"] = time.monotonic() - t_start

        leaked = [t.name for me in self.workers for t in me.threads if t.is_alive()]
        if leaked:
            self.abort.set()
            raise WorkerFault(-1, RuntimeError(f"threads failed to join: {leaked}"))
        for me in self.workers:
            if me.fault is not None:
                raise WorkerFault(me.id, me.fault) from me.fault

        self.epoch_losses = list(self.workers[0].loss_history)
        for me in self.workers[1:]:
            same = len(me.loss_history) == len(self.epoch_losses) and all(
                a == b or (np.isnan(a) and np.isnan(b))
                for a, b in zip(me.loss_history, self.epoch_losses)
            )
            if not same:
                raise VerificationFailed(
                    f"worker {me.id} saw a different loss history; "
                    "collective early stop is broken"
                )
        return self.collect_metrics()

    def audit_exactly_once(self) -> None:
        """Every epoch, every worker consumed each of its seqs exactly once."""
        epochs = len(self.epoch_losses)
        for me in self.workers:
            want = list(range(len(me.seeds)))
            for epoch in range(epochs):
                got = me.consumed.get(epoch)
                if got is None or sorted(got) != want or len(got) != len(want):
                    raise VerificationFailed(
                        f"worker {me.id} epoch {epoch} consumed {got}, expected "
                        f"each of {want} exactly once"
                    )

    def collect_metrics(self) -> MetricsReport:
        wall = self.wall.get("run", 0.0)
        totals = {
            "generated": sum(m.counters.generated for m in self.workers),
            "trained": sum(m.counters.trained for m in self.workers),
            "nodes_sampled": sum(m.counters.nodes_sampled for m in self.workers),
            "grad_messages": sum(m.counters.grad_messages for m in self.workers),
            "reduce_messages": sum(m.counters.reduce_messages for m in self.workers),
        }
        per_worker = [
            {
                "worker": m.id,
                "generated": m.counters.generated,
                "trained": m.counters.trained,
                "nodes_sampled": m.counters.nodes_sampled,
                "busy_fraction": (m.counters.busy_s / wall) if wall > 0 else 0.0,
                "queue_occupancy": _histogram(
                    m.counters.queue_occupancy, self.cfg.pipeline.queue_capacity
                ),
            }
            for m in self.workers
        ]
        return MetricsReport(
            subgraphs_per_s=totals["generated"] / wall if wall > 0 else 0.0,
            nodes_per_s=totals["nodes_sampled"] / wall if wall > 0 else 0.0,
            wall_s=dict(self.wall),
            totals=totals,
            per_worker=per_worker,
            epochs=list(self.epoch_losses),
        )

    def drain_hot_results(self) -> dict[int, tuple[int, ...]]:
        out = {}
        while self.hot_results.qsize():
            msg = self.hot_results.get(1.0, -1)
            out[msg.payload.hot_node] = msg.payload.neighbors
        return out


def _histogram(samples: list[int], capacity: int) -> list[int]:
    counts = [0] * (capacity + 1)
    for s in samples:
        counts[min(s, capacity)] += 1
    return counts


def spawn_cluster(graph: Graph, table: BalanceTable, cfg: ClusterConfig) -> Cluster:
    """Build coordinator and worker contexts; threads start inside run()."""
    return Cluster(graph, table, cfg)
