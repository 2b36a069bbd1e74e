"""Dense GCN forward/backward, SGD, and AllReduce gradient averaging.

The model is deliberately small: dense weight matrices, ReLU between layers,
propagation H_{l+1} = relu(A_hat H_l W_l), logits read off the seed row only.
Storage is float32 by default; gradient averaging always accumulates in
float64 and in worker-index order, which is what makes replica weights
bitwise identical after every step (the consistency tests assert exact
equality, not closeness). float64 model instances exist for the
finite-difference oracle, where float32 rounding would drown the comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollectiveTimeout, ConfigError, TrainingDiverged
from .reduction import build_tree
from .rng import GOLDEN, mix64_np, stream_seed, u64_to_unit_np
from .sampling import Subgraph

TAG_WGHT = 0x57474854


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the training loop; every field has a CLI flag."""

    max_epochs: int = 50
    learning_rate: float = 0.01
    loss_threshold: float = 0.0
    num_classes: int = 4
    feature_dim: int = 16
    hidden: int = 32

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.num_classes < 2 or self.feature_dim < 1 or self.hidden < 1:
            raise ConfigError("bad model dimensions")


@dataclass(frozen=True)
class GradientSet:
    """Per-layer gradient matrices, shapes mirroring the model."""

    mats: tuple[np.ndarray, ...]

    @property
    def shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(m.shape for m in self.mats)

    def is_finite(self) -> bool:
        return all(np.isfinite(m).all() for m in self.mats)


def _hash_uniform(seed: int, shape: tuple[int, int], scale: float) -> np.ndarray:
    """Deterministic matrix with entries uniform in [-scale, scale)."""
    idx = np.arange(shape[0] * shape[1], dtype=np.uint64)
    h = mix64_np((np.uint64(seed) ^ idx) + np.uint64(GOLDEN))
    return ((u64_to_unit_np(h) * 2.0 - 1.0) * scale).reshape(shape)


class GcnModel:
    """Stack of dense layers; dims chain feature_dim -> hidden... -> classes."""

    def __init__(self, weights: list[np.ndarray]):
        if not weights:
            raise ConfigError("model needs at least one layer")
        for a, b in zip(weights, weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ConfigError(f"layer shapes do not chain: {a.shape} -> {b.shape}")
        if any(not np.isfinite(w).all() for w in weights):
            raise ConfigError("non-finite initial weights")
        self.weights = weights
        self.version = 0

    @classmethod
    def init(
        cls,
        feature_dim: int,
        hidden: int,
        num_classes: int,
        rng_seed: int,
        dtype=np.float32,
        zero_output: bool = True,
    ) -> "GcnModel":
        """Hidden layer gets hash-derived Glorot-style init; the output
        layer starts at zero unless a test needs gradients flowing through
        it from step one (zero output keeps the initial loss at ln(C))."""
        dims = [feature_dim, hidden, num_classes]
        weights = []
        for layer, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
            last = layer == len(dims) - 2
            if last and zero_output:
                w = np.zeros((d_in, d_out))
            else:
                seed = stream_seed(rng_seed, TAG_WGHT, layer)
                w = _hash_uniform(seed, (d_in, d_out), (6.0 / (d_in + d_out)) ** 0.5)
            weights.append(w.astype(dtype))
        return cls(weights)

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def feature_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "GcnModel":
        clone = GcnModel([w.copy() for w in self.weights])
        clone.version = self.version
        return clone

    def weights_equal(self, other: "GcnModel") -> bool:
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.weights, other.weights)
        ) and len(self.weights) == len(other.weights)


def normalize_adjacency(sub: Subgraph) -> np.ndarray:
    """Symmetrically normalized adjacency over local row indices, float64.

    The subgraph's edges are symmetrized locally, self-loops added, then
    A_hat = D^{-1/2} (A + I) D^{-1/2}. Isolated rows reduce to a bare 1.0
    on the diagonal.
    """
    n = sub.num_nodes
    local = {int(v): i for i, v in enumerate(sub.nodes)}
    a = np.eye(n, dtype=np.float64)
    for u, v in zip(sub.edge_src.tolist(), sub.edge_dst.tolist()):
        iu, iv = local[u], local[v]
        a[iu, iv] = 1.0
        a[iv, iu] = 1.0
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass
class ForwardCache:
    """Intermediate tensors backward needs; pinned to a model version."""

    a_hat: np.ndarray
    aggregates: list[np.ndarray] = field(repr=False, default_factory=list)
    pre_acts: list[np.ndarray] = field(repr=False, default_factory=list)
    version: int = 0


def forward(model: GcnModel, a_hat: np.ndarray, x: np.ndarray):
    """Run the stack; returns (seed-row logits, cache for backward)."""
    n = a_hat.shape[0]
    if a_hat.shape != (n, n):
        raise ConfigError(f"adjacency must be square, got {a_hat.shape}")
    if x.shape != (n, model.feature_dim):
        raise ConfigError(
            f"feature matrix {x.shape} does not match {n} nodes x {model.feature_dim}"
        )
    dt = model.dtype
    cache = ForwardCache(a_hat=a_hat.astype(dt), version=model.version)
    h = x.astype(dt)
    for layer, w in enumerate(model.weights):
        m = cache.a_hat @ h
        z = m @ w
        cache.aggregates.append(m)
        cache.pre_acts.append(z)
        h = np.maximum(z, 0) if layer < len(model.weights) - 1 else z
    return h[0].copy(), cache


def softmax_cross_entropy(logits: np.ndarray, label: int):
    """Stable softmax CE in float64; returns (loss, probability vector)."""
    z = logits.astype(np.float64)
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()
    loss = -np.log(max(p[label], 1e-300))
    return float(loss), p


def backward(model: GcnModel, cache: ForwardCache, label: int) -> GradientSet:
    """Analytic gradients of the seed-row cross-entropy w.r.t. each layer."""
    if cache.version != model.version:
        raise ConfigError("stale forward cache: model stepped since forward()")
    if not 0 <= label < model.num_classes:
        raise ConfigError(f"label {label} outside [0, {model.num_classes})")
    logits = cache.pre_acts[-1]
    _, p = softmax_cross_entropy(logits[0], label)
    d_z = np.zeros_like(logits)
    p[label] -= 1.0
    d_z[0] = p.astype(model.dtype)

    grads: list[np.ndarray] = [None] * len(model.weights)
    for layer in range(len(model.weights) - 1, -1, -1):
        grads[layer] = cache.aggregates[layer].T @ d_z
        if layer > 0:
            d_h = cache.a_hat.T @ (d_z @ model.weights[layer].T)
            d_z = d_h * (cache.pre_acts[layer - 1] > 0)
    return GradientSet(tuple(grads))


def local_grads(model: GcnModel, sub: Subgraph):
    """Forward + backward on one subgraph; returns (loss, GradientSet)."""
    a_hat = normalize_adjacency(sub)
    logits, cache = forward(model, a_hat, sub.features)
    loss, _ = softmax_cross_entropy(logits, sub.label)
    return loss, backward(model, cache, sub.label)


def evaluate(model: GcnModel, subgraphs) -> float:
    """Mean seed-row loss over subgraphs, no updates."""
    losses = []
    for sub in subgraphs:
        logits, _ = forward(model, normalize_adjacency(sub), sub.features)
        losses.append(softmax_cross_entropy(logits, sub.label)[0])
    if not losses:
        raise ConfigError("nothing to evaluate")
    return sum(losses) / len(losses)


def average_gradients(grad_sets: list[GradientSet]) -> GradientSet:
    """Mean over workers, float64 accumulation in ascending worker order.

    This is the one true summation: every worker (and the single-context
    oracle) runs exactly this so replicas stay bitwise equal.
    """
    if not grad_sets:
        raise ConfigError("nothing to average")
    first = grad_sets[0]
    acc = [m.astype(np.float64) for m in first.mats]
    for gs in grad_sets[1:]:
        if gs.shapes != first.shapes:
            raise ConfigError(f"gradient shape mismatch: {gs.shapes} vs {first.shapes}")
        for a, m in zip(acc, gs.mats):
            a += m
    inv = 1.0 / len(grad_sets)
    dt = first.mats[0].dtype
    return GradientSet(tuple((a * inv).astype(dt) for a in acc))


def _gather_ring(grads: list[GradientSet]) -> list[dict[int, GradientSet]]:
    n = len(grads)
    gathered = [{w: grads[w]} for w in range(n)]
    carry = list(range(n))
    for _ in range(n - 1):
        incoming = [carry[(w - 1) % n] for w in range(n)]
        for w in range(n):
            gathered[w][incoming[w]] = grads[incoming[w]]
        carry = incoming
    return gathered


def _gather_tree(grads: list[GradientSet]) -> list[dict[int, GradientSet]]:
    n = len(grads)
    tree = build_tree(n, 2)
    gathered = [{w: grads[w]} for w in range(n)]
    # up: children forward their accumulated sets, deepest first
    for w in range(n - 1, 0, -1):
        gathered[tree.parent[w]].update(gathered[w])
    # down: the root's complete set is broadcast along the same edges
    for w in range(1, n):
        gathered[w] = dict(gathered[tree.parent[w]])
    return gathered


def allreduce_mean(
    worker_grads: list[GradientSet | None], topology: str = "ring"
) -> list[GradientSet]:
    """Every worker ends up with the identical mean GradientSet.

    Both topologies are allgather transports; the averaging itself always
    happens locally in fixed ascending order, so ring and tree agree
    bitwise with each other and with a single-context mean.
    """
    for w, g in enumerate(worker_grads):
        if g is None:
            raise CollectiveTimeout(w, "allreduce")
    grads = list(worker_grads)
    if len(grads) == 1:
        return [average_gradients(grads)]
    ref = grads[0].shapes
    for w, g in enumerate(grads):
        if g.shapes != ref:
            raise ConfigError(f"worker {w} gradient shapes {g.shapes} != {ref}")
    if topology == "ring":
        gathered = _gather_ring(grads)
    elif topology == "tree":
        gathered = _gather_tree(grads)
    else:
        raise ConfigError(f"unknown allreduce topology {topology!r}")
    out = []
    for w, got in enumerate(gathered):
        if len(got) != len(grads):
            raise CollectiveTimeout(w, "allreduce gather")
        out.append(average_gradients([got[i] for i in sorted(got)]))
    return out


def sgd_step(model: GcnModel, grads: GradientSet, lr: float) -> None:
    if grads.shapes != tuple(w.shape for w in model.weights):
        raise ConfigError("gradient shapes do not match model")
    for w, g in zip(model.weights, grads.mats):
        w -= (lr * g).astype(model.dtype)
    model.version += 1


@dataclass
class EpochReport:
    """Losses for one epoch: (step, worker, loss) triples plus the mean."""

    epoch: int
    step_losses: list[tuple[int, int, float]]
    mean_loss: float


def train_epoch(
    models: list[GcnModel],
    per_worker_batches: list[list[Subgraph]],
    cfg: TrainConfig,
    epoch: int = 0,
    topology: str = "ring",
    on_step=None,
) -> EpochReport:
    """One synchronous pass: at each step every worker trains on its next
    subgraph, gradients are all-reduced, and every replica applies the same
    update. Raises TrainingDiverged on the first non-finite loss/gradient.
    on_step(step, models) runs after each synchronized update; the replica
    consistency audit hangs off it."""
    n = len(models)
    if len(per_worker_batches) != n:
        raise ConfigError("one batch list per model replica required")
    steps = len(per_worker_batches[0])
    if any(len(b) != steps for b in per_worker_batches):
        raise ConfigError("workers must hold equally many subgraphs")

    records: list[tuple[int, int, float]] = []
    for s in range(steps):
        grads: list[GradientSet] = []
        for w in range(n):
            sub = per_worker_batches[w][s]
            loss, g = local_grads(models[w], sub)
            if not np.isfinite(loss) or not g.is_finite():
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch} step {s} "
                    f"worker {w} seed {sub.seed}"
                )
            records.append((s, w, loss))
            grads.append(g)
        means = allreduce_mean(grads, topology)
        for w in range(n):
            sgd_step(models[w], means[w], cfg.learning_rate)
        if on_step is not None:
            on_step(s, models)
    mean = sum(r[2] for r in records) / len(records) if records else float("nan")
    return EpochReport(epoch=epoch, step_losses=records, mean_loss=mean)


@dataclass
class TrainResult:
    epochs: list[EpochReport]
    stopped_early: bool

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].mean_loss if self.epochs else float("nan")


def train(
    models: list[GcnModel],
    per_worker_batches: list[list[Subgraph]],
    cfg: TrainConfig,
    topology: str = "ring",
) -> TrainResult:
    """Epoch loop with the early-stop guard: finish when the epoch mean
    loss drops below loss_threshold or max_epochs is reached."""
    history: list[EpochReport] = []
    for epoch in range(cfg.max_epochs):
        report = train_epoch(models, per_worker_batches, cfg, epoch, topology)
        history.append(report)
        if report.mean_loss < cfg.loss_threshold:
            return TrainResult(epochs=history, stopped_early=True)
    return TrainResult(epochs=history, stopped_early=False)
