"""Deterministic synthetic node features and labels.

Production features are external to this engine, so nodes get hash-derived
feature vectors in [-1, 1): entry (node, j) is a pure function of the
feature seed. Two label schemes exist: independent hash labels (default)
and a linearly-recoverable task where the label is the argmax of a fixed
random linear map of the node's features, which gives training something
real to learn in tests and demos.
"""

from __future__ import annotations

import numpy as np

from .rng import GOLDEN, MASK64, mix64, mix64_np, stream_seed, u64_to_unit_np

TAG_SAMPLE = 0x534D504C
TAG_FEAT = 0x46454154
TAG_LABEL = 0x4C41424C
TAG_TASK = 0x5441534B


class HashFeatureProvider:
    """Hash features; labels are independent hashes mod num_classes."""

    def __init__(self, base_seed: int, feature_dim: int, num_classes: int):
        if feature_dim < 1 or num_classes < 2:
            raise ValueError("feature_dim >= 1 and num_classes >= 2 required")
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.feat_seed = stream_seed(base_seed, TAG_FEAT)
        self.label_seed = stream_seed(base_seed, TAG_LABEL)

    def features(self, nodes: np.ndarray) -> np.ndarray:
        """float32 matrix (len(nodes), feature_dim), entries in [-1, 1)."""
        nodes = np.asarray(nodes, dtype=np.uint64)
        h = mix64_np((np.uint64(self.feat_seed) ^ nodes) + np.uint64(GOLDEN))
        dims = np.arange(self.feature_dim, dtype=np.uint64)
        grid = mix64_np((h[:, None] ^ dims[None, :]) + np.uint64(GOLDEN))
        vals = u64_to_unit_np(grid) * 2.0 - 1.0
        return vals.astype(np.float32)

    def label(self, node: int) -> int:
        h = mix64(((self.label_seed ^ (node & MASK64)) + GOLDEN) & MASK64)
        return int(h % self.num_classes)


class LinearTaskProvider(HashFeatureProvider):
    """Same features, but label(v) = argmax(W_true @ x_v).

    W_true is a fixed hash-derived (num_classes, feature_dim) float64
    matrix, so labels are exactly recoverable by a linear model on the raw
    features.
    """

    def __init__(self, base_seed: int, feature_dim: int, num_classes: int):
        super().__init__(base_seed, feature_dim, num_classes)
        task_seed = stream_seed(base_seed, TAG_TASK)
        rows = np.arange(num_classes, dtype=np.uint64)
        h = mix64_np((np.uint64(task_seed) ^ rows) + np.uint64(GOLDEN))
        dims = np.arange(feature_dim, dtype=np.uint64)
        grid = mix64_np((h[:, None] ^ dims[None, :]) + np.uint64(GOLDEN))
        self.true_weights = u64_to_unit_np(grid) * 2.0 - 1.0

    def label(self, node: int) -> int:
        x = self.features(np.array([node], dtype=np.int64))[0].astype(np.float64)
        return int(np.argmax(self.true_weights @ x))


def make_provider(kind: str, base_seed: int, feature_dim: int, num_classes: int):
    if kind == "hash":
        return HashFeatureProvider(base_seed, feature_dim, num_classes)
    if kind == "linear":
        return LinearTaskProvider(base_seed, feature_dim, num_classes)
    raise ValueError(f"unknown feature provider {kind!r}")
