"""Synthetic data generation and size-based Dirichlet partitioning.

The split is by *size* only: class composition stays homogeneous across
clients (each class is dealt out following the same proportions), so dataset
size is a meaningful ground-truth contribution signal.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import Dataset

Array = np.ndarray

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class PartitionSpec:
    num_clients: int
    alpha: float
    seed: int

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class PartitionPlan:
    proportions: Array
    client_indices: tuple[Array, ...]

    def sizes(self) -> list[int]:
        return [len(idx) for idx in self.client_indices]


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian cluster-per-class classification task."""

    num_examples: int
    num_classes: int
    input_dim: int
    cluster_spread: float
    seed: int

    def __post_init__(self) -> None:
        if self.num_examples < self.num_classes:
            raise ValueError("need at least one example per class")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not self.cluster_spread > 0:
            raise ValueError("cluster_spread must be positive")


def sample_dirichlet(alpha: float, n: int, seed: int) -> Array:
    """Symmetric Dirichlet(alpha, ..., alpha) draw via normalized Gamma draws."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    gammas = rng.gamma(alpha, 1.0, size=n)
    # Gamma draws can underflow to 0 for tiny alpha; redraw those entries.
    while not np.all(gammas > 0.0):
        zero = gammas <= 0.0
        gammas[zero] = rng.gamma(alpha, 1.0, size=int(zero.sum()))
    return gammas / gammas.sum()


def split_by_size(data: Dataset, proportions: Sequence[float]) -> PartitionPlan:
    """Class-stratified size split with cumulative largest-remainder rounding.

    Within each class, examples are dealt to clients following the proportions;
    a running per-client quota carry keeps total sizes within one example of
    proportions[k] * len(data). Deterministic: no randomness beyond input order.
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    if proportions.ndim != 1 or proportions.size < 1:
        raise ValueError("proportions must be a non-empty vector")
    if abs(proportions.sum() - 1.0) > 1e-9:
        raise ValueError("proportions must sum to 1")
    if np.any(proportions <= 0.0):
        raise ValueError("proportions must be strictly positive")
    num_clients = proportions.size

    labels = data.labels
    classes = np.unique(labels)
    for cls in classes:
        if int((labels == cls).sum()) < num_clients:
            raise ValueError(
                f"class {int(cls)} has fewer than {num_clients} examples"
            )

    assigned = np.zeros(num_clients, dtype=np.int64)
    processed = 0
    buckets: list[list[Array]] = [[] for _ in range(num_clients)]
    for cls in classes:
        cls_idx = np.flatnonzero(labels == cls)
        m = cls_idx.size
        processed += m
        # Target cumulative counts after this class; largest-remainder on the
        # carry-adjusted quotas so global sizes track proportions exactly.
        desired = proportions * processed - assigned
        base = np.floor(desired).astype(np.int64)
        base = np.maximum(base, 0)
        leftover = m - int(base.sum())
        if leftover > 0:
            order = np.argsort(-(desired - base), kind="stable")
            base[order[:leftover]] += 1
        elif leftover < 0:
            order = np.argsort(desired - base, kind="stable")
            take = 0
            for k in order:
                while base[k] > 0 and take < -leftover:
                    base[k] -= 1
                    take += 1
        start = 0
        for k in range(num_clients):
            buckets[k].append(cls_idx[start : start + base[k]])
            start += base[k]
        assigned += base

    client_indices = tuple(
        np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        for parts in buckets
    )
    return PartitionPlan(proportions=proportions, client_indices=client_indices)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Balanced Gaussian clusters: one class center per class on a hypersphere
    of radius 3 * cluster_spread, per-example noise std = cluster_spread."""
    rng = np.random.default_rng(spec.seed)
    directions = rng.normal(size=(spec.num_classes, spec.input_dim))
    if spec.num_classes <= spec.input_dim:
        # Orthonormalize so class separation is uniform across seeds.
        q, r = np.linalg.qr(directions.T)
        directions = (q * np.sign(np.diag(r))).T
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    centers = directions / norms * (3.0 * spec.cluster_spread)

    base = spec.num_examples // spec.num_classes
    extra = spec.num_examples % spec.num_classes
    counts = [base + (1 if c < extra else 0) for c in range(spec.num_classes)]
    labels = np.concatenate(
        [np.full(count, c, dtype=np.int64) for c, count in enumerate(counts)]
    )
    noise = rng.normal(0.0, spec.cluster_spread, size=(spec.num_examples, spec.input_dim))
    features = centers[labels] + noise

    perm = rng.permutation(spec.num_examples)
    return Dataset(features[perm], labels[perm], spec.num_classes)


def _read_idx_header(raw: bytes, path: Path, expected_magic: int, ndim: int) -> tuple[list[int], int]:
    header_len = 4 * (1 + ndim)
    if len(raw) < header_len:
        raise ValueError(f"{path}: truncated file")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise ValueError(f"{path}: bad magic 0x{magic:08x}")
    dims = list(struct.unpack(f">{ndim}I", raw[4:header_len]))
    return dims, header_len


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load an MNIST-style IDX image/label file pair.

    Pixels are scaled to [0, 1] and images flattened row-major.
    """
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    image_raw = images_path.read_bytes()
    label_raw = labels_path.read_bytes()

    (count, rows, cols), offset = _read_idx_header(image_raw, images_path, IDX_IMAGE_MAGIC, 3)
    expected = count * rows * cols
    pixels = np.frombuffer(image_raw, dtype=np.uint8, offset=offset)
    if pixels.size < expected:
        raise ValueError(f"{images_path}: truncated file")
    features = pixels[:expected].reshape(count, rows * cols).astype(np.float64) / 255.0

    (label_count,), offset = _read_idx_header(label_raw, labels_path, IDX_LABEL_MAGIC, 1)
    label_bytes = np.frombuffer(label_raw, dtype=np.uint8, offset=offset)
    if label_bytes.size < label_count:
        raise ValueError(f"{labels_path}: truncated file")
    if label_count != count:
        raise ValueError(
            f"count mismatch: {count} images vs {label_count} labels"
        )
    labels = label_bytes[:label_count].astype(np.int64)
    num_classes = max(int(labels.max()) + 1, 2) if labels.size else 2
    return Dataset(features, labels, num_classes)
