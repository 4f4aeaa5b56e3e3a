"""Synthetic datasets, CSV loading, and class-incremental task streams.

Datasets are plain (features, labels) numpy pairs with features normalized to
[0, 1]. Task streams follow the "base u classes, then increments of v classes"
protocol; class order is seed-shuffled so label ordering carries no signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecc_sim.exceptions import ParseError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, D) float64, values in [0, 1]
    labels: np.ndarray  # (N,) int64
    n_classes: int
    name: str = "dataset"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must have equal length")
        if len(self.labels) and int(self.labels.max()) >= self.n_classes:
            raise ValueError("label out of range for declared class count")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.n_classes,
                       name or self.name)


@dataclass(frozen=True)
class TaskSplit:
    index: int  # 1-based task number
    class_ids: tuple[int, ...]  # global labels, in introduction order
    train: Dataset
    test: Dataset


@dataclass(frozen=True)
class TaskStream:
    splits: list[TaskSplit]
    base_classes: int  # u
    increment_classes: int  # v

    @property
    def n_tasks(self) -> int:
        return len(self.splits)

    @property
    def class_order(self) -> tuple[int, ...]:
        """Global labels in the order they are introduced across tasks."""
        return tuple(c for split in self.splits for c in split.class_ids)


def generate_blobs(seed: int, n_classes: int, dim: int, n_per_class: int,
                   spread: float) -> Dataset:
    """Isotropic Gaussian blobs, one per class, clamped to [0, 1]^dim."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if dim < 1 or n_per_class < 1:
        raise ValueError("dim and n_per_class must be positive")
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(n_classes, dim))
    feats = []
    labels = []
    for k in range(n_classes):
        pts = centers[k] + rng.normal(0.0, spread, size=(n_per_class, dim))
        feats.append(np.clip(pts, 0.0, 1.0))
        labels.append(np.full(n_per_class, k, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labels), n_classes,
                   name=f"blobs-k{n_classes}-d{dim}-s{seed}")


def load_csv(path) -> Dataset:
    """Load a header-free `label,f_1,...,f_D` CSV."""
    feats = []
    labels = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ParseError("expected a label and at least one feature",
                                 row=row_no)
            try:
                label = int(parts[0])
            except ValueError:
                raise ParseError(f"non-integer label {parts[0]!r}",
                                 row=row_no) from None
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(
                    f"ragged row: {len(parts) - 1} features, expected {dim}",
                    row=row_no)
            try:
                feats.append([float(v) for v in parts[1:]])
            except ValueError:
                raise ParseError("non-numeric feature value", row=row_no) from None
            labels.append(label)
    if not feats:
        raise ValueError(f"empty dataset file: {path}")
    labels_arr = np.asarray(labels, dtype=np.int64)
    if labels_arr.min() < 0:
        raise ParseError("negative label")
    return Dataset(np.asarray(feats, dtype=np.float64), labels_arr,
                   int(labels_arr.max()) + 1, name=str(path))


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the same header-free CSV format `load_csv` reads."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y in zip(dataset.features, dataset.labels):
            fh.write(f"{int(y)}," + ",".join(repr(float(v)) for v in x) + "\n")


def make_task_stream(dataset: Dataset, u: int, v: int, test_fraction: float,
                     seed: int) -> TaskStream:
    """Partition classes into a B-u base task followed by Inc-v increments.

    u == 0 divides all classes equally into tasks of v classes. Within each
    task the train/test split is stratified per class.
    """
    k_total = dataset.n_classes
    if u < 0 or v < 1:
        raise ValueError("need u >= 0 and v >= 1")
    if u > 0 and u + v > k_total:
        raise ValueError("u + v exceeds the total class count")
    remainder = k_total - u
    if remainder % v != 0:
        raise ValueError(f"{remainder} remaining classes not divisible by {v}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")

    rng = np.random.default_rng(seed)
    order = rng.permutation(k_total)
    groups = []
    start = 0
    if u > 0:
        groups.append(tuple(int(c) for c in order[:u]))
        start = u
    while start < k_total:
        groups.append(tuple(int(c) for c in order[start:start + v]))
        start += v

    splits = []
    for task_idx, class_ids in enumerate(groups, start=1):
        train_idx = []
        test_idx = []
        for c in class_ids:
            members = np.flatnonzero(dataset.labels == c)
            members = members[rng.permutation(len(members))]
            n_test = int(round(test_fraction * len(members)))
            n_test = min(max(n_test, 1), len(members) - 1)
            test_idx.extend(members[:n_test])
            train_idx.extend(members[n_test:])
        train = dataset.subset(np.sort(np.asarray(train_idx, dtype=np.int64)),
                               name=f"{dataset.name}-task{task_idx}-train")
        test = dataset.subset(np.sort(np.asarray(test_idx, dtype=np.int64)),
                              name=f"{dataset.name}-task{task_idx}-test")
        splits.append(TaskSplit(task_idx, class_ids, train, test))
    return TaskStream(splits, base_classes=u, increment_classes=v)
