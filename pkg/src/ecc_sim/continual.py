"""Setup and Update stages plus full lifecycle orchestration.

Setup trains a fresh edge SNN on the base task with cross-entropy plus logit
distillation from the cloud model (and optional feature alignment). Updates
are exemplar-free: the only training data is the drained ambiguity buffer,
regularized by distilling the pre-update snapshot's predictions on old
classes. The edge head uses its own contiguous index space; the mapping to
global dataset labels follows the order classes are introduced by the stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from ecc_sim.coinfer import (AmbiguityBuffer, BufferEntry, ExecutionReport,
                             flush_buffer, run_execution_stage)
from ecc_sim.costs import CostConstants
from ecc_sim.data import TaskSplit, TaskStream
from ecc_sim.exceptions import ConfigError
from ecc_sim.filtering import FilterConfig, normalized_entropy_batch
from ecc_sim.losses import (AlignmentHead, LossWeights, build_alignment_head,
                            joint_loss, lwf_loss)
from ecc_sim.metrics import AccuracyMatrix, cur
from ecc_sim.nn import PerfectOracle, ann_forward
from ecc_sim.snn import LifConfig, SnnModel, build_snn, expand_readout, snn_backward, snn_forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 8
    batch_size: int = 32
    lr: float = 0.02
    momentum: float = 0.9
    update_epochs: int = 40
    update_lr: float | None = None  # defaults to half the setup rate
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 0 or self.update_epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @property
    def effective_update_lr(self) -> float:
        return self.update_lr if self.update_lr is not None else 0.5 * self.lr


@dataclass(frozen=True)
class EdgeArch:
    hidden: tuple[int, ...] = (32,)
    lif: LifConfig = field(default_factory=LifConfig)
    tap_layer_index: int = -1


class _Sgd:
    """Momentum SGD over a flat parameter list updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float, momentum: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.momentum
            v -= self.lr * g
            p += v


def _teacher_logits(cloud, features: np.ndarray, labels: np.ndarray,
                    class_columns: np.ndarray):
    """Cloud logits sliced to the edge's class columns, plus tap features."""
    if isinstance(cloud, PerfectOracle):
        logits = cloud.logits_for(labels)
        return logits[:, class_columns], None
    logits, tap = ann_forward(cloud, features)
    return logits[:, class_columns], tap


def setup_stage(task1: TaskSplit, cloud, arch: EdgeArch, cfg: TrainConfig,
                class_order: tuple[int, ...] | None = None,
                alignment_head: AlignmentHead | None = None) -> SnnModel:
    """Jointly train a fresh edge SNN on the base task.

    `class_order` fixes the edge head's index space; it defaults to the task's
    own class order. With lambda2 > 0 an alignment head is created (or reused)
    and trained alongside the model.
    """
    if len(task1.train) == 0:
        raise ValueError("empty base task")
    order = tuple(class_order) if class_order is not None else task1.class_ids
    class_ids = np.asarray(order[:len(task1.class_ids)], dtype=np.int64)
    weights = cfg.weights

    model = build_snn(cfg.seed, task1.train.dim, list(arch.hidden),
                      len(class_ids), arch.lif, arch.tap_layer_index)

    use_align = weights.lambda2 > 0
    if use_align:
        if isinstance(cloud, PerfectOracle):
            raise ConfigError("feature alignment needs a real cloud model")
        if alignment_head is None:
            alignment_head = build_alignment_head(cfg.seed, model.tap_dim,
                                                  cloud.tap_dim)
        if alignment_head.out_dim != cloud.tap_dim:
            raise ConfigError("alignment head does not match the teacher tap")

    # remap global labels into edge head indices
    label_map = {int(c): i for i, c in enumerate(class_ids)}
    x = task1.train.features
    y = np.asarray([label_map[int(l)] for l in task1.train.labels], dtype=np.int64)
    teacher, tap_feats = _teacher_logits(cloud, x, task1.train.labels, class_ids)

    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    if use_align:
        params = params + alignment_head.parameters()
    opt = _Sgd(params, cfg.lr, cfg.momentum)

    n = len(x)
    for _ in range(cfg.epochs):
        order_idx = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order_idx[start:start + cfg.batch_size]
            logits, trace = snn_forward(model, x[idx], record_trace=True)
            alignment = None
            if use_align:
                alignment = (trace.tap_sum(model.tap_layer_index),
                             alignment_head, tap_feats[idx])
            result = joint_loss(logits, y[idx], teacher[idx], weights,
                                alignment=alignment)
            tap_grad = (result.align_grads.d_summed_spikes
                        if result.align_grads is not None else None)
            grads = snn_backward(model, trace, result.d_logits, tap_grad)
            grad_list = grads.as_list()
            if use_align:
                grad_list = grad_list + result.align_grads.as_list()
            opt.step(grad_list)
    return model


def update_stage(edge: SnnModel, drained: list[BufferEntry],
                 snapshot: SnnModel, new_class_ids, cfg: TrainConfig,
                 class_order: tuple[int, ...]) -> SnnModel:
    """Exemplar-free on-device update from buffered cloud-labeled samples.

    Expands the readout head to cover `new_class_ids`, then fine-tunes on the
    drained buffer with cloud-label CE + cloud-logit distillation, holding old
    predictions in place via snapshot distillation. An empty buffer is a no-op.
    """
    if not drained:
        logger.warning("update stage skipped: empty ambiguity buffer")
        return edge
    new_class_ids = tuple(int(c) for c in new_class_ids)
    k_old = edge.n_classes
    k_new = len(class_order[:k_old]) + len(new_class_ids)
    seen = np.asarray(class_order[:k_new], dtype=np.int64)
    if tuple(seen[k_old:]) != new_class_ids:
        raise ValueError("new_class_ids disagree with the stream's class order")

    model = expand_readout(edge, k_new, cfg.seed) if k_new > k_old else edge.copy()

    x = np.stack([e.features for e in drained])
    cloud_logits = np.stack([e.cloud_logits for e in drained])[:, seen]
    # cloud-assigned labels restricted to the classes the edge now knows
    y = cloud_logits.argmax(axis=1)

    old_logits, _ = snn_forward(snapshot, x)

    rng = np.random.default_rng(cfg.seed)
    opt = _Sgd(model.parameters(), cfg.effective_update_lr, cfg.momentum)
    n = len(x)
    for _ in range(cfg.update_epochs):
        order_idx = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order_idx[start:start + cfg.batch_size]
            logits, trace = snn_forward(model, x[idx], record_trace=True)
            result = lwf_loss(logits, y[idx], cloud_logits[idx],
                              old_logits[idx], cfg.weights)
            grads = snn_backward(model, trace, result.d_logits)
            opt.step(grads.as_list())
    return model


@dataclass
class LifecycleResult:
    edge: SnnModel
    reports: list[ExecutionReport]  # one per task
    matrix: AccuracyMatrix
    cur_task1_before_update: dict[int, float]  # task n -> CUR on task-1 tests
    cur_task1_after_update: dict[int, float]
    class_order: tuple[int, ...]


def _edge_accuracy(model: SnnModel, split: TaskSplit,
                   label_map: dict[int, int]) -> float:
    """Edge-only accuracy on a task's test set, in edge index space."""
    logits, _ = snn_forward(model, split.test.features)
    preds = logits.argmax(axis=1)
    truth = np.asarray([label_map[int(l)] for l in split.test.labels])
    return float((preds == truth).mean())


def _cur_on_task1(model: SnnModel, task1: TaskSplit, delta: float) -> float:
    scores = normalized_entropy_batch(snn_forward(model, task1.test.features)[0])
    return cur(scores, delta)


def run_lifecycle(stream: TaskStream, cloud, fcfg: FilterConfig,
                  costs: CostConstants, cfg: TrainConfig,
                  arch: EdgeArch = EdgeArch()) -> LifecycleResult:
    """Setup on task 1, then per task: collaborative execution over all test
    data seen so far, followed by an on-device update from the buffer."""
    class_order = stream.class_order
    label_map = {int(c): i for i, c in enumerate(class_order)}
    edge_classes = np.asarray(class_order, dtype=np.int64)

    edge = setup_stage(stream.splits[0], cloud, arch, cfg,
                       class_order=class_order)
    matrix = AccuracyMatrix()
    reports = []
    cur_before = {}
    cur_after = {}

    rng = np.random.default_rng(cfg.seed)
    for n, split in enumerate(stream.splits, start=1):
        seen = stream.splits[:n]
        feats = np.concatenate([s.test.features for s in seen])
        labels = np.concatenate([s.test.labels for s in seen])
        shuffle = rng.permutation(len(feats))
        buffer = AmbiguityBuffer()
        report = run_execution_stage(
            feats[shuffle], labels[shuffle], edge, cloud, fcfg, buffer, costs,
            edge_classes=edge_classes[:edge.n_classes])
        reports.append(report)

        if n >= 2:
            cur_before[n] = _cur_on_task1(edge, stream.splits[0], fcfg.delta)
            snapshot = edge.copy()
            n_seen = sum(len(s.class_ids) for s in seen)
            # classes the head does not cover yet (tolerates skipped updates)
            to_add = class_order[edge.n_classes:n_seen]
            edge = update_stage(edge, flush_buffer(buffer), snapshot,
                                to_add, cfg, class_order)
            cur_after[n] = _cur_on_task1(edge, stream.splits[0], fcfg.delta)

        for m in range(1, n + 1):
            split_m = stream.splits[m - 1]
            known = {c for c in class_order[:edge.n_classes]}
            if set(split_m.class_ids) <= known:
                acc = _edge_accuracy(edge, split_m, label_map)
            else:
                acc = 0.0  # head never expanded to these classes
            matrix.record(n, m, acc)

    return LifecycleResult(edge, reports, matrix, cur_before, cur_after,
                           class_order)
