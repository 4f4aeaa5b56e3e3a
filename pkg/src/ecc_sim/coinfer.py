"""Per-sample collaborative inference: edge forward, entropy routing, cloud
fallback, ambiguity buffering, and cost attribution.

The cloud call is an in-process function with accounted communication cost;
swapping in a real transport would not change the routing logic. Edge model
predictions live in the edge head's index space; `edge_classes` maps head
indices back to global dataset labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from ecc_sim.costs import (CostConstants, CostReport, cloud_energy,
                           cloud_mac_count, comm_cost, edge_energy,
                           edge_op_counts, path_latency)
from ecc_sim.filtering import FilterConfig, Route, normalized_entropy
from ecc_sim.nn import PerfectOracle, ann_forward
from ecc_sim.snn import SnnModel, snn_forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BufferEntry:
    features: np.ndarray
    cloud_logits: np.ndarray  # full cloud label space
    predicted_label: int  # global label the cloud assigned


@dataclass
class AmbiguityBuffer:
    """On-device store of cloud-routed samples plus the cloud's logits."""

    capacity: int | None = None
    entries: list[BufferEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: BufferEntry) -> None:
        if self.capacity is not None and len(self.entries) >= self.capacity:
            logger.warning("ambiguity buffer at capacity %d; evicting oldest entry",
                           self.capacity)
            self.entries.pop(0)
        self.entries.append(entry)

    def flush(self) -> list[BufferEntry]:
        drained = self.entries
        self.entries = []
        return drained


@dataclass(frozen=True)
class InferenceOutcome:
    prediction: int  # global label
    route: Route
    score: float
    cost: CostReport
    label: int | None = None

    @property
    def correct(self) -> bool | None:
        return None if self.label is None else self.prediction == self.label


@dataclass(frozen=True)
class ExecutionReport:
    outcomes: list[InferenceOutcome]
    accuracy: float
    cur: float
    mean_energy_mj: float
    mean_latency_ms: float
    buffer_size: int


def _cloud_logits(cloud, x: np.ndarray, true_label: int | None) -> np.ndarray:
    if isinstance(cloud, PerfectOracle):
        if true_label is None:
            raise ValueError("perfect-oracle cloud needs the ground-truth label")
        return cloud.logits_for([true_label])[0]
    logits, _ = ann_forward(cloud, x[None, :])
    return logits[0]


def infer_one(x: np.ndarray, edge: SnnModel, cloud, fcfg: FilterConfig,
              buffer: AmbiguityBuffer, c: CostConstants,
              edge_classes: np.ndarray | None = None,
              true_label: int | None = None) -> InferenceOutcome:
    """Classify one sample, offloading to the cloud when the edge is unsure."""
    x = np.asarray(x, dtype=np.float64)
    edge_logits, trace = snn_forward(edge, x[None, :], record_trace=True)
    score = normalized_entropy(edge_logits[0])

    mac_ops, ac_ops = edge_op_counts(edge, trace)
    edge_energy_mj = edge_energy(edge, trace, c)
    edge_ops = mac_ops + ac_ops

    if score <= fcfg.delta:
        pred_idx = int(np.argmax(edge_logits[0]))
        prediction = pred_idx if edge_classes is None else int(edge_classes[pred_idx])
        cost = CostReport(
            compute_energy_mj=edge_energy_mj,
            compute_latency_ms=path_latency(Route.EDGE, edge_ops, 0, 0.0, c))
        return InferenceOutcome(prediction, Route.EDGE, score, cost, true_label)

    cloud_logits = _cloud_logits(cloud, x, true_label)
    prediction = int(np.argmax(cloud_logits))
    buffer.append(BufferEntry(x.copy(), cloud_logits.copy(), prediction))
    comm_energy_mj, comm_latency_ms = comm_cost(len(x), c)
    cost = CostReport(
        compute_energy_mj=edge_energy_mj + cloud_energy(cloud, c),
        comm_energy_mj=comm_energy_mj,
        compute_latency_ms=path_latency(
            Route.CLOUD, edge_ops, cloud_mac_count(cloud), 0.0, c),
        comm_latency_ms=comm_latency_ms)
    return InferenceOutcome(prediction, Route.CLOUD, score, cost, true_label)


def run_execution_stage(features: np.ndarray, labels: np.ndarray,
                        edge: SnnModel, cloud, fcfg: FilterConfig,
                        buffer: AmbiguityBuffer, c: CostConstants,
                        edge_classes: np.ndarray | None = None) -> ExecutionReport:
    """Apply `infer_one` to an ordered stream and aggregate the results."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if len(features) == 0:
        raise ValueError("empty inference stream")
    outcomes = []
    for x, y in zip(features, labels):
        outcomes.append(infer_one(x, edge, cloud, fcfg, buffer, c,
                                  edge_classes=edge_classes, true_label=int(y)))
    n = len(outcomes)
    accuracy = sum(o.correct for o in outcomes) / n
    upload_rate = sum(o.route == Route.CLOUD for o in outcomes) / n
    mean_energy = sum(o.cost.total_energy_mj for o in outcomes) / n
    mean_latency = sum(o.cost.total_latency_ms for o in outcomes) / n
    return ExecutionReport(outcomes, accuracy, upload_rate, mean_energy,
                           mean_latency, len(buffer))


def flush_buffer(buffer: AmbiguityBuffer) -> list[BufferEntry]:
    """Drain the buffer for the update stage; leaves it empty."""
    return buffer.flush()
