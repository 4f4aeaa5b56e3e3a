"""Evaluation metrics: the incremental accuracy matrix, cloud upload rate,
and the cloud-gap-normalized accuracy improvement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ecc_sim.exceptions import StateError


@dataclass
class AccuracyMatrix:
    """Lower-triangular a[n, m]: accuracy on task m after learning task n."""

    entries: dict[tuple[int, int], float] = field(default_factory=dict)

    def record(self, after_task: int, on_task: int, accuracy: float) -> None:
        if on_task > after_task:
            raise ValueError("cannot score an unseen task")
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        self.entries[(after_task, on_task)] = float(accuracy)

    def get(self, after_task: int, on_task: int) -> float:
        return self.entries[(after_task, on_task)]

    def row(self, after_task: int) -> list[float]:
        row = []
        for m in range(1, after_task + 1):
            if (after_task, m) not in self.entries:
                raise StateError(f"missing entry a[{after_task},{m}]")
            row.append(self.entries[(after_task, m)])
        return row

    @property
    def n_tasks(self) -> int:
        return max((n for n, _ in self.entries), default=0)


def avg_accuracy(matrix: AccuracyMatrix, after_task: int) -> float:
    """Mean accuracy over all tasks seen after learning `after_task`."""
    return float(np.mean(matrix.row(after_task)))


def cur(scores, delta: float) -> float:
    """Fraction of routing scores strictly above the threshold."""
    scores = np.asarray(list(scores), dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score list")
    return float((scores > delta).mean())


def acci(a_ecc: float, a_edge: float, a_cloud: float) -> float:
    """Collaboration accuracy gain normalized by the cloud-edge gap."""
    gap = a_cloud - a_edge
    if gap == 0.0:
        raise ZeroDivisionError("cloud and edge accuracies coincide; "
                                "relative improvement undefined")
    return (a_ecc - a_edge) / gap
