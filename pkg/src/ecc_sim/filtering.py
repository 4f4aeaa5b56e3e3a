"""Ambiguity filter: normalized entropy of the edge prediction and the
threshold routing rule (ties at the threshold stay on the edge)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ecc_sim.nn import softmax


class Route(str, Enum):
    EDGE = "edge"
    CLOUD = "cloud"


@dataclass(frozen=True)
class FilterConfig:
    delta: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")


@dataclass(frozen=True)
class RoutingDecision:
    score: float
    route: Route


def normalized_entropy(logits: np.ndarray, n_classes: int | None = None) -> float:
    """Shannon entropy of softmax(logits) divided by log(K), clamped to [0, 1]."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    k = n_classes if n_classes is not None else logits.shape[0]
    if k < 2:
        raise ValueError("normalized entropy needs at least 2 classes")
    if logits.shape[0] != k:
        raise ValueError("logit length does not match the class count")
    p = softmax(logits)
    if (p == p[0]).all():  # exact tie: entropy is maximal by definition
        return 1.0
    nz = p > 0.0
    h = -(p[nz] * np.log(p[nz])).sum()
    return float(np.clip(h / np.log(k), 0.0, 1.0))


def normalized_entropy_batch(logits: np.ndarray) -> np.ndarray:
    """Row-wise normalized entropy for a (B, K) logit matrix."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    k = logits.shape[1]
    if k < 2:
        raise ValueError("normalized entropy needs at least 2 classes")
    p = softmax(logits)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    scores = np.clip(-terms.sum(axis=1) / np.log(k), 0.0, 1.0)
    scores[(p == p[:, :1]).all(axis=1)] = 1.0  # exact ties are maximal
    return scores


def route(logits: np.ndarray, cfg: FilterConfig) -> RoutingDecision:
    score = normalized_entropy(logits)
    chosen = Route.EDGE if score <= cfg.delta else Route.CLOUD
    return RoutingDecision(score, chosen)
