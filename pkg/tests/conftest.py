"""Shared fixtures: small deterministic datasets, streams, and models."""

import numpy as np
import pytest

from ecc_sim.continual import EdgeArch, TrainConfig, setup_stage
from ecc_sim.data import generate_blobs, make_task_stream
from ecc_sim.losses import LossWeights
from ecc_sim.nn import PerfectOracle
from ecc_sim.snn import LifConfig


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_blobs(seed=0, n_classes=4, dim=6, n_per_class=20,
                          spread=0.15)


@pytest.fixture(scope="session")
def tiny_stream(tiny_dataset):
    return make_task_stream(tiny_dataset, u=2, v=1, test_fraction=0.25, seed=0)


@pytest.fixture(scope="session")
def tiny_oracle(tiny_dataset):
    return PerfectOracle(tiny_dataset.n_classes)


@pytest.fixture(scope="session")
def tiny_edge(tiny_stream, tiny_oracle):
    """A lightly trained 2-class edge model over the tiny stream's base task."""
    cfg = TrainConfig(epochs=4, lr=0.05, seed=0,
                      weights=LossWeights(lambda2=0.0))
    arch = EdgeArch(hidden=(12,), lif=LifConfig())
    return setup_stage(tiny_stream.splits[0], tiny_oracle, arch, cfg,
                       class_order=tiny_stream.class_order)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
