"""Analytic energy and latency accounting.

Edge energy charges full multiply-accumulates for the real-valued encoding
layer at every time step, and cheap accumulates for each spike times its
fan-out. Cloud energy is dense MAC counting. Communication is a flat
per-byte energy plus round-trip latency and serialization time. All
constants are configuration, not measured values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from ecc_sim.exceptions import StateError
from ecc_sim.filtering import Route
from ecc_sim.nn import MlpModel, PerfectOracle
from ecc_sim.snn import SnnModel, SpikeTrace

PJ_TO_MJ = 1e-9


@dataclass(frozen=True)
class CostConstants:
    e_mac_pj: float = 4.6  # energy per multiply-accumulate
    e_ac_pj: float = 0.9  # energy per accumulate
    e_byte_pj: float = 50.0  # communication energy per byte
    bandwidth_bytes_per_s: float = 1e6
    rtt_ms: float = 10.0
    edge_ops_per_s: float = 1e9
    cloud_macs_per_s: float = 1e9
    bytes_per_feature: int = 4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be strictly positive")
        if self.e_mac_pj <= self.e_ac_pj:
            raise ValueError("e_mac_pj must exceed e_ac_pj")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CostReport:
    compute_energy_mj: float = 0.0
    comm_energy_mj: float = 0.0
    compute_latency_ms: float = 0.0
    comm_latency_ms: float = 0.0

    @property
    def total_energy_mj(self) -> float:
        return self.compute_energy_mj + self.comm_energy_mj

    @property
    def total_latency_ms(self) -> float:
        return self.compute_latency_ms + self.comm_latency_ms


def edge_op_counts(model: SnnModel, trace: SpikeTrace):
    """(mac_ops, ac_ops) for the forward pass the trace records."""
    if trace is None:
        raise StateError("edge cost accounting requires a recorded trace")
    macs = model.encoding.in_dim * model.encoding.out_dim * trace.n_steps
    macs *= trace.batch.shape[0]
    fan_outs = [l.out_dim for l in model.inter] + [model.readout.out_dim]
    acs = sum(count * fan_out
              for count, fan_out in zip(trace.spike_counts(), fan_outs))
    return macs, acs


def edge_energy(model: SnnModel, trace: SpikeTrace, c: CostConstants) -> float:
    """Energy in mJ for the traced edge forward pass."""
    macs, acs = edge_op_counts(model, trace)
    return (c.e_mac_pj * macs + c.e_ac_pj * acs) * PJ_TO_MJ


def cloud_mac_count(model) -> int:
    if isinstance(model, PerfectOracle):
        return 0
    return sum(l.in_dim * l.out_dim for l in model.layers)


def cloud_energy(model: MlpModel, c: CostConstants) -> float:
    """Energy in mJ for one cloud forward pass; input-independent."""
    return c.e_mac_pj * cloud_mac_count(model) * PJ_TO_MJ


def comm_cost(num_features: int, c: CostConstants):
    """(energy mJ, latency ms) for uploading one sample's features."""
    if num_features < 0:
        raise ValueError("num_features must be >= 0")
    payload = num_features * c.bytes_per_feature
    energy = c.e_byte_pj * payload * PJ_TO_MJ
    latency = c.rtt_ms + payload / c.bandwidth_bytes_per_s * 1000.0
    return energy, latency


def path_latency(chosen: Route, edge_ops: float, cloud_macs: float,
                 comm_latency_ms: float, c: CostConstants) -> float:
    """Sequential edge -> (upload -> cloud) latency in ms; no pipelining."""
    latency = edge_ops / c.edge_ops_per_s * 1000.0
    if chosen == Route.CLOUD:
        latency += comm_latency_ms + cloud_macs / c.cloud_macs_per_s * 1000.0
    return latency
