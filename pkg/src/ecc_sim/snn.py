"""Spiking edge model: LIF dynamics over T steps and surrogate-gradient BPTT.

Architecture: a real-valued encoding layer turns features into a constant
input current injected at every time step; one or more leaky
integrate-and-fire populations communicate through dense connections; a
non-spiking linear readout averages over time to produce class logits.

Membrane update per step:
    U(t) = (1 - tau) * H(t-1) + tau * I(t)
    O(t) = step(U(t) - v_threshold)        (step(0) = 1)
    H(t) = U(t) * (1 - O(t)) + v_reset * O(t)

Hard mode fires binary spikes and backpropagates through a rectangular
surrogate window of width `surrogate_width`, with the reset path detached.
Soft mode replaces the step with a sigmoid of the same width and uses the
exact gradient of the smooth system (including the reset path), so central
finite differences agree with the analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from ecc_sim.exceptions import StateError
from ecc_sim.nn import DenseLayer, init_dense

SNN_CHECKPOINT_VERSION = "ecc-sim-snn-v1"


@dataclass(frozen=True)
class LifConfig:
    tau: float = 0.5
    v_threshold: float = 1.0
    v_reset: float = 0.0
    surrogate_width: float = 1.0
    n_steps: int = 4
    surrogate_mode: str = "hard"  # "hard" or "soft"

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.v_reset >= self.v_threshold:
            raise ValueError("v_reset must be below v_threshold")
        if self.surrogate_width <= 0:
            raise ValueError("surrogate_width must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.surrogate_mode not in ("hard", "soft"):
            raise ValueError(f"unknown surrogate_mode {self.surrogate_mode!r}")


@dataclass
class LifState:
    membrane: np.ndarray  # U, potential before firing
    reset_potential: np.ndarray  # H, potential after firing
    spikes: np.ndarray  # O

    @classmethod
    def zeros(cls, shape) -> "LifState":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))


def _fire(u: np.ndarray, cfg: LifConfig) -> np.ndarray:
    if cfg.surrogate_mode == "soft":
        return 1.0 / (1.0 + np.exp(-(u - cfg.v_threshold) / cfg.surrogate_width))
    return (u >= cfg.v_threshold).astype(np.float64)


def lif_step(state: LifState, current: np.ndarray, cfg: LifConfig):
    """One membrane update; returns (spikes, new state)."""
    current = np.asarray(current, dtype=np.float64)
    if not np.isfinite(current).all():
        raise ValueError("non-finite input current")
    u = (1.0 - cfg.tau) * state.reset_potential + cfg.tau * current
    o = _fire(u, cfg)
    h = u * (1.0 - o) + cfg.v_reset * o
    return o, LifState(u, h, o)


@dataclass
class SnnModel:
    encoding: DenseLayer  # features -> input current of the first spiking layer
    lif_configs: list[LifConfig]  # one per spiking layer
    inter: list[DenseLayer]  # inter[l]: spikes of layer l -> current of layer l+1
    readout: DenseLayer  # last-layer spikes -> class logits
    tap_layer_index: int  # spiking layer whose summed spikes feed alignment

    def __post_init__(self):
        if len(self.inter) != len(self.lif_configs) - 1:
            raise ValueError("need one inter-layer projection per layer gap")
        steps = {c.n_steps for c in self.lif_configs}
        if len(steps) != 1:
            raise ValueError("all LIF configs must share n_steps")
        if not 0 <= self.tap_layer_index < len(self.lif_configs):
            raise ValueError("tap_layer_index out of range")

    @property
    def n_steps(self) -> int:
        return self.lif_configs[0].n_steps

    @property
    def in_dim(self) -> int:
        return self.encoding.in_dim

    @property
    def n_classes(self) -> int:
        return self.readout.out_dim

    @property
    def layer_widths(self) -> list[int]:
        widths = [self.encoding.out_dim]
        widths.extend(l.out_dim for l in self.inter)
        return widths

    @property
    def tap_dim(self) -> int:
        return self.layer_widths[self.tap_layer_index]

    def copy(self) -> "SnnModel":
        return SnnModel(self.encoding.copy(), list(self.lif_configs),
                        [l.copy() for l in self.inter], self.readout.copy(),
                        self.tap_layer_index)

    def parameters(self) -> list[np.ndarray]:
        params = [self.encoding.weights, self.encoding.bias]
        for l in self.inter:
            params.extend([l.weights, l.bias])
        params.extend([self.readout.weights, self.readout.bias])
        return params


def build_snn(seed: int, in_dim: int, hidden: list[int], n_classes: int,
              lif: LifConfig, tap_layer_index: int = -1) -> SnnModel:
    if not hidden:
        raise ValueError("need at least one spiking layer")
    rng = np.random.default_rng(seed)
    encoding = init_dense(rng, in_dim, hidden[0])
    inter = [init_dense(rng, hidden[i], hidden[i + 1])
             for i in range(len(hidden) - 1)]
    readout = init_dense(rng, hidden[-1], n_classes)
    if tap_layer_index < 0:
        tap_layer_index += len(hidden)
    return SnnModel(encoding, [lif] * len(hidden), inter, readout,
                    tap_layer_index)


@dataclass
class SpikeTrace:
    potentials: list[np.ndarray]  # per layer: (T, B, width) membrane U
    spikes: list[np.ndarray]  # per layer: (T, B, width)
    batch: np.ndarray  # (B, in_dim) inputs the trace was recorded for

    @property
    def n_steps(self) -> int:
        return self.spikes[0].shape[0]

    def spike_counts(self) -> list[float]:
        """Total recorded spikes per layer, summed over time and batch."""
        return [float(s.sum()) for s in self.spikes]

    def tap_sum(self, layer_index: int) -> np.ndarray:
        """Per-sample spike counts of one layer summed over time: (B, width)."""
        return self.spikes[layer_index].sum(axis=0)


def snn_forward(model: SnnModel, batch: np.ndarray, record_trace: bool = False):
    """Run the T-step dynamics; returns (logits, trace-or-None)."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[1] != model.in_dim:
        raise ValueError("batch dimension does not match encoding layer")
    n_steps = model.n_steps
    n_batch = batch.shape[0]

    encoded = batch @ model.encoding.weights.T + model.encoding.bias
    potentials = []
    spikes = []
    prev_spikes = None  # (T, B, width) of the previous layer
    for layer_idx, cfg in enumerate(model.lif_configs):
        width = model.layer_widths[layer_idx]
        u_t = np.empty((n_steps, n_batch, width))
        o_t = np.empty((n_steps, n_batch, width))
        state = LifState.zeros((n_batch, width))
        dense = None if layer_idx == 0 else model.inter[layer_idx - 1]
        for t in range(n_steps):
            if layer_idx == 0:
                current = encoded  # same constant current at every step
            else:
                current = prev_spikes[t] @ dense.weights.T + dense.bias
            o, state = lif_step(state, current, cfg)
            u_t[t] = state.membrane
            o_t[t] = o
        potentials.append(u_t)
        spikes.append(o_t)
        prev_spikes = o_t

    mean_spikes = spikes[-1].mean(axis=0)
    logits = mean_spikes @ model.readout.weights.T + model.readout.bias
    trace = SpikeTrace(potentials, spikes, batch) if record_trace else None
    return logits, trace


@dataclass
class SnnGradients:
    encoding_w: np.ndarray
    encoding_b: np.ndarray
    inter_w: list[np.ndarray]
    inter_b: list[np.ndarray]
    readout_w: np.ndarray
    readout_b: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        out = [self.encoding_w, self.encoding_b]
        for w, b in zip(self.inter_w, self.inter_b):
            out.extend([w, b])
        out.extend([self.readout_w, self.readout_b])
        return out


def snn_backward(model: SnnModel, trace: SpikeTrace, dlogits: np.ndarray,
                 tap_grad: np.ndarray | None = None) -> SnnGradients:
    """BPTT through the recorded trace.

    `dlogits` is the loss gradient w.r.t. the logits; `tap_grad`, when given,
    is an extra loss gradient w.r.t. the summed spikes of the tap layer.
    """
    if trace is None:
        raise StateError("snn_backward requires a recorded forward trace")
    dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
    n_steps = trace.n_steps
    n_layers = len(model.lif_configs)

    mean_spikes = trace.spikes[-1].mean(axis=0)
    readout_w_grad = dlogits.T @ mean_spikes
    readout_b_grad = dlogits.sum(axis=0)

    # Per-step external gradient on each layer's spikes, filled top-down.
    d_spikes_ext = [None] * n_layers
    d_spikes_ext[-1] = np.repeat(((dlogits @ model.readout.weights) / n_steps)
                                 [None, :, :], n_steps, axis=0)
    if tap_grad is not None:
        tap = model.tap_layer_index
        add = np.repeat(np.asarray(tap_grad, dtype=np.float64)[None, :, :],
                        n_steps, axis=0)
        if d_spikes_ext[tap] is None:
            d_spikes_ext[tap] = add
        else:
            d_spikes_ext[tap] = d_spikes_ext[tap] + add

    inter_w_grad = [np.zeros_like(l.weights) for l in model.inter]
    inter_b_grad = [np.zeros_like(l.bias) for l in model.inter]
    enc_w_grad = np.zeros_like(model.encoding.weights)
    enc_b_grad = np.zeros_like(model.encoding.bias)

    for layer_idx in range(n_layers - 1, -1, -1):
        cfg = model.lif_configs[layer_idx]
        u_t = trace.potentials[layer_idx]
        o_t = trace.spikes[layer_idx]
        d_o = d_spikes_ext[layer_idx]
        if d_o is None:
            d_o = np.zeros_like(o_t)
        d_current = np.empty_like(o_t)
        d_h = np.zeros_like(o_t[0])
        for t in range(n_steps - 1, -1, -1):
            u = u_t[t]
            o = o_t[t]
            if cfg.surrogate_mode == "soft":
                spike_deriv = o * (1.0 - o) / cfg.surrogate_width
                d_u = (d_o[t] * spike_deriv
                       + d_h * ((1.0 - o) + (cfg.v_reset - u) * spike_deriv))
            else:
                window = (np.abs(u - cfg.v_threshold)
                          < cfg.surrogate_width / 2.0)
                spike_deriv = window / cfg.surrogate_width
                d_u = d_o[t] * spike_deriv + d_h * (1.0 - o)
            d_current[t] = cfg.tau * d_u
            d_h = (1.0 - cfg.tau) * d_u
        if layer_idx > 0:
            dense = model.inter[layer_idx - 1]
            prev = trace.spikes[layer_idx - 1]
            down = np.zeros((n_steps,) + prev.shape[1:])
            for t in range(n_steps):
                inter_w_grad[layer_idx - 1] += d_current[t].T @ prev[t]
                inter_b_grad[layer_idx - 1] += d_current[t].sum(axis=0)
                down[t] = d_current[t] @ dense.weights
            if d_spikes_ext[layer_idx - 1] is None:
                d_spikes_ext[layer_idx - 1] = down
            else:
                d_spikes_ext[layer_idx - 1] = d_spikes_ext[layer_idx - 1] + down
        else:
            d_encoded = d_current.sum(axis=0)  # constant current: sum over t
            enc_w_grad += d_encoded.T @ trace.batch
            enc_b_grad += d_encoded.sum(axis=0)

    return SnnGradients(enc_w_grad, enc_b_grad, inter_w_grad, inter_b_grad,
                        readout_w_grad, readout_b_grad)


def expand_readout(model: SnnModel, new_class_count: int, seed: int) -> SnnModel:
    """Grow the readout head, preserving existing rows bit-exactly."""
    old = model.readout
    if new_class_count <= old.out_dim:
        raise ValueError("new class count must exceed the current head width")
    rng = np.random.default_rng(seed)
    fresh = init_dense(rng, old.in_dim, new_class_count - old.out_dim)
    readout = DenseLayer(np.vstack([old.weights, fresh.weights]),
                         np.concatenate([old.bias, fresh.bias]),
                         old.activation)
    return SnnModel(model.encoding.copy(), list(model.lif_configs),
                    [l.copy() for l in model.inter], readout,
                    model.tap_layer_index)


def save_snn(model: SnnModel, seed: int, path) -> None:
    payload = {
        "version": SNN_CHECKPOINT_VERSION,
        "seed": seed,
        "tap_layer_index": model.tap_layer_index,
        "lif": [
            {
                "tau": c.tau,
                "v_threshold": c.v_threshold,
                "v_reset": c.v_reset,
                "surrogate_width": c.surrogate_width,
                "n_steps": c.n_steps,
                "surrogate_mode": c.surrogate_mode,
            }
            for c in model.lif_configs
        ],
        "encoding": _dense_payload(model.encoding),
        "inter": [_dense_payload(l) for l in model.inter],
        "readout": _dense_payload(model.readout),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def _dense_payload(layer: DenseLayer) -> dict:
    return {"activation": layer.activation, "weights": layer.weights.tolist(),
            "bias": layer.bias.tolist()}


def _dense_from_payload(payload: dict) -> DenseLayer:
    return DenseLayer(np.asarray(payload["weights"], dtype=np.float64),
                      np.asarray(payload["bias"], dtype=np.float64),
                      payload["activation"])


def load_snn(path) -> SnnModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != SNN_CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    return SnnModel(_dense_from_payload(payload["encoding"]),
                    [LifConfig(**c) for c in payload["lif"]],
                    [_dense_from_payload(l) for l in payload["inter"]],
                    _dense_from_payload(payload["readout"]),
                    payload["tap_layer_index"])
