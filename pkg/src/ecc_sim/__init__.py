"""Desk-scale simulator of an edge-cloud collaboration loop with a spiking edge model."""

from ecc_sim.exceptions import ConfigError, ParseError, StateError

__all__ = ["ConfigError", "ParseError", "StateError"]
