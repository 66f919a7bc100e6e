"""Spanning-forest maintenance over adversarial dynamic networks.

A deterministic round-based simulator for the token-forest protocol, with
invariant checkers for every maintained property and an experiment harness
for trees-per-component measurements.
"""

from .model import (
    Action,
    Configuration,
    EvolvingGraph,
    Message,
    NodeState,
    PseudoForest,
    Status,
    make_edge,
    make_edge_set,
    resulting_forest,
)
from .engine import Trace, initial_configuration, iter_run, run, run_round
from .protocol import NodeRng, initial_state, node_step

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Configuration",
    "EvolvingGraph",
    "Message",
    "NodeRng",
    "NodeState",
    "PseudoForest",
    "Status",
    "Trace",
    "initial_configuration",
    "initial_state",
    "iter_run",
    "make_edge",
    "make_edge_set",
    "node_step",
    "resulting_forest",
    "run",
    "run_round",
    "__version__",
]
