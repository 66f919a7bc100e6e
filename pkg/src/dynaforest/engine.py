"""Synchronous round scheduler: send, receive, compute.

Each round the engine snapshots every node's prepared message, delivers it
across every present edge in both directions (reciprocity: an edge delivers
both ways or not at all), then computes every node's new state from the
pre-round snapshot.  No node ever sees a same-round update of another node.

The engine itself consumes no randomness: one master seed derives a private
stream per node, so adding hooks or reordering node computation cannot
perturb outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

from .model import Configuration, EdgeSet, EvolvingGraph, NodeId
from .protocol import LAZY_REST_PROBABILITY, NodeRng, initial_state, node_step

# Called after each round with (round index, E_i, C_i).  Hooks observe, never
# mutate; a hook exception aborts the run.
RoundHook = Callable[[int, EdgeSet, Configuration], None]


class EngineError(RuntimeError):
    """Configuration errors that abort a run (e.g. an edge endpoint outside V)."""


@dataclass(frozen=True)
class Trace:
    """A completed run: C_0..C_k, E_1..E_k, and what produced them."""

    configurations: tuple
    edge_sets: tuple
    seed: int
    parameters: dict

    def __post_init__(self):
        if len(self.configurations) != len(self.edge_sets) + 1:
            raise ValueError(
                f"{len(self.configurations)} configurations do not match "
                f"{len(self.edge_sets)} edge sets"
            )


def initial_configuration(vertices) -> Configuration:
    """C_0: every node the root of its own tree, in ascending id order."""
    return Configuration(round=0, states={u: initial_state(u) for u in sorted(vertices)})


def make_node_rngs(seed: int, vertices) -> dict:
    return {u: NodeRng(seed, u) for u in sorted(vertices)}


def run_round(
    config: Configuration,
    edges: EdgeSet,
    rngs: Mapping[NodeId, NodeRng],
    lazy: bool = False,
    rest_probability: float = LAZY_REST_PROBABILITY,
) -> Configuration:
    """Advance one round: deliver all prepared messages over `edges`, step every node."""
    states = config.states
    received = {u: [] for u in states}
    for u, v in edges:
        try:
            received[u].append(states[v].out_message)
            received[v].append(states[u].out_message)
        except KeyError:
            missing = u if u not in states else v
            raise EngineError(
                f"round {config.round + 1}: edge {{{u},{v}}} endpoint {missing} "
                f"is not in the vertex set"
            ) from None
    new_states = {
        u: node_step(states[u], received[u], rngs[u], lazy, rest_probability)
        for u in sorted(states)
    }
    return Configuration(round=config.round + 1, states=new_states)


def iter_run(
    graph: EvolvingGraph,
    rounds: int,
    seed: int,
    lazy: bool = False,
    rest_probability: float = LAZY_REST_PROBABILITY,
) -> Iterator[tuple]:
    """Yield (i, E_i, C_i) for i = 1..rounds without retaining the full history.

    The initial configuration is not yielded; build it with
    `initial_configuration(graph.vertices)` when needed.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    config = initial_configuration(graph.vertices)
    rngs = make_node_rngs(seed, graph.vertices)
    for i in range(1, rounds + 1):
        edges = graph.schedule(i)
        config = run_round(config, edges, rngs, lazy, rest_probability)
        yield i, edges, config


def run(
    graph: EvolvingGraph,
    rounds: int,
    seed: int,
    lazy: bool = False,
    hooks: Sequence[RoundHook] = (),
    rest_probability: float = LAZY_REST_PROBABILITY,
) -> Trace:
    """Run the full configuration sequence C_0..C_rounds and keep it.

    Fully deterministic given (graph parameters, seed, lazy).  All hooks are
    invoked after every round, in order.
    """
    configurations = [initial_configuration(graph.vertices)]
    edge_sets = []
    for i, edges, config in iter_run(graph, rounds, seed, lazy, rest_probability):
        configurations.append(config)
        edge_sets.append(edges)
        for hook in hooks:
            hook(i, edges, config)
    parameters = {"rounds": rounds, "lazy": lazy, **graph.params}
    return Trace(
        configurations=tuple(configurations),
        edge_sets=tuple(edge_sets),
        seed=seed,
        parameters=parameters,
    )
