"""The per-node automaton: a pure function from (previous state, received
messages, per-node randomness) to (new state, next outgoing message).

Each round a node refreshes its neighborhood from the messages it received,
regenerates a token if its parent link vanished, commits its own pending
FLIP/SELECT if the target edge survived, processes the mailbox (adopting
children and scanning for a merge contender), and finally prepares the next
message.  The steps run in exactly that order; mailbox processing iterates in
ascending sender id so runs are byte-for-byte reproducible.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import replace
from typing import Mapping, Optional, Sequence

from .model import Action, Message, NodeId, NodeState, Status

# Canonical probability that a root holding the token rests for a round
# instead of circulating it (the lazy-walk variant).
LAZY_REST_PROBABILITY = 0.5


class ProtocolFault(RuntimeError):
    """An impossible-by-invariant situation: signals an engine bug, not data."""


def _substream_seed(seed: int, node_id: NodeId) -> int:
    # Stable across processes and platforms; never Python's randomized hash().
    digest = hashlib.sha256(f"{seed}/{node_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class NodeRng:
    """Per-node random stream, a deterministic function of (run seed, node id).

    Same (seed, node id, consumption sequence) => same outputs, regardless of
    how other nodes or the engine consume randomness.
    """

    __slots__ = ("_rng",)

    def __init__(self, seed: int, node_id: NodeId):
        self._rng = random.Random(_substream_seed(seed, node_id))

    def random(self) -> float:
        return self._rng.random()

    def choice(self, seq):
        return self._rng.choice(seq)

    def getstate(self):
        return self._rng.getstate()

    def setstate(self, state) -> None:
        self._rng.setstate(state)


def initial_state(node_id: NodeId) -> NodeState:
    """Uniform initial state: every node is the root of its own tree."""
    return NodeState(
        id=node_id,
        status=Status.T,
        parent=None,
        children=frozenset(),
        neighbors=frozenset(),
        contender=None,
        contender_score=0,
        score=node_id,
        mailbox={},
        out_message=Message(node_id, Status.T, Action.HELLO, None, node_id),
    )


def become_root(state: NodeState) -> NodeState:
    """Take (or regenerate) the token; children are kept."""
    return replace(state, status=Status.T, parent=None)


def adopt_parent(
    state: NodeState, out: Message, mailbox: Mapping[NodeId, Message]
) -> NodeState:
    """Commit a successful FLIP or SELECT: the target becomes our parent.

    On a FLIP the target leaves our children and we take the smaller of our
    score and the score the new parent announced this round.
    """
    if out.action not in (Action.FLIP, Action.SELECT):
        raise ValueError(f"adopt_parent on a {out.action.value} message")
    parent = out.target
    if out.action is Action.FLIP:
        entry = mailbox.get(parent)
        if entry is None:
            raise ProtocolFault(
                f"node {state.id}: successful FLIP to {parent} but no message "
                f"from it this round (reciprocity broken)"
            )
        return replace(
            state,
            status=Status.N,
            parent=parent,
            children=state.children - {parent},
            score=min(state.score, entry.score),
        )
    return replace(state, status=Status.N, parent=parent)


def adopt_child(state: NodeState, msg: Message) -> NodeState:
    """Register the sender of a FLIP/SELECT aimed at us as a child.

    On a FLIP we also take the larger of our score and the announced one,
    completing the two-sided score swap.
    """
    if msg.target != state.id:
        raise ValueError(f"adopt_child of a message targeted at {msg.target}")
    children = state.children | {msg.sender}
    if msg.action is Action.FLIP:
        return replace(state, children=children, score=max(state.score, msg.score))
    return replace(state, children=children)


def choose_contender(
    state: NodeState, received: Sequence[Message]
) -> tuple[Optional[NodeId], int]:
    """Best merge candidate: the token-holding sender with the greatest score.

    Only messages not targeted at us count (targeted ones are child
    adoptions).  Scores are unique network-wide so ties cannot happen; a
    hypothetical tie would break toward the larger sender id.
    """
    contender: Optional[NodeId] = None
    contender_score = 0
    for msg in received:
        if msg.target == state.id:
            continue
        if msg.sender_status is not Status.T:
            continue
        if msg.score > contender_score or (
            msg.score == contender_score and contender is not None and msg.sender > contender
        ):
            contender = msg.sender
            contender_score = msg.score
    return contender, contender_score


def choose_flip_target(children: frozenset, rng: NodeRng) -> NodeId:
    """Uniformly random child, drawn from the node's own seeded stream."""
    if not children:
        raise ValueError("cannot pick a flip target from an empty children set")
    return rng.choice(sorted(children))


def prepare_message(
    state: NodeState, action: Action, target: Optional[NodeId] = None
) -> Message:
    """Build the next outgoing message from the current state."""
    return _make_message(state.id, state.status, state.score, action, target)


def _make_message(
    nid: NodeId, status: Status, score: int, action: Action, target: Optional[NodeId]
) -> Message:
    if action is Action.SELECT:
        return Message(nid, Status.N, Action.SELECT, target, score)
    if action is Action.FLIP:
        return Message(nid, Status.T, Action.FLIP, target, score)
    return Message(nid, status, Action.HELLO, None, score)


def node_step(
    prev: NodeState,
    received: Sequence[Message],
    rng: NodeRng,
    lazy: bool = False,
    rest_probability: float = LAZY_REST_PROBABILITY,
) -> NodeState:
    """One compute phase.  Pure: depends only on the arguments.

    `received` holds exactly one message per physical neighbor this round
    (the engine guarantees reciprocity); `prev.out_message` is the message
    this node sent at the start of the round.
    """
    nid = prev.id
    status_t = Status.T
    status_n = Status.N
    act_flip = Action.FLIP
    act_hello = Action.HELLO

    mailbox = {m.sender: m for m in received}
    children = {c for c in prev.children if c in mailbox}
    status = prev.status
    parent = prev.parent
    score = prev.score

    # Regenerate a token if the parent link is lost.
    if status is status_n and parent not in mailbox:
        status = status_t
        parent = None

    # Commit our own FLIP/SELECT if it was successful.
    out = prev.out_message
    if out.action is not act_hello and out.target in mailbox:
        status = status_n
        parent = out.target
        if out.action is act_flip:
            children.discard(parent)
            announced = mailbox[parent].score
            if announced < score:
                score = announced

    # Process the mailbox: adopt children, scan for a contender.
    contender: Optional[NodeId] = None
    contender_score = 0
    for sender, msg in sorted(mailbox.items()):
        if msg.target == nid:
            if msg.action is act_flip:
                status = status_t
                parent = None
                children.add(sender)
                if msg.score > score:
                    score = msg.score
            elif msg.action is act_hello:
                raise ProtocolFault(
                    f"node {nid}: received a HELLO targeted at itself from {sender}"
                )
            else:
                children.add(sender)
        elif msg.sender_status is status_t and (
            msg.score > contender_score
            or (msg.score == contender_score and contender is not None and sender > contender)
        ):
            contender = sender
            contender_score = msg.score

    # Prepare the next message.
    out_msg = None
    if status is status_t:
        if contender_score > score:
            out_msg = _make_message(nid, status, score, Action.SELECT, contender)
        elif children:
            if lazy and rng.random() < rest_probability:
                pass  # hold the token this round
            else:
                target = choose_flip_target(children, rng)
                out_msg = _make_message(nid, status, score, act_flip, target)
    if out_msg is None:
        out_msg = _make_message(nid, status, score, act_hello, None)

    return NodeState(
        id=nid,
        status=status,
        parent=parent,
        children=frozenset(children),
        neighbors=frozenset(mailbox),
        contender=contender,
        contender_score=contender_score,
        score=score,
        mailbox=mailbox,
        out_message=out_msg,
    )
