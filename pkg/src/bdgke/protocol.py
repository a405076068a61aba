"""The honest Burmester-Desmedt party as a round-based state machine.

Every transition takes a ``PartyState`` and returns a new one; nothing is
mutated in place, so a rejected call leaves the caller's state untouched.
Parties are numbered 1..n and all index arithmetic wraps cyclically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Mapping, Optional

from .errors import (
    IncompleteRoundError,
    InvalidSizeError,
    ProtocolError,
    StateMachineError,
)
from .group import GroupElement, GroupParams, Scalar, product, random_scalar


class Phase(Enum):
    INIT = "init"
    SENT_Z = "sent_z"
    SENT_X = "sent_x"
    DONE = "done"


class Round(IntEnum):
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class Message:
    """A round broadcast. ``claimed_sender`` is whatever the wire says, not the true origin."""

    claimed_sender: int
    round: Round
    payload: GroupElement
    seq: Optional[int] = None


def wrap(j: int, n: int) -> int:
    """Map any integer index onto 1..n cyclically."""
    return (j - 1) % n + 1


def key_window(i: int, n: int) -> list[int]:
    """Indices i, i+1, ..., i+n-2 of the X values party i multiplies into its key."""
    return [wrap(i + j, n) for j in range(n - 1)]


@dataclass(frozen=True)
class PartyState:
    index: int
    n: int
    params: GroupParams
    phase: Phase = Phase.INIT
    secret: Optional[Scalar] = None
    z: Optional[GroupElement] = None
    x: Optional[GroupElement] = None
    received_z: Mapping[int, GroupElement] = field(default_factory=dict)
    received_X: Mapping[int, GroupElement] = field(default_factory=dict)
    key: Optional[GroupElement] = None

    def __post_init__(self):
        if self.n < 3:
            raise InvalidSizeError("the protocol needs at least 3 parties")
        if not 1 <= self.index <= self.n:
            raise InvalidSizeError(f"party index {self.index} outside 1..{self.n}")

    @property
    def left(self) -> int:
        return wrap(self.index - 1, self.n)

    @property
    def right(self) -> int:
        return wrap(self.index + 1, self.n)

    def missing_z(self) -> list[int]:
        return [j for j in (self.left, self.right) if j not in self.received_z]

    def missing_X(self) -> list[int]:
        return [j for j in key_window(self.index, self.n)[1:] if j not in self.received_X]

    def view_X(self) -> dict[int, GroupElement]:
        """All X values known to this party, its own included."""
        view = dict(self.received_X)
        if self.x is not None:
            view[self.index] = self.x
        return view


def new_party(params: GroupParams, index: int, n: int) -> PartyState:
    return PartyState(index=index, n=n, params=params)


def _require(party: PartyState, *phases: Phase) -> None:
    if party.phase not in phases:
        allowed = "/".join(p.value for p in phases)
        raise StateMachineError(
            f"party {party.index} is in phase {party.phase.value}, expected {allowed}"
        )


def round1(party: PartyState, rng: random.Random,
           secret: Optional[Scalar] = None) -> tuple[PartyState, Message]:
    """Sample r_i and broadcast z_i = g^r_i. ``secret`` overrides the draw (test hook)."""
    _require(party, Phase.INIT)
    r = secret if secret is not None else random_scalar(rng, party.params)
    z = party.params.generator ** r
    msg = Message(party.index, Round.ONE, z)
    return replace(party, phase=Phase.SENT_Z, secret=r, z=z), msg


def receive(party: PartyState, msg: Message) -> PartyState:
    sender = msg.claimed_sender
    if not 1 <= sender <= party.n or sender == party.index:
        raise ProtocolError(f"party {party.index} got a message claiming sender {sender}")
    if msg.payload.params != party.params:
        raise ProtocolError("payload from a different group")
    if msg.round == Round.ONE:
        _require(party, Phase.INIT, Phase.SENT_Z)
        slot = party.received_z
    else:
        _require(party, Phase.SENT_Z, Phase.SENT_X)
        slot = party.received_X
    if sender in slot:
        raise ProtocolError(
            f"party {party.index} got a second round-{int(msg.round)} value from {sender}"
        )
    updated = {**slot, sender: msg.payload}
    if msg.round == Round.ONE:
        return replace(party, received_z=updated)
    return replace(party, received_X=updated)


def round2(party: PartyState) -> tuple[PartyState, Message]:
    """Broadcast X_i = (z_{i+1} / z_{i-1})^r_i."""
    _require(party, Phase.SENT_Z)
    missing = party.missing_z()
    if missing:
        raise IncompleteRoundError(party.index, missing, "z")
    x = (party.received_z[party.right] / party.received_z[party.left]) ** party.secret
    msg = Message(party.index, Round.TWO, x)
    return replace(party, phase=Phase.SENT_X, x=x), msg


def key_from_view(params: GroupParams, i: int, n: int, secret: Scalar,
                  z_left: GroupElement, xs: Mapping[int, GroupElement]) -> GroupElement:
    """K_i = z_{i-1}^(n r_i) * prod_{j=0}^{n-2} X_{i+j}^(n-1-j), exponents reduced mod q."""
    key = z_left ** (secret * n)
    for j, idx in enumerate(key_window(i, n)):
        key = key * xs[idx] ** params.scalar(n - 1 - j)
    return key


def compute_key(party: PartyState) -> tuple[PartyState, GroupElement]:
    _require(party, Phase.SENT_X)
    missing = party.missing_X()
    if missing:
        raise IncompleteRoundError(party.index, missing, "X")
    key = key_from_view(party.params, party.index, party.n, party.secret,
                        party.received_z[party.left], party.view_X())
    return replace(party, phase=Phase.DONE, key=key), key


def closed_form_key(params: GroupParams, r: list[Scalar]) -> GroupElement:
    """g^(r_1 r_2 + r_2 r_3 + ... + r_n r_1): what every honest party should derive."""
    n = len(r)
    if n < 3:
        raise InvalidSizeError("closed form defined for n >= 3")
    exponent = params.scalar(0)
    for i in range(n):
        exponent = exponent + r[i] * r[(i + 1) % n]
    return params.generator ** exponent


def product_check(all_X: list[GroupElement]) -> bool:
    """True iff the n round-two values multiply to the identity."""
    if not all_X:
        return False
    params = all_X[0].params
    return product(all_X, params) == params.identity


def party_product_check(party: PartyState) -> bool:
    """Run the product check over one party's full view; an incomplete view fails."""
    view = party.view_X()
    if len(view) != party.n:
        return False
    return product_check([view[i] for i in range(1, party.n + 1)])
