"""Deterministic broadcast medium with a single adversarial tap.

A broadcast fans out into n-1 unicast deliveries held in a FIFO queue, so
parties that broadcast in index order are delivered in ascending
(origin, destination) order. When a tap is installed on party k:

* every broadcast *from* k is shown to the tap once, as a whole, at send
  time (destination ``BROADCAST``);
* every delivery *to* k is shown to the tap individually when it is popped.

Attacker injections are routed around the tap. Every popped delivery and
every dropped outbound broadcast produces exactly one transcript event.
"""

from __future__ import annotations

import json
import random
from collections import Counter, deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Union

from .errors import ConfigurationError, IncompleteRoundError, RoutingError, StuckRunError
from .group import GroupElement, GroupParams, Scalar
from .protocol import Message, PartyState, compute_key, new_party, receive, round1, round2

ATTACKER = "A"
BROADCAST = "*"

Actor = Union[int, str]

# A deferred delivery is re-offered at most this many times.
MAX_DEFERRALS = 1


class Action(str, Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    REPLACED = "replaced"
    INJECTED = "injected"


@dataclass(frozen=True)
class Delivery:
    origin: Actor
    destination: Actor
    message: Message
    cleared: bool = False  # already past the tap
    original: Optional[GroupElement] = None
    tap: Optional[str] = None
    deferrals: int = 0


@dataclass(frozen=True)
class TapDecision:
    kind: str  # "deliver" | "drop" | "defer"
    message: Optional[Message] = None
    inject: tuple[tuple[int, Message], ...] = ()


def deliver(msg: Message, inject=()) -> TapDecision:
    return TapDecision("deliver", msg, tuple(inject))


def drop(inject=()) -> TapDecision:
    return TapDecision("drop", None, tuple(inject))


def defer() -> TapDecision:
    return TapDecision("defer")


TapHandler = Callable[[Delivery], TapDecision]


def passthrough(delivery: Delivery) -> TapDecision:
    return deliver(delivery.message)


@dataclass(frozen=True)
class Event:
    seq: int
    true_origin: Actor
    claimed_sender: int
    destination: Actor
    round: int
    payload: str
    action: Action
    original: Optional[str] = None
    tap: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "true_origin": self.true_origin,
            "claimed_sender": self.claimed_sender,
            "destination": self.destination,
            "round": self.round,
            "payload": self.payload,
            "original": self.original,
            "action": self.action.value,
            "tap": self.tap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Event:
        return cls(d["seq"], d["true_origin"], d["claimed_sender"], d["destination"],
                   d["round"], d["payload"], Action(d["action"]), d.get("original"),
                   d.get("tap"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


class Transcript:
    def __init__(self, events=None):
        self.events: list[Event] = list(events or [])

    def append(self, event: Event) -> None:
        if self.events and event.seq <= self.events[-1].seq:
            raise RoutingError("transcript sequence numbers must increase")
        self.events.append(event)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def counts(self) -> dict[str, int]:
        c = Counter(e.action.value for e in self.events)
        return {a.value: c.get(a.value, 0) for a in Action}

    def lines(self) -> list[str]:
        return [e.to_json() for e in self.events]

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    @classmethod
    def from_lines(cls, lines) -> Transcript:
        return cls(Event.from_dict(json.loads(line)) for line in lines if line.strip())


class Quiescent:
    def __repr__(self):
        return "QUIESCENT"


QUIESCENT = Quiescent()


class Network:
    def __init__(self, n: int):
        self.n = n
        self.pending: deque[Delivery] = deque()
        self.taps: dict[int, TapHandler] = {}
        self.transcript = Transcript()
        self.inboxes: dict[int, list[Message]] = {i: [] for i in range(1, n + 1)}
        self.enqueued = 0
        self._seq = 0

    def _push(self, d: Delivery) -> None:
        self.enqueued += 1
        self.pending.append(d)

    def install_tap(self, victim: int, handler: TapHandler) -> None:
        if not 1 <= victim <= self.n:
            raise ConfigurationError(f"tap victim {victim} outside 1..{self.n}")
        if self.taps:
            raise ConfigurationError("only one tap per scenario")
        self.taps[victim] = handler

    def _record(self, d: Delivery, action: Action) -> Event:
        self._seq += 1
        ev = Event(
            seq=self._seq,
            true_origin=d.origin,
            claimed_sender=d.message.claimed_sender,
            destination=d.destination,
            round=int(d.message.round),
            payload=d.message.payload.hex(),
            action=action,
            original=d.original.hex() if d.original is not None else None,
            tap=d.tap,
        )
        self.transcript.append(ev)
        return ev

    def _enqueue_injections(self, inject) -> None:
        for dest, msg in inject:
            if not 1 <= dest <= self.n:
                raise RoutingError(f"injection to unknown party {dest}")
            self._push(Delivery(ATTACKER, dest, msg, cleared=True, tap="inject"))

    def inject(self, destination: int, msg: Message) -> None:
        """Queue an attacker-originated unicast (bypasses the tap)."""
        self._enqueue_injections([(destination, msg)])

    def broadcast(self, origin: Actor, msg: Message) -> None:
        if origin != ATTACKER and not (isinstance(origin, int) and 1 <= origin <= self.n):
            raise RoutingError(f"unknown origin {origin!r}")
        if origin == ATTACKER:
            self._enqueue_injections(
                (i, msg) for i in range(1, self.n + 1) if i != msg.claimed_sender
            )
            return
        targets = [i for i in range(1, self.n + 1) if i != origin]
        handler = self.taps.get(origin)
        if handler is None:
            for dest in targets:
                self._push(Delivery(origin, dest, msg))
            return

        decision = handler(Delivery(origin, BROADCAST, msg))
        if decision.kind == "drop":
            self._record(Delivery(origin, BROADCAST, msg, tap="drop"), Action.DROPPED)
        elif decision.kind == "deliver":
            out = decision.message
            if out.payload == msg.payload and out.claimed_sender == msg.claimed_sender:
                extra = {"tap": "pass"}
            else:
                extra = {"tap": "replace", "original": msg.payload}
            for dest in targets:
                self._push(Delivery(origin, dest, out, cleared=True, **extra))
        else:
            raise RoutingError("outbound broadcasts cannot be deferred")
        self._enqueue_injections(decision.inject)

    def shuffle(self, rng: random.Random) -> None:
        items = list(self.pending)
        rng.shuffle(items)
        self.pending = deque(items)

    def step(self):
        """Process one pending delivery; return its event, or QUIESCENT if none remain."""
        while self.pending:
            d = self.pending.popleft()
            handler = self.taps.get(d.destination)
            if d.cleared or handler is None:
                action = Action.INJECTED if d.origin == ATTACKER else (
                    Action.REPLACED if d.original is not None else Action.DELIVERED)
                return self._hand_over(d, action)

            decision = handler(d)
            self._enqueue_injections(decision.inject)
            if decision.kind == "defer":
                if d.deferrals >= MAX_DEFERRALS:
                    raise RoutingError(f"delivery to {d.destination} deferred too often")
                self.pending.append(replace(d, deferrals=d.deferrals + 1))
                continue
            if decision.kind == "drop":
                return self._record(replace(d, tap="drop"), Action.DROPPED)
            out = decision.message
            if out.payload == d.message.payload and out.claimed_sender == d.message.claimed_sender:
                return self._hand_over(replace(d, tap="pass"), Action.DELIVERED)
            return self._hand_over(
                replace(d, message=out, original=d.message.payload, tap="replace"),
                Action.REPLACED,
            )
        return QUIESCENT

    def _hand_over(self, d: Delivery, action: Action) -> Event:
        ev = self._record(d, action)
        self.inboxes[d.destination].append(replace(d.message, seq=ev.seq))
        return ev

    def run_until_quiescent(self) -> int:
        count = 0
        while self.step() is not QUIESCENT:
            count += 1
        return count


class Driver:
    """Hooks called between phases of ``run_to_quiescence``. The default does nothing."""

    def after_round1(self, net: Network) -> None:
        pass

    def after_round2(self, net: Network) -> None:
        pass


def flush_inboxes(net: Network, parties: dict[int, PartyState]) -> None:
    for i in sorted(parties):
        for msg in net.inboxes[i]:
            parties[i] = receive(parties[i], msg)
        net.inboxes[i].clear()


def _settle(net: Network, parties: dict[int, PartyState], shuffle_rng) -> None:
    if shuffle_rng is not None:
        net.shuffle(shuffle_rng)
    net.run_until_quiescent()
    flush_inboxes(net, parties)


@dataclass
class RunResult:
    parties: dict[int, PartyState]
    keys: dict[int, GroupElement]
    transcript: Transcript


def run_to_quiescence(
    net: Network,
    parties: dict[int, PartyState],
    rngs: dict[int, random.Random],
    driver: Optional[Driver] = None,
    secrets: Optional[dict[int, Scalar]] = None,
    shuffle_rng: Optional[random.Random] = None,
) -> RunResult:
    """Drive all parties through both rounds and key computation.

    Round-one messages are all delivered before any round-two message is
    produced. ``driver`` gets control after each round's deliveries settle.
    Raises ``StuckRunError`` naming the first party that cannot advance.
    """
    driver = driver or Driver()
    secrets = secrets or {}
    parties = dict(parties)

    for i in sorted(parties):
        parties[i], msg = round1(parties[i], rngs[i], secrets.get(i))
        net.broadcast(i, msg)
    _settle(net, parties, shuffle_rng)
    driver.after_round1(net)
    _settle(net, parties, None)

    for i in sorted(parties):
        try:
            parties[i], msg = round2(parties[i])
        except IncompleteRoundError as exc:
            raise StuckRunError(i, exc.missing, "round 2", parties) from exc
        net.broadcast(i, msg)
    _settle(net, parties, shuffle_rng)
    driver.after_round2(net)
    _settle(net, parties, None)

    keys = {}
    for i in sorted(parties):
        try:
            parties[i], keys[i] = compute_key(parties[i])
        except IncompleteRoundError as exc:
            raise StuckRunError(i, exc.missing, "key computation", parties) from exc
    return RunResult(parties, keys, net.transcript)


def honest_parties(params: GroupParams, n: int) -> dict[int, PartyState]:
    return {i: new_party(params, i, n) for i in range(1, n + 1)}
