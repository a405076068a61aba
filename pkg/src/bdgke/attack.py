"""Active single-link attack on the Burmester-Desmedt exchange.

The attacker controls every message to and from one victim U_k. Toward the
rest of the group it impersonates U_k with its own exponent a, running an
honest exchange with them that ends in a key K. Toward the victim it swaps
z_{k+1} for z_{k-1}^a, which makes the victim's round-two value
X_k = (z_{k-1}^{r_k})^(a-1). Inverting a-1 recovers s = z_{k-1}^{r_k}, and
from s, X_k and K the attacker forges the victim's incoming X values so that
the victim's own key computation also lands on K.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import (
    InvalidSizeError,
    OrderingError,
    PreconditionError,
    ProtocolDeviationError,
)
from .group import GroupElement, GroupParams, Scalar, product, random_element, random_scalar
from .group import resolve_group, scalar_inverse, substream
from .netsim import (
    ATTACKER,
    BROADCAST,
    Delivery,
    Driver,
    Network,
    TapDecision,
    defer,
    deliver,
    drop,
    honest_parties,
    run_to_quiescence,
)
from .protocol import (
    Message,
    Round,
    compute_key,
    new_party,
    receive,
    round1,
    round2,
    wrap,
)
from .scenario import Execution, RunReport, ScenarioConfig, build_report, party_rngs


def choose_a(rng: random.Random, params: GroupParams) -> tuple[Scalar, Scalar]:
    """Draw a uniformly from Z_q minus {1}; return (a, (a-1)^-1)."""
    while True:
        a = random_scalar(rng, params)
        if a.value != 1:
            return a, scalar_inverse(a - 1)


class ForgedList(NamedTuple):
    values: dict[int, GroupElement]
    h: list[GroupElement]
    evading_value: GroupElement


def forge_x_list(
    params: GroupParams,
    n: int,
    k: int,
    s: GroupElement,
    K: GroupElement,
    x_k: GroupElement,
    rng: Optional[random.Random] = None,
    h: Optional[list[GroupElement]] = None,
    evasion: bool = True,
) -> ForgedList:
    """Build the n-1 round-two values the victim U_k should receive.

    ``x_k`` is the victim's own round-two value and ``s`` equals z_{k-1}^{r_k}.
    The blinding list ``h`` has n-3 entries and is sampled from ``rng`` when
    not given. The slot X_{k-1} never enters the victim's key; it is filled
    with the value that makes all n X values multiply to the identity, or
    with a random element when ``evasion`` is off.
    """
    if n < 3:
        raise InvalidSizeError("forging needs n >= 3")
    if h is None and n == 3:
        h = []
    if h is None:
        if rng is None:
            raise ValueError("need rng or an explicit blinding list")
        h = [random_element(rng, params) for _ in range(n - 3)]
    if len(h) != n - 3:
        raise ValueError(f"blinding list must have {n - 3} entries")

    xs: dict[int, GroupElement] = {}
    s_inv = s.inverse()
    if n == 3:
        # n = 3 solved directly from K_k = s^3 * X_k^2 * X_{k+1}
        xs[wrap(k + 1, n)] = K * x_k ** -2 * s ** -3
    else:
        xs[wrap(k + 1, n)] = s_inv * h[0]
        for j in range(2, n - 2):
            xs[wrap(k + j, n)] = h[j - 2].inverse() * h[j - 1]
        last = K * x_k ** -(n - 1) * s ** -2 * h[n - 4] ** -2
        last = last * product((hr.inverse() for hr in h[: n - 4]), params)
        xs[wrap(k - 2, n)] = last

    evading = (x_k * product(xs.values(), params)).inverse()
    if evasion:
        xs[wrap(k - 1, n)] = evading
    else:
        if rng is None:
            raise ValueError("need rng to draw a non-evading value")
        xs[wrap(k - 1, n)] = random_element(rng, params)
    return ForgedList(dict(sorted(xs.items())), list(h), evading)


@dataclass
class AttackerState:
    params: GroupParams
    n: int
    k: int
    a: Scalar
    b: Scalar
    seen_z: dict[int, GroupElement] = field(default_factory=dict)
    seen_X: dict[int, GroupElement] = field(default_factory=dict)
    captured_zk: Optional[GroupElement] = None
    captured_Xk: Optional[GroupElement] = None
    s: Optional[GroupElement] = None
    h: list[GroupElement] = field(default_factory=list)
    K: Optional[GroupElement] = None
    forged: dict[int, GroupElement] = field(default_factory=dict)
    evading_value: Optional[GroupElement] = None
    phase: str = "init"

    def __post_init__(self):
        if (self.a - 1).value == 0:
            raise PreconditionError("a - 1 must be invertible mod q")
        if (self.b * (self.a - 1)).value != 1:
            raise PreconditionError("b must equal (a - 1)^-1")


class Attacker(Driver):
    """Tap handler and phase driver for the attack on victim ``k``.

    Internally the attacker runs a shadow honest party at index k with secret
    a; that shadow is what the non-victims actually exchange keys with.
    """

    def __init__(self, params: GroupParams, n: int, k: int, rng: random.Random,
                 a: Optional[Scalar] = None, evasion: bool = True):
        if n < 3:
            raise InvalidSizeError("the protocol needs at least 3 parties")
        if not 1 <= k <= n:
            raise PreconditionError(f"victim {k} outside 1..{n}")
        if a is None:
            a, b = choose_a(rng, params)
        elif (a - 1).value == 0:
            raise PreconditionError("a = 1 makes a - 1 non-invertible")
        else:
            b = scalar_inverse(a - 1)
        self.state = AttackerState(params, n, k, a, b)
        self.rng = rng
        self.evasion = evasion
        self.shadow, self.forged_z = round1(new_party(params, k, n), rng, secret=a)

    @property
    def k(self) -> int:
        return self.state.k

    @property
    def key(self) -> Optional[GroupElement]:
        return self.state.K

    def _others(self) -> list[int]:
        return [i for i in range(1, self.state.n + 1) if i != self.state.k]

    def _observe(self, msg: Message) -> None:
        st = self.state
        slot = st.seen_z if msg.round == Round.ONE else st.seen_X
        slot[msg.claimed_sender] = msg.payload
        self.shadow = receive(self.shadow, msg)

    def __call__(self, d: Delivery) -> TapDecision:
        if d.destination == BROADCAST:
            if d.message.round == Round.ONE:
                return self.tap_round1(d)
            return self.capture_xk(d)
        if d.message.round == Round.ONE:
            return self.tap_round1(d)
        # inbound round two: keep the real value, the victim gets a forgery later
        self._observe(d.message)
        return drop()

    def tap_round1(self, d: Delivery) -> TapDecision:
        st = self.state
        msg = d.message
        if d.destination == BROADCAST:
            # suppress z_k; everyone else hears g^a in U_k's name
            st.captured_zk = msg.payload
            st.phase = "round1"
            return drop(inject=[(i, self.forged_z) for i in self._others()])

        left, right = wrap(st.k - 1, st.n), wrap(st.k + 1, st.n)
        if msg.claimed_sender != right:
            self._observe(msg)
            return deliver(msg)
        if left not in st.seen_z:
            if d.deferrals:
                raise OrderingError(f"z_{left} never reached the tap before z_{right}")
            return defer()
        self._observe(msg)
        return deliver(Message(right, Round.ONE, st.seen_z[left] ** st.a))

    def capture_xk(self, d: Delivery) -> TapDecision:
        st = self.state
        x_k = d.message.payload
        s = x_k ** st.b
        if s ** (st.a - 1) != x_k:
            raise ProtocolDeviationError("recovered s does not satisfy s^(a-1) = X_k")
        st.captured_Xk, st.s = x_k, s
        self.shadow, msg = round2(self.shadow)
        st.phase = "captured"
        return drop(inject=[(i, msg) for i in self._others()])

    def finish_parallel_run(self) -> GroupElement:
        """Compute K from the shadow party's view once every non-victim X is in."""
        self.shadow, K = compute_key(self.shadow)
        self.state.K = K
        self.state.phase = "keyed"
        return K

    def after_round2(self, net: Network) -> None:
        st = self.state
        if st.captured_Xk is None:
            raise OrderingError("victim's round-two value was never captured")
        K = self.finish_parallel_run()
        forged = forge_x_list(st.params, st.n, st.k, st.s, K, st.captured_Xk,
                              rng=self.rng, evasion=self.evasion)
        st.h, st.forged, st.evading_value = forged.h, forged.values, forged.evading_value
        for i, value in forged.values.items():
            net.inject(st.k, Message(i, Round.TWO, value))
        st.phase = "forged"


def run_attack(config: ScenarioConfig, params: Optional[GroupParams] = None,
               a: Optional[Scalar] = None, shuffle_seed: Optional[int] = None) -> Execution:
    config.validate()
    if config.mode != "attack":
        raise PreconditionError("run_attack needs mode=attack")
    params = params or resolve_group(config.group)
    attacker = Attacker(params, config.n, config.victim, substream(config.seed, "attacker"),
                        a=a, evasion=config.evasion)
    net = Network(config.n)
    net.install_tap(config.victim, attacker)
    shuffle_rng = substream(shuffle_seed, "shuffle") if shuffle_seed is not None else None
    result = run_to_quiescence(net, honest_parties(params, config.n),
                               party_rngs(config.seed, config.n), driver=attacker,
                               shuffle_rng=shuffle_rng)
    keys = {**result.keys, ATTACKER: attacker.key}
    report = build_report(config, params, result.parties, keys, result.transcript)
    return Execution(config, params, result.parties, keys, result.transcript, report, attacker)


def attack_driver(config: ScenarioConfig) -> RunReport:
    return run_attack(config).report
