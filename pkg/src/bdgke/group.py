"""Prime-order cyclic groups realised as Schnorr subgroups of Z_p^*.

Nothing here is constant time. The simulator demonstrates a logical attack;
it is not meant to protect secrets.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import gmpy2

from .errors import (
    DomainMismatchError,
    InvalidParamsError,
    NonInvertibleError,
    ParameterGenerationError,
)

# 4**-40 == 2**-80
PRIMALITY_REPS = 40

SCHNORR_256_SEED = 0x5C4A0256


def is_probable_prime(n: int) -> bool:
    return n >= 2 and bool(gmpy2.is_prime(n, PRIMALITY_REPS))


@dataclass(frozen=True)
class GroupParams:
    p: int
    q: int
    g: int

    def validate(self) -> GroupParams:
        """Check every structural invariant and return self, or raise."""
        if not is_probable_prime(self.p):
            raise InvalidParamsError("p is not prime")
        if not is_probable_prime(self.q):
            raise InvalidParamsError("q is not prime")
        if (self.p - 1) % self.q:
            raise InvalidParamsError("q does not divide p - 1")
        if not 2 <= self.g <= self.p - 1 or pow(self.g, self.q, self.p) != 1:
            raise InvalidParamsError("g does not generate the order-q subgroup")
        return self

    @property
    def identity(self) -> GroupElement:
        return GroupElement(1, self)

    @property
    def generator(self) -> GroupElement:
        return GroupElement(self.g, self)

    def element(self, value: int) -> GroupElement:
        """Wrap an untrusted integer, checking subgroup membership."""
        if not 1 <= value <= self.p - 1 or pow(value, self.q, self.p) != 1:
            raise InvalidParamsError(f"{value:#x} is not in the order-q subgroup")
        return GroupElement(value, self)

    def scalar(self, value: int) -> Scalar:
        return Scalar(value % self.q, self.q)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def to_dict(self) -> dict[str, str]:
        return {"p": f"{self.p:x}", "q": f"{self.q:x}", "g": f"{self.g:x}"}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> GroupParams:
        try:
            return cls(int(data["p"], 16), int(data["q"], 16), int(data["g"], 16))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParamsError(f"malformed group parameters: {exc}") from exc


@dataclass(frozen=True, slots=True)
class Scalar:
    """An exponent in Z_q, always canonically reduced."""

    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            raise ValueError(f"scalar {self.value} not reduced mod {self.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, Scalar):
            if other.q != self.q:
                raise DomainMismatchError("scalars from different moduli")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return Scalar((self.value + v) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return Scalar((self.value - v) % self.q, self.q)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return Scalar((v - self.value) % self.q, self.q)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return Scalar((self.value * v) % self.q, self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return Scalar(-self.value % self.q, self.q)

    def __int__(self):
        return self.value

    def inverse(self) -> Scalar:
        return scalar_inverse(self)


@dataclass(frozen=True, slots=True)
class GroupElement:
    """A member of the order-q subgroup, stored as its residue in [1, p-1].

    Results of group operations are trusted to stay in the subgroup; use
    ``GroupParams.element`` to admit values from outside.
    """

    value: int
    params: GroupParams

    def _check(self, other: GroupElement) -> None:
        if other.params is not self.params and other.params != self.params:
            raise DomainMismatchError("elements from different groups")

    def __mul__(self, other: GroupElement) -> GroupElement:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return mul(self, other)

    def __truediv__(self, other: GroupElement) -> GroupElement:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return div(self, other)

    def __pow__(self, e) -> GroupElement:
        if isinstance(e, Scalar):
            return exp(self, e)
        if isinstance(e, int):
            return exp(self, self.params.scalar(e))
        return NotImplemented

    def inverse(self) -> GroupElement:
        return GroupElement(pow(self.value, -1, self.params.p), self.params)

    def hex(self) -> str:
        return f"{self.value:x}"

    def __repr__(self) -> str:
        return f"GroupElement({self.value:#x})"


def exp(base: GroupElement, e: Scalar) -> GroupElement:
    if e.q != base.params.q:
        raise DomainMismatchError("exponent modulus does not match group order")
    return GroupElement(int(gmpy2.powmod(base.value, e.value, base.params.p)), base.params)


def mul(x: GroupElement, y: GroupElement) -> GroupElement:
    x._check(y)
    return GroupElement(x.value * y.value % x.params.p, x.params)


def div(x: GroupElement, y: GroupElement) -> GroupElement:
    x._check(y)
    p = x.params.p
    # pow(y, -1, p) == y^(p-2) mod p for prime p
    return GroupElement(x.value * pow(y.value, -1, p) % p, x.params)


def product(elements, params: GroupParams) -> GroupElement:
    acc = params.identity
    for e in elements:
        acc = acc * e
    return acc


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        quot, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - quot * x1
        y0, y1 = y1, y0 - quot * y1
    return a, x0, y0


def scalar_inverse(s: Scalar) -> Scalar:
    if s.value == 0:
        raise NonInvertibleError("zero has no inverse mod q")
    d, x, _ = _egcd(s.value, s.q)
    if d != 1:
        raise NonInvertibleError(f"{s.value} is not invertible mod {s.q}")
    return Scalar(x % s.q, s.q)


def random_scalar(rng: random.Random, params: GroupParams) -> Scalar:
    """Uniform draw from Z_q by rejection sampling on bit_length(q)-bit integers."""
    q = params.q
    bits = q.bit_length()
    while True:
        v = rng.getrandbits(bits)
        if v < q:
            return Scalar(v, q)


def random_element(rng: random.Random, params: GroupParams) -> GroupElement:
    return params.generator ** random_scalar(rng, params)


def substream(seed: int, actor: str) -> random.Random:
    """Independent generator for one actor, derived from (seed, actor).

    Actors never share a stream, so the order in which they draw cannot
    change what any of them samples.
    """
    material = hashlib.sha256(f"{seed}/{actor}".encode()).digest()
    return random.Random(int.from_bytes(material, "big"))


def toy_group() -> GroupParams:
    return GroupParams(p=23, q=11, g=4)


def schnorr_group(bits: int, rng: random.Random, q_bits: int = 160,
                  max_tries: int = 100_000) -> GroupParams:
    """Generate a Schnorr group with a `bits`-bit modulus p and `q_bits`-bit order q.

    Finds a prime q, then searches p = 2*m*q + 1 over random m of the right
    size, then maps a random h into the subgroup as g = h^((p-1)/q).
    """
    if bits < 256:
        raise ValueError("schnorr_group requires bits >= 256")
    if not 2 <= q_bits < bits - 1:
        raise ValueError("q_bits must be smaller than bits - 1")

    for _ in range(max_tries):
        q = rng.getrandbits(q_bits) | (1 << (q_bits - 1)) | 1
        if is_probable_prime(q):
            break
    else:
        raise ParameterGenerationError("no prime q found")

    lo = -(-(1 << (bits - 1)) // (2 * q))
    hi = ((1 << bits) - 2) // (2 * q)
    for _ in range(max_tries):
        m = rng.randint(lo, hi)
        p = 2 * m * q + 1
        if is_probable_prime(p):
            break
    else:
        raise ParameterGenerationError("no prime p = 2mq + 1 found")

    cofactor = (p - 1) // q
    for _ in range(max_tries):
        g = pow(rng.randint(2, p - 2), cofactor, p)
        if g != 1:
            return GroupParams(p, q, g).validate()
    raise ParameterGenerationError("no generator found")


@lru_cache(maxsize=None)
def schnorr_256() -> GroupParams:
    """The fixed 256-bit group used by the ``schnorr-256`` group name."""
    return schnorr_group(256, random.Random(SCHNORR_256_SEED))


def load_params(path) -> GroupParams:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParamsError(f"{path}: {exc}") from exc
    return GroupParams.from_dict(data).validate()


def dump_params(params: GroupParams, path) -> None:
    Path(path).write_text(params.to_json() + "\n")


def resolve_group(name: str) -> GroupParams:
    """Map a group name (``toy``, ``schnorr-256``, ``file:<path>``) to parameters."""
    if name == "toy":
        return toy_group()
    if name == "schnorr-256":
        return schnorr_256()
    if name.startswith("file:"):
        return load_params(name[len("file:"):])
    raise InvalidParamsError(f"unknown group {name!r}")
