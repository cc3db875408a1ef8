"""Token units: mint, non-destructive verification, and signing by destruction."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DoubleSpendAttempt, MaxRetriesExceeded, UnitDestroyed
from .f2 import BitVec, Coset, Subspace, dual, random_subspace, split_subspace
from .qsim import (
    BACKEND_CAP,
    BackendCapExceeded,
    CosetState,
    StateVector,
    expand,
    hadamard_all,
    measure_all,
    measure_predicate,
)

MAX_SIGN_ROUNDS = 64


@dataclass(frozen=True)
class TokenUnitSecret:
    S: Subspace
    S0: Subspace
    w: BitVec
    x_shift: BitVec
    z_phase: BitVec

    def __post_init__(self) -> None:
        if not self.S0.issubset(self.S) or self.S0.dim != self.S.dim - 1:
            raise ValueError("S0 must be a hyperplane of S")
        if self.w not in self.S or self.w in self.S0:
            raise ValueError("w must lie in S but not in S0")

    def cosets(self) -> tuple[Coset, Coset, Coset]:
        return (
            Coset(self.S0, self.x_shift),
            Coset(self.S0, self.x_shift ^ self.w),
            Coset(dual(self.S), self.z_phase),
        )


class OracleTriple:
    """Evaluation-only membership oracles for one token unit.

    The underlying cosets live in closures; nothing on the public surface
    returns basis data.
    """

    __slots__ = ("pk", "_low", "_high", "_dual")

    def __init__(self, pk: str, low: Coset, high: Coset, dual_coset: Coset) -> None:
        self.pk = pk
        self._low = low.__contains__
        self._high = high.__contains__
        self._dual = dual_coset.__contains__

    def o_low(self, v: BitVec) -> bool:
        return self._low(v)

    def o_high(self, v: BitVec) -> bool:
        return self._high(v)

    def o_dual(self, v: BitVec) -> bool:
        return self._dual(v)

    def o_sign(self, b: int):
        return self.o_high if b else self.o_low

    def o_coset(self, v: BitVec) -> bool:
        return self._low(v) or self._high(v)

    def __repr__(self) -> str:
        return f"OracleTriple(pk={self.pk!r})"


class OracleService:
    """Trusted publisher and resolver of oracle triples, keyed by address."""

    def __init__(self, prefix: str = "pk") -> None:
        self._prefix = prefix
        self._counter = itertools.count(1)
        self._published: dict[str, OracleTriple] = {}

    def publish(self, secret: TokenUnitSecret) -> OracleTriple:
        pk = f"{self._prefix}:{next(self._counter):08x}"
        o = OracleTriple(pk, *secret.cosets())
        self._published[pk] = o
        return o

    def resolve(self, pk: str) -> OracleTriple:
        return self._published[pk]

    def __len__(self) -> int:
        return len(self._published)


DEFAULT_SERVICE = OracleService()


class UnitStatus(enum.Enum):
    LIVE = "live"
    DESTROYED = "destroyed"


@dataclass
class TokenUnit:
    state: StateVector
    pk: str
    status: UnitStatus = UnitStatus.LIVE

    @property
    def live(self) -> bool:
        return self.status is UnitStatus.LIVE

    def _require_live(self) -> None:
        if not self.live:
            raise UnitDestroyed(f"unit {self.pk} was already destroyed")


@dataclass(frozen=True)
class UnitSignature:
    sigma: BitVec
    bit: int
    rounds: int = field(default=1, compare=False)

    def to_json(self) -> dict:
        return {"bit": self.bit, "sigma": self.sigma.hex()}

    @classmethod
    def from_json(cls, data: dict, lam: int) -> UnitSignature:
        return cls(BitVec.from_hex(data["sigma"], lam), int(data["bit"]))


@dataclass
class QuantumToken:
    units: list[TokenUnit]
    oracle_pks: tuple[str, ...]
    id: BitVec
    value: int

    def __post_init__(self) -> None:
        if not (len(self.units) == len(self.oracle_pks) == self.id.length):
            raise ValueError("unit count, oracle count and id length must all equal lambda")
        if self.value < 0:
            raise ValueError("value must be non-negative")

    @property
    def lam(self) -> int:
        return self.id.length

    @property
    def live(self) -> bool:
        return all(u.live for u in self.units)


@dataclass(frozen=True)
class TransferSignature:
    source_id: BitVec
    dest_id: BitVec
    sigmas: tuple[UnitSignature, ...]

    def __post_init__(self) -> None:
        if len(self.sigmas) != self.dest_id.length:
            raise ValueError("one unit signature per destination id bit required")

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id.hex(),
            "dest_id": self.dest_id.hex(),
            "sigmas": [s.to_json() for s in self.sigmas],
        }

    @classmethod
    def from_json(cls, data: dict) -> TransferSignature:
        lam = len(data["sigmas"])
        return cls(
            BitVec.from_hex(data["source_id"], lam),
            BitVec.from_hex(data["dest_id"], lam),
            tuple(UnitSignature.from_json(s, lam) for s in data["sigmas"]),
        )


def _check_lambda(lam: int) -> None:
    if lam < 2 or lam % 2:
        raise ValueError(f"lambda must be even and >= 2, got {lam}")
    if lam > BACKEND_CAP:
        raise BackendCapExceeded(f"lambda={lam} exceeds statevector cap {BACKEND_CAP}")


def sample_secret(S: Subspace, rng: np.random.Generator) -> TokenUnitSecret:
    """Draw (x, z) with x outside S, and split S. Redraws x while x is in S."""
    lam = S.ambient
    while True:
        x = BitVec.random(lam, rng)
        z = BitVec.random(lam, rng)
        if x not in S:
            break
    S0, w = split_subspace(S, rng)
    return TokenUnitSecret(S, S0, w, x, z)


def mint_unit(
    lam: int, rng: np.random.Generator, service: OracleService | None = None
) -> tuple[TokenUnit, OracleTriple, TokenUnitSecret]:
    _check_lambda(lam)
    service = service if service is not None else DEFAULT_SERVICE
    S = random_subspace(lam, lam // 2, rng)
    secret = sample_secret(S, rng)
    oracles = service.publish(secret)
    state = expand(CosetState(S, secret.x_shift, secret.z_phase))
    return TokenUnit(state, oracles.pk), oracles, secret


def verify_unit(u: TokenUnit, o: OracleTriple, rng: np.random.Generator) -> bool:
    """Coset test in the computational basis, then the dual test in the Hadamard basis.

    Both tests are projective; an honest unit passes with certainty and is left
    unchanged. Whatever post-measurement state results is written back.
    """
    u._require_live()
    first = measure_predicate(u.state, o.o_coset, rng)
    u.state = first.post_state
    if not first.bit:
        return False
    second = measure_predicate(hadamard_all(u.state), o.o_dual, rng)
    u.state = hadamard_all(second.post_state)
    return bool(second.bit)


def sign_unit(u: TokenUnit, o: OracleTriple, b: int, rng: np.random.Generator) -> UnitSignature:
    u._require_live()
    if b not in (0, 1):
        raise ValueError(f"control bit must be 0 or 1, got {b}")
    target = o.o_sign(b)
    state = u.state
    for rounds in range(1, MAX_SIGN_ROUNDS + 1):
        hit = measure_predicate(state, target, rng)
        if hit.bit:
            sigma = measure_all(hit.post_state, rng)
            u.state = StateVector.basis(sigma)
            u.status = UnitStatus.DESTROYED
            return UnitSignature(sigma, b, rounds)
        # restore step: dual-domain test, both outcomes accepted
        restored = measure_predicate(hadamard_all(hit.post_state), o.o_dual, rng)
        state = hadamard_all(restored.post_state)
        u.state = state
    raise MaxRetriesExceeded(f"unit {u.pk}: no success after {MAX_SIGN_ROUNDS} rounds")


def verify_unit_signature(sig: UnitSignature, o: OracleTriple) -> bool:
    return o.o_sign(sig.bit)(sig.sigma)


def mint_token(
    lam: int,
    value: int,
    id: BitVec,
    rng: np.random.Generator,
    service: OracleService | None = None,
) -> tuple[QuantumToken, list[OracleTriple], list[TokenUnitSecret]]:
    if id.length != lam:
        raise ValueError("id length must equal lambda")
    minted = [mint_unit(lam, rng, service) for _ in range(lam)]
    units = [m[0] for m in minted]
    oracles = [m[1] for m in minted]
    token = QuantumToken(units, tuple(o.pk for o in oracles), id, value)
    return token, oracles, [m[2] for m in minted]


def verify_token(token: QuantumToken, oracles: Sequence[OracleTriple], rng: np.random.Generator) -> bool:
    return all(verify_unit(u, o, rng) for u, o in zip(token.units, oracles))


def transfer_sign(
    token: QuantumToken,
    oracles: Sequence[OracleTriple],
    dest_id: BitVec,
    rng: np.random.Generator,
) -> TransferSignature:
    """Destroy every unit of ``token``, unit i under control bit dest_id[i]."""
    if dest_id.length != token.lam:
        raise ValueError("destination id length must equal lambda")
    if not token.live:
        raise DoubleSpendAttempt(f"token {token.id} has destroyed units")
    sigmas = tuple(sign_unit(u, o, bit, rng) for u, o, bit in zip(token.units, oracles, dest_id))
    return TransferSignature(token.id, dest_id, sigmas)


def verify_transfer(sig: TransferSignature, oracles: Sequence[OracleTriple], dest_id: BitVec) -> bool:
    if sig.dest_id != dest_id or len(oracles) != len(sig.sigmas):
        return False
    return all(
        s.bit == bit and verify_unit_signature(s, o)
        for s, o, bit in zip(sig.sigmas, oracles, dest_id)
    )
