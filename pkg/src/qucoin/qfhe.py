"""Functional stand-in for the delegated (homomorphic) mint.

No real cryptography happens here. The sealed box is a keyed XOR stream so
the dataflow has the right shape: the bank seals its pad, the delegatee runs
the row-span circuit without calling ``unseal``, and only the bank opens the
returned QOTP keys. Key ownership is enforced through the API and audited by
counting ``unseal`` calls per key.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MalformedRequest, WrongKey
from .f2 import BitVec, F2Matrix, Subspace, random_subspace
from .qsim import CosetState, StateVector, apply_x, apply_z, expand

BANK_KEY = "bank"


@dataclass(frozen=True)
class QotpKeys:
    x_pad: BitVec
    z_pad: BitVec

    def __post_init__(self) -> None:
        if self.x_pad.length != self.z_pad.length:
            raise ValueError("pad lengths differ")

    def to_bytes(self) -> bytes:
        return json.dumps(
            {"lambda": self.x_pad.length, "x": self.x_pad.hex(), "z": self.z_pad.hex()}
        ).encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> QotpKeys:
        d = json.loads(raw)
        return cls(BitVec.from_hex(d["x"], d["lambda"]), BitVec.from_hex(d["z"], d["lambda"]))

    def fingerprint(self) -> str:
        return f"{self.x_pad.hex()}/{self.z_pad.hex()}"


@dataclass(frozen=True)
class SealedCiphertext:
    payload: bytes
    key_id: str

    def to_json(self) -> dict:
        return {"key_id": self.key_id, "payload": base64.b64encode(self.payload).decode()}

    @classmethod
    def from_json(cls, data: dict) -> SealedCiphertext:
        return cls(base64.b64decode(data["payload"]), data["key_id"])


_NONCE = 16


class Keyring:
    def __init__(self) -> None:
        self._secrets: dict[str, bytes] = {}
        self.unseal_calls: Counter[str] = Counter()

    def _secret(self, key_id: str) -> bytes:
        if key_id not in self._secrets:
            self._secrets[key_id] = hashlib.sha256(b"qucoin-mock-key:" + key_id.encode()).digest()
        return self._secrets[key_id]

    def _stream(self, key_id: str, nonce: bytes, n: int) -> bytes:
        return hashlib.shake_256(self._secret(key_id) + nonce).digest(n)

    def seal(self, key_id: str, message: bytes, rng: np.random.Generator | None = None) -> SealedCiphertext:
        nonce = rng.bytes(_NONCE) if rng is not None else os.urandom(_NONCE)
        body = bytes(a ^ b for a, b in zip(message, self._stream(key_id, nonce, len(message))))
        return SealedCiphertext(nonce + body, key_id)

    def _open(self, ct: SealedCiphertext) -> bytes:
        nonce, body = ct.payload[:_NONCE], ct.payload[_NONCE:]
        return bytes(a ^ b for a, b in zip(body, self._stream(ct.key_id, nonce, len(body))))

    def unseal(self, key_id: str, ct: SealedCiphertext) -> bytes:
        if ct.key_id != key_id:
            raise WrongKey(f"ciphertext sealed under {ct.key_id!r}, not {key_id!r}")
        self.unseal_calls[key_id] += 1
        return self._open(ct)


KEYRING = Keyring()


def seal(key_id: str, message: bytes, rng: np.random.Generator | None = None) -> SealedCiphertext:
    return KEYRING.seal(key_id, message, rng)


def unseal(key_id: str, ct: SealedCiphertext) -> bytes:
    return KEYRING.unseal(key_id, ct)


@dataclass(frozen=True)
class MintRequest:
    masked_matrix: F2Matrix
    ct: SealedCiphertext

    def to_json(self) -> dict:
        m = self.masked_matrix
        return {"lambda": m.ncols, "masked_rows": m.to_hex(), "ct": self.ct.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> MintRequest:
        return cls(F2Matrix.from_hex(data["masked_rows"], data["lambda"]), SealedCiphertext.from_json(data["ct"]))


@dataclass(frozen=True)
class MintResponse:
    padded_state: StateVector
    ct_keys: SealedCiphertext


def qotp_encrypt(s: StateVector, k: QotpKeys) -> StateVector:
    """X^x Z^z. Encrypting twice with the same keys is the identity up to a global sign."""
    if k.x_pad.length != s.nqubits:
        raise ValueError(f"pad length {k.x_pad.length} does not match {s.nqubits} qubits")
    return apply_x(apply_z(s, k.z_pad), k.x_pad)


def qotp_decrypt(s: StateVector, k: QotpKeys) -> StateVector:
    return apply_z(apply_x(s, k.x_pad), k.z_pad)


def _encode_matrix(m: F2Matrix) -> bytes:
    return json.dumps({"lambda": m.ncols, "rows": m.to_hex()}).encode()


def _decode_matrix(raw: bytes) -> F2Matrix:
    d = json.loads(raw)
    return F2Matrix.from_hex(d["rows"], d["lambda"])


def make_mint_request(
    S: Subspace, rng: np.random.Generator, key_id: str = BANK_KEY, keyring: Keyring = KEYRING
) -> MintRequest:
    """Bank side: pad the basis matrix of S with a one-time pad and seal the pad."""
    m = S.basis
    pad = F2Matrix.random(m.nrows, m.ncols, rng)
    return MintRequest(m ^ pad, keyring.seal(key_id, _encode_matrix(pad), rng))


def delegated_mint(req: MintRequest, rng: np.random.Generator, keyring: Keyring = KEYRING) -> MintResponse:
    """Receiver side: homomorphically evaluate the row-span circuit.

    Returns the coset state of row-span(M_S) under a fresh random QOTP, plus
    the QOTP keys sealed for the bank. The pad is consumed inside the
    simulated evaluation and never surfaces, and ``unseal`` is never called.
    """
    m = req.masked_matrix
    lam = m.ncols
    if lam < 2 or lam % 2 or m.nrows != lam // 2:
        raise MalformedRequest(f"expected a {lam // 2} x {lam} matrix, got {m.nrows} x {lam}")
    pad = _decode_matrix(keyring._open(req.ct))
    if (pad.nrows, pad.ncols) != (m.nrows, m.ncols):
        raise MalformedRequest("sealed pad does not match the masked matrix")
    space = Subspace.span((m ^ pad).rows, lam)
    keys = QotpKeys(BitVec.random(lam, rng), BitVec.random(lam, rng))
    padded = qotp_encrypt(expand(CosetState(space, BitVec.zeros(lam), BitVec.zeros(lam))), keys)
    return MintResponse(padded, keyring.seal(req.ct.key_id, keys.to_bytes(), rng))


def open_response(resp: MintResponse, key_id: str = BANK_KEY, keyring: Keyring = KEYRING) -> QotpKeys:
    return QotpKeys.from_bytes(keyring.unseal(key_id, resp.ct_keys))


@dataclass
class DelegatedMint:
    """Result of one accepted run of the delegated mint loop."""

    S: Subspace
    keys: QotpKeys
    response: MintResponse
    attempts: int


def run_delegated_mint(
    lam: int,
    rng: np.random.Generator,
    key_id: str = BANK_KEY,
    keyring: Keyring = KEYRING,
    on_message: Callable[[str, dict], None] | None = None,
    max_attempts: int = 1000,
) -> DelegatedMint:
    """Repeat request/evaluate/open until the returned shift lies outside S."""
    for attempt in range(1, max_attempts + 1):
        S = random_subspace(lam, lam // 2, rng)
        req = make_mint_request(S, rng, key_id, keyring)
        if on_message:
            on_message("MintRequest", req.to_json())
        resp = delegated_mint(req, rng, keyring)
        if on_message:
            on_message("MintResponse", {"ct_keys": resp.ct_keys.to_json()})
        keys = open_response(resp, key_id, keyring)
        if keys.x_pad not in S:
            return DelegatedMint(S, keys, resp, attempt)
    raise RuntimeError(f"no acceptable mint after {max_attempts} attempts")


def lightning_keys(lam: int, n_trials: int, rng: np.random.Generator, keyring: Keyring | None = None) -> list[QotpKeys]:
    """Run delegated_mint n_trials times on one fixed request; return the opened keys."""
    keyring = keyring if keyring is not None else Keyring()
    S = random_subspace(lam, lam // 2, rng)
    req = make_mint_request(S, rng, keyring=keyring)
    return [open_response(delegated_mint(req, rng, keyring), keyring=keyring) for _ in range(n_trials)]


def count_collisions(keys: list[QotpKeys]) -> int:
    """Number of unordered pairs with identical (x, z)."""
    counts = Counter(k.fingerprint() for k in keys)
    return sum(c * (c - 1) // 2 for c in counts.values())


def lightning_collision_trial(lam: int, n_trials: int, rng: np.random.Generator) -> int:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    return count_collisions(lightning_keys(lam, n_trials, rng))


def birthday_expectation(lam: int, n_trials: int) -> float:
    return n_trials * (n_trials - 1) / 2 * 2.0 ** (-2 * lam)
