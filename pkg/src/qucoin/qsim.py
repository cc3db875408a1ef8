"""Ideal statevector simulation of subspace coset states.

Amplitude index ``i`` is the basis state whose bit string is the binary
expansion of ``i`` (qubit 0 is the most significant bit), which lines up with
``BitVec.value``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .f2 import BitVec, Subspace, dual

BACKEND_CAP = 16
NORM_TOL = 1e-9
_ZERO_AMP = 1e-12

Predicate = Callable[[BitVec], bool]


class BackendCapExceeded(ValueError):
    pass


def _check_cap(lam: int) -> None:
    if lam > BACKEND_CAP:
        raise BackendCapExceeded(f"lambda={lam} exceeds statevector cap {BACKEND_CAP}")


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    nqubits: int

    def __post_init__(self) -> None:
        _check_cap(self.nqubits)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.nqubits,):
            raise ValueError(f"expected {1 << self.nqubits} amplitudes, got {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm})")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, v: BitVec) -> StateVector:
        amps = np.zeros(1 << v.length, dtype=complex)
        amps[v.value] = 1.0
        return cls(amps, v.length)

    def amplitude(self, v: BitVec) -> complex:
        return complex(self.amplitudes[v.value])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def support(self) -> list[BitVec]:
        idx = np.flatnonzero(np.abs(self.amplitudes) > _ZERO_AMP)
        return [BitVec(int(i), self.nqubits) for i in idx]

    def to_json(self) -> str:
        """Debug dump: nonzero (bitstring, amplitude) pairs."""
        pairs = [
            [str(v), [float(a.real), float(a.imag)]]
            for v in self.support()
            for a in [self.amplitudes[v.value]]
        ]
        return json.dumps({"lambda": self.nqubits, "amplitudes": pairs})


@dataclass(frozen=True)
class CosetState:
    """Symbolic state proportional to sum_{s in space} (-1)^<phase,s> |s + shift>."""

    space: Subspace
    shift: BitVec
    phase: BitVec

    def canonical(self) -> CosetState:
        """Same state up to global phase, with shift and phase reduced."""
        shift = self.space.reduce(self.shift)
        signs = [self.phase.dot(b) for b in self.space.basis.rows]
        z = 0
        for c, p in zip(signs, self.space.pivots()):
            if c:
                z |= 1 << (self.space.ambient - 1 - p)
        return CosetState(self.space, shift, BitVec(z, self.space.ambient))

    def hadamard(self) -> CosetState:
        """Transversal Hadamard, symbolically: swaps the roles of shift and phase."""
        return CosetState(dual(self.space), self.phase, self.shift)

    def sample(self, rng: np.random.Generator) -> BitVec:
        """Computational-basis measurement outcome (uniform over the coset)."""
        x = self.shift.value
        for r in self.space.basis.rows:
            if rng.integers(2):
                x ^= r.value
        return BitVec(x, self.space.ambient)


@dataclass(frozen=True)
class MeasurementOutcome:
    bit: int
    post_state: StateVector
    probability: float


def expand(c: CosetState) -> StateVector:
    lam = c.space.ambient
    _check_cap(lam)
    amps = np.zeros(1 << lam, dtype=complex)
    amp = 1.0 / np.sqrt(1 << c.space.dim)
    for s in c.space.elements():
        amps[(s ^ c.shift).value] = -amp if c.phase.dot(s) else amp
    return StateVector(amps, lam)


def to_coset_state(s: StateVector) -> CosetState:
    """Recover the canonical coset description of a coset state.

    Raises ValueError if the state is not (up to global phase) a coset state.
    """
    lam = s.nqubits
    support = s.support()
    x = support[0]
    space = Subspace.span([v ^ x for v in support], lam)
    if len(support) != 1 << space.dim:
        raise ValueError("support is not an affine subspace")
    ref = s.amplitude(x)
    z = 0
    for b, p in zip(space.basis.rows, space.pivots()):
        ratio = s.amplitude(b ^ x) / ref
        if abs(ratio + 1) < 1e-6:
            z |= 1 << (lam - 1 - p)
        elif abs(ratio - 1) > 1e-6:
            raise ValueError("relative phases are not +-1")
    c = CosetState(space, x, BitVec(z, lam)).canonical()
    if fidelity(expand(c), s) < 1 - NORM_TOL:
        raise ValueError("state is not a coset state")
    return c


def hadamard_all(s: StateVector) -> StateVector:
    n = s.nqubits
    x = s.amplitudes.reshape((2,) * n) if n else s.amplitudes
    for axis in range(n):
        a0 = np.take(x, 0, axis=axis)
        a1 = np.take(x, 1, axis=axis)
        x = np.stack([a0 + a1, a0 - a1], axis=axis)
    out = x.reshape(-1) / np.sqrt(1 << n)
    return StateVector(out, n)


def apply_x(s: StateVector, mask: BitVec) -> StateVector:
    idx = np.arange(1 << s.nqubits) ^ mask.value
    return StateVector(s.amplitudes[idx], s.nqubits)


def apply_z(s: StateVector, mask: BitVec) -> StateVector:
    parity = (np.bitwise_count(np.arange(1 << s.nqubits) & mask.value) & 1).astype(np.int64)
    return StateVector(s.amplitudes * (1 - 2 * parity), s.nqubits)


def measure_predicate(s: StateVector, pred: Predicate, rng: np.random.Generator) -> MeasurementOutcome:
    """Two-outcome projective measurement of the projector onto {v : pred(v)}.

    The predicate is only evaluated on the state's support.
    """
    amps = s.amplitudes
    idx = np.flatnonzero(np.abs(amps) > _ZERO_AMP)
    hit = np.array([bool(pred(BitVec(int(i), s.nqubits))) for i in idx], dtype=bool)
    probs = np.abs(amps[idx]) ** 2
    total = probs.sum()
    p1 = float(probs[hit].sum() / total)
    if p1 >= 1.0:
        bit = 1
    elif p1 <= 0.0:
        bit = 0
    else:
        bit = int(rng.random() < p1)
    keep = idx[hit] if bit else idx[~hit]
    post = np.zeros_like(amps)
    post[keep] = amps[keep]
    post /= np.linalg.norm(post)
    return MeasurementOutcome(bit, StateVector(post, s.nqubits), p1 if bit else 1.0 - p1)


def measure_all(s: StateVector, rng: np.random.Generator) -> BitVec:
    """Computational-basis measurement. The caller must treat the state as consumed."""
    p = s.probabilities()
    i = rng.choice(len(p), p=p / p.sum())
    return BitVec(int(i), s.nqubits)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.nqubits != b.nqubits:
        raise ValueError(f"qubit count mismatch: {a.nqubits} vs {b.nqubits}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def point_set(s: StateVector) -> set[BitVec]:
    return set(s.support())


__all__ = [
    "BACKEND_CAP",
    "BackendCapExceeded",
    "CosetState",
    "MeasurementOutcome",
    "StateVector",
    "apply_x",
    "apply_z",
    "expand",
    "fidelity",
    "hadamard_all",
    "measure_all",
    "measure_predicate",
    "point_set",
    "to_coset_state",
]
