"""Bit-exact linear algebra over GF(2).

Vectors are packed into Python ints. Position 0 is the leftmost character of
the textual form, which is the most significant bit of the packed int, so the
int value of ``BitVec.from_str("1100")`` is ``0b1100``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class BitVec:
    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be positive, got {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> BitVec:
        return cls(0, length)

    @classmethod
    def from_str(cls, text: str) -> BitVec:
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(int(text, 2), len(text))

    @classmethod
    def from_hex(cls, text: str, length: int) -> BitVec:
        return cls(int(text, 16), length)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> BitVec:
        return cls.from_str("".join(str(int(b) & 1) for b in bits))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> BitVec:
        bits = rng.integers(0, 2, size=length)
        return cls.from_bits(bits)

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        i %= self.length
        return (self.value >> (self.length - 1 - i)) & 1

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        return (self[i] for i in range(self.length))

    def __xor__(self, other: BitVec) -> BitVec:
        _check_len(self, other)
        return BitVec(self.value ^ other.value, self.length)

    def dot(self, other: BitVec) -> int:
        """Inner product mod 2."""
        _check_len(self, other)
        return (self.value & other.value).bit_count() & 1

    def weight(self) -> int:
        return self.value.bit_count()

    def flip(self, i: int) -> BitVec:
        return BitVec(self.value ^ (1 << (self.length - 1 - i)), self.length)

    def is_zero(self) -> bool:
        return self.value == 0

    def hex(self) -> str:
        return f"0x{self.value:X}"

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b")

    def __repr__(self) -> str:
        return f"BitVec('{self}')"


def _check_len(a: BitVec, b: BitVec) -> None:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")


@dataclass(frozen=True)
class F2Matrix:
    rows: tuple[BitVec, ...]
    ncols: int

    def __post_init__(self) -> None:
        for r in self.rows:
            if r.length != self.ncols:
                raise ValueError(f"row {r} has length {r.length}, expected {self.ncols}")

    @classmethod
    def from_rows(cls, rows: Iterable[BitVec | str], ncols: int | None = None) -> F2Matrix:
        vecs = tuple(BitVec.from_str(r) if isinstance(r, str) else r for r in rows)
        if ncols is None:
            if not vecs:
                raise ValueError("ncols required for an empty matrix")
            ncols = vecs[0].length
        return cls(vecs, ncols)

    @classmethod
    def random(cls, nrows: int, ncols: int, rng: np.random.Generator) -> F2Matrix:
        return cls(tuple(BitVec.random(ncols, rng) for _ in range(nrows)), ncols)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    def rank(self) -> int:
        return rref(self).nrows

    def __xor__(self, other: F2Matrix) -> F2Matrix:
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError("matrix shape mismatch")
        return F2Matrix(tuple(a ^ b for a, b in zip(self.rows, other.rows)), self.ncols)

    def to_hex(self) -> list[str]:
        return [r.hex() for r in self.rows]

    @classmethod
    def from_hex(cls, rows: Sequence[str], ncols: int) -> F2Matrix:
        return cls(tuple(BitVec.from_hex(h, ncols) for h in rows), ncols)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)


def _rref_ints(rows: Iterable[int], n: int) -> list[int]:
    work = [r for r in rows if r]
    out: list[int] = []
    for col in range(n):
        mask = 1 << (n - 1 - col)
        pivot = next((i for i, r in enumerate(work) if r & mask), None)
        if pivot is None:
            continue
        p = work.pop(pivot)
        work = [r ^ p if r & mask else r for r in work]
        out = [r ^ p if r & mask else r for r in out]
        out.append(p)
        work = [r for r in work if r]
    return out


def rref(m: F2Matrix) -> F2Matrix:
    """Reduced row echelon form with zero rows dropped."""
    rows = _rref_ints((r.value for r in m.rows), m.ncols)
    return F2Matrix(tuple(BitVec(r, m.ncols) for r in rows), m.ncols)


@dataclass(frozen=True)
class Subspace:
    """A subspace of GF(2)^ambient, stored as its rref basis.

    Equality and hashing are basis equality, which is well defined because the
    rref basis of a subspace is unique.
    """

    basis: F2Matrix
    ambient: int

    def __post_init__(self) -> None:
        if self.basis.ncols != self.ambient:
            raise ValueError("basis width does not match ambient dimension")
        if rref(self.basis) != self.basis:
            raise ValueError("basis is not in reduced row echelon form; use Subspace.span")

    @classmethod
    def span(cls, vectors: Iterable[BitVec | str], ambient: int | None = None) -> Subspace:
        m = F2Matrix.from_rows(vectors, ambient)
        return cls(rref(m), m.ncols)

    @classmethod
    def zero(cls, ambient: int) -> Subspace:
        return cls(F2Matrix((), ambient), ambient)

    @classmethod
    def full(cls, ambient: int) -> Subspace:
        rows = tuple(BitVec(1 << (ambient - 1 - i), ambient) for i in range(ambient))
        return cls(F2Matrix(rows, ambient), ambient)

    @property
    def dim(self) -> int:
        return self.basis.nrows

    def pivots(self) -> list[int]:
        """Column index of the leading 1 in each basis row."""
        return [self.ambient - r.value.bit_length() for r in self.basis.rows]

    def reduce(self, v: BitVec) -> BitVec:
        """Canonical representative of the coset v + S."""
        if v.length != self.ambient:
            raise ValueError(f"length mismatch: {v.length} vs {self.ambient}")
        x = v.value
        for r in self.basis.rows:
            top = 1 << (r.value.bit_length() - 1)
            if x & top:
                x ^= r.value
        return BitVec(x, self.ambient)

    def __contains__(self, v: BitVec) -> bool:
        return self.reduce(v).is_zero()

    def elements(self) -> Iterator[BitVec]:
        rows = [r.value for r in self.basis.rows]
        for mask in range(1 << len(rows)):
            x = 0
            for i, r in enumerate(rows):
                if mask >> i & 1:
                    x ^= r
            yield BitVec(x, self.ambient)

    def issubset(self, other: Subspace) -> bool:
        return all(r in other for r in self.basis.rows)

    def to_json(self) -> dict:
        return {"ambient": self.ambient, "basis": self.basis.to_hex()}

    @classmethod
    def from_json(cls, data: dict) -> Subspace:
        return cls.span(F2Matrix.from_hex(data["basis"], data["ambient"]).rows, data["ambient"])

    def __str__(self) -> str:
        inner = ", ".join(str(r) for r in self.basis.rows)
        return f"span{{{inner}}}" if inner else f"{{{'0' * self.ambient}}}"


@dataclass(frozen=True)
class Coset:
    space: Subspace
    shift: BitVec

    def __post_init__(self) -> None:
        if self.shift.length != self.space.ambient:
            raise ValueError("shift length does not match ambient dimension")

    def __contains__(self, v: BitVec) -> bool:
        return (v ^ self.shift) in self.space

    def representative(self) -> BitVec:
        return self.space.reduce(self.shift)

    def same_as(self, other: Coset) -> bool:
        return self.space == other.space and self.representative() == other.representative()

    def elements(self) -> Iterator[BitVec]:
        return (s ^ self.shift for s in self.space.elements())


def member(s: Subspace, v: BitVec) -> bool:
    return v in s


def coset_member(c: Coset, v: BitVec) -> bool:
    if v.length != c.shift.length:
        raise ValueError(f"length mismatch: {v.length} vs {c.shift.length}")
    return v in c


def random_subspace(lam: int, dim: int, rng: np.random.Generator) -> Subspace:
    """Uniform dim-dimensional subspace of GF(2)^lam.

    Rejection-samples random dim x lam matrices until one has full row rank.
    """
    if not 0 <= dim <= lam:
        raise ValueError(f"dimension {dim} out of range for ambient {lam}")
    if dim == 0:
        return Subspace.zero(lam)
    while True:
        m = F2Matrix.random(dim, lam, rng)
        r = rref(m)
        if r.nrows == dim:
            return Subspace(r, lam)


def dual(s: Subspace) -> Subspace:
    """Orthogonal complement under the mod-2 dot product."""
    n = s.ambient
    pivots = s.pivots()
    free = [c for c in range(n) if c not in set(pivots)]
    out = []
    for f in free:
        v = 1 << (n - 1 - f)
        for row, p in zip(s.basis.rows, pivots):
            if row[f]:
                v |= 1 << (n - 1 - p)
        out.append(BitVec(v, n))
    return Subspace.span(out, n)


def split_subspace(s: Subspace, rng: np.random.Generator) -> tuple[Subspace, BitVec]:
    """Split S into a hyperplane S0 and a vector w with S = S0 u (S0 + w)."""
    if s.dim < 1:
        raise ValueError("cannot split the zero subspace")
    j = int(rng.integers(s.dim))
    rest = [r for i, r in enumerate(s.basis.rows) if i != j]
    return Subspace.span(rest, s.ambient), s.basis.rows[j]


def all_vectors(lam: int) -> list[BitVec]:
    return [BitVec(i, lam) for i in range(1 << lam)]
