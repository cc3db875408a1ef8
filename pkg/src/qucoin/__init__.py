"""Simulated semi-quantum tokens: subspace-coset mint, verification, signing by
destruction, and a multi-channel transfer protocol over a simulated ledger."""

from .f2 import BitVec, Coset, F2Matrix, Subspace
from .protocol import (
    Bank,
    Party,
    TransferOutcome,
    bank_issue,
    face_to_face_transfer,
    onchain_transfer,
    remote_transfer,
)
from .token import (
    OracleTriple,
    QuantumToken,
    TransferSignature,
    mint_token,
    mint_unit,
    sign_unit,
    transfer_sign,
    verify_transfer,
    verify_unit,
)

__all__ = [
    "Bank",
    "BitVec",
    "Coset",
    "F2Matrix",
    "OracleTriple",
    "Party",
    "QuantumToken",
    "Subspace",
    "TransferOutcome",
    "TransferSignature",
    "bank_issue",
    "face_to_face_transfer",
    "mint_token",
    "mint_unit",
    "onchain_transfer",
    "remote_transfer",
    "sign_unit",
    "transfer_sign",
    "verify_transfer",
    "verify_unit",
]
