"""In-process simulation of the on-chain registry and the escrow transfer contract.

All mutations go through one append-only event log, so the log is a total
order of writes and replaying it rebuilds the same state.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    AlreadySettled,
    InsufficientValue,
    InvalidSignature,
    Rejected,
    Unauthorized,
    UnknownToken,
)
from .f2 import BitVec
from .token import OracleTriple, TransferSignature, verify_transfer

OracleResolver = Callable[[str], OracleTriple]


class Capability:
    """Opaque write capability handed to the bank."""

    __slots__ = ("holder",)

    def __init__(self, holder: str) -> None:
        self.holder = holder

    def __repr__(self) -> str:
        return f"Capability({self.holder!r})"


class RecordStatus(str, enum.Enum):
    LIVE = "live"
    DESTROYED = "destroyed"


class EscrowState(str, enum.Enum):
    OPEN = "open"
    SETTLED = "settled"
    VOID = "void"


@dataclass
class LedgerRecord:
    token_id: BitVec
    oracle_pks: list[str]
    value: int
    status: RecordStatus = RecordStatus.LIVE
    destroyed_to: BitVec | None = None

    def to_json(self) -> dict:
        return {
            "token_id": self.token_id.hex(),
            "lambda": self.token_id.length,
            "oracle_pks": list(self.oracle_pks),
            "value": self.value,
            "status": self.status.value,
            "destroyed_to": self.destroyed_to.hex() if self.destroyed_to else None,
        }


@dataclass
class EscrowContract:
    contract_id: str
    owner: str
    dest_id: BitVec
    deposit: int
    state: EscrowState = EscrowState.OPEN
    beneficiary: str | None = None
    delivered: TransferSignature | None = None

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "owner": self.owner,
            "dest_id": self.dest_id.hex(),
            "deposit": self.deposit,
            "state": self.state.value,
            "beneficiary": self.beneficiary,
        }


@dataclass(frozen=True)
class Settlement:
    contract_id: str
    to: str
    amount: int
    signature: TransferSignature


@dataclass
class Event:
    seq: int
    op: str
    args: dict
    result: str
    cause: str = field(default="")

    def to_json(self) -> dict:
        return asdict(self)


def _key(token_id: BitVec) -> tuple[int, int]:
    return (token_id.length, token_id.value)


class Ledger:
    """Bank-writable, world-readable token registry plus escrow contracts.

    ``resolve`` maps an oracle address to its public oracle triple; contracts
    use nothing else to check signatures.
    """

    def __init__(self, bank_cap: Capability, resolve: OracleResolver | None = None) -> None:
        self._bank_cap = bank_cap
        self._resolve = resolve
        self._records: dict[tuple[int, int], LedgerRecord] = {}
        self._contracts: dict[str, EscrowContract] = {}
        self._balances: dict[str, int] = {}
        self.events: list[Event] = []
        self.listeners: list[Callable[[Event], None]] = []

    # -- log ------------------------------------------------------------

    def _log(self, op: str, args: dict, result: str, cause: str) -> Event:
        ev = Event(len(self.events) + 1, op, args, result, cause)
        self.events.append(ev)
        for fn in self.listeners:
            fn(ev)
        return ev

    def _check_bank(self, caller: Capability | None) -> None:
        if caller is not self._bank_cap:
            raise Unauthorized("only the bank may write to the registry")

    # -- registry -------------------------------------------------------

    def register_token(self, caller: Capability | None, record: LedgerRecord) -> None:
        args = {"record": record.to_json()}
        try:
            self._check_bank(caller)
        except Unauthorized:
            self._log("register_token", args, "unauthorized", "external")
            raise
        if _key(record.token_id) in self._records:
            self._log("register_token", args, "rejected", "bank")
            raise Rejected(f"token id {record.token_id} already registered")
        self._records[_key(record.token_id)] = copy.deepcopy(record)
        self._log("register_token", args, "ok", "bank")

    def _record(self, token_id: BitVec) -> LedgerRecord:
        try:
            return self._records[_key(token_id)]
        except KeyError:
            raise UnknownToken(f"unknown token {token_id}") from None

    def has_token(self, token_id: BitVec) -> bool:
        return _key(token_id) in self._records

    def get_oracle(self, token_id: BitVec) -> list[str]:
        return list(self._record(token_id).oracle_pks)

    def get_value(self, token_id: BitVec) -> int:
        return self._record(token_id).value

    def get_record(self, token_id: BitVec) -> LedgerRecord:
        return copy.deepcopy(self._record(token_id))

    def public_oracles(self, token_id: BitVec) -> list[OracleTriple]:
        if self._resolve is None:
            raise RuntimeError("ledger has no oracle resolver")
        return [self._resolve(pk) for pk in self.get_oracle(token_id)]

    def _check_transfer(self, source: BitVec, dest: BitVec) -> tuple[LedgerRecord, LedgerRecord]:
        src, dst = self._record(source), self._record(dest)
        if src.status is not RecordStatus.LIVE:
            raise Rejected(f"source {source} already destroyed")
        if dst.status is not RecordStatus.LIVE or dst.value != 0:
            raise Rejected(f"destination {dest} is not a live zero-value token")
        if source == dest:
            raise Rejected("source and destination coincide")
        return src, dst

    def _apply_transfer(self, src: LedgerRecord, dst: LedgerRecord) -> None:
        dst.value = src.value
        src.value = 0
        src.status = RecordStatus.DESTROYED
        src.destroyed_to = dst.token_id

    def apply_transfer(self, caller: Capability | None, sig: TransferSignature) -> None:
        """Bank-reported value reassignment after an off-chain transfer. First report wins."""
        args = {"lambda": sig.dest_id.length, "source_id": sig.source_id.hex(), "dest_id": sig.dest_id.hex()}
        self._check_bank(caller)
        try:
            src, dst = self._check_transfer(sig.source_id, sig.dest_id)
            if not verify_transfer(sig, self.public_oracles(sig.source_id), sig.dest_id):
                raise InvalidSignature("transfer signature does not verify")
        except (Rejected, InvalidSignature, UnknownToken) as exc:
            self._log("apply_transfer", args, type(exc).__name__, "bank")
            raise
        self._apply_transfer(src, dst)
        self._log("apply_transfer", args, "ok", "bank")

    # -- crypto balances ------------------------------------------------

    def fund(self, caller: Capability | None, party: str, amount: int) -> None:
        """Genesis credit of crypto units to a party (bank-only)."""
        self._check_bank(caller)
        if amount < 0:
            raise ValueError("amount must be non-negative")
        self._balances[party] = self._balances.get(party, 0) + amount
        self._log("fund", {"party": party, "amount": amount}, "ok", "bank")

    def balance(self, party: str) -> int:
        return self._balances.get(party, 0)

    def total_crypto(self) -> int:
        locked = sum(c.deposit for c in self._contracts.values() if c.state is EscrowState.OPEN)
        return sum(self._balances.values()) + locked

    # -- escrow ---------------------------------------------------------

    def create_escrow(self, owner: str, dest_id: BitVec, deposit: int) -> str:
        if deposit < 0:
            raise ValueError("deposit must be non-negative")
        if self.balance(owner) < deposit:
            raise InsufficientValue(f"{owner} cannot cover a deposit of {deposit}")
        cid = f"escrow:{len(self._contracts) + 1:04d}"
        self._balances[owner] -= deposit
        self._contracts[cid] = EscrowContract(cid, owner, dest_id, deposit)
        self._log(
            "create_escrow",
            {
                "contract_id": cid,
                "owner": owner,
                "lambda": dest_id.length,
                "dest_id": dest_id.hex(),
                "deposit": deposit,
            },
            "ok",
            "contract",
        )
        return cid

    def contract(self, contract_id: str) -> EscrowContract:
        return copy.copy(self._contracts[contract_id])

    def contract_sign(self, contract_id: str, signer_id: str, sig: TransferSignature) -> Settlement:
        """The contract's sign(signerID, signature) entry point.

        Checks, in order: state open, destination binding, source value covers
        the deposit, signature valid against the public oracles. Payout,
        signature delivery and the registry update commit together.
        """
        c = self._contracts[contract_id]
        args = {"contract_id": contract_id, "signer": signer_id, "signature": sig.to_json()}
        try:
            if c.state is not EscrowState.OPEN:
                raise AlreadySettled(f"{contract_id} is {c.state.value}")
            if sig.dest_id != c.dest_id:
                raise InvalidSignature("signature is bound to a different destination id")
            if self.get_value(sig.source_id) < c.deposit:
                raise InsufficientValue("token value is below the deposit")
            src, dst = self._check_transfer(sig.source_id, sig.dest_id)
            if not verify_transfer(sig, self.public_oracles(sig.source_id), c.dest_id):
                raise InvalidSignature("transfer signature does not verify")
        except (AlreadySettled, InvalidSignature, InsufficientValue, UnknownToken, Rejected) as exc:
            self._log("contract_sign", args, type(exc).__name__, "contract")
            if isinstance(exc, Rejected):
                raise InvalidSignature(str(exc)) from exc
            raise
        self._apply_transfer(src, dst)
        self._balances[signer_id] = self._balances.get(signer_id, 0) + c.deposit
        c.state = EscrowState.SETTLED
        c.beneficiary = signer_id
        c.delivered = sig
        self._log("contract_sign", args, "ok", "contract")
        return Settlement(contract_id, signer_id, c.deposit, sig)

    # -- inspection -----------------------------------------------------

    def records(self) -> list[LedgerRecord]:
        return [copy.deepcopy(r) for r in self._records.values()]

    def live_value(self) -> int:
        return sum(r.value for r in self._records.values() if r.status is RecordStatus.LIVE)

    def open_escrows(self) -> list[str]:
        return [cid for cid, c in self._contracts.items() if c.state is EscrowState.OPEN]

    def snapshot(self) -> dict:
        return {
            "records": [r.to_json() for r in self._records.values()],
            "contracts": [c.to_json() for c in self._contracts.values()],
            "balances": dict(sorted(self._balances.items())),
        }

    def write_events(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")

    def write_snapshot(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True))

    @classmethod
    def replay(cls, events: Iterable[Event | dict]) -> Ledger:
        """Rebuild ledger state from a mutation log, skipping failed operations.

        Signatures are not re-verified: a logged "ok" is a committed write.
        """
        cap = Capability("replay")
        led = cls(cap)
        for ev in events:
            if isinstance(ev, dict):
                ev = Event(**ev)
            if ev.result != "ok":
                led.events.append(ev)
                continue
            a = ev.args
            if ev.op == "register_token":
                r = a["record"]
                lam = r["lambda"]
                led._records[(lam, int(r["token_id"], 16))] = LedgerRecord(
                    BitVec.from_hex(r["token_id"], lam),
                    list(r["oracle_pks"]),
                    r["value"],
                    RecordStatus(r["status"]),
                    BitVec.from_hex(r["destroyed_to"], lam) if r["destroyed_to"] else None,
                )
            elif ev.op == "apply_transfer":
                lam = a["lambda"]
                src = led._records[(lam, int(a["source_id"], 16))]
                dst = led._records[(lam, int(a["dest_id"], 16))]
                led._apply_transfer(src, dst)
            elif ev.op == "fund":
                led._balances[a["party"]] = led._balances.get(a["party"], 0) + a["amount"]
            elif ev.op == "create_escrow":
                dest = BitVec.from_hex(a["dest_id"], a["lambda"])
                c = EscrowContract(a["contract_id"], a["owner"], dest, a["deposit"])
                led._balances[a["owner"]] -= a["deposit"]
                led._contracts[c.contract_id] = c
            elif ev.op == "contract_sign":
                sig = TransferSignature.from_json(a["signature"])
                c = led._contracts[a["contract_id"]]
                led._apply_transfer(led._records[_key(sig.source_id)], led._records[_key(sig.dest_id)])
                led._balances[a["signer"]] = led._balances.get(a["signer"], 0) + c.deposit
                c.state = EscrowState.SETTLED
                c.beneficiary = a["signer"]
                c.delivered = sig
            else:
                raise ValueError(f"unknown op {ev.op!r}")
            led.events.append(ev)
        return led
