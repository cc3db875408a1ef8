"""Bank, parties and the three transfer channels.

Parties only exchange classical ``ChannelMessage`` objects (serialized on the
wire) and read/write the shared ledger. Every step can be recorded to a
``Trace`` with logical timestamps.
"""

from __future__ import annotations

import enum
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    AlreadySettled,
    ChannelDropped,
    DoubleSpendAttempt,
    InsufficientValue,
    InvalidSignature,
    QuCoinError,
    Rejected,
    UnknownToken,
    VerificationFailed,
)
from .f2 import BitVec, Subspace, split_subspace
from .ledger import Capability, Ledger, LedgerRecord
from .qfhe import BANK_KEY, Keyring, QotpKeys, run_delegated_mint
from .qsim import CosetState
from .token import (
    OracleService,
    OracleTriple,
    QuantumToken,
    TokenUnit,
    TokenUnitSecret,
    TransferSignature,
    transfer_sign,
    verify_token,
    verify_transfer,
)


class Trace:
    """Append-only event trace with a logical clock."""

    def __init__(self) -> None:
        self.events: list[dict] = []

    def emit(self, event: str, **fields) -> None:
        self.events.append({"t": len(self.events) + 1, "event": event, **fields})

    def write(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")


class _NullTrace(Trace):
    def emit(self, event: str, **fields) -> None:
        pass


NULL_TRACE = _NullTrace()


# -- messages and channels ------------------------------------------------


class MessageKind(str, enum.Enum):
    MINT_REQUEST = "MintRequest"
    MINT_RESPONSE = "MintResponse"
    DUMMY_ID_ANNOUNCE = "DummyIdAnnounce"
    SIGNATURE_DELIVERY = "SignatureDelivery"
    ESCROW_NOTICE = "EscrowNotice"


@dataclass(frozen=True)
class ChannelMessage:
    kind: MessageKind
    sender: str
    receiver: str
    payload: dict

    def to_wire(self) -> str:
        return json.dumps(
            {"kind": self.kind.value, "sender": self.sender, "receiver": self.receiver, "payload": self.payload},
            sort_keys=True,
        )

    @classmethod
    def from_wire(cls, raw: str) -> ChannelMessage:
        d = json.loads(raw)
        return cls(MessageKind(d["kind"]), d["sender"], d["receiver"], d["payload"])

    def digest(self) -> str:
        return hashlib.sha256(self.to_wire().encode()).hexdigest()[:16]


@dataclass
class Fault:
    """One injected transport fault.

    ``type`` is drop, duplicate, reorder or tamper; ``message`` restricts it
    to one message kind (None matches all).
    """

    type: str
    message: str | None = None
    probability: float = 1.0
    tamper: Callable[[dict], dict] | None = None

    def __post_init__(self) -> None:
        if self.type not in {"drop", "duplicate", "reorder", "tamper"}:
            raise ValueError(f"unknown fault type {self.type!r}")
        if self.type == "tamper" and self.tamper is None:
            raise ValueError("tamper fault needs a tamper function")

    @classmethod
    def from_json(cls, data: dict) -> Fault:
        return cls(data["type"], data.get("message"), float(data.get("probability", 1.0)))


class Channel:
    """In-process classical channel with injectable loss, duplication, reordering and tampering."""

    def __init__(
        self,
        rng: np.random.Generator | None = None,
        faults: list[Fault] | None = None,
        trace: Trace = NULL_TRACE,
        name: str = "classical",
    ) -> None:
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self.faults = list(faults or [])
        self.trace = trace
        self.name = name
        self._queue: deque[str] = deque()

    def _fires(self, f: Fault, msg: ChannelMessage) -> bool:
        if f.message is not None and f.message != msg.kind.value:
            return False
        return f.probability >= 1.0 or self._rng.random() < f.probability

    def send(self, msg: ChannelMessage) -> None:
        self.trace.emit("send", channel=self.name, kind=msg.kind.value, sender=msg.sender,
                        receiver=msg.receiver, digest=msg.digest())
        copies = 1
        front = False
        for f in self.faults:
            if not self._fires(f, msg):
                continue
            if f.type == "drop":
                self.trace.emit("fault", channel=self.name, type="drop", kind=msg.kind.value)
                return
            if f.type == "duplicate":
                copies += 1
            elif f.type == "reorder":
                front = True
            elif f.type == "tamper":
                msg = ChannelMessage(msg.kind, msg.sender, msg.receiver, f.tamper(dict(msg.payload)))
            self.trace.emit("fault", channel=self.name, type=f.type, kind=msg.kind.value)
        wire = msg.to_wire()
        for _ in range(copies):
            if front:
                self._queue.appendleft(wire)
            else:
                self._queue.append(wire)

    def recv(self, receiver: str, kind: MessageKind) -> ChannelMessage:
        """Next message of ``kind`` addressed to ``receiver``; other traffic stays queued."""
        for i, wire in enumerate(self._queue):
            msg = ChannelMessage.from_wire(wire)
            if msg.receiver == receiver and msg.kind is kind:
                del self._queue[i]
                self.trace.emit("receive", channel=self.name, kind=kind.value, receiver=receiver,
                                digest=msg.digest())
                return msg
        raise ChannelDropped(f"no {kind.value} for {receiver}")

    def pending(self) -> int:
        return len(self._queue)


# -- parties ----------------------------------------------------------------


@dataclass
class Party:
    id: str
    tokens: list[QuantumToken] = field(default_factory=list)


@dataclass
class IssueRecord:
    oracle_pks: tuple[str, ...]
    value: int
    id: BitVec
    status: str = "live"


# consecutive duplicate mint reports tolerated before giving up
MAX_MINT_REPORTS = 1000


class Bank:
    """Classical bank: issues tokens through the delegated mint and owns the registry write key."""

    def __init__(
        self,
        rng: np.random.Generator,
        trace: Trace = NULL_TRACE,
        service: OracleService | None = None,
        keyring: Keyring | None = None,
        id: str = "bank",
    ) -> None:
        self.id = id
        self.rng = rng
        self.trace = trace
        self.service = service if service is not None else OracleService()
        self.keyring = keyring if keyring is not None else Keyring()
        self.cap = Capability(id)
        self.ledger = Ledger(self.cap, self.service.resolve)
        self.ledger.listeners.append(self._trace_ledger)
        self.issued: dict[str, IssueRecord] = {}
        self.reported: set[str] = set()
        self.next_serial = 1
        self.total_issued = 0
        self.total_funded = 0

    def _trace_ledger(self, ev) -> None:
        self.trace.emit("ledger", seq=ev.seq, op=ev.op, result=ev.result, cause=ev.cause)

    def report_mint(self, S: Subspace, keys: QotpKeys) -> None:
        """First-report-wins on the mint output.

        The serial is the canonical description of the minted state (S, x mod
        S, z mod S-perp), so two reports of the same state collide.
        """
        c = CosetState(S, keys.x_pad, keys.z_pad).canonical()
        fp = f"{'.'.join(S.basis.to_hex())}|{c.shift.hex()}|{c.phase.hex()}"
        if fp in self.reported:
            self.trace.emit("mint_report", result="rejected")
            raise Rejected(f"mint output {fp} was already reported")
        self.reported.add(fp)
        self.trace.emit("mint_report", result="ok")

    def _fresh_id(self, lam: int) -> BitVec:
        taken = {r.id for r in self.issued.values() if r.id.length == lam}
        if len(taken) >= 1 << lam:
            raise Rejected(f"id space of {1 << lam} exhausted")
        while True:
            cand = BitVec.random(lam, self.rng)
            if cand not in taken:
                return cand

    def mint_unit(self, lam: int, receiver: str) -> tuple[TokenUnit, OracleTriple]:
        def on_message(kind: str, payload: dict) -> None:
            src, dst = (self.id, receiver) if kind == MessageKind.MINT_REQUEST.value else (receiver, self.id)
            msg = ChannelMessage(MessageKind(kind), src, dst, payload)
            self.trace.emit("send", channel="mint", kind=kind, sender=src, receiver=dst, digest=msg.digest())

        for _ in range(MAX_MINT_REPORTS):
            run = run_delegated_mint(lam, self.rng, BANK_KEY, self.keyring, on_message)
            try:
                self.report_mint(run.S, run.keys)
                break
            except Rejected:
                continue
        else:
            raise Rejected(f"{MAX_MINT_REPORTS} consecutive mint outputs were already reported")
        S0, w = split_subspace(run.S, self.rng)
        secret = TokenUnitSecret(run.S, S0, w, run.keys.x_pad, run.keys.z_pad)
        oracles = self.service.publish(secret)
        return TokenUnit(run.response.padded_state, oracles.pk), oracles

    def issue(self, lam: int, value: int, owner: Party | None = None) -> QuantumToken:
        """Mint lambda units, assign a fresh id and register the token."""
        if value < 0:
            raise ValueError("value must be non-negative")
        receiver = owner.id if owner else "receiver"
        minted = [self.mint_unit(lam, receiver) for _ in range(lam)]
        pks = tuple(o.pk for _, o in minted)
        while True:
            tid = self._fresh_id(lam)
            try:
                self.ledger.register_token(self.cap, LedgerRecord(tid, list(pks), value))
                break
            except Rejected:
                continue
        token = QuantumToken([u for u, _ in minted], pks, tid, value)
        self.issued[tid.hex()] = IssueRecord(pks, value, tid)
        self.next_serial += 1
        self.total_issued += value
        self.trace.emit("issue", token=tid.hex(), owner=receiver, value=value, lam=lam)
        if owner is not None:
            owner.tokens.append(token)
        return token

    def record_transfer(self, sig: TransferSignature) -> None:
        self.ledger.apply_transfer(self.cap, sig)
        self.issued[sig.source_id.hex()].status = "destroyed"

    def fund(self, party: Party | str, amount: int) -> None:
        pid = party.id if isinstance(party, Party) else party
        self.ledger.fund(self.cap, pid, amount)
        self.total_funded += amount

    def oracles_for(self, token_id: BitVec) -> list[OracleTriple]:
        return self.ledger.public_oracles(token_id)


def bank_issue(bank: Bank, lam: int, value: int, owner: Party | None = None) -> QuantumToken:
    return bank.issue(lam, value, owner)


# -- outcomes ---------------------------------------------------------------


class FailureReason(str, enum.Enum):
    DOUBLE_SPEND = "DoubleSpendAttempt"
    VERIFICATION_FAILED = "VerificationFailed"
    CHANNEL_DROPPED = "ChannelDropped"
    INSUFFICIENT_VALUE = "InsufficientValue"
    INVALID_SIGNATURE = "InvalidSignature"
    ALREADY_SETTLED = "AlreadySettled"
    LEDGER_REJECTED = "Rejected"
    UNKNOWN_TOKEN = "UnknownToken"


_REASON_ERRORS: dict[FailureReason, type[QuCoinError]] = {
    FailureReason.DOUBLE_SPEND: DoubleSpendAttempt,
    FailureReason.VERIFICATION_FAILED: VerificationFailed,
    FailureReason.CHANNEL_DROPPED: ChannelDropped,
    FailureReason.INSUFFICIENT_VALUE: InsufficientValue,
    FailureReason.INVALID_SIGNATURE: InvalidSignature,
    FailureReason.ALREADY_SETTLED: AlreadySettled,
    FailureReason.LEDGER_REJECTED: Rejected,
    FailureReason.UNKNOWN_TOKEN: UnknownToken,
}

_ERROR_REASONS = {
    DoubleSpendAttempt: FailureReason.DOUBLE_SPEND,
    InsufficientValue: FailureReason.INSUFFICIENT_VALUE,
    InvalidSignature: FailureReason.INVALID_SIGNATURE,
    AlreadySettled: FailureReason.ALREADY_SETTLED,
    Rejected: FailureReason.LEDGER_REJECTED,
    UnknownToken: FailureReason.UNKNOWN_TOKEN,
}


@dataclass
class TransferOutcome:
    success: bool
    signature: TransferSignature | None = None
    reason: FailureReason | None = None
    sender_destroyed: bool = False
    receiver_credited: bool = False
    flags: list[str] = field(default_factory=list)

    def raise_for_status(self) -> None:
        if not self.success:
            raise _REASON_ERRORS[self.reason](self.reason.value)

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "reason": self.reason.value if self.reason else None,
            "sender_destroyed": self.sender_destroyed,
            "receiver_credited": self.receiver_credited,
            "flags": list(self.flags),
        }


def _fail(reason: FailureReason, sig=None, destroyed=False, flags=()) -> TransferOutcome:
    return TransferOutcome(False, sig, reason, sender_destroyed=destroyed, flags=list(flags))


def _sign(bank: Bank, token: QuantumToken, dest_id: BitVec, rng, trace: Trace) -> TransferSignature:
    sig = transfer_sign(token, bank.oracles_for(token.id), dest_id, rng)
    for i, s in enumerate(sig.sigmas):
        trace.emit("measure", op="sign", token=token.id.hex(), unit=i, bit=s.bit, rounds=s.rounds)
    return sig


def claim(bank: Bank, receiver: Party, dummy: QuantumToken, sig: TransferSignature, trace: Trace = NULL_TRACE) -> TransferOutcome:
    """Receiver-side check of a delivered signature, then the bank's value bookkeeping."""
    try:
        oracles = bank.oracles_for(sig.source_id)
    except UnknownToken:
        return _fail(FailureReason.UNKNOWN_TOKEN, sig)
    ok = verify_transfer(sig, oracles, dummy.id)
    trace.emit("verify_transfer", receiver=receiver.id, dest=dummy.id.hex(), result=ok)
    if not ok:
        return _fail(FailureReason.VERIFICATION_FAILED, sig)
    try:
        bank.record_transfer(sig)
    except (Rejected, InvalidSignature, UnknownToken) as exc:
        return _fail(_ERROR_REASONS[type(exc)], sig)
    dummy.value = bank.ledger.get_value(dummy.id)
    return TransferOutcome(True, sig, receiver_credited=True)


def _precheck(bank: Bank, dummy: QuantumToken) -> None:
    if bank.ledger.get_value(dummy.id) != 0:
        raise ValueError("destination must be a zero-value dummy token")


def face_to_face_transfer(
    bank: Bank,
    sender: Party,
    receiver: Party,
    token_a: QuantumToken,
    dummy_b: QuantumToken,
    rng: np.random.Generator,
    trace: Trace = NULL_TRACE,
) -> TransferOutcome:
    _precheck(bank, dummy_b)
    trace.emit("announce", channel="local", sender=receiver.id, receiver=sender.id, dest=dummy_b.id.hex())
    try:
        sig = _sign(bank, token_a, dummy_b.id, rng, trace)
    except DoubleSpendAttempt:
        return _fail(FailureReason.DOUBLE_SPEND)
    out = claim(bank, receiver, dummy_b, sig, trace)
    out.sender_destroyed = True
    if out.success:
        token_a.value = 0
    return out


def remote_transfer(
    bank: Bank,
    sender: Party,
    receiver: Party,
    token_a: QuantumToken,
    dummy_b: QuantumToken,
    channel: Channel,
    rng: np.random.Generator,
    trace: Trace = NULL_TRACE,
) -> TransferOutcome:
    _precheck(bank, dummy_b)
    channel.send(ChannelMessage(MessageKind.DUMMY_ID_ANNOUNCE, receiver.id, sender.id,
                                {"dest_id": dummy_b.id.hex(), "lambda": dummy_b.lam}))
    try:
        announce = channel.recv(sender.id, MessageKind.DUMMY_ID_ANNOUNCE)
    except ChannelDropped:
        return _fail(FailureReason.CHANNEL_DROPPED, flags=["announce_lost"])
    dest = BitVec.from_hex(announce.payload["dest_id"], announce.payload["lambda"])
    try:
        sig = _sign(bank, token_a, dest, rng, trace)
    except DoubleSpendAttempt:
        return _fail(FailureReason.DOUBLE_SPEND)
    channel.send(ChannelMessage(MessageKind.SIGNATURE_DELIVERY, sender.id, receiver.id, sig.to_json()))
    try:
        delivered = channel.recv(receiver.id, MessageKind.SIGNATURE_DELIVERY)
    except ChannelDropped:
        # the known weakness of this channel: the sender has paid, the receiver has nothing
        return _fail(FailureReason.CHANNEL_DROPPED, sig, destroyed=True,
                     flags=["sender_destroyed_receiver_uncredited"])
    out = claim(bank, receiver, dummy_b, TransferSignature.from_json(delivered.payload), trace)
    out.sender_destroyed = True
    if dest != dummy_b.id:
        out.flags.append("dest_id_substituted")
    if out.success:
        token_a.value = 0
    return out


def open_escrow(bank: Bank, receiver: Party, dummy_b: QuantumToken, deposit: int, trace: Trace = NULL_TRACE) -> str:
    cid = bank.ledger.create_escrow(receiver.id, dummy_b.id, deposit)
    trace.emit("escrow_open", contract=cid, owner=receiver.id, dest=dummy_b.id.hex(), deposit=deposit)
    return cid


def submit_to_contract(
    bank: Bank, contract_id: str, signer: Party, receiver: Party, sig: TransferSignature, trace: Trace = NULL_TRACE
) -> TransferOutcome:
    try:
        settlement = bank.ledger.contract_sign(contract_id, signer.id, sig)
    except (InsufficientValue, InvalidSignature, AlreadySettled, UnknownToken) as exc:
        return _fail(_ERROR_REASONS[type(exc)], sig)
    bank.issued[sig.source_id.hex()].status = "destroyed"
    notice = ChannelMessage(MessageKind.ESCROW_NOTICE, contract_id, receiver.id,
                            {"settled_to": settlement.to, "amount": settlement.amount, "signature": sig.to_json()})
    trace.emit("send", channel="chain", kind=notice.kind.value, sender=contract_id, receiver=receiver.id,
               digest=notice.digest())
    return TransferOutcome(True, sig, receiver_credited=True)


def onchain_transfer(
    bank: Bank,
    sender: Party,
    receiver: Party,
    token_a: QuantumToken,
    contract_id: str,
    rng: np.random.Generator,
    trace: Trace = NULL_TRACE,
) -> TransferOutcome:
    """Sign toward the contract's stored dummy id and call the contract.

    The sender checks the value condition before destroying anything.
    """
    c = bank.ledger.contract(contract_id)
    if c.state.value != "open":
        return _fail(FailureReason.ALREADY_SETTLED)
    if bank.ledger.get_value(token_a.id) < c.deposit:
        return _fail(FailureReason.INSUFFICIENT_VALUE)
    try:
        sig = _sign(bank, token_a, c.dest_id, rng, trace)
    except DoubleSpendAttempt:
        return _fail(FailureReason.DOUBLE_SPEND)
    out = submit_to_contract(bank, contract_id, sender, receiver, sig, trace)
    out.sender_destroyed = True
    if out.success:
        token_a.value = 0
        for t in receiver.tokens:
            if t.id == c.dest_id:
                t.value = bank.ledger.get_value(t.id)
    return out


def verify_holding(bank: Bank, token: QuantumToken, rng: np.random.Generator, trace: Trace = NULL_TRACE) -> bool:
    ok = verify_token(token, bank.oracles_for(token.id), rng)
    trace.emit("measure", op="verify", token=token.id.hex(), result=ok)
    return ok


def check_invariants(bank: Bank) -> dict[str, bool]:
    led = bank.ledger
    ok_writes = [e for e in led.events if e.result == "ok"]
    destroyed = set()
    monotone = True
    for e in ok_writes:
        if e.op in ("apply_transfer", "contract_sign"):
            src = e.args.get("source_id") or e.args["signature"]["source_id"]
            if src in destroyed:
                monotone = False
            destroyed.add(src)
    return {
        "value_conservation": led.live_value() == bank.total_issued,
        "crypto_conservation": led.total_crypto() == bank.total_funded,
        "status_monotone": monotone,
        "write_authority": all(e.cause in ("bank", "contract") for e in ok_writes),
    }
