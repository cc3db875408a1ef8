"""Scenario engine: honest flows, attacks, the lambda=4 demo and lightning statistics."""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DoubleSpendAttempt
from .f2 import BitVec, Coset, Subspace, dual, random_subspace, split_subspace
from .protocol import (
    Bank,
    Channel,
    ChannelMessage,
    Fault,
    MessageKind,
    Party,
    Trace,
    TransferOutcome,
    check_invariants,
    claim,
    face_to_face_transfer,
    onchain_transfer,
    open_escrow,
    remote_transfer,
    submit_to_contract,
    verify_holding,
)
from .qfhe import birthday_expectation, count_collisions, lightning_keys
from .qsim import CosetState, StateVector, expand, fidelity, measure_all
from .token import (
    OracleService,
    QuantumToken,
    TokenUnit,
    TokenUnitSecret,
    TransferSignature,
    UnitSignature,
    sign_unit,
    verify_unit,
)

SCENARIOS = (
    "mint",
    "verify",
    "face_to_face",
    "remote",
    "onchain",
    "double_spend_attack",
    "replay_attack",
    "forge_attack",
    "demo_eq1",
    "lightning",
)
CHANNELS = ("f2f", "remote", "onchain")


@dataclass
class ScenarioConfig:
    scenario: str = "face_to_face"
    lam: int = 4
    seed: int = 0
    value: int = 100
    trials: int = 1
    deposit: int | None = None
    faults: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.scenario != "demo_eq1":
            if self.lam % 2 or not 2 <= self.lam <= 16:
                raise ConfigError(f"lambda must be even and in [2, 16], got {self.lam}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.scenario == "lightning" and self.trials < 2:
            raise ConfigError("lightning needs at least 2 trials")
        if self.value < 0 or (self.deposit is not None and self.deposit < 0):
            raise ConfigError("value and deposit must be non-negative")
        try:
            [Fault.from_json(f) for f in self.faults]
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad fault entry: {exc}") from exc

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
            for name in ("lam", "seed", "value", "trials"):
                if not isinstance(getattr(cfg, name), int):
                    raise TypeError(f"{name} must be an integer")
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> ScenarioConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(data)

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass
class ScenarioReport:
    config: dict
    outcomes: list[dict]
    counts: dict[str, int]
    reasons: dict[str, int]
    invariants: dict[str, bool]
    timing_s: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.invariants.values())

    def to_json(self) -> dict:
        return {
            "scenario": self.config["scenario"],
            "config": self.config,
            "counts": self.counts,
            "reasons": self.reasons,
            "invariants": self.invariants,
            "ok": self.ok,
            "timing_s": round(self.timing_s, 4),
            "extras": self.extras,
            "outcomes": self.outcomes,
        }


# -- per-trial helpers ------------------------------------------------------


@dataclass
class World:
    bank: Bank
    trace: Trace
    rng: np.random.Generator
    sender: Party = field(default_factory=lambda: Party("alice"))
    receivers: list[Party] = field(default_factory=lambda: [Party("bob"), Party("carol")])


def _world(rng: np.random.Generator, trace: Trace, trial: int) -> World:
    bank = Bank(rng, trace, service=OracleService(prefix=f"pk{trial}"))
    return World(bank, trace, rng)


def _sign_rounds(trace: Trace, start: int) -> list[int]:
    return [e["rounds"] for e in trace.events[start:] if e["event"] == "measure" and e.get("op") == "sign"]


def _transfer_via(
    w: World, channel: str, receiver: Party, token: QuantumToken, dummy: QuantumToken, deposit: int, faults=()
) -> TransferOutcome:
    if channel == "f2f":
        return face_to_face_transfer(w.bank, w.sender, receiver, token, dummy, w.rng, w.trace)
    if channel == "remote":
        ch = Channel(w.rng, [Fault.from_json(f) for f in faults], w.trace, name=f"remote:{receiver.id}")
        return remote_transfer(w.bank, w.sender, receiver, token, dummy, ch, w.rng, w.trace)
    if channel == "onchain":
        w.bank.fund(receiver, deposit)
        cid = open_escrow(w.bank, receiver, dummy, deposit, w.trace)
        return onchain_transfer(w.bank, w.sender, receiver, token, cid, w.rng, w.trace)
    raise ValueError(channel)


def _present(w: World, channel: str, receiver: Party, dummy: QuantumToken, sig: TransferSignature, deposit: int) -> TransferOutcome:
    """Deliver an already-produced signature to ``receiver`` over ``channel``."""
    if channel == "f2f":
        return claim(w.bank, receiver, dummy, sig, w.trace)
    if channel == "remote":
        ch = Channel(w.rng, trace=w.trace, name=f"remote:{receiver.id}")
        ch.send(ChannelMessage(MessageKind.SIGNATURE_DELIVERY, w.sender.id, receiver.id, sig.to_json()))
        msg = ch.recv(receiver.id, MessageKind.SIGNATURE_DELIVERY)
        return claim(w.bank, receiver, dummy, TransferSignature.from_json(msg.payload), w.trace)
    w.bank.fund(receiver, deposit)
    cid = open_escrow(w.bank, receiver, dummy, deposit, w.trace)
    return submit_to_contract(w.bank, cid, w.sender, receiver, sig, w.trace)


def forge_signature(sig: TransferSignature, dest_id: BitVec, rng: np.random.Generator) -> TransferSignature:
    """Guided forgery: keep sigma where the id bits agree, perturb it where they differ."""
    sigmas = []
    for s, bit in zip(sig.sigmas, dest_id):
        if s.bit == bit:
            sigmas.append(s)
            continue
        lam = s.sigma.length
        e = BitVec(int(rng.integers(1, 1 << lam)), lam)
        sigmas.append(UnitSignature(s.sigma ^ e, bit))
    return TransferSignature(sig.source_id, dest_id, tuple(sigmas))


def classical_copy(unit: TokenUnit, rng: np.random.Generator) -> TokenUnit:
    """Counterfeit: measure the unit and re-prepare the observed basis state."""
    v = measure_all(unit.state, rng)
    return TokenUnit(StateVector.basis(v), unit.pk)


# -- scenarios --------------------------------------------------------------


def _trial_honest(cfg: ScenarioConfig, w: World, channel: str) -> dict:
    bob = w.receivers[0]
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    b = w.bank.issue(cfg.lam, 0, bob)
    deposit = cfg.value if cfg.deposit is None else cfg.deposit
    out = _transfer_via(w, channel, bob, a, b, deposit, cfg.faults)
    status = "success" if out.success else "rejected"
    return {"status": status, **out.to_json(), "value_b": w.bank.ledger.get_value(b.id)}


def _trial_mint(cfg: ScenarioConfig, w: World) -> dict:
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    ok = verify_holding(w.bank, a, w.rng, w.trace)
    return {"status": "success" if ok else "rejected", "token": a.id.hex()}


def _trial_verify(cfg: ScenarioConfig, w: World, repeats: int = 10) -> dict:
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    initial = [u.state for u in a.units]
    passes = sum(verify_holding(w.bank, a, w.rng, w.trace) for _ in range(repeats))
    fid = min(fidelity(s, u.state) for s, u in zip(initial, a.units))
    ok = passes == repeats and fid >= 1 - 1e-9
    return {"status": "success" if ok else "rejected", "passes": passes, "min_fidelity": fid}


def double_spend_trial(cfg: ScenarioConfig, w: World) -> dict:
    """Sender pays one receiver, then tries to pay a second one with the same token."""
    order = w.rng.permutation(2)
    first, second = w.receivers[order[0]], w.receivers[order[1]]
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    dummies = {first.id: w.bank.issue(cfg.lam, 0, first), second.id: w.bank.issue(cfg.lam, 0, second)}
    ch1, ch2 = (CHANNELS[i] for i in w.rng.integers(0, 3, size=2))
    attack = ("resign", "replay", "forge")[int(w.rng.integers(3))]
    deposit = cfg.value if cfg.deposit is None else cfg.deposit

    out1 = _transfer_via(w, ch1, first, a, dummies[first.id], deposit)
    w.trace.emit("attack", type=attack, channel=ch2, target=second.id)
    if attack == "resign":
        out2 = _transfer_via(w, ch2, second, a, dummies[second.id], deposit)
    elif out1.signature is None:
        out2 = TransferOutcome(False)
    elif attack == "replay":
        out2 = _present(w, ch2, second, dummies[second.id], out1.signature, deposit)
    else:
        forged = forge_signature(out1.signature, dummies[second.id].id, w.rng)
        out2 = _present(w, ch2, second, dummies[second.id], forged, deposit)

    claims = sum(w.bank.ledger.get_value(d.id) == cfg.value for d in dummies.values())
    return {
        "status": "blocked" if claims == 1 else "double_spend",
        "attack": attack,
        "channels": [ch1, ch2],
        "claims": claims,
        "first": out1.to_json(),
        "second": out2.to_json(),
    }


def replay_trial(cfg: ScenarioConfig, w: World) -> dict:
    """Replay an accepted signature to a second receiver and to the same contract again."""
    bob, carol = w.receivers
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    b = w.bank.issue(cfg.lam, 0, bob)
    c = w.bank.issue(cfg.lam, 0, carol)
    deposit = cfg.value if cfg.deposit is None else cfg.deposit
    ch = CHANNELS[int(w.rng.integers(3))]
    out = _transfer_via(w, ch, bob, a, b, deposit)
    replays = [_present(w, ch2, carol, c, out.signature, deposit) for ch2 in CHANNELS] if out.signature else []
    replays.append(claim(w.bank, bob, b, out.signature, w.trace) if out.signature else TransferOutcome(False))
    accepted = sum(r.success for r in replays)
    return {
        "status": "blocked" if out.success and accepted == 0 else "replay_accepted" if accepted else "rejected",
        "channel": ch,
        "replays": [r.to_json() for r in replays],
    }


def forge_trial(cfg: ScenarioConfig, w: World) -> dict:
    """Classical copy attack on a whole token, plus per-unit pass statistics."""
    a = w.bank.issue(cfg.lam, cfg.value, w.sender)
    oracles = w.bank.oracles_for(a.id)
    copies = [classical_copy(u, w.rng) for u in a.units]
    unit_passes = [verify_unit(cu, o, w.rng) for cu, o in zip(copies, oracles)]
    w.trace.emit("measure", op="counterfeit_verify", token=a.id.hex(), passes=int(sum(unit_passes)))
    token_pass = all(unit_passes)
    return {
        "status": "forged" if token_pass else "blocked",
        "unit_passes": int(sum(unit_passes)),
        "units": len(unit_passes),
    }


def mint_demo_lambda4(seed: int = 0) -> dict:
    """Zero-shift lambda=4 unit: support {0000, S0, S1, S0^S1}, then Sign(.,0) and Sign(.,1) on two copies."""
    rng = np.random.default_rng(seed)
    lam = 4
    S = random_subspace(lam, 2, rng)
    S0, w = split_subspace(S, rng)
    s0 = S0.basis.rows[0]
    zero = BitVec.zeros(lam)
    secret = TokenUnitSecret(S, S0, w, zero, zero)
    oracles = OracleService(prefix="demo").publish(secret)
    state = expand(CosetState(S, zero, zero))
    labels = {zero: "0000", s0: "S0", w: "S1", s0 ^ w: "S0^S1"}
    support = [
        {"label": labels[v], "state": str(v), "amplitude": round(state.amplitude(v).real, 12)}
        for v in state.support()
    ]
    sigs = []
    for b in (0, 1):
        unit = TokenUnit(state, oracles.pk)
        sigs.append(sign_unit(unit, oracles, b, rng))
    points = [v for v in state.support()]
    return {
        "lambda": lam,
        "S0": str(s0),
        "S1": str(w),
        "support": support,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
        "closed_under_xor": all((p ^ q) in points for p in points for q in points),
        "sign0": {"sigma": str(sigs[0].sigma), "label": labels[sigs[0].sigma], "oracle_low": oracles.o_low(sigs[0].sigma)},
        "sign1": {"sigma": str(sigs[1].sigma), "label": labels[sigs[1].sigma], "oracle_high": oracles.o_high(sigs[1].sigma)},
        "cosets_disjoint": not any(oracles.o_low(v) and oracles.o_high(v) for v in points),
    }


def format_demo_table(demo: dict) -> str:
    lines = [f"S0 = {demo['S0']}   S1 = {demo['S1']}", "label   state  amplitude"]
    for row in demo["support"]:
        lines.append(f"{row['label']:<7} |{row['state']}>  {row['amplitude']:+.3f}")
    lines.append(f"Sign(.,0) -> {demo['sign0']['sigma']} ({demo['sign0']['label']})")
    lines.append(f"Sign(.,1) -> {demo['sign1']['sigma']} ({demo['sign1']['label']})")
    return "\n".join(lines)


def lightning_stats(lam: int, trials: int, seed: int) -> dict:
    if trials < 2:
        raise ValueError("trials must be >= 2")
    keys = lightning_keys(lam, trials, np.random.default_rng(seed))
    mult = Counter(Counter(k.fingerprint() for k in keys).values())
    return {
        "lambda": lam,
        "trials": trials,
        "collisions": count_collisions(keys),
        "distinct": len({k.fingerprint() for k in keys}),
        "birthday_expectation": birthday_expectation(lam, trials),
        "multiplicities": {str(k): v for k, v in sorted(mult.items())},
    }


def _aggregate_invariants(per_trial: list[dict[str, bool]]) -> dict[str, bool]:
    keys = sorted({k for d in per_trial for k in d})
    return {k: all(d.get(k, True) for d in per_trial) for k in keys}


def run_scenario(cfg: ScenarioConfig, trace_out: str | Path | None = None) -> ScenarioReport:
    cfg.validate()
    t0 = time.perf_counter()
    trace = Trace()
    trace.emit("config", **cfg.to_json())

    if cfg.scenario == "demo_eq1":
        demo = mint_demo_lambda4(cfg.seed)
        trace.emit("demo_eq1", S0=demo["S0"], S1=demo["S1"], support=[r["state"] for r in demo["support"]])
        ok = len(demo["support"]) == 4 and demo["closed_under_xor"] and demo["cosets_disjoint"]
        report = ScenarioReport(cfg.to_json(), [{"status": "success" if ok else "rejected"}],
                                {"success" if ok else "rejected": 1}, {}, {"unit_structure": ok}, extras={"demo": demo})
    elif cfg.scenario == "lightning":
        stats = lightning_stats(cfg.lam, cfg.trials, cfg.seed)
        trace.emit("lightning", **{k: v for k, v in stats.items()})
        report = ScenarioReport(cfg.to_json(), [], {"collisions": stats["collisions"]}, {}, {}, extras={"lightning": stats})
    else:
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
        outcomes, invariants = [], []
        rounds: list[int] = []
        for i, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            trace.emit("trial_start", trial=i)
            start = len(trace.events)
            w = _world(rng, trace, i)
            fn = {
                "mint": _trial_mint,
                "verify": _trial_verify,
                "face_to_face": lambda c, w: _trial_honest(c, w, "f2f"),
                "remote": lambda c, w: _trial_honest(c, w, "remote"),
                "onchain": lambda c, w: _trial_honest(c, w, "onchain"),
                "double_spend_attack": double_spend_trial,
                "replay_attack": replay_trial,
                "forge_attack": forge_trial,
            }[cfg.scenario]
            try:
                result = fn(cfg, w)
            except DoubleSpendAttempt as exc:
                result = {"status": "error", "error": str(exc)}
            inv = check_invariants(w.bank)
            if cfg.scenario.endswith("_attack"):
                inv["attack_blocked"] = result["status"] in ("blocked", "rejected")
            invariants.append(inv)
            rounds += _sign_rounds(trace, start)
            trace.emit("trial_end", trial=i, status=result["status"], invariants=inv)
            outcomes.append({"trial": i, **result})
        counts = Counter(o["status"] for o in outcomes)
        reasons = Counter(o["reason"] for o in outcomes if o.get("reason"))
        extras: dict = {}
        if rounds:
            extras["sign_rounds"] = {"mean": float(np.mean(rounds)), "max": int(max(rounds)), "values": rounds}
        if cfg.scenario == "forge_attack":
            n = sum(o["units"] for o in outcomes)
            extras["unit_pass_rate"] = sum(o["unit_passes"] for o in outcomes) / n
            extras["unit_pass_theory"] = 2.0 ** (-cfg.lam / 2)
        report = ScenarioReport(cfg.to_json(), outcomes, dict(sorted(counts.items())), dict(sorted(reasons.items())),
                                _aggregate_invariants(invariants), extras=extras)

    report.timing_s = time.perf_counter() - t0
    if trace_out is not None:
        trace.write(trace_out)
    report.extras["trace_events"] = len(trace.events)
    return report
