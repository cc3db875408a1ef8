"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError
from .scenarios import ScenarioConfig, format_demo_table, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

_TRANSFER = {"f2f": "face_to_face", "remote": "remote", "onchain": "onchain"}
_ATTACK = {"double-spend": "double_spend_attack", "replay": "replay_attack", "forge": "forge_attack"}


def _global_flags(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--lambda", dest="lam", type=int, default=s, help="qubits per unit / id bits")
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--trials", type=int, default=s)
    p.add_argument("--value", type=int, default=s, help="value of the paying token")
    p.add_argument("--trace-out", default=s, help="write the JSON-lines event trace here")
    p.add_argument("--plot-dir", default=s, help="render report figures into this directory")
    p.add_argument("--config", default=s, help="flat JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qucoin", description="Semi-quantum token scenarios.")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common)

    sub.add_parser("mint", parents=[common], help="issue tokens and verify them")
    sub.add_parser("verify", parents=[common], help="repeated non-destructive verification")
    t = sub.add_parser("transfer", parents=[common], help="honest transfer over one channel")
    t.add_argument("--channel", choices=sorted(_TRANSFER), default="f2f")
    t.add_argument("--deposit", type=int, default=argparse.SUPPRESS, help="escrow deposit (onchain)")
    t.add_argument("--fault", action="append", default=argparse.SUPPRESS, metavar="JSON",
                   help='transport fault, e.g. \'{"type": "drop", "message": "SignatureDelivery"}\'')
    a = sub.add_parser("attack", parents=[common], help="double-spend, replay or counterfeit attacks")
    a.add_argument("--type", dest="attack", choices=sorted(_ATTACK), default="double-spend")
    sub.add_parser("demo-eq1", parents=[common], help="lambda=4 token unit structure demo")
    sub.add_parser("lightning", parents=[common], help="delegated-mint collision statistics")
    return parser


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    ns = vars(args)
    base = ScenarioConfig.from_file(ns["config"]).to_json() if "config" in ns else {}
    cmd = ns["command"]
    if cmd == "transfer":
        base["scenario"] = _TRANSFER[ns["channel"]]
    elif cmd == "attack":
        base["scenario"] = _ATTACK[ns["attack"]]
    else:
        base["scenario"] = cmd.replace("-", "_")
    for key in ("lam", "seed", "trials", "value", "deposit"):
        if key in ns:
            base["lambda" if key == "lam" else key] = ns[key]
    if "fault" in ns:
        try:
            base["faults"] = [json.loads(f) for f in ns["fault"]]
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad --fault JSON: {exc}") from exc
    if cmd == "demo-eq1":
        base["lambda"] = 4
    if cmd == "lightning" and "trials" not in ns and "trials" not in base:
        base["trials"] = 1000
    cfg = ScenarioConfig.from_dict(base)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ns = vars(args)
    report = run_scenario(cfg, ns.get("trace_out"))
    data = report.to_json()
    if cfg.scenario == "demo_eq1":
        print(format_demo_table(data["extras"]["demo"]), file=sys.stderr)
    if "plot_dir" in ns:
        from .plots import render_report

        data["figures"] = [str(p) for p in render_report(data, ns["plot_dir"])]
    json.dump(data, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK if report.ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
