import json
import subprocess
import sys

import pytest

from qucoin.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main
from qucoin.errors import ConfigError
from qucoin.scenarios import ScenarioConfig, ScenarioReport, run_scenario


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "argv",
    [
        ["mint", "--lambda", "4", "--trials", "2"],
        ["verify", "--lambda", "4"],
        ["transfer", "--channel", "f2f", "--lambda", "4", "--trials", "3"],
        ["transfer", "--channel", "remote", "--lambda", "4", "--trials", "3"],
        ["transfer", "--channel", "onchain", "--lambda", "4", "--trials", "3", "--deposit", "60"],
        ["attack", "--type", "double-spend", "--lambda", "4", "--trials", "5"],
        ["attack", "--type", "replay", "--lambda", "4", "--trials", "3"],
        ["attack", "--type", "forge", "--lambda", "4", "--trials", "5"],
        ["lightning", "--lambda", "4", "--trials", "50"],
    ],
)
def test_commands_succeed(capsys, argv):
    code, out, _ = run(capsys, *argv)
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["ok"] is True
    assert data["config"]["lambda"] == 4


def test_demo_eq1(capsys):
    code, out, err = run(capsys, "demo-eq1", "--lambda", "8")
    data = json.loads(out)
    demo = data["extras"]["demo"]
    assert code == EXIT_OK and data["config"]["lambda"] == 4
    assert [r["label"] for r in demo["support"]].count("0000") == 1
    assert len(demo["support"]) == 4
    assert all(abs(abs(r["amplitude"]) - 0.5) < 1e-9 for r in demo["support"])
    assert demo["closed_under_xor"] and demo["cosets_disjoint"]
    assert demo["sign0"]["oracle_low"] and demo["sign1"]["oracle_high"]
    assert "S0^S1" in err


def test_global_flags_before_subcommand(capsys):
    code, out, _ = run(capsys, "--lambda", "6", "--seed", "3", "mint")
    assert code == EXIT_OK
    assert json.loads(out)["config"] == {**json.loads(out)["config"], "lambda": 6, "seed": 3}


@pytest.mark.parametrize(
    "argv",
    [
        ["mint", "--lambda", "3"],
        ["mint", "--lambda", "18"],
        ["mint", "--trials", "0"],
        ["mint", "--seed", "-1"],
        ["transfer", "--fault", "not json"],
        ["transfer", "--fault", '{"type": "explode"}'],
        ["lightning", "--trials", "1"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_CONFIG
    assert out == "" and "config error" in err


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 6, "seed": 11, "trials": 2, "value": 40}))
    code, out, _ = run(capsys, "transfer", "--config", str(cfg), "--trials", "3")
    conf = json.loads(out)["config"]
    assert code == EXIT_OK
    assert (conf["lambda"], conf["seed"], conf["trials"], conf["value"]) == (6, 11, 3, 40)
    assert conf["scenario"] == "face_to_face"


@pytest.mark.parametrize("content", ["[1, 2]", "{not json", json.dumps({"lamda": 4})])
def test_bad_config_file(tmp_path, capsys, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    code, _, _ = run(capsys, "mint", "--config", str(cfg))
    assert code == EXIT_CONFIG


def test_missing_config_file(tmp_path, capsys):
    code, _, _ = run(capsys, "mint", "--config", str(tmp_path / "nope.json"))
    assert code == EXIT_CONFIG


def test_invariant_violation_exit_3(capsys, monkeypatch):
    import qucoin.cli as cli

    def broken(cfg, trace_out=None):
        return ScenarioReport(cfg.to_json(), [], {}, {}, {"value_conservation": False})

    monkeypatch.setattr(cli, "run_scenario", broken)
    code, out, _ = run(capsys, "mint")
    assert code == EXIT_INVARIANT
    assert json.loads(out)["ok"] is False


def test_dropped_delivery_reported_not_fatal(capsys):
    code, out, _ = run(capsys, "transfer", "--channel", "remote", "--lambda", "4", "--trials", "2",
                       "--fault", '{"type": "drop", "message": "SignatureDelivery"}')
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["reasons"] == {"ChannelDropped": 2}
    assert all("sender_destroyed_receiver_uncredited" in o["flags"] for o in data["outcomes"])


def test_traces_byte_identical(tmp_path, capsys):
    paths = []
    for i in range(2):
        p = tmp_path / f"trace{i}.jsonl"
        main(["attack", "--type", "double-spend", "--lambda", "4", "--trials", "4", "--seed", "9",
              "--trace-out", str(p)])
        paths.append(p)
    capsys.readouterr()
    a, b = (p.read_bytes() for p in paths)
    assert a == b and len(a) > 0
    lines = [json.loads(line) for line in a.decode().splitlines()]
    assert [e["t"] for e in lines] == list(range(1, len(lines) + 1))
    other = tmp_path / "other.jsonl"
    main(["attack", "--type", "double-spend", "--lambda", "4", "--trials", "4", "--seed", "10",
          "--trace-out", str(other)])
    assert other.read_bytes() != a


def test_plot_dir(tmp_path, capsys):
    for argv in (["demo-eq1"], ["transfer", "--trials", "5"], ["lightning", "--lambda", "4", "--trials", "100"]):
        out_dir = tmp_path / argv[0]
        code, out, _ = run(capsys, *argv, "--plot-dir", str(out_dir))
        figs = json.loads(out)["figures"]
        assert code == EXIT_OK and figs
        for f in figs:
            with open(f, "rb") as fh:
                assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_config_roundtrip_and_validation():
    cfg = ScenarioConfig.from_dict({"scenario": "mint", "lambda": 6})
    assert ScenarioConfig.from_dict(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"lambda": "4"})
    with pytest.raises(ConfigError):
        ScenarioConfig("nope").validate()


def test_report_determinism_in_process():
    cfg = ScenarioConfig("remote", lam=4, seed=5, trials=3)
    a, b = run_scenario(cfg).to_json(), run_scenario(cfg).to_json()
    a.pop("timing_s"), b.pop("timing_s")
    assert a == b


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qucoin", "mint", "--lambda", "4"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["scenario"] == "mint"
