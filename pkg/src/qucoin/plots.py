"""Figures for scenario reports, written next to the trace file."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, out_dir: Path, name: str) -> Path:
    path = out_dir / f"{name}.png"
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_demo(demo: dict, out_dir: Path) -> Path:
    amps = np.array([a[0] for a in demo["amplitudes"]])
    lam = demo["lambda"]
    labels = [format(i, f"0{lam}b") for i in range(len(amps))]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 2.8))
        ax.bar(range(len(amps)), amps, color=["C0" if abs(a) > 1e-12 else "0.8" for a in amps])
        ax.set_xticks(range(len(amps)), labels, rotation=90, family="monospace")
        ax.set_ylabel("amplitude")
        ax.set_title(f"lambda={lam} token unit, S0={demo['S0']}, S1={demo['S1']}")
        return _save(fig, out_dir, "demo_amplitudes")


def plot_sign_rounds(rounds: list[int], out_dir: Path) -> Path:
    r = np.asarray(rounds)
    ks = np.arange(1, r.max() + 1)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        ax.bar(ks, [np.mean(r == k) for k in ks], label="observed")
        ax.plot(ks, 0.5**ks, "k.--", label="geometric(1/2)")
        ax.set_xlabel("signing rounds")
        ax.set_ylabel("fraction of units")
        ax.legend(frameon=False)
        return _save(fig, out_dir, "sign_rounds")


def plot_lightning(stats: dict, out_dir: Path) -> Path:
    mult = {int(k): v for k, v in stats["multiplicities"].items()}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        ax.bar(list(mult), list(mult.values()))
        ax.set_xlabel("times an (x, z) pair was produced")
        ax.set_ylabel("distinct pairs")
        ax.set_title(
            f"lambda={stats['lambda']}, {stats['trials']} mints: {stats['collisions']} collisions "
            f"(birthday {stats['birthday_expectation']:.3g})"
        )
        return _save(fig, out_dir, "lightning_multiplicity")


def plot_outcomes(report: dict, out_dir: Path) -> Path:
    counts = report["counts"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        ax.bar(list(counts), list(counts.values()))
        ax.set_ylabel("trials")
        ax.set_title(report["scenario"])
        return _save(fig, out_dir, "outcomes")


def render_report(report: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extras = report.get("extras", {})
    paths = []
    if "demo" in extras:
        paths.append(plot_demo(extras["demo"], out))
    if "lightning" in extras:
        paths.append(plot_lightning(extras["lightning"], out))
    if extras.get("sign_rounds", {}).get("values"):
        paths.append(plot_sign_rounds(extras["sign_rounds"]["values"], out))
    if report.get("outcomes"):
        paths.append(plot_outcomes(report, out))
    return paths
