"""Figures for ``perf report``: sampling speedup and energy per sample versus N."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .economics import HardwareProfile, PerfRow  # noqa: E402


def _finish(fig, ax, path: Path, config_hash: str):
    ax.set_yscale("log")
    ax.set_xlabel("photons N (M = N$^2$)")
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(frameon=False)
    fig.text(0.99, 0.01, f"config {config_hash[:12]}", ha="right", va="bottom", fontsize=6, color="0.5")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Description": f"config_hash={config_hash}"})
    plt.close(fig)


def speedup_figure(tables: Sequence[tuple[HardwareProfile, list[PerfRow]]], path, config_hash: str) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for hw, rows in tables:
        ax.plot([r.N for r in rows], [r.speedup for r in rows], ":o", ms=3, label=hw.name)
    ax.axhline(1.0, color="red", lw=1)
    ax.set_ylabel("R$_q$ / R$_c$")
    _finish(fig, ax, path, config_hash)
    return path


def energy_figure(tables: Sequence[tuple[HardwareProfile, list[PerfRow]]], path, config_hash: str) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    rows = tables[0][1]
    ax.plot([r.N for r in rows], [r.E_q for r in rows], "-o", ms=3, label="quantum")
    for hw, rows in tables:
        ax.plot([r.N for r in rows], [r.E_c for r in rows], ":o", ms=3, label=hw.name)
    ax.set_ylabel("energy per sample (J)")
    _finish(fig, ax, path, config_hash)
    return path
