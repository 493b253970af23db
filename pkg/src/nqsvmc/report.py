"""Render figures from run artifacts: convergence, error, diagnostics, sweeps.

The training path emits only delimited data; this module turns those CSVs
into PNG files next to them (or into a chosen directory). It is the only
place matplotlib is imported.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_history(path: Path) -> dict:
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    out = {}
    for key in rows[0]:
        out[key] = np.array([float(r[key]) for r in rows])
    return out


def render_run(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render convergence/error/diagnostic figures for one run directory."""
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir
    out.mkdir(parents=True, exist_ok=True)
    history = _read_history(run_dir / "history.csv")
    summary = {}
    summary_path = run_dir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
    written: list[Path] = []

    it = history["iteration"]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(it, history["energy"], lw=1.2, label="energy")
    reference = summary.get("reference_energy")
    if reference is not None:
        ax.axhline(reference, color="k", ls="--", lw=1, label="exact")
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = out / "energy.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    delta = history["delta_e"]
    if np.isfinite(delta).any():
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(it, np.maximum(np.abs(delta), 1e-16), lw=1.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel("relative energy error")
        fig.tight_layout()
        path = out / "delta_e.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    axes[0].plot(it, history["beta_x"], lw=1.2)
    axes[0].set_ylabel("beta_x")
    axes[1].plot(it, history["acceptance"], lw=1.2)
    axes[1].set_ylabel("acceptance")
    axes[1].set_ylim(-0.05, 1.05)
    axes[2].plot(it, history["chain_break_rate"], lw=1.2)
    axes[2].set_ylabel("chain breaks")
    axes[2].set_xlabel("iteration")
    fig.tight_layout()
    path = out / "diagnostics.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def render_sweep(sweep_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render the final-error-vs-value figure for a sweep directory."""
    sweep_dir = Path(sweep_dir)
    out = Path(out_dir) if out_dir is not None else sweep_dir
    out.mkdir(parents=True, exist_ok=True)
    with (sweep_dir / "sweep_summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    written: list[Path] = []
    if not rows:
        return written
    values = np.array([float(r["value"]) for r in rows])
    errors = np.array([float(r["final_delta_e"]) for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(values, np.maximum(np.abs(errors), 1e-16), "o-", lw=1.2)
    ax.set_xlabel("swept value")
    ax.set_ylabel("final relative error")
    fig.tight_layout()
    path = out / "sweep.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def render(path: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Figure out what a directory holds and render the matching figures."""
    path = Path(path)
    written: list[Path] = []
    if (path / "history.csv").exists():
        written += render_run(path, out_dir)
    if (path / "sweep_summary.csv").exists():
        written += render_sweep(path, out_dir)
        for child in sorted(path.iterdir()):
            if child.is_dir() and (child / "history.csv").exists():
                target = None if out_dir is None else Path(out_dir) / child.name
                written += render_run(child, target)
    if not written:
        raise ValueError(f"{path} holds neither history.csv nor sweep_summary.csv")
    return written
