"""Reproducible experiment runner: wiring, artifacts, sweeps.

A run writes into its output directory:
    config.json       the resolved configuration (including the seed used)
    history.csv       one row per iteration, columns fixed as
                      iteration,energy,delta_e,acceptance,chain_break_rate,beta_x,lambda
    summary.json      final_energy, delta_e, iterations, wall_time (+ extras)
    checkpoint_*.json TrainState snapshots every checkpoint_every iterations

Floats are written with repr so identical (config, seed) pairs produce
byte-identical CSVs. Exit statuses: 0 done, 2 config invalid, 3 numerical
abort (the last good checkpoint is preserved).
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .chimera import embed_rbm
from .config import Diagnostic, ExperimentConfig, validate_config
from .lattice import build_lattice
from .optimizer import (
    NumericalAbort,
    SamplerHandle,
    annealer_handle,
    exact_sampler_handle,
    gibbs_handle,
    metropolis_handle,
    train,
)
from .reference import ground_energy

log = logging.getLogger("nqsvmc")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

CSV_HEADER = "iteration,energy,delta_e,acceptance,chain_break_rate,beta_x,lambda"

SWEEPABLE = ("x", "h", "N", "p_break", "gamma")


def _format_row(record: dict) -> str:
    return ",".join(
        [
            str(record["iteration"]),
            repr(record["energy"]),
            repr(record["delta_e"]),
            repr(record["acceptance"]),
            repr(record["chain_break_rate"]),
            repr(record["beta_x"]),
            repr(record["lambda"]),
        ]
    )


def build_sampler(config: ExperimentConfig) -> SamplerHandle:
    spec = config.sampler_spec()
    n_sites = int(np.prod(config.lattice_dims))
    if config.sampler_kind == "exact":
        return exact_sampler_handle(n_sites)
    if config.sampler_kind == "metropolis":
        return metropolis_handle(spec)
    if config.sampler_kind == "gibbs":
        return gibbs_handle(spec)
    if config.sampler_kind == "annealer-emulator":
        m_hidden = int(round(config.alpha * n_sites))
        embedding = embed_rbm(n_sites, m_hidden, config.chimera_n, config.chain_coupling)
        return annealer_handle(embedding, config.mismatch_x, spec)
    raise ValueError(f"unknown sampler kind {config.sampler_kind!r}")


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> int:
    """Run one training experiment; returns a process exit status."""
    diagnostics = validate_config(config)
    if diagnostics:
        for d in diagnostics:
            log.error("invalid config: %s", d)
        return EXIT_INVALID

    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")

    lattice = build_lattice(config.lattice_kind, config.lattice_dims, config.lattice_h)
    sampler = build_sampler(config)
    reference_energy = None
    if config.reference != "none":
        reference_energy = ground_energy(lattice, config.reference).energy

    rng = np.random.default_rng(config.seed)
    sr_config = config.sr_config()
    started = time.time()

    csv_path = out / "history.csv"
    checkpoint_every = config.checkpoint_every

    with csv_path.open("w") as csv_file:
        csv_file.write(CSV_HEADER + "\n")

        def on_iteration(state, record):
            csv_file.write(_format_row(record) + "\n")
            if checkpoint_every and state.iteration % checkpoint_every == 0:
                path = out / f"checkpoint_{state.iteration:06d}.json"
                path.write_text(json.dumps(state.to_checkpoint()) + "\n")

        try:
            state, records = train(
                lattice,
                sampler,
                sr_config,
                rng,
                alpha=config.alpha,
                reference_energy=reference_energy,
                on_iteration=on_iteration,
            )
        except NumericalAbort as err:
            log.error("numerical abort: %s", err)
            (out / "checkpoint_abort.json").write_text(json.dumps(err.state.to_checkpoint()) + "\n")
            return EXIT_NUMERICAL

    wall_time = time.time() - started
    summary = {
        "final_energy": records[-1]["energy"],
        "delta_e": records[-1]["delta_e"],
        "iterations": len(records),
        "wall_time": wall_time,
        "reference_energy": reference_energy,
        "final_beta_x": state.beta_x,
        "seed": config.seed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    (out / "checkpoint_final.json").write_text(json.dumps(state.to_checkpoint()) + "\n")
    log.info(
        "run finished: %d iterations, energy %.8f, delta_e %s",
        len(records),
        records[-1]["energy"],
        records[-1]["delta_e"],
    )
    return EXIT_OK


def _apply_sweep_value(config: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    import copy

    cfg = copy.deepcopy(config)
    if parameter == "x":
        cfg.mismatch_x = float(value)
    elif parameter == "h":
        cfg.lattice_h = float(value)
    elif parameter == "N":
        if cfg.lattice_kind != "chain":
            raise ValueError("sweeping N is only defined for chain lattices")
        cfg.lattice_dims = (int(value),)
    elif parameter == "p_break":
        cfg.p_break = float(value)
    elif parameter == "gamma":
        cfg.sr = dict(cfg.sr)
        cfg.sr["gamma"] = float(value)
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}, expected one of {SWEEPABLE}")
    return cfg


def max_workers() -> int:
    """Worker cap for sweep parallelism, from the NQS_THREADS environment variable."""
    raw = os.environ.get("NQS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer NQS_THREADS=%r", raw)
        return 1


def sweep(
    config: ExperimentConfig, parameter: str, values: list[float], out_dir: str | Path | None = None
) -> int:
    """Run one experiment per value with derived seeds; write a combined summary.

    Seeds derive as seed + index so each sweep point reproduces on its own.
    The combined CSV has columns value,final_delta_e,iterations and is
    written even when the value list is empty.
    """
    if parameter not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {parameter!r}, expected one of {SWEEPABLE}")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    points = []
    for index, value in enumerate(values):
        cfg = _apply_sweep_value(config, parameter, value)
        cfg.seed = config.seed + index
        run_dir = out / f"{parameter}={value:g}"
        points.append((value, cfg, run_dir))

    statuses = {}
    workers = max_workers()
    if points:
        with ThreadPoolExecutor(max_workers=min(workers, len(points))) as pool:
            futures = {
                pool.submit(run_experiment, cfg, run_dir): value for value, cfg, run_dir in points
            }
            for future, value in futures.items():
                statuses[value] = future.result()

    lines = ["value,final_delta_e,iterations"]
    for value, _cfg, run_dir in points:
        summary_path = run_dir / "summary.json"
        if statuses.get(value) == EXIT_OK and summary_path.exists():
            summary = json.loads(summary_path.read_text())
            lines.append(f"{value:g},{summary['delta_e']!r},{summary['iterations']}")
        else:
            lines.append(f"{value:g},nan,0")
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")

    worst = max(statuses.values(), default=EXIT_OK)
    return worst


def diagnostics_report(diagnostics: list[Diagnostic]) -> str:
    if not diagnostics:
        return "config ok\n"
    return "\n".join(str(d) for d in diagnostics) + "\n"
