"""Experiment configuration: JSON schema, parsing and validation diagnostics.

A config file fully determines one training run (lattice, sampler, SR loop,
reference, seed), so identical configs reproduce identical artifacts.
Validation never raises on bad values; it returns machine-readable
diagnostics so the CLI can report all problems at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .optimizer import BetaAdaptConfig, SrConfig
from .sampling import KINDS, SamplerSpec

SCHEMA_VERSION = 1

REFERENCE_METHODS = ("auto", "free-fermion", "dense-ed", "lanczos", "none")


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass
class ExperimentConfig:
    """Everything one run needs; see ``default_config`` for the JSON shape."""

    seed: int = 12345
    lattice_kind: str = "chain"
    lattice_dims: tuple = (8,)
    lattice_h: float = 0.5
    alpha: float = 1.0
    sampler_kind: str = "metropolis"
    n_samples: int = 10_000
    burn_in: int = 100
    thinning: int = 1
    n_chains: int = 64
    chimera_n: int | None = None
    mismatch_x: float = 1.0
    p_break: float = 0.0
    chain_coupling: float = 1.0
    sr: dict = field(default_factory=dict)
    reference: str = "auto"
    out_dir: str = "runs/experiment"
    checkpoint_every: int = 0

    def sampler_spec(self) -> SamplerSpec:
        return SamplerSpec(
            kind=self.sampler_kind,
            n_samples=self.n_samples,
            burn_in=self.burn_in,
            thinning=self.thinning,
            seed=self.seed,
            n_chains=self.n_chains,
            p_break=self.p_break,
        )

    def sr_config(self) -> SrConfig:
        sr = dict(self.sr)
        adapt = sr.pop("beta_adapt", {})
        return SrConfig(
            gamma=float(sr.get("gamma", 0.2)),
            lambda0=float(sr.get("lambda0", 0.1)),
            lambda_decay=float(sr.get("lambda_decay", 0.95)),
            lambda_floor=float(sr.get("lambda_floor", 1e-4)),
            iterations=int(sr.get("iterations", 300)),
            beta_x0=float(sr.get("beta_x0", 1.0)),
            beta_adapt=BetaAdaptConfig(
                enabled=bool(adapt.get("enabled", False)),
                max_relative_step=float(adapt.get("max_relative_step", 0.1)),
            ),
            convergence_window=int(sr.get("convergence_window", 50)),
            convergence_rtol=float(sr.get("convergence_rtol", 1e-8)),
            divergence_margin=float(sr.get("divergence_margin", 10.0)),
            max_step=float(sr.get("max_step", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "lattice": {"kind": self.lattice_kind, "dims": list(self.lattice_dims), "h": self.lattice_h},
            "alpha": self.alpha,
            "sampler": {
                "kind": self.sampler_kind,
                "n_samples": self.n_samples,
                "burn_in": self.burn_in,
                "thinning": self.thinning,
                "n_chains": self.n_chains,
                "chimera_n": self.chimera_n,
                "mismatch_x": self.mismatch_x,
                "p_break": self.p_break,
                "chain_coupling": self.chain_coupling,
            },
            "sr": self.sr,
            "reference": self.reference,
            "out_dir": self.out_dir,
            "checkpoint_every": self.checkpoint_every,
        }


def default_config() -> dict:
    return ExperimentConfig().to_dict()


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a config object from parsed JSON; unknown fields are rejected."""
    known_top = {"schema_version", "seed", "lattice", "alpha", "sampler", "sr", "reference", "out_dir", "checkpoint_every"}
    unknown = set(doc) - known_top
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    lattice = doc.get("lattice", {})
    sampler = doc.get("sampler", {})
    return ExperimentConfig(
        seed=int(doc.get("seed", 12345)),
        lattice_kind=str(lattice.get("kind", "chain")),
        lattice_dims=tuple(int(d) for d in lattice.get("dims", (8,))),
        lattice_h=float(lattice.get("h", 0.5)),
        alpha=float(doc.get("alpha", 1.0)),
        sampler_kind=str(sampler.get("kind", "metropolis")),
        n_samples=int(sampler.get("n_samples", 10_000)),
        burn_in=int(sampler.get("burn_in", 100)),
        thinning=int(sampler.get("thinning", 1)),
        n_chains=int(sampler.get("n_chains", 64)),
        chimera_n=None if sampler.get("chimera_n") is None else int(sampler["chimera_n"]),
        mismatch_x=float(sampler.get("mismatch_x", 1.0)),
        p_break=float(sampler.get("p_break", 0.0)),
        chain_coupling=float(sampler.get("chain_coupling", 1.0)),
        sr=dict(doc.get("sr", {})),
        reference=str(doc.get("reference", "auto")),
        out_dir=str(doc.get("out_dir", "runs/experiment")),
        checkpoint_every=int(doc.get("checkpoint_every", 0)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}, this build reads {SCHEMA_VERSION}")
    return config_from_dict(doc)


def validate_config(config: ExperimentConfig) -> list[Diagnostic]:
    """Cross-field consistency checks; empty list means runnable."""
    out: list[Diagnostic] = []

    def bad(code: str, message: str):
        out.append(Diagnostic(code, message))

    if config.lattice_kind not in ("chain", "torus"):
        bad("lattice-kind-unknown", f"lattice kind {config.lattice_kind!r} is not 'chain' or 'torus'")
    else:
        dims = config.lattice_dims
        expect = 1 if config.lattice_kind == "chain" else 2
        if len(dims) != expect:
            bad("lattice-dims-invalid", f"{config.lattice_kind} expects {expect} dims, got {list(dims)}")
        elif any(d < 3 for d in dims):
            bad("lattice-dim-too-small", f"every periodic dimension must be >= 3, got {list(dims)}")
    if config.lattice_h < 0:
        bad("field-negative", f"transverse field must be >= 0, got {config.lattice_h}")

    n_sites = 1
    for d in config.lattice_dims:
        n_sites *= d
    m_hidden = config.alpha * n_sites
    if config.alpha <= 0 or abs(m_hidden - round(m_hidden)) > 1e-9 or round(m_hidden) < 1:
        bad("alpha-invalid", f"alpha={config.alpha} does not give a positive integral hidden count for N={n_sites}")
    m_hidden = int(round(m_hidden))

    if config.sampler_kind not in KINDS:
        bad("sampler-kind-unknown", f"sampler kind {config.sampler_kind!r} not in {KINDS}")
    if config.n_samples < 1:
        bad("n-samples-invalid", f"n_samples must be >= 1, got {config.n_samples}")
    if config.burn_in < 0:
        bad("burn-in-invalid", f"burn_in must be >= 0, got {config.burn_in}")
    if config.thinning < 1:
        bad("thinning-invalid", f"thinning must be >= 1, got {config.thinning}")
    if config.n_chains < 1:
        bad("n-chains-invalid", f"n_chains must be >= 1, got {config.n_chains}")
    if not 0.0 <= config.p_break < 1.0:
        bad("p-break-invalid", f"p_break must lie in [0, 1), got {config.p_break}")

    if config.sampler_kind == "exact" and n_sites > 20:
        bad("exact-too-large", f"exact sampler enumerates 2^N and is capped at N=20, got N={n_sites}")

    if config.sampler_kind == "annealer-emulator":
        if config.chimera_n is None:
            bad("chimera-size-missing", "annealer-emulator sampler requires sampler.chimera_n")
        else:
            n = config.chimera_n
            if n < 1:
                bad("chimera-size-invalid", f"chimera_n must be >= 1, got {n}")
            elif 4 * n < max(n_sites, m_hidden):
                bad(
                    "chimera-capacity-exceeded",
                    f"capacity exceeded: C_{n} hosts at most {4 * n} visible and {4 * n} hidden "
                    f"neurons (L_max = {8 * n}), need {n_sites} visible and {m_hidden} hidden",
                )
        if config.mismatch_x <= 0:
            bad("mismatch-invalid", f"temperature mismatch x must be > 0, got {config.mismatch_x}")
        if config.chain_coupling <= 0:
            bad("chain-coupling-invalid", f"chain coupling must be > 0, got {config.chain_coupling}")

    sr = config.sr
    if float(sr.get("gamma", 0.2)) <= 0:
        bad("gamma-nonpositive", f"learning rate gamma must be > 0, got {sr.get('gamma')}")
    if float(sr.get("lambda0", 0.1)) < 0 or float(sr.get("lambda_floor", 1e-4)) < 0:
        bad("lambda-invalid", "regularization lambda0 and lambda_floor must be >= 0")
    if not 0 < float(sr.get("lambda_decay", 0.95)) <= 1:
        bad("lambda-decay-invalid", f"lambda_decay must lie in (0, 1], got {sr.get('lambda_decay')}")
    if int(sr.get("iterations", 300)) < 1:
        bad("iterations-invalid", f"iterations must be >= 1, got {sr.get('iterations')}")
    if float(sr.get("beta_x0", 1.0)) <= 0:
        bad("beta-x0-invalid", f"beta_x0 must be > 0, got {sr.get('beta_x0')}")
    adapt = sr.get("beta_adapt", {})
    if not 0 < float(adapt.get("max_relative_step", 0.1)) < 1:
        bad("beta-step-invalid", f"beta_adapt.max_relative_step must lie in (0, 1), got {adapt.get('max_relative_step')}")

    if config.reference not in REFERENCE_METHODS:
        bad("reference-unknown", f"reference {config.reference!r} not in {REFERENCE_METHODS}")
    elif config.reference == "free-fermion":
        if config.lattice_kind != "chain":
            bad("reference-inapplicable", "free-fermion reference only applies to the 1D chain")
        elif n_sites % 2 != 0 or n_sites < 4:
            bad("reference-inapplicable", f"free-fermion reference needs even N >= 4, got N={n_sites}")
    elif config.reference == "dense-ed" and n_sites > 14:
        bad("reference-inapplicable", f"dense reference capped at 14 sites, got {n_sites}")
    elif config.reference == "lanczos" and n_sites > 20:
        bad("reference-inapplicable", f"Lanczos reference capped at 20 sites, got {n_sites}")

    if config.checkpoint_every < 0:
        bad("checkpoint-every-invalid", f"checkpoint_every must be >= 0, got {config.checkpoint_every}")
    return out
