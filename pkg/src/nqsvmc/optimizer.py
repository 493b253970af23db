"""Stochastic reconfiguration training loop.

Each iteration estimates the covariance matrix S_ij = <D_i D_j> - <D_i><D_j>
and the forces F_j = <E_loc D_j> - <E_loc><D_j> over a sample batch (weights
are real, so no conjugation appears), solves the regularized system
(S + lambda I) x = F, and applies w <- w - gamma x. When the sampler is the
annealer emulator, the inverse-temperature estimate beta_x is jiggled
whenever the energy grew between subsequent iterations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .lattice import TfimLattice
from .rbm import (
    RbmParams,
    init_params,
    local_energy_batch,
    log_derivatives_batch,
    theta_batch,
)
from .sampling import SampleBatch, mean_over_batch


class SolverError(RuntimeError):
    """The SR linear system could not be solved to the required residual."""


class NumericalAbort(RuntimeError):
    """Training hit non-finite numbers; carries the last good state and records."""

    def __init__(self, message: str, state: "TrainState", records: list):
        super().__init__(message)
        self.state = state
        self.records = records


@dataclass(frozen=True)
class BetaAdaptConfig:
    enabled: bool = False
    max_relative_step: float = 0.1  # delta: |relative beta_x change| per adaptation event


@dataclass(frozen=True)
class SrConfig:
    """Learning rate, regularization schedule and loop control.

    lambda starts at lambda0 and decays by lambda_decay each iteration down
    to lambda_floor (keep the floor > 0 whenever sampling is stochastic).
    """

    gamma: float = 0.2
    lambda0: float = 0.1
    lambda_decay: float = 0.95
    lambda_floor: float = 1e-4
    iterations: int = 300
    beta_x0: float = 1.0
    beta_adapt: BetaAdaptConfig = field(default_factory=BetaAdaptConfig)
    convergence_window: int = 50
    convergence_rtol: float = 1e-8
    divergence_margin: float = 10.0
    max_step: float = 1.0  # trust region: cap on ||gamma * x||_inf per iteration

    def __post_init__(self):
        # gamma = 0 is a mechanically valid no-op (diagnostics runs);
        # experiment validation flags it separately
        if self.gamma < 0:
            raise ValueError(f"learning rate gamma must be >= 0, got {self.gamma}")
        if self.lambda0 < 0 or self.lambda_floor < 0:
            raise ValueError("regularization must be >= 0")
        if not 0 < self.lambda_decay <= 1:
            raise ValueError(f"lambda decay must lie in (0, 1], got {self.lambda_decay}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.beta_x0 <= 0:
            raise ValueError(f"beta_x0 must be > 0, got {self.beta_x0}")

    def lambda_at(self, iteration: int) -> float:
        return max(self.lambda_floor, self.lambda0 * self.lambda_decay**iteration)


@dataclass
class TrainState:
    """Mutable loop state; energy_history has one entry per completed iteration."""

    params: RbmParams
    rng: np.random.Generator
    iteration: int = 0
    energy_history: list = field(default_factory=list)
    beta_x: float = 1.0
    gamma_scale: float = 1.0  # halved once if the energy runs away
    last_diagnostics: dict = field(default_factory=dict)  # transient, set per step

    def to_checkpoint(self) -> dict:
        return {
            "n_visible": self.params.n_visible,
            "n_hidden": self.params.n_hidden,
            "flat_params": self.params.to_flat().tolist(),
            "iteration": self.iteration,
            "energy_history": [float(e) for e in self.energy_history],
            "beta_x": self.beta_x,
            "gamma_scale": self.gamma_scale,
            "rng_state": self.rng.bit_generator.state,
        }


@dataclass(frozen=True)
class SamplerHandle:
    """A sampler the loop can draw from: kind plus draw(params, beta_x, rng)."""

    kind: str
    draw: Callable[[RbmParams, float, np.random.Generator], SampleBatch]


def build_sr_system(batch: SampleBatch, params: RbmParams, lattice: TfimLattice):
    """Estimate (S, F, E_mean) from a batch via the sample-mean estimator.

    S is symmetrized explicitly; it is positive semidefinite for every batch
    because it is a covariance of real log-derivatives.
    """
    if batch.n_samples < 1:
        raise ValueError("cannot build the SR system from an empty batch")
    configs = batch.visible.astype(np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        thetas = theta_batch(params, configs)
        deriv = log_derivatives_batch(params, configs, thetas)
        e_loc = local_energy_batch(params, lattice, configs, thetas)

        d_mean = mean_over_batch(batch, deriv)
        e_mean = mean_over_batch(batch, e_loc)
        if batch.weights is not None:
            weighted = deriv * batch.weights[:, None]
        else:
            weighted = deriv / batch.n_samples
        s = weighted.T @ deriv - np.outer(d_mean, d_mean)
        s = 0.5 * (s + s.T)
        f = weighted.T @ e_loc - e_mean * d_mean
    return s, f, float(e_mean)


def solve_sr(s: np.ndarray, f: np.ndarray, lam: float) -> np.ndarray:
    """Solve (S + lambda I) x = F with a residual check.

    Raises SolverError on non-finite input, on a singular system (possible
    when lambda = 0), or when the residual exceeds 1e-8 * (||F|| + 1).
    """
    s = np.asarray(s, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if lam < 0:
        raise ValueError(f"regularization must be >= 0, got {lam}")
    if not (np.isfinite(s).all() and np.isfinite(f).all()):
        raise SolverError("SR system contains non-finite entries")
    a = s + lam * np.eye(s.shape[0])
    try:
        with warnings.catch_warnings():
            # conditioning is checked below via the residual, not scipy's heuristic
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            x = scipy.linalg.solve(a, f, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as err:
        raise SolverError(f"SR solve failed: {err}") from err
    tol = 1e-8 * (np.linalg.norm(f) + 1.0)
    if not np.isfinite(x).all() or np.linalg.norm(a @ x - f) > tol:
        x, *_ = np.linalg.lstsq(a, f, rcond=None)
        if not np.isfinite(x).all() or np.linalg.norm(a @ x - f) > tol:
            raise SolverError("SR solve residual exceeds tolerance; S is effectively singular")
    return x


def adapt_beta(state: TrainState, e_new: float, rng: np.random.Generator, max_relative_step: float = 0.1) -> float:
    """Random multiplicative jiggle of beta_x when the energy grew.

    beta_x <- beta_x * (1 + u), u uniform in [-delta, +delta], redrawn until
    the result stays positive. No change when the energy did not grow.
    """
    if not state.energy_history:
        raise ValueError("adapt_beta needs at least one prior energy in the history")
    if e_new > state.energy_history[-1]:
        while True:
            u = rng.uniform(-max_relative_step, max_relative_step)
            candidate = state.beta_x * (1.0 + u)
            if candidate > 0:
                break
        state.beta_x = candidate
    return state.beta_x


def sr_step(state: TrainState, sampler: SamplerHandle, lattice: TfimLattice, config: SrConfig) -> TrainState:
    """One SR iteration: sample, build (S, F), solve, update, adapt.

    Mutates and returns the state; per-iteration diagnostics (including the
    beta_x the batch was actually drawn at) land in state.last_diagnostics.
    A non-finite energy or update aborts via NumericalAbort carrying the
    pre-update state.
    """
    lam = config.lambda_at(state.iteration)
    batch = sampler.draw(state.params, state.beta_x, state.rng)
    s, f, e_mean = build_sr_system(batch, state.params, lattice)
    if not np.isfinite(e_mean):
        raise NumericalAbort(f"non-finite energy at iteration {state.iteration}", state, [])
    x = solve_sr(s, f, lam)

    gamma = config.gamma * state.gamma_scale
    step = gamma * x
    step_norm = float(np.max(np.abs(step))) if step.size else 0.0
    if step_norm > config.max_step:
        # near-singular sampled S can blow the solve up; keep the direction, cap the size
        step *= config.max_step / step_norm
    new_flat = state.params.to_flat() - step
    if not np.isfinite(new_flat).all():
        raise NumericalAbort(f"non-finite parameter update at iteration {state.iteration}", state, [])

    state.last_diagnostics = {
        "iteration": state.iteration,
        "energy": e_mean,
        "acceptance": float(batch.diagnostics.get("acceptance_rate", 1.0)),
        "chain_break_rate": float(batch.diagnostics.get("chain_break_rate", 0.0)),
        "beta_x": state.beta_x,
        "lambda": lam,
    }

    state.params = RbmParams.from_flat(new_flat, state.params.n_visible, state.params.n_hidden)
    if state.energy_history and e_mean > min(state.energy_history) + config.divergence_margin:
        if state.gamma_scale == 1.0:
            state.gamma_scale = 0.5
    if config.beta_adapt.enabled and sampler.kind == "annealer-emulator" and state.energy_history:
        adapt_beta(state, e_mean, state.rng, config.beta_adapt.max_relative_step)
    state.energy_history.append(e_mean)
    state.iteration += 1
    return state


def train(
    lattice: TfimLattice,
    sampler: SamplerHandle,
    config: SrConfig,
    rng: np.random.Generator,
    *,
    alpha: float = 1.0,
    initial_params: RbmParams | None = None,
    reference_energy: float | None = None,
    on_iteration: Callable[[TrainState, dict], None] | None = None,
):
    """Run SR until the iteration budget or energy-plateau convergence.

    Returns (state, records); each record carries iteration, energy,
    delta_e (NaN without a reference), acceptance, chain_break_rate, beta_x
    and lambda. Aborts cleanly on non-finite energies, leaving the last good
    state inside the raised NumericalAbort.
    """
    n = lattice.n_sites
    if initial_params is not None:
        params = initial_params
        if params.n_visible != n:
            raise ValueError(f"initial params have N={params.n_visible}, lattice has {n} sites")
    else:
        m = int(round(alpha * n))
        if m < 1 or abs(m - alpha * n) > 1e-9:
            raise ValueError(f"alpha={alpha} does not give an integral hidden count for N={n}")
        params = init_params(n, m, rng)

    state = TrainState(params=params, rng=rng, beta_x=config.beta_x0)
    records: list[dict] = []
    window = config.convergence_window
    for _ in range(config.iterations):
        try:
            sr_step(state, sampler, lattice, config)
        except (NumericalAbort, SolverError) as err:
            if isinstance(err, NumericalAbort):
                raise NumericalAbort(str(err), err.state, records) from None
            raise NumericalAbort(f"solver failure: {err}", state, records) from err
        record = dict(state.last_diagnostics)
        if reference_energy is not None:
            record["delta_e"] = abs((record["energy"] - reference_energy) / reference_energy)
        else:
            record["delta_e"] = float("nan")
        records.append(record)
        if on_iteration is not None:
            on_iteration(state, record)
        hist = state.energy_history
        if len(hist) >= window:
            tail = hist[-window:]
            spread = max(tail) - min(tail)
            if spread <= config.convergence_rtol * max(1.0, abs(tail[-1])):
                break
    return state, records


def exact_sampler_handle(n_sites: int) -> SamplerHandle:
    from .sampling import sample_exact

    return SamplerHandle(kind="exact", draw=lambda params, beta_x, rng: sample_exact(params, n_sites))


def metropolis_handle(spec) -> SamplerHandle:
    from .sampling import metropolis_sample

    return SamplerHandle(
        kind="metropolis", draw=lambda params, beta_x, rng: metropolis_sample(params, spec, rng)
    )


def gibbs_handle(spec) -> SamplerHandle:
    from .sampling import gibbs_sample

    return SamplerHandle(kind="gibbs", draw=lambda params, beta_x, rng: gibbs_sample(params, spec, rng))


def annealer_handle(embedding, mismatch_x: float, spec) -> SamplerHandle:
    from .chimera import annealer_sample

    return SamplerHandle(
        kind="annealer-emulator",
        draw=lambda params, beta_x, rng: annealer_sample(params, embedding, beta_x, mismatch_x, spec, rng),
    )
