"""Visible-layer samplers for the RBM quantum distribution rho(v) ~ |Psi(v)|^2.

Three software routes: exhaustive enumeration (exact weights, noise-free),
single-flip Metropolis-Hastings with acceptance min(1, ratio^2), and block
Gibbs over the joint network distribution p(v, h) ~ exp(a.v + b.h + h.W.v)
whose visible marginal equals rho(v) exactly. The annealer route lives in
the chimera module and produces the same SampleBatch shape.

All stochastic samplers run a bank of independent walkers advanced in lock
step, which is equivalent to independent chains with decorrelated streams
and vectorizes across the bank.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rbm import RbmParams, all_configs, log2cosh, log_psi_batch, theta_batch

EXACT_MAX_SITES = 20

KINDS = ("exact", "metropolis", "gibbs", "annealer-emulator")


@dataclass(frozen=True)
class SamplerSpec:
    """Sampler selection and Monte Carlo knobs.

    burn_in counts discarded sweeps, thinning counts sweeps between retained
    samples, n_chains is the walker-bank width for the stochastic samplers.
    p_break is the injected chain-break probability and only matters to the
    annealer emulator.
    """

    kind: str
    n_samples: int = 10_000
    burn_in: int = 100
    thinning: int = 1
    seed: int = 0
    n_chains: int = 64
    p_break: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}, expected one of {KINDS}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.thinning < 1:
            raise ValueError(f"thinning must be >= 1, got {self.thinning}")
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if not 0.0 <= self.p_break < 1.0:
            raise ValueError(f"p_break must lie in [0, 1), got {self.p_break}")


@dataclass
class SampleBatch:
    """Visible (and optionally hidden) configurations plus sampler diagnostics.

    ``weights`` is present only for the exact sampler, which emits every
    configuration once with its normalized probability.
    """

    visible: np.ndarray
    hidden: np.ndarray | None = None
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.visible = np.asarray(self.visible)
        if self.visible.ndim != 2 or self.visible.shape[0] < 1:
            raise ValueError(f"visible must be a nonempty (n_samples, N) array, got {self.visible.shape}")
        if not np.all(np.abs(self.visible) == 1):
            raise ValueError("visible spins must be exactly -1 or +1")
        if self.hidden is not None:
            self.hidden = np.asarray(self.hidden)
            if self.hidden.shape[0] != self.visible.shape[0]:
                raise ValueError("hidden batch length must match visible batch length")
            if not np.all(np.abs(self.hidden) == 1):
                raise ValueError("hidden spins must be exactly -1 or +1")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != (self.visible.shape[0],):
                raise ValueError("weights length must match batch length")
            if np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative")
            if abs(float(self.weights.sum()) - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")

    @property
    def n_samples(self) -> int:
        return self.visible.shape[0]


def sample_exact(params: RbmParams, n_sites: int) -> SampleBatch:
    """All 2^N configs with their exact probabilities rho(v) = |Psi|^2 / sum |Psi|^2.

    Noise-free by construction, which isolates optimizer behavior from
    sampler noise in small-system training.
    """
    if n_sites != params.n_visible:
        raise ValueError(f"n_sites={n_sites} does not match params N={params.n_visible}")
    if n_sites > EXACT_MAX_SITES:
        raise ValueError(f"exact enumeration capped at {EXACT_MAX_SITES} sites, got {n_sites}")
    configs = all_configs(n_sites)
    logw = 2.0 * log_psi_batch(params, configs)
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return SampleBatch(
        visible=configs,
        weights=w,
        diagnostics={"acceptance_rate": 1.0, "chain_break_rate": 0.0, "sweeps_per_sample": 0},
    )


def _random_configs(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    return (2 * rng.integers(0, 2, size=shape) - 1).astype(np.int8)


def metropolis_sample(params: RbmParams, spec: SamplerSpec, rng: np.random.Generator) -> SampleBatch:
    """Single-spin-flip Metropolis-Hastings targeting rho(v) ~ |Psi(v)|^2.

    One sweep proposes N flips at uniformly random sites; a proposal is
    accepted with min(1, ratio^2) because the target is the squared
    amplitude. Walkers start from uniform random configs.
    """
    if spec.kind != "metropolis":
        raise ValueError(f"spec.kind must be 'metropolis', got {spec.kind!r}")
    n = params.n_visible
    chains = min(spec.n_chains, spec.n_samples)
    per_chain = -(-spec.n_samples // chains)

    v = _random_configs(rng, (chains, n))
    th = theta_batch(params, v)
    l2c_sum = np.sum(log2cosh(th), axis=1)
    rows = np.arange(chains)

    accepted = 0
    proposed = 0
    collected: list[np.ndarray] = []

    def sweep(count_stats: bool):
        nonlocal accepted, proposed, th, l2c_sum
        for _ in range(n):
            sites = rng.integers(0, n, size=chains)
            u = rng.random(chains)
            v_sel = v[rows, sites].astype(np.float64)
            th_new = th - 2.0 * v_sel[:, None] * params.W[:, sites].T
            l2c_new = np.sum(log2cosh(th_new), axis=1)
            dlog = -params.a[sites] * v_sel + 0.5 * (l2c_new - l2c_sum)
            acc = np.log(u) < 2.0 * dlog
            if acc.any():
                v[rows[acc], sites[acc]] *= -1
                th[acc] = th_new[acc]
                l2c_sum[acc] = l2c_new[acc]
            if count_stats:
                accepted += int(acc.sum())
                proposed += chains

    for _ in range(spec.burn_in):
        sweep(False)
    for _ in range(per_chain):
        for _ in range(spec.thinning):
            sweep(True)
        collected.append(v.copy())

    visible = np.concatenate(collected, axis=0)[: spec.n_samples]
    rate = accepted / proposed if proposed else 1.0
    return SampleBatch(
        visible=visible,
        diagnostics={
            "acceptance_rate": float(rate),
            "chain_break_rate": 0.0,
            "sweeps_per_sample": spec.thinning,
        },
    )


def gibbs_conditional_hidden(params: RbmParams, v: np.ndarray) -> np.ndarray:
    """p(h_j = +1 | v) = e^theta_j / (2 cosh theta_j), independently per j."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.n_visible,):
        raise ValueError(f"config shape {v.shape} does not match N={params.n_visible}")
    th = params.b + params.W @ v
    return _sigmoid(2.0 * th)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _sample_signs(rng: np.random.Generator, p_plus: np.ndarray) -> np.ndarray:
    return np.where(rng.random(p_plus.shape) < p_plus, 1, -1).astype(np.int8)


def gibbs_sample(params: RbmParams, spec: SamplerSpec, rng: np.random.Generator) -> SampleBatch:
    """Block-alternating Gibbs over p(v, h) ~ exp(a.v + b.h + h.W.v).

    The bipartite structure makes all h_j conditionally independent given v
    (and vice versa with theta'_i = a_i + (W^T h)_i), so a sweep resamples
    the whole hidden layer then the whole visible layer. The marginal over h
    is exactly rho(v). Returns both layers.
    """
    if spec.kind != "gibbs":
        raise ValueError(f"spec.kind must be 'gibbs', got {spec.kind!r}")
    n, m = params.n_visible, params.n_hidden
    chains = min(spec.n_chains, spec.n_samples)
    per_chain = -(-spec.n_samples // chains)

    v = _random_configs(rng, (chains, n)).astype(np.float64)
    h = np.zeros((chains, m))

    def sweep():
        nonlocal v, h
        th_h = v @ params.W.T + params.b
        h = _sample_signs(rng, _sigmoid(2.0 * th_h)).astype(np.float64)
        th_v = h @ params.W + params.a
        v = _sample_signs(rng, _sigmoid(2.0 * th_v)).astype(np.float64)

    vs: list[np.ndarray] = []
    hs: list[np.ndarray] = []
    for _ in range(spec.burn_in):
        sweep()
    for _ in range(per_chain):
        for _ in range(spec.thinning):
            sweep()
        vs.append(v.astype(np.int8))
        hs.append(h.astype(np.int8))

    visible = np.concatenate(vs, axis=0)[: spec.n_samples]
    hidden = np.concatenate(hs, axis=0)[: spec.n_samples]
    return SampleBatch(
        visible=visible,
        hidden=hidden,
        diagnostics={
            "acceptance_rate": 1.0,
            "chain_break_rate": 0.0,
            "sweeps_per_sample": spec.thinning,
        },
    )


def estimate_mean(batch: SampleBatch, f):
    """Sample-mean estimator <<f>> ~ (1/N_s) sum_k f(v_k), weighted if exact.

    f reads only the visible configuration and may return a scalar or a
    vector; the weighted form applies for exhaustive batches.
    """
    if batch.visible.shape[0] == 0:
        raise ValueError("cannot average over an empty batch")
    values = np.asarray([f(batch.visible[k]) for k in range(batch.n_samples)], dtype=np.float64)
    return mean_over_batch(batch, values)


def mean_over_batch(batch: SampleBatch, values: np.ndarray):
    """Mean of precomputed per-sample values (scalar per sample or vector per sample)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != batch.n_samples:
        raise ValueError("values length must match batch length")
    if values.shape[0] == 0:
        raise ValueError("cannot average over an empty batch")
    if batch.weights is not None:
        out = np.tensordot(batch.weights, values, axes=(0, 0))
    else:
        out = values.mean(axis=0)
    return float(out) if np.ndim(out) == 0 else out
