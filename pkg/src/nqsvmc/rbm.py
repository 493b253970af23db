"""RBM wave function: amplitudes, log-derivatives, flip ratios, local energy.

The ansatz with the hidden layer traced out is

    Psi(v) = exp(a.v / 2) * prod_j [2 cosh(theta_j)]^(1/2),
    theta_j = b_j + W[j, :] . v

with real weights a (N visible biases), b (M hidden biases) and W (M x N).
|Psi(v)|^2 then equals the classical RBM marginal sum_h exp(a.v + b.h + h.W.v),
which is what lets a Boltzmann sampler stand in for the quantum distribution.
All amplitude math is done in log space; single-flip ratios reuse a cached
theta vector so one flip costs O(M).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import TfimLattice, diagonal_energy_batch

#: flattening order of the parameter vector: [a | b | W row-major]
FLAT_ORDER = ("a", "b", "W")


@dataclass(frozen=True)
class RbmParams:
    """Real RBM weights. Arrays are treated as immutable once constructed."""

    a: np.ndarray  # (N,) visible biases
    b: np.ndarray  # (M,) hidden biases
    W: np.ndarray  # (M, N) couplings, hidden-row / visible-column

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        W = np.asarray(self.W, dtype=np.float64)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "W", W)
        if a.ndim != 1 or b.ndim != 1 or W.shape != (b.size, a.size):
            raise ValueError(
                f"inconsistent shapes: a {a.shape}, b {b.shape}, W {W.shape} (want (M, N))"
            )
        if a.size < 1 or b.size < 1:
            raise ValueError("need N >= 1 visible and M >= 1 hidden units")
        if not (np.isfinite(a).all() and np.isfinite(b).all() and np.isfinite(W).all()):
            raise ValueError("RBM parameters must be finite")

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @property
    def n_params(self) -> int:
        return self.a.size + self.b.size + self.W.size

    def to_flat(self) -> np.ndarray:
        """Flatten as [a | b | W row-major]."""
        return np.concatenate([self.a, self.b, self.W.ravel()])

    @staticmethod
    def from_flat(flat: np.ndarray, n_visible: int, n_hidden: int) -> "RbmParams":
        flat = np.asarray(flat, dtype=np.float64)
        n, m = n_visible, n_hidden
        if flat.shape != (n + m + n * m,):
            raise ValueError(f"flat vector has size {flat.size}, want {n + m + n * m}")
        return RbmParams(a=flat[:n], b=flat[n : n + m], W=flat[n + m :].reshape(m, n))

    def to_json(self) -> str:
        """Serialize as JSON: an (N, M) header plus the flat parameter array."""
        return json.dumps(
            {"n_visible": self.n_visible, "n_hidden": self.n_hidden, "flat": self.to_flat().tolist()}
        )

    @staticmethod
    def from_json(text: str) -> "RbmParams":
        doc = json.loads(text)
        return RbmParams.from_flat(
            np.asarray(doc["flat"], dtype=np.float64), int(doc["n_visible"]), int(doc["n_hidden"])
        )


def init_params(n_visible: int, n_hidden: int, rng: np.random.Generator, scale: float = 0.05) -> RbmParams:
    """Independent uniform draws in [-scale, +scale]; small enough not to saturate tanh."""
    return RbmParams(
        a=rng.uniform(-scale, scale, size=n_visible),
        b=rng.uniform(-scale, scale, size=n_hidden),
        W=rng.uniform(-scale, scale, size=(n_hidden, n_visible)),
    )


@dataclass(frozen=True)
class ThetaCache:
    """theta_j = b_j + W[j, :] . v for one specific (params, v)."""

    theta: np.ndarray


def log2cosh(x: np.ndarray) -> np.ndarray:
    """ln(2 cosh x) in the overflow-safe form |x| + ln(1 + e^(-2|x|))."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax))


def _check_v(params: RbmParams, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.n_visible,):
        raise ValueError(f"config shape {v.shape} does not match N={params.n_visible}")
    return v


def theta(params: RbmParams, v: np.ndarray) -> ThetaCache:
    """Hidden-unit inputs theta_j = b_j + sum_i W_ji v_i."""
    v = _check_v(params, v)
    return ThetaCache(theta=params.b + params.W @ v)


def theta_batch(params: RbmParams, configs: np.ndarray) -> np.ndarray:
    """theta for a (batch, N) array of configs; returns (batch, M)."""
    configs = np.asarray(configs, dtype=np.float64)
    return configs @ params.W.T + params.b


def log_psi(params: RbmParams, v: np.ndarray, cache: ThetaCache | None = None) -> float:
    """ln Psi(v) = a.v/2 + (1/2) sum_j ln(2 cosh theta_j)."""
    v = _check_v(params, v)
    th = cache.theta if cache is not None else params.b + params.W @ v
    return float(0.5 * (params.a @ v) + 0.5 * np.sum(log2cosh(th)))


def log_psi_batch(params: RbmParams, configs: np.ndarray, thetas: np.ndarray | None = None) -> np.ndarray:
    configs = np.asarray(configs, dtype=np.float64)
    if thetas is None:
        thetas = theta_batch(params, configs)
    return 0.5 * (configs @ params.a) + 0.5 * np.sum(log2cosh(thetas), axis=1)


def psi_ratio(params: RbmParams, v: np.ndarray, i: int, cache: ThetaCache) -> float:
    """Psi(v with spin i flipped) / Psi(v), computed incrementally from theta.

    The a-term contributes -a_i v_i to the log ratio and the flipped theta is
    theta_j - 2 W_ji v_i. Always > 0 for finite real weights.
    """
    v = _check_v(params, v)
    if not 0 <= i < params.n_visible:
        raise IndexError(f"site index {i} out of range for N={params.n_visible}")
    th = cache.theta
    th_new = th - 2.0 * params.W[:, i] * v[i]
    dlog = -params.a[i] * v[i] + 0.5 * np.sum(log2cosh(th_new) - log2cosh(th))
    return float(np.exp(dlog))


def flip_ratios_batch(params: RbmParams, configs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Psi(v_bar_i)/Psi(v) for every site i of every config; returns (batch, N).

    A diverged run can push a log-ratio past the float64 exponent range; the
    resulting inf is intentional and trips the optimizer's non-finite guard.
    """
    configs = np.asarray(configs, dtype=np.float64)
    n = params.n_visible
    base = np.sum(log2cosh(thetas), axis=1)
    out = np.empty((configs.shape[0], n))
    with np.errstate(over="ignore"):
        for i in range(n):
            th_new = thetas - 2.0 * np.outer(configs[:, i], params.W[:, i])
            dlog = -params.a[i] * configs[:, i] + 0.5 * (np.sum(log2cosh(th_new), axis=1) - base)
            out[:, i] = np.exp(dlog)
    return out


def log_derivatives(params: RbmParams, v: np.ndarray, cache: ThetaCache) -> np.ndarray:
    """d ln Psi / d w for all weights, flattened as [a | b | W row-major].

    D_a_i = v_i/2, D_b_j = tanh(theta_j)/2, D_W_ji = v_i tanh(theta_j)/2.
    """
    v = _check_v(params, v)
    t = np.tanh(cache.theta)
    return np.concatenate([0.5 * v, 0.5 * t, 0.5 * np.outer(t, v).ravel()])


def log_derivatives_batch(params: RbmParams, configs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Log-derivative matrix of shape (batch, N + M + N*M), same flat order."""
    configs = np.asarray(configs, dtype=np.float64)
    t = np.tanh(thetas)
    s = configs.shape[0]
    w_part = (t[:, :, None] * configs[:, None, :]).reshape(s, -1)
    return 0.5 * np.concatenate([configs, t, w_part], axis=1)


def local_energy(params: RbmParams, lattice: TfimLattice, v: np.ndarray, cache: ThetaCache) -> float:
    """E_loc(v) = -h sum_i Psi(v_bar_i)/Psi(v) - sum_<i,j> v_i v_j."""
    if params.n_visible != lattice.n_sites:
        raise ValueError(f"params have N={params.n_visible} but lattice has {lattice.n_sites} sites")
    ratios = np.array([psi_ratio(params, v, i, cache) for i in range(params.n_visible)])
    diag = diagonal_energy_batch(lattice, np.asarray(v)[None, :])[0]
    return float(-lattice.h * np.sum(ratios) + diag)


def local_energy_batch(
    params: RbmParams, lattice: TfimLattice, configs: np.ndarray, thetas: np.ndarray
) -> np.ndarray:
    if params.n_visible != lattice.n_sites:
        raise ValueError(f"params have N={params.n_visible} but lattice has {lattice.n_sites} sites")
    ratios = flip_ratios_batch(params, configs, thetas)
    return -lattice.h * np.sum(ratios, axis=1) + diagonal_energy_batch(lattice, configs)


def unnormalized_rho(params: RbmParams, v: np.ndarray) -> float:
    """|Psi(v)|^2 = exp(2 ln Psi), the unnormalized quantum weight of v."""
    return float(np.exp(2.0 * log_psi(params, v)))


def all_configs(n: int) -> np.ndarray:
    """All 2^n spin configs as an (2^n, n) int8 array; row k has spin_i = 1 - 2*bit_i(k)."""
    if n > 24:
        raise ValueError(f"refusing to enumerate 2^{n} configurations")
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def network_energy(params: RbmParams, v: np.ndarray, h: np.ndarray) -> float:
    """Joint network energy eps(v, h) = -(a.v + b.h + h.W.v); p(v,h) ~ exp(-eps)."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return float(-(params.a @ v + params.b @ h + h @ params.W @ v))
