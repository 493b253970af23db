"""Chimera graphs, RBM chain embedding, hardware lowering, annealer emulation.

A chimera graph C_n is an n x n grid of 8-qubit cells, each a complete
bipartite K_{4,4} between a "vertical" partition (in-cell indices 0-3) and a
"horizontal" partition (4-7), plus 4 couplers between each pair of adjacent
cells. Qubits are numbered cell-row-major, vertical partition first:
qubit = 8*(row*n + col) + k.

A visible neuron is a chain of vertical-partition qubits across one row of
cells; a hidden neuron is a chain of horizontal-partition qubits down one
column. Each (visible, hidden) pair then meets in exactly one cell, whose
K_{4,4} coupler hosts the logical weight. The device emulator samples the
lowered Ising instance from its equilibrium Boltzmann distribution at a
configurable temperature mismatch, injects chain breaks, and decodes chains
by majority vote.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .rbm import RbmParams
from .sampling import SampleBatch

J_RANGE = 1.0  # programmable coupler range |J| <= 1
B_RANGE = 2.0  # programmable bias range |B| <= 2


@dataclass(frozen=True)
class ChimeraGraph:
    """C_n topology: 8*n^2 qubits, 16*n^2 + 8*n*(n-1) couplers."""

    n: int
    edges: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return 8 * self.n * self.n

    def edge_set(self) -> frozenset:
        return frozenset(self.edges)


def build_chimera(n: int) -> ChimeraGraph:
    """Deterministic C_n construction.

    Within each cell the K_{4,4} couples partitions 0-3 and 4-7. Between
    horizontally adjacent cells the 4 couplers join equal vertical-partition
    indices (these carry visible chains); between vertically adjacent cells
    they join equal horizontal-partition indices (hidden chains).
    """
    if n < 1:
        raise ValueError(f"chimera size must be >= 1, got {n}")
    edges: list[tuple[int, int]] = []
    for r in range(n):
        for c in range(n):
            base = 8 * (r * n + c)
            for kv in range(4):
                for kh in range(4, 8):
                    edges.append((base + kv, base + kh))
            if c + 1 < n:
                right = 8 * (r * n + c + 1)
                for kv in range(4):
                    edges.append((base + kv, right + kv))
            if r + 1 < n:
                below = 8 * ((r + 1) * n + c)
                for kh in range(4, 8):
                    edges.append((base + kh, below + kh))
    return ChimeraGraph(n=n, edges=tuple(edges))


@dataclass(frozen=True)
class ChimeraEmbedding:
    """Neuron-to-qubit-chain map plus the ferromagnetic chain coupling."""

    graph: ChimeraGraph
    visible_chains: tuple[tuple[int, ...], ...]
    hidden_chains: tuple[tuple[int, ...], ...]
    chain_coupling: float = 1.0

    @property
    def n_visible(self) -> int:
        return len(self.visible_chains)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_chains)

    @property
    def all_chains(self) -> tuple[tuple[int, ...], ...]:
        return self.visible_chains + self.hidden_chains

    def qubits_used(self) -> list[int]:
        return sorted(q for chain in self.all_chains for q in chain)

    def coupler_for(self, i: int, j: int) -> tuple[int, int]:
        """The physical coupler hosting logical weight W_ji (visible i, hidden j)."""
        n = self.graph.n
        r, kv = divmod(i, 4)
        c, kh = divmod(j, 4)
        base = 8 * (r * n + c)
        return (base + kv, base + 4 + kh)


def embed_rbm(n_visible: int, n_hidden: int, n: int, chain_coupling: float = 1.0) -> ChimeraEmbedding:
    """Embed an RBM on C_n: visible chains along cell rows, hidden down columns.

    C_n hosts at most 4n visible and 4n hidden neurons (L_max = 8n logical
    units in total).
    """
    graph = build_chimera(n)
    cap = 4 * n
    if n_visible > cap or n_hidden > cap:
        raise ValueError(
            f"capacity exceeded: C_{n} hosts at most {cap} visible and {cap} hidden neurons "
            f"(L_max = {8 * n}), requested {n_visible} + {n_hidden}"
        )
    if n_visible < 1 or n_hidden < 1:
        raise ValueError("need at least one visible and one hidden neuron")
    if chain_coupling <= 0:
        raise ValueError(f"chain coupling must be > 0, got {chain_coupling}")
    visible = tuple(
        tuple(8 * ((i // 4) * n + c) + (i % 4) for c in range(n)) for i in range(n_visible)
    )
    hidden = tuple(
        tuple(8 * (r * n + (j // 4)) + 4 + (j % 4) for r in range(n)) for j in range(n_hidden)
    )
    return ChimeraEmbedding(
        graph=graph, visible_chains=visible, hidden_chains=hidden, chain_coupling=float(chain_coupling)
    )


@dataclass(frozen=True)
class IsingInstance:
    """A programmed chimera instance: per-node biases and per-edge couplers.

    Couplers are split into logical edges (carrying W_ji / beta_x) and chain
    edges (ferromagnetic glue); biases spread each neuron's bias equally over
    its chain. clip_report counts parameter-derived values that hit the
    programmable range.
    """

    graph: ChimeraGraph
    biases: np.ndarray
    couplers: dict
    logical_edges: frozenset
    chain_edges: frozenset
    chains: tuple[tuple[int, ...], ...]
    clip_report: int

    def __post_init__(self):
        if np.any(np.abs(self.biases) > B_RANGE + 1e-15):
            raise ValueError(f"biases exceed |B| <= {B_RANGE} after lowering")
        if any(abs(v) > J_RANGE + 1e-15 for v in self.couplers.values()):
            raise ValueError(f"couplers exceed |J| <= {J_RANGE} after lowering")

    def energy(self, sigma: np.ndarray) -> float:
        """E(sigma) = -sum_i B_i sigma_i - sum_(i,j) J_ij sigma_i sigma_j."""
        e = -float(self.biases @ sigma)
        for (p, q), j in self.couplers.items():
            e -= j * float(sigma[p]) * float(sigma[q])
        return e


def _clip(value: float, bound: float) -> tuple[float, int]:
    if value > bound:
        return bound, 1
    if value < -bound:
        return -bound, 1
    return value, 0


def lower(params: RbmParams, embedding: ChimeraEmbedding, beta_x: float) -> IsingInstance:
    """Lower RBM weights onto the embedded chimera instance.

    Logical couplers take W_ji / beta_x on the single hosting coupler; each
    neuron's bias is divided by beta_x and spread equally over its chain's
    qubits; chain couplers are set ferromagnetic at +chain_coupling. Values
    outside the programmable range are clipped and counted.
    """
    if beta_x <= 0:
        raise ValueError(f"inverse-temperature estimate must be > 0, got {beta_x}")
    if params.n_visible != embedding.n_visible or params.n_hidden != embedding.n_hidden:
        raise ValueError(
            f"params are {params.n_visible}x{params.n_hidden} but embedding hosts "
            f"{embedding.n_visible}x{embedding.n_hidden}"
        )
    nq = embedding.graph.n_nodes
    biases = np.zeros(nq)
    couplers: dict[tuple[int, int], float] = {}
    clips = 0

    cc = embedding.chain_coupling
    if cc > J_RANGE:
        warnings.warn(
            f"chain coupling {cc} exceeds the programmable range and is clipped to {J_RANGE}",
            stacklevel=2,
        )
        cc = J_RANGE

    chain_edges = set()
    for chain in embedding.all_chains:
        for p, q in zip(chain[:-1], chain[1:]):
            e = (p, q) if p < q else (q, p)
            couplers[e] = cc
            chain_edges.add(e)

    logical_edges = set()
    for j in range(params.n_hidden):
        for i in range(params.n_visible):
            p, q = embedding.coupler_for(i, j)
            e = (p, q) if p < q else (q, p)
            val, c = _clip(params.W[j, i] / beta_x, J_RANGE)
            couplers[e] = val
            clips += c
            logical_edges.add(e)

    for i, chain in enumerate(embedding.visible_chains):
        per_qubit, c = _clip(params.a[i] / beta_x / len(chain), B_RANGE)
        clips += c
        for q in chain:
            biases[q] = per_qubit
    for j, chain in enumerate(embedding.hidden_chains):
        per_qubit, c = _clip(params.b[j] / beta_x / len(chain), B_RANGE)
        clips += c
        for q in chain:
            biases[q] = per_qubit

    return IsingInstance(
        graph=embedding.graph,
        biases=biases,
        couplers=couplers,
        logical_edges=frozenset(logical_edges),
        chain_edges=frozenset(chain_edges),
        chains=embedding.all_chains,
        clip_report=clips,
    )


def instance_to_text(instance: IsingInstance) -> str:
    """Plain-text export: one `i B_i` line per qubit, one `i j J_ij` per coupler.

    Qubit indices follow the deterministic chimera numbering; couplers are
    sorted, so equal instances produce byte-identical text.
    """
    lines = [f"{q} {float(instance.biases[q])!r}" for q in range(instance.graph.n_nodes)]
    for (p, q) in sorted(instance.couplers):
        lines.append(f"{p} {q} {float(instance.couplers[(p, q)])!r}")
    return "\n".join(lines) + "\n"


def _two_coloring(n: int, qubits: np.ndarray) -> np.ndarray:
    """Proper 2-coloring of the chimera graph: (partition + cell row + cell col) mod 2."""
    cell, k = np.divmod(qubits, 8)
    r, c = np.divmod(cell, n)
    return (k // 4 + r + c) % 2


def effective_fields(instance: IsingInstance, mismatch_x: float):
    """Sampling exponent arrays: logical parts scaled by x, chain couplers as programmed."""
    nq = instance.graph.n_nodes
    b_eff = mismatch_x * instance.biases
    j_eff = np.zeros((nq, nq))
    for (p, q), val in instance.couplers.items():
        scale = mismatch_x if (p, q) in instance.logical_edges else 1.0
        j_eff[p, q] = j_eff[q, p] = scale * val
    return b_eff, j_eff


def inject_chain_breaks(
    raw: np.ndarray, chains: tuple[tuple[int, ...], ...], p_break: float, rng: np.random.Generator
) -> int:
    """Per sample and per chain, flip one uniformly chosen qubit with probability p_break.

    Mutates ``raw`` in place and returns the number of injected break events.
    """
    if not 0.0 <= p_break < 1.0:
        raise ValueError(f"p_break must lie in [0, 1), got {p_break}")
    if p_break == 0.0:
        return 0
    n_samples = raw.shape[0]
    count = 0
    for chain in chains:
        hit = np.nonzero(rng.random(n_samples) < p_break)[0]
        if hit.size:
            pos = rng.integers(0, len(chain), size=hit.size)
            raw[hit, np.asarray(chain)[pos]] *= -1
            count += int(hit.size)
    return count


def emulate_anneal(
    instance: IsingInstance,
    mismatch_x: float,
    n_samples: int,
    sweeps: int,
    p_break: float,
    rng: np.random.Generator,
    *,
    burn_in: int | None = None,
    n_chains: int = 1024,
) -> np.ndarray:
    """Equilibrium Boltzmann samples of the programmed instance, with chain breaks.

    Qubit configs are drawn from p(sigma) ~ exp(-x * E'(sigma)) where the
    logical couplers and biases carry the temperature mismatch x and the
    chain couplers stay at full strength. Sampling is block Gibbs over the
    chimera 2-coloring on the qubits that carry any field; idle qubits are
    independent fair coins. After sampling, each chain of each sample is hit
    by a single-qubit flip with probability p_break.

    Returns an (n_samples, 8 n^2) array of +-1 qubit values.
    """
    if mismatch_x <= 0:
        raise ValueError(f"temperature mismatch must be > 0, got {mismatch_x}")
    if not 0.0 <= p_break < 1.0:
        raise ValueError(f"p_break must lie in [0, 1), got {p_break}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")
    if burn_in is None:
        burn_in = 10 * sweeps

    nq = instance.graph.n_nodes
    b_eff, j_eff = effective_fields(instance, mismatch_x)
    active = np.nonzero((b_eff != 0) | (np.abs(j_eff).sum(axis=1) != 0))[0]

    chains = min(n_chains, n_samples)
    per_chain = -(-n_samples // chains)
    raw = (2 * rng.integers(0, 2, size=(chains, nq)) - 1).astype(np.int8)

    collected: list[np.ndarray] = []
    if active.size:
        ja = j_eff[np.ix_(active, active)]
        ba = b_eff[active]
        colors = _two_coloring(instance.graph.n, active)
        groups = [np.nonzero(colors == c)[0] for c in (0, 1)]
        sigma = raw[:, active].astype(np.float64)

        def sweep_once():
            for g in groups:
                if g.size == 0:
                    continue
                fields = sigma @ ja[:, g] + ba[g]
                p_plus = 1.0 / (1.0 + np.exp(-2.0 * fields))
                sigma[:, g] = np.where(rng.random(p_plus.shape) < p_plus, 1.0, -1.0)

        for _ in range(burn_in):
            sweep_once()
        for _ in range(per_chain):
            for _ in range(sweeps):
                sweep_once()
            snap = raw.copy()
            snap[:, active] = sigma.astype(np.int8)
            idle = np.setdiff1d(np.arange(nq), active, assume_unique=False)
            if idle.size:
                snap[:, idle] = (2 * rng.integers(0, 2, size=(chains, idle.size)) - 1).astype(np.int8)
            collected.append(snap)
    else:
        for _ in range(per_chain):
            collected.append((2 * rng.integers(0, 2, size=(chains, nq)) - 1).astype(np.int8))

    samples = np.concatenate(collected, axis=0)[:n_samples]
    inject_chain_breaks(samples, instance.chains, p_break, rng)
    return samples


def decode(raw_config: np.ndarray, embedding: ChimeraEmbedding, rng: np.random.Generator):
    """Majority-vote a raw qubit config into (v, h, broken_chain_count).

    A chain is broken when its qubits disagree; exact ties (even-length
    chains) fall to a fair coin so short chains pick up no systematic bias.
    """
    raw_config = np.asarray(raw_config)
    if raw_config.shape != (embedding.graph.n_nodes,):
        raise ValueError(
            f"raw config must cover all {embedding.graph.n_nodes} qubits, got shape {raw_config.shape}"
        )
    v, h, broken = decode_batch(raw_config[None, :], embedding, rng)
    return v[0], h[0], int(broken[0])


def decode_batch(raw: np.ndarray, embedding: ChimeraEmbedding, rng: np.random.Generator):
    """Vectorized decode of (n_samples, n_qubits) raw configs."""
    raw = np.asarray(raw)
    if raw.ndim != 2 or raw.shape[1] != embedding.graph.n_nodes:
        raise ValueError(
            f"raw configs must cover all {embedding.graph.n_nodes} qubits, got shape {raw.shape}"
        )
    n_samples = raw.shape[0]
    broken = np.zeros(n_samples, dtype=np.int64)

    def decode_chains(chain_list):
        out = np.empty((n_samples, len(chain_list)), dtype=np.int8)
        for idx, chain in enumerate(chain_list):
            vals = raw[:, list(chain)]
            total = vals.sum(axis=1)
            sign = np.sign(total).astype(np.int8)
            tie = sign == 0
            if tie.any():
                coins = (2 * rng.integers(0, 2, size=int(tie.sum())) - 1).astype(np.int8)
                sign[tie] = coins
            out[:, idx] = sign
            broken[:] += (np.abs(total) != len(chain)).astype(np.int64)
        return out

    v = decode_chains(embedding.visible_chains)
    h = decode_chains(embedding.hidden_chains)
    return v, h, broken


def annealer_sample(
    params: RbmParams,
    embedding: ChimeraEmbedding,
    beta_x: float,
    mismatch_x: float,
    spec,
    rng: np.random.Generator,
) -> SampleBatch:
    """Full emulated-device pipeline: lower, Boltzmann-sample, decode.

    spec is a SamplerSpec with kind 'annealer-emulator'; its burn_in /
    thinning / n_chains / p_break drive the Gibbs kernel. Returns both
    decoded layers with the observed chain-break rate (fraction of
    non-unanimous chains per decoded neuron).
    """
    if spec.kind != "annealer-emulator":
        raise ValueError(f"spec.kind must be 'annealer-emulator', got {spec.kind!r}")
    instance = lower(params, embedding, beta_x)
    raw = emulate_anneal(
        instance,
        mismatch_x,
        spec.n_samples,
        spec.thinning,
        spec.p_break,
        rng,
        burn_in=spec.burn_in,
        n_chains=spec.n_chains,
    )
    v, h, broken = decode_batch(raw, embedding, rng)
    n_chains_total = len(embedding.all_chains)
    return SampleBatch(
        visible=v,
        hidden=h,
        diagnostics={
            "acceptance_rate": 1.0,
            "chain_break_rate": float(broken.sum()) / (spec.n_samples * n_chains_total),
            "sweeps_per_sample": spec.thinning,
            "clipped_values": instance.clip_report,
        },
    )
