"""Transverse-field Ising lattices and the diagonal part of the Hamiltonian.

Spins live in {-1, +1}. Supported geometries are a periodic chain and a
periodic (torus) square lattice; 2D sites are indexed row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHAIN = "chain"
TORUS = "torus"


@dataclass(frozen=True)
class TfimLattice:
    """Geometry, transverse field and the unique nearest-neighbor bond list.

    ``bonds`` holds every periodic nearest-neighbor pair exactly once:
    N bonds for a chain of N sites, 2*Lx*Ly bonds for an Lx x Ly torus.
    """

    kind: str
    dims: tuple[int, ...]
    h: float
    bonds: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    def bond_array(self) -> np.ndarray:
        """Bonds as an integer array of shape (n_bonds, 2)."""
        return np.asarray(self.bonds, dtype=np.int64)


def build_lattice(kind: str, dims, h: float) -> TfimLattice:
    """Build a periodic chain ('chain', dims=(N,)) or torus ('torus', dims=(Lx, Ly)).

    Every periodic dimension must be at least 3: below that the periodic
    wrap would duplicate bonds. The transverse field h must be >= 0.
    """
    if h < 0:
        raise ValueError(f"transverse field must be >= 0, got {h}")
    dims = tuple(int(d) for d in dims)
    if kind == CHAIN:
        if len(dims) != 1:
            raise ValueError(f"chain expects dims=(N,), got {dims}")
        (n,) = dims
        if n < 3:
            raise ValueError(f"chain needs N >= 3 to avoid duplicate periodic bonds, got N={n}")
        bonds = tuple((i, (i + 1) % n) for i in range(n))
    elif kind == TORUS:
        if len(dims) != 2:
            raise ValueError(f"torus expects dims=(Lx, Ly), got {dims}")
        lx, ly = dims
        if lx < 3 or ly < 3:
            raise ValueError(
                f"torus needs Lx >= 3 and Ly >= 3 to avoid duplicate periodic bonds, got {lx}x{ly}"
            )
        bonds_list = []
        for r in range(lx):
            for c in range(ly):
                i = r * ly + c
                bonds_list.append((i, r * ly + (c + 1) % ly))
                bonds_list.append((i, ((r + 1) % lx) * ly + c))
        bonds = tuple(bonds_list)
    else:
        raise ValueError(f"unknown lattice kind {kind!r}, expected 'chain' or 'torus'")
    return TfimLattice(kind=kind, dims=dims, h=float(h), bonds=bonds)


def check_config(lattice: TfimLattice, v: np.ndarray) -> np.ndarray:
    """Validate a spin configuration for the lattice and return it as int8."""
    v = np.asarray(v)
    if v.shape != (lattice.n_sites,):
        raise ValueError(f"config has shape {v.shape}, lattice has {lattice.n_sites} sites")
    if not np.all(np.abs(v) == 1):
        raise ValueError("spins must be exactly -1 or +1")
    return v.astype(np.int8)


def diagonal_energy(lattice: TfimLattice, v: np.ndarray) -> float:
    """Classical bond energy -sum_<i,j> v_i v_j over the unique bond list."""
    v = check_config(lattice, v)
    b = lattice.bond_array()
    return float(-np.sum(v[b[:, 0]] * v[b[:, 1]], dtype=np.int64))


def diagonal_energy_batch(lattice: TfimLattice, configs: np.ndarray) -> np.ndarray:
    """Vectorized diagonal energy for a (batch, n_sites) array of spins."""
    configs = np.asarray(configs)
    if configs.ndim != 2 or configs.shape[1] != lattice.n_sites:
        raise ValueError(f"expected (batch, {lattice.n_sites}) configs, got {configs.shape}")
    b = lattice.bond_array()
    prods = configs[:, b[:, 0]].astype(np.float64) * configs[:, b[:, 1]]
    return -np.sum(prods, axis=1)


def flip(v: np.ndarray, i: int) -> np.ndarray:
    """Return a copy of v with spin i negated; v itself is unchanged."""
    v = np.asarray(v)
    if not 0 <= i < v.shape[0]:
        raise IndexError(f"site index {i} out of range for {v.shape[0]} sites")
    out = v.copy()
    out[i] = -out[i]
    return out
