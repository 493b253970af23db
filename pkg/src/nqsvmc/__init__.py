"""Variational Monte Carlo for the transverse-field Ising model.

An RBM wave function is optimized by stochastic reconfiguration using
pluggable samplers: exact enumeration, Metropolis-Hastings, block Gibbs,
and an emulated quantum annealer (chimera embedding, hardware clipping,
temperature miscalibration, chain breaks, majority-vote decoding).
"""

from .lattice import TfimLattice, build_lattice, diagonal_energy, flip
from .rbm import RbmParams, ThetaCache, init_params, log_psi, local_energy
from .sampling import SampleBatch, SamplerSpec, estimate_mean
from .optimizer import SrConfig, TrainState, train
from .reference import ReferenceResult, exact_energy_1d, dense_ground_energy

__version__ = "0.1.0"

__all__ = [
    "TfimLattice",
    "build_lattice",
    "diagonal_energy",
    "flip",
    "RbmParams",
    "ThetaCache",
    "init_params",
    "log_psi",
    "local_energy",
    "SampleBatch",
    "SamplerSpec",
    "estimate_mean",
    "SrConfig",
    "TrainState",
    "train",
    "ReferenceResult",
    "exact_energy_1d",
    "dense_ground_energy",
    "__version__",
]
