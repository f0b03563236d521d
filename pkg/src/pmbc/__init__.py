"""Parallel spike-train resolution for leaky integrate-and-fire neurons.

The package resolves soft-reset and refractory LIF spike trains with parallel
max-min boundary compression (PMBC), and ships the serial reference neurons,
FFT convolution kernels, a spiking diagonal-SSM block and a benchmark CLI.
"""

from .block import BlockParams, LayerStats, Norm, block_forward, spiking_rate_profile
from .energy import EnergyModel, EnergyReport, LayerSpec, estimate_energy
from .errors import (
    ConfigError,
    DomainError,
    InvariantError,
    ParameterError,
    PmbcError,
    ShapeError,
    UnsupportedModeError,
    ValidationError,
)
from .kernels import (
    KernelSpectrum,
    SsmLayerParams,
    causal_conv,
    exp_kernel,
    refractory_kernel,
    shift_one,
    ssm_kernel,
    ssm_recurrent,
)
from .neuron import (
    Decomposition,
    NeuronParams,
    ResetMode,
    decompose,
    serial_lif,
    spike_rate,
    surrogate,
    surrogate_grad,
)
from .solver import (
    BoundState,
    FireMode,
    PmbcResult,
    PmbcSolver,
    explicit_fraction,
    pmbc_solve,
    pmbc_solve_batch,
    resolve_fuzzy,
)

__version__ = "0.1.0"
