"""Inference-only forward pass of a spiking diagonal-SSM block.

Per channel: diagonal SSM convolution -> spiking neuron (PMBC or serial)
-> position-wise linear projection with gated (GLU) activation -> residual.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .kernels import KernelSpectrum, SsmLayerParams, ssm_kernel
from .neuron import NeuronParams, serial_lif
from .solver import DEFAULT_FIRE_MODE, FireMode, PmbcSolver

log = logging.getLogger(__name__)

__all__ = [
    "BlockOutput",
    "BlockParams",
    "LayerStats",
    "Norm",
    "block_forward",
    "glu",
    "random_block",
    "spiking_rate_profile",
    "standardize",
]


class Norm(enum.Enum):
    NONE = "none"
    LAYER = "layer"
    BATCH = "batch"


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def glu(z: np.ndarray) -> np.ndarray:
    """Gated linear unit along axis 0: first half times sigmoid of the second half."""
    half = z.shape[0] // 2
    if z.shape[0] != 2 * half:
        raise ShapeError("GLU input needs an even number of rows")
    return z[:half] * _sigmoid(z[half:])


def standardize(x, norm: Norm, eps=1e-5):
    if norm is Norm.NONE:
        return x
    axis = 0 if norm is Norm.LAYER else 1
    mean = x.mean(axis=axis, keepdims=True)
    std = x.std(axis=axis, keepdims=True)
    return (x - mean) / (std + eps)


@dataclass
class BlockParams:
    """One block: ``D`` SSM channels, neuron parameters and a ``(2*D_out, D)`` mix."""

    ssm: list[SsmLayerParams]
    neuron: NeuronParams | list[NeuronParams]
    mix_weights: np.ndarray
    mix_bias: np.ndarray
    norm: Norm = Norm.NONE
    residual: bool = True

    def __post_init__(self):
        self.mix_weights = np.asarray(self.mix_weights, dtype=np.float64)
        self.mix_bias = np.asarray(self.mix_bias, dtype=np.float64)
        self.norm = Norm(self.norm) if not isinstance(self.norm, Norm) else self.norm
        d = len(self.ssm)
        if d < 1:
            raise ShapeError("a block needs at least one SSM channel")
        if self.mix_weights.ndim != 2 or self.mix_weights.shape[1] != d:
            raise ShapeError(f"mix_weights must have shape (2*D_out, {d}), got {self.mix_weights.shape}")
        if self.mix_weights.shape[0] % 2:
            raise ShapeError("mix_weights needs an even number of rows (value and gate halves)")
        if self.mix_bias.shape != (self.mix_weights.shape[0],):
            raise ShapeError("mix_bias length must equal 2*D_out")
        if not isinstance(self.neuron, NeuronParams) and len(self.neuron) != d:
            raise ShapeError("per-channel neuron params must have one entry per channel")

    @property
    def channels(self) -> int:
        return len(self.ssm)

    @property
    def out_channels(self) -> int:
        return self.mix_weights.shape[0] // 2

    def neuron_for(self, channel: int) -> NeuronParams:
        return self.neuron if isinstance(self.neuron, NeuronParams) else self.neuron[channel]


@dataclass
class LayerStats:
    spiking_rate: float
    channel_rates: np.ndarray
    fuzzy_rate: float
    timing: dict[str, float] = field(default_factory=dict)


@dataclass
class BlockOutput:
    spikes: np.ndarray
    output: np.ndarray
    stats: LayerStats


def random_block(channels, state_size, neuron, rng=None, *, out_channels=None,
                 delta=(0.001, 0.1), norm=Norm.NONE) -> BlockParams:
    """Random S4D-Lin block with a Xavier-scaled mix layer."""
    rng = np.random.default_rng(rng)
    out_channels = channels if out_channels is None else out_channels
    lo, hi = delta
    ssm = [
        SsmLayerParams.s4d_lin(state_size, float(np.exp(rng.uniform(np.log(lo), np.log(hi)))), rng)
        for _ in range(channels)
    ]
    scale = np.sqrt(2.0 / (channels + 2 * out_channels))
    w = rng.standard_normal((2 * out_channels, channels)) * scale
    return BlockParams(ssm, neuron, w, np.zeros(2 * out_channels), norm=norm)


def _spike_channels(params: BlockParams, y, iters, mode, backend, seed):
    d, length = y.shape
    spikes = np.empty((d, length), dtype=np.uint8)
    fuzzy = np.zeros(d)
    if backend == "serial":
        for c in range(d):
            spikes[c] = serial_lif(params.neuron_for(c), y[c])[0]
        return spikes, fuzzy
    if isinstance(params.neuron, NeuronParams):
        res = PmbcSolver(params.neuron, length).solve(y, iters, mode, seed=seed)
        fuzzy[:] = res.bounds.fuzzy.mean(axis=1)
        return res.spikes, fuzzy
    rng = np.random.default_rng(seed)
    for c in range(d):
        res = PmbcSolver(params.neuron[c], length).solve(y[c], iters, mode, seed=rng)
        spikes[c] = res.spikes
        fuzzy[c] = res.fuzzy_rate
    return spikes, fuzzy


def block_forward(params: BlockParams, x, pmbc_iters=3, mode=DEFAULT_FIRE_MODE, *,
                  backend="pmbc", seed=None) -> BlockOutput:
    """Run one block on ``x`` of shape ``(D, L)``.

    ``backend="serial"`` swaps the PMBC solver for the step-by-step neuron,
    which must give bitwise-identical spikes away from exact threshold ties.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != params.channels or x.shape[1] < 1:
        raise ShapeError(f"expected input of shape ({params.channels}, L), got {x.shape}")
    if backend not in ("pmbc", "serial"):
        raise ValueError(f"unknown backend {backend!r}")
    mode = FireMode.parse(mode)
    length = x.shape[1]
    timing = {}

    t0 = time.perf_counter()
    h = standardize(x, params.norm)
    y = np.stack(
        [KernelSpectrum.from_kernel(ssm_kernel(p, length)).apply(h[c]) for c, p in enumerate(params.ssm)]
    )
    t1 = time.perf_counter()
    spikes, fuzzy = _spike_channels(params, y, pmbc_iters, mode, backend, seed)
    t2 = time.perf_counter()
    # Spikes enter the mix layer as exact 0/1 values.
    mixed = glu(params.mix_weights @ spikes.astype(np.float64) + params.mix_bias[:, None])
    if params.residual:
        if mixed.shape == x.shape:
            mixed = mixed + x
        else:
            log.warning("residual dropped: output shape %s differs from input %s", mixed.shape, x.shape)
    t3 = time.perf_counter()
    timing.update(ssm=t1 - t0, neuron=t2 - t1, mix=t3 - t2)

    rates = spikes.mean(axis=1)
    stats = LayerStats(float(spikes.mean()), rates, float(fuzzy.mean()), timing)
    return BlockOutput(spikes, mixed, stats)


def spiking_rate_profile(blocks: Sequence[BlockParams], x, pmbc_iters=3, mode=DEFAULT_FIRE_MODE, *,
                         backend="pmbc", seed=None) -> list[LayerStats]:
    """Run ``blocks`` in sequence and collect per-layer spiking statistics."""
    if len(blocks) < 1:
        raise ShapeError("need at least one block")
    rng = np.random.default_rng(seed)
    stats = []
    h = np.asarray(x, dtype=np.float64)
    for block in blocks:
        out = block_forward(block, h, pmbc_iters, mode, backend=backend, seed=rng)
        stats.append(out.stats)
        h = out.output
    return stats
