"""Causal convolution kernels and FFT-based linear convolution.

All sequences are 1-D float64 arrays whose index 0 holds time step t = 1.
Batched signals put time on the last axis; a kernel is shared across all
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, ShapeError

__all__ = [
    "BlockedKernelSpectrum",
    "KernelSpectrum",
    "SsmLayerParams",
    "causal_conv",
    "direct_causal_conv",
    "effective_support",
    "exp_kernel",
    "fft_size",
    "kernel_transform",
    "refractory_kernel",
    "shift_one",
    "ssm_discretize",
    "ssm_kernel",
    "ssm_recurrent",
]


def _check_unit_interval(name, value, *, allow_zero=False):
    lo_ok = value >= 0.0 if allow_zero else value > 0.0
    if not (np.isfinite(value) and lo_ok and value < 1.0):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise ParameterError(f"{name} must lie in {bound}, got {value!r}")


def _check_length(length):
    if int(length) != length or length < 1:
        raise ParameterError(f"length must be a positive integer, got {length!r}")
    return int(length)


def exp_kernel(tau: float, length: int) -> np.ndarray:
    """Return the decay kernel ``(tau**0, tau**1, ..., tau**(length-1))``."""
    _check_unit_interval("tau", tau)
    length = _check_length(length)
    return tau ** np.arange(length, dtype=np.float64)


def refractory_kernel(tau: float, tau_r: float, length: int) -> np.ndarray:
    """Kernel of the refractory reset term.

    ``taps[d] = sum_{j=0..d} tau**j * tau_r**(d-j)``, evaluated with the
    geometric-sum closed form. The ``tau == tau_r`` case uses the limit
    ``(d+1) * tau**d``; ``tau_r == 0`` reduces to :func:`exp_kernel`.
    """
    _check_unit_interval("tau", tau)
    _check_unit_interval("tau_r", tau_r, allow_zero=True)
    length = _check_length(length)
    d = np.arange(length, dtype=np.float64)
    if tau_r == 0.0:
        return tau**d
    if tau == tau_r:
        return (d + 1.0) * tau**d
    return (tau_r ** (d + 1.0) - tau ** (d + 1.0)) / (tau_r - tau)


def fft_size(length: int) -> int:
    """Smallest power of two that holds a linear convolution of two length-L sequences."""
    need = 2 * int(length) - 1
    return 1 << max(need - 1, 0).bit_length()


@dataclass(frozen=True)
class KernelSpectrum:
    """Frequency-domain transform of a kernel, computed once and reused read-only."""

    length: int
    n_fft: int
    spectrum: np.ndarray = field(repr=False)

    @classmethod
    def from_kernel(cls, kernel) -> "KernelSpectrum":
        taps = np.asarray(kernel, dtype=np.float64)
        if taps.ndim != 1 or taps.size == 0:
            raise ShapeError("kernel must be a non-empty 1-D sequence")
        n = fft_size(taps.size)
        spec = np.fft.rfft(taps, n)
        spec.setflags(write=False)
        return cls(taps.size, n, spec)

    def apply(self, signal) -> np.ndarray:
        """Causal linear convolution of ``signal`` (time on the last axis) with this kernel."""
        x = np.asarray(signal, dtype=np.float64)
        if x.shape[-1] != self.length:
            raise ShapeError(
                f"signal length {x.shape[-1]} does not match kernel length {self.length}"
            )
        out = np.fft.irfft(np.fft.rfft(x, self.n_fft) * self.spectrum, self.n_fft)
        return out[..., : self.length]


# Tail mass below this fraction of the kernel's total is under float64 rounding of the sums.
TRUNCATION_EPS = 2.0**-60


def effective_support(kernel, eps=TRUNCATION_EPS) -> int:
    """Number of leading taps outside which the kernel's absolute mass is ``<= eps`` of its total."""
    mag = np.abs(np.asarray(kernel, dtype=np.float64))
    total = mag.sum()
    if total == 0.0:
        return 1
    tail = np.cumsum(mag[::-1])[::-1]
    keep = np.flatnonzero(tail > eps * total)
    return int(keep[-1]) + 1 if keep.size else 1


@dataclass(frozen=True)
class BlockedKernelSpectrum:
    """Overlap-save convolution with a short (or truncated) kernel.

    Costs O(L log K) for a kernel of support K instead of O(L log L), and
    keeps the working set of each transform small.
    """

    length: int
    support: int
    n_fft: int
    spectrum: np.ndarray = field(repr=False)

    @classmethod
    def from_kernel(cls, kernel, support=None, n_fft=None) -> "BlockedKernelSpectrum":
        taps = np.asarray(kernel, dtype=np.float64)
        if taps.ndim != 1 or taps.size == 0:
            raise ShapeError("kernel must be a non-empty 1-D sequence")
        k = effective_support(taps) if support is None else int(support)
        k = min(max(k, 1), taps.size)
        if n_fft is None:
            n_fft = max(256, 1 << (4 * k - 1).bit_length())
        if n_fft < k:
            raise ParameterError("n_fft must be at least the kernel support")
        spec = np.fft.rfft(taps[:k], n_fft)
        spec.setflags(write=False)
        return cls(taps.size, k, int(n_fft), spec)

    @property
    def step(self) -> int:
        return self.n_fft - self.support + 1

    def apply(self, signal) -> np.ndarray:
        x = np.asarray(signal, dtype=np.float64)
        if x.shape[-1] != self.length:
            raise ShapeError(
                f"signal length {x.shape[-1]} does not match kernel length {self.length}"
            )
        lead = x.shape[:-1]
        rows = x.reshape(-1, self.length)
        k, n, step = self.support, self.n_fft, self.step
        blocks = -(-self.length // step)
        padded = np.zeros((rows.shape[0], (blocks - 1) * step + n))
        padded[:, k - 1 : k - 1 + self.length] = rows
        s0, s1 = padded.strides
        segments = np.lib.stride_tricks.as_strided(
            padded, (rows.shape[0], blocks, n), (s0, step * s1, s1), writeable=False
        )
        out = np.fft.irfft(np.fft.rfft(segments, n) * self.spectrum, n)[..., k - 1 :]
        return out.reshape(rows.shape[0], blocks * step)[:, : self.length].reshape(*lead, self.length)


def kernel_transform(kernel):
    """Pick the cheaper exact transform for ``kernel``.

    Rapidly decaying kernels use overlap-save on their effective support;
    everything else uses a single zero-padded FFT.
    """
    taps = np.asarray(kernel, dtype=np.float64)
    support = effective_support(taps)
    blocked = BlockedKernelSpectrum.from_kernel(taps, support)
    if blocked.n_fft * 2 <= fft_size(taps.size):
        return blocked
    return KernelSpectrum.from_kernel(taps)


def causal_conv(signal, kernel) -> np.ndarray:
    """``out[t] = sum_{j<=t} kernel[j] * signal[t-j]``, truncated to the signal length.

    Uses a zero-padded FFT so there is no circular wrap-around. ``signal`` may
    be batched along leading axes; ``kernel`` may be a 1-D array or a
    precomputed :class:`KernelSpectrum` / :class:`BlockedKernelSpectrum`.
    """
    if isinstance(kernel, (KernelSpectrum, BlockedKernelSpectrum)):
        return kernel.apply(signal)
    spec = KernelSpectrum.from_kernel(kernel)
    return spec.apply(signal)


def direct_causal_conv(signal, kernel) -> np.ndarray:
    """O(L^2) time-domain reference for :func:`causal_conv` (1-D only)."""
    x = np.asarray(signal, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 1 or k.shape != x.shape:
        raise ShapeError("direct_causal_conv expects two 1-D sequences of equal length")
    return np.convolve(x, k)[: x.size]


def shift_one(signal) -> np.ndarray:
    """Delay a sequence by one step along the last axis, filling with zero."""
    x = np.asarray(signal)
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


@dataclass(frozen=True)
class SsmLayerParams:
    """Diagonal continuous-time SSM ``h' = A h + B x, y = C h`` with sample time ``delta``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    delta: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=np.complex128))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.complex128))
        c = np.atleast_1d(np.asarray(self.c, dtype=np.complex128))
        if a.ndim != 1 or a.size < 1 or b.shape != a.shape or c.shape != a.shape:
            raise ShapeError("a, b and c must be 1-D with the same length N >= 1")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ParameterError("SSM parameters must be finite")
        if np.any(a == 0):
            raise DomainError("a_n = 0 makes the zero-order-hold discretization singular")
        if np.any(a.real >= 0):
            raise ParameterError("every a_n needs a negative real part for stability")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ParameterError(f"delta must be positive, got {self.delta!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def state_size(self) -> int:
        return self.a.size

    @classmethod
    def s4d_lin(cls, state_size: int, delta: float = 0.01, rng=None) -> "SsmLayerParams":
        """S4D-Lin initialization: ``a_n = -1/2 + i*pi*n``, ``b_n = 1``, random normal ``c``."""
        rng = np.random.default_rng(rng)
        n = np.arange(state_size)
        a = -0.5 + 1j * np.pi * n
        b = np.ones(state_size, dtype=np.complex128)
        c = (rng.standard_normal(state_size) + 1j * rng.standard_normal(state_size)) * np.sqrt(0.5)
        return cls(a, b, c, delta)


def ssm_discretize(params: SsmLayerParams) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order hold: ``a_bar = exp(delta*a)``, ``b_bar = (a_bar - 1) * b / a``."""
    a_bar = np.exp(params.delta * params.a)
    b_bar = (a_bar - 1.0) * params.b / params.a
    return a_bar, b_bar


def ssm_kernel(params: SsmLayerParams, length: int) -> np.ndarray:
    """Convolution kernel ``taps[j] = Re(sum_n c_n * a_bar_n**j * b_bar_n)``."""
    length = _check_length(length)
    a_bar, b_bar = ssm_discretize(params)
    # Vandermonde powers, (N, L)
    powers = a_bar[:, None] ** np.arange(length)[None, :]
    return np.real((params.c * b_bar) @ powers)


def ssm_recurrent(params: SsmLayerParams, x) -> np.ndarray:
    """Step-by-step ``h_t = a_bar*h_{t-1} + b_bar*x_t, y_t = Re(c . h_t)`` from ``h_{-1} = 0``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError("ssm_recurrent expects a non-empty 1-D input")
    a_bar, b_bar = ssm_discretize(params)
    h = np.zeros(params.state_size, dtype=np.complex128)
    y = np.empty(x.size)
    for t, xt in enumerate(x):
        h = a_bar * h + b_bar * xt
        y[t] = np.real(params.c @ h)
    return y
