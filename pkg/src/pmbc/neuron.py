"""Leaky integrate-and-fire neurons, evaluated strictly step by step.

These serial routines are the ground truth that the parallel solver is
checked against. The membrane update is

    u_t = tau * u_{t-1} + I_t - (reset term),   s_t = [u_t - v_th >= 0]

with ``s_0 = u_0 = R_0 = 0``. The returned membrane trace holds the
potential that is compared against the threshold at each step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedModeError

__all__ = [
    "Decomposition",
    "NeuronParams",
    "ResetMode",
    "decompose",
    "serial_lif",
    "spike_rate",
    "surrogate",
    "surrogate_grad",
]


class ResetMode(enum.Enum):
    NO_RESET = "none"
    HARD_RESET = "hard"
    SOFT_RESET = "soft"
    REFRACTORY = "refractory"

    @classmethod
    def parse(cls, value) -> "ResetMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "none": cls.NO_RESET,
            "noreset": cls.NO_RESET,
            "hard": cls.HARD_RESET,
            "hardreset": cls.HARD_RESET,
            "soft": cls.SOFT_RESET,
            "softreset": cls.SOFT_RESET,
            "refractory": cls.REFRACTORY,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown reset mode {value!r}") from None


@dataclass(frozen=True)
class NeuronParams:
    """Parameters of one LIF neuron.

    ``tau`` is the per-step membrane decay, ``tau_r`` the decay of the
    refractory pulse, ``v_th`` the firing threshold and ``u_th`` the reset
    magnitude. ``u_r`` is only used by hard reset.
    """

    tau: float = 0.1
    v_th: float = 1.0
    u_th: float = 1.0
    tau_r: float = 0.0
    reset_mode: ResetMode = ResetMode.SOFT_RESET
    u_r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "reset_mode", ResetMode.parse(self.reset_mode))
        for name in ("tau", "v_th", "u_th", "tau_r", "u_r"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if not 0.0 < self.tau < 1.0:
            raise ParameterError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 <= self.tau_r < 1.0:
            raise ParameterError(f"tau_r must lie in [0, 1), got {self.tau_r}")
        if self.v_th <= 0.0:
            raise ParameterError(f"v_th must be positive, got {self.v_th}")
        if self.u_th < 0.0:
            raise ParameterError(f"u_th must be non-negative, got {self.u_th}")

    def replace(self, **changes) -> "NeuronParams":
        fields = dict(
            tau=self.tau,
            v_th=self.v_th,
            u_th=self.u_th,
            tau_r=self.tau_r,
            reset_mode=self.reset_mode,
            u_r=self.u_r,
        )
        fields.update(changes)
        return NeuronParams(**fields)


@dataclass(frozen=True)
class Decomposition:
    """Input-driven trace ``k`` and spike-driven trace ``m`` with ``u = k - m + v_th``."""

    k: np.ndarray
    m: np.ndarray


def _as_trace(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError(f"expected a 1-D trace, got shape {x.shape}")
    if x.size == 0:
        raise DomainError("input trace is empty")
    if not np.all(np.isfinite(x)):
        raise DomainError("input trace contains non-finite values")
    return x


def spike_rate(spikes) -> float:
    """Fraction of ones in a binary spike train (or batch of trains)."""
    s = np.asarray(spikes)
    return float(s.mean()) if s.size else 0.0


def serial_lif(params: NeuronParams, current) -> tuple[np.ndarray, np.ndarray]:
    """Run the neuron one step at a time.

    Returns ``(spikes, membrane)`` where ``spikes`` is a uint8 array of 0/1.
    """
    x = _as_trace(current).tolist()
    tau, v_th, u_th = params.tau, params.v_th, params.u_th
    mode = params.reset_mode
    n = len(x)
    spikes = [0] * n
    membrane = [0.0] * n
    u = 0.0
    s = 0
    if mode is ResetMode.SOFT_RESET:
        for t in range(n):
            u = tau * u - s * u_th + x[t]
            s = 1 if u >= v_th else 0
            spikes[t] = s
            membrane[t] = u
    elif mode is ResetMode.REFRACTORY:
        tau_r = params.tau_r
        r = 0.0
        for t in range(n):
            r = tau_r * r + s
            u = tau * u + x[t] - r * u_th
            s = 1 if u >= v_th else 0
            spikes[t] = s
            membrane[t] = u
    elif mode is ResetMode.NO_RESET:
        for t in range(n):
            u = tau * u + x[t]
            spikes[t] = 1 if u >= v_th else 0
            membrane[t] = u
    else:
        u_r = params.u_r
        post = 0.0
        for t in range(n):
            u = tau * post + x[t]
            s = 1 if u >= v_th else 0
            spikes[t] = s
            membrane[t] = u
            post = u_r if s else u
    return np.array(spikes, dtype=np.uint8), np.array(membrane, dtype=np.float64)


def _reset_kernel_direct(params: NeuronParams, length: int) -> np.ndarray:
    # Term-by-term evaluation of the double sum; deliberately not the closed form.
    d = np.arange(length)
    if params.reset_mode is ResetMode.SOFT_RESET or params.tau_r == 0.0:
        return params.tau ** d.astype(np.float64)
    taps = np.empty(length)
    for lag in range(length):
        j = np.arange(lag + 1)
        taps[lag] = np.sum(params.tau**j * params.tau_r ** (lag - j))
    return taps


def decompose(params: NeuronParams, current, spikes) -> Decomposition:
    """Split the membrane potential into input and spike contributions.

    ``k_t = sum_{i<=t} tau^(t-i) I_i`` and
    ``m_t = u_th * sum_{i<t} q_{t-1-i} s_i + v_th`` where ``q`` is the
    decay kernel (soft reset) or the refractory kernel. Sums are evaluated
    directly in the time domain.
    """
    if params.reset_mode not in (ResetMode.SOFT_RESET, ResetMode.REFRACTORY):
        raise UnsupportedModeError(
            f"decomposition is only defined for soft-reset neurons, not {params.reset_mode.name}"
        )
    x = _as_trace(current)
    s = np.asarray(spikes, dtype=np.float64)
    if s.shape != x.shape:
        raise DomainError("spike train and input must have the same length")
    n = x.size
    p = params.tau ** np.arange(n, dtype=np.float64)
    k = np.convolve(x, p)[:n]
    q = _reset_kernel_direct(params, n)
    delayed = np.concatenate(([0.0], s[:-1]))
    m = params.u_th * np.convolve(delayed, q)[:n] + params.v_th
    return Decomposition(k=k, m=m)


def _check_surrogate_args(x, alpha):
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("surrogate input must be finite")
    return arr


def surrogate(x, alpha: float = 1.0):
    """Piecewise-quadratic smooth step used in place of the Heaviside function."""
    arr = _check_surrogate_args(x, alpha)
    inner = -0.5 * alpha**2 * np.abs(arr) * arr + alpha * arr + 0.5
    out = np.where(arr < -1.0 / alpha, 0.0, np.where(arr > 1.0 / alpha, 1.0, inner))
    return float(out) if out.ndim == 0 else out


def surrogate_grad(x, alpha: float = 1.0):
    """Derivative of :func:`surrogate`: a triangle of height ``alpha`` and half-width ``1/alpha``."""
    arr = _check_surrogate_args(x, alpha)
    out = np.where(np.abs(arr) > 1.0 / alpha, 0.0, alpha - alpha**2 * np.abs(arr))
    return float(out) if out.ndim == 0 else out
