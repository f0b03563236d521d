"""Parallel max-min boundary compression (PMBC).

The membrane potential of a soft-reset neuron splits into an input-driven
trace ``k`` (computable in one convolution) and a spike-driven trace ``m``
that depends only on earlier spikes. PMBC keeps an upper and a lower bound on
the spike train, turns each into a bound on ``m`` with one convolution, and
tightens:

    k_t > m_up[t]   ->  s_low[t] = 1
    k_t < m_low[t]  ->  s_up[t]  = 0

Every comparison in an iteration is independent, so a whole sequence (and a
whole batch of channels) is processed with a handful of FFTs per iteration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, ParameterError, ShapeError, UnsupportedModeError
from .kernels import exp_kernel, kernel_transform, refractory_kernel
from .neuron import NeuronParams, ResetMode

__all__ = [
    "BoundSnapshot",
    "BoundState",
    "FireMode",
    "PmbcResult",
    "PmbcSolver",
    "explicit_fraction",
    "pmbc_solve",
    "pmbc_solve_batch",
    "reset_kernel",
    "resolve_fuzzy",
]

DEFAULT_MAX_ITERS = 3

# Channels per FFT call; keeps the transform working set near the L2 cache.
_CHUNK_ELEMENTS = 1 << 18


class FireMode(enum.Enum):
    """How positions still fuzzy after the iteration budget are settled."""

    ALL_ONE = "allone"
    ALL_ZERO = "allzero"
    MEAN_RATE = "meanrate"
    MIDPOINT = "midpoint"

    @classmethod
    def parse(cls, value) -> "FireMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ParameterError(f"unknown fire mode {value!r}")


DEFAULT_FIRE_MODE = FireMode.ALL_ZERO


@dataclass
class BoundState:
    """Upper and lower bounds on a spike train (time on the last axis)."""

    s_up: np.ndarray
    s_low: np.ndarray
    iterations_run: int = 0

    @classmethod
    def initial(cls, shape) -> "BoundState":
        return cls(np.ones(shape, dtype=np.uint8), np.zeros(shape, dtype=np.uint8), 0)

    @property
    def fuzzy(self) -> np.ndarray:
        return self.s_up != self.s_low

    def check(self):
        if self.s_up.shape != self.s_low.shape:
            raise InvariantError("upper and lower bounds have different shapes")
        if np.any(self.s_low > self.s_up):
            raise InvariantError("lower spike bound exceeds upper bound")


@dataclass
class BoundSnapshot:
    """State after one iteration: the bounds and the ``m`` traces that produced them."""

    iteration: int
    s_up: np.ndarray
    s_low: np.ndarray
    m_up: np.ndarray
    m_low: np.ndarray


@dataclass
class PmbcResult:
    spikes: np.ndarray
    bounds: BoundState
    fuzzy_rate: float
    # Entry 0 is the all-fuzzy starting state.
    explicit_history: list[float]
    k: np.ndarray = field(repr=False)
    m_up: np.ndarray = field(repr=False)
    m_low: np.ndarray = field(repr=False)
    iterations: np.ndarray | int = 0
    snapshots: list[BoundSnapshot] = field(default_factory=list, repr=False)

    @property
    def rate(self) -> float:
        return float(self.spikes.mean())


def explicit_fraction(bounds: BoundState) -> float:
    """Fraction of time steps whose spike value is already pinned by the bounds."""
    fuzzy = bounds.fuzzy
    return float(1.0 - fuzzy.mean()) if fuzzy.size else 1.0


def reset_kernel(params: NeuronParams, length: int) -> np.ndarray:
    """Kernel mapping past spikes to the reset part of ``m``."""
    if params.reset_mode is ResetMode.SOFT_RESET:
        return exp_kernel(params.tau, length)
    if params.reset_mode is ResetMode.REFRACTORY:
        return refractory_kernel(params.tau, params.tau_r, length)
    raise UnsupportedModeError(
        f"PMBC requires a soft-reset or refractory neuron, got {params.reset_mode.name}"
    )


def resolve_fuzzy(bounds: BoundState, k, m_up, m_low, mode, rng=None) -> np.ndarray:
    """Settle fuzzy positions according to ``mode``; definite positions are kept."""
    bounds.check()
    mode = FireMode.parse(mode)
    fuzzy = bounds.fuzzy
    out = bounds.s_low.copy()
    if not fuzzy.any():
        return out
    if mode is FireMode.ALL_ONE:
        out[fuzzy] = 1
    elif mode is FireMode.ALL_ZERO:
        pass
    elif mode is FireMode.MIDPOINT:
        k = np.asarray(k)
        mid = 0.5 * (np.asarray(m_up) + np.asarray(m_low))
        out[fuzzy] = (k > mid)[fuzzy]
    else:
        rng = np.random.default_rng(rng)
        definite = ~fuzzy
        n_def = definite.sum(axis=-1, keepdims=True)
        fired = (bounds.s_low * definite).sum(axis=-1, keepdims=True)
        p = np.divide(fired, n_def, out=np.zeros(n_def.shape), where=n_def > 0)
        draws = rng.random(fuzzy.shape) < p
        out[fuzzy] = draws[fuzzy]
    return out


class PmbcSolver:
    """Reusable solver for one neuron configuration and one sequence length.

    The kernel spectrum is computed once at construction and shared by every
    call, so a solver can serve many batches (and threads) read-only.
    """

    def __init__(self, params: NeuronParams, length: int):
        self.params = params
        self.length = int(length)
        if self.length < 1:
            raise ParameterError("length must be >= 1")
        self.input_spectrum = kernel_transform(exp_kernel(params.tau, self.length))
        reset = reset_kernel(params, self.length)
        if params.reset_mode is ResetMode.SOFT_RESET:
            self.reset_spectrum = self.input_spectrum
        else:
            self.reset_spectrum = kernel_transform(reset)
        # m_up when every earlier step spiked: closed form used for iteration 1.
        first = np.zeros(self.length)
        first[1:] = np.cumsum(reset)[:-1]
        self._m_up_initial = params.u_th * first + params.v_th

    def _chunk(self) -> int:
        return max(1, _CHUNK_ELEMENTS // (2 * self.length))

    def _m_pair(self, s_up, s_low):
        # One stacked transform for both bounds.
        c = s_up.shape[0]
        stacked = np.concatenate((s_up, s_low)).astype(np.float64)
        conv = self.reset_spectrum.apply(stacked)
        m = np.empty_like(conv)
        m[:, 0] = 0.0
        m[:, 1:] = conv[:, :-1]
        m *= self.params.u_th
        m += self.params.v_th
        return m[:c], m[c:]

    def _solve_rows(self, k, max_iters, record):
        c, n = k.shape
        v_th = self.params.v_th
        s_up = np.ones((c, n), dtype=bool)
        s_low = np.zeros((c, n), dtype=bool)
        m_up = np.broadcast_to(self._m_up_initial, (c, n)).copy()
        m_low = np.full((c, n), v_th)
        iters = np.zeros(c, dtype=np.int64)
        history = [np.zeros(c)]
        snapshots = []
        active = np.arange(c)
        for it in range(1, max_iters + 1):
            if active.size == 0:
                break
            if it > 1:
                mu, ml = self._m_pair(s_up[active], s_low[active])
                m_up[active] = mu
                m_low[active] = ml
            ka = k[active]
            new_low = s_low[active] | (ka > m_up[active])
            new_up = s_up[active] & ~(ka < m_low[active])
            changed = (new_low != s_low[active]).any(axis=1) | (new_up != s_up[active]).any(axis=1)
            s_low[active] = new_low
            s_up[active] = new_up
            iters[active] = it
            history.append(1.0 - (s_up != s_low).mean(axis=1))
            if record:
                snapshots.append(
                    BoundSnapshot(
                        it,
                        s_up.astype(np.uint8),
                        s_low.astype(np.uint8),
                        m_up.copy(),
                        m_low.copy(),
                    )
                )
            # Fully resolved channels cannot change again.
            open_ = (new_up != new_low).any(axis=1)
            active = active[changed & open_]
        return s_up, s_low, m_up, m_low, iters, history, snapshots

    def solve(self, currents, max_iters=DEFAULT_MAX_ITERS, mode=DEFAULT_FIRE_MODE, *,
              seed=None, record=False) -> PmbcResult:
        """Solve a batch of channels (time on the last axis)."""
        if int(max_iters) != max_iters or max_iters < 1:
            raise ParameterError(f"max_iters must be a positive integer, got {max_iters!r}")
        mode = FireMode.parse(mode)
        x = np.asarray(currents, dtype=np.float64)
        squeeze = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.ndim != 2 or x2.shape[-1] != self.length:
            raise ShapeError(f"expected (channels, {self.length}) input, got {x.shape}")
        if not np.all(np.isfinite(x2)):
            raise ParameterError("input current contains non-finite values")
        k = self.input_spectrum.apply(x2)

        chunk = self._chunk()
        parts = [
            self._solve_rows(k[i : i + chunk], int(max_iters), record)
            for i in range(0, x2.shape[0], chunk)
        ]
        s_up = np.concatenate([p[0] for p in parts])
        s_low = np.concatenate([p[1] for p in parts])
        m_up = np.concatenate([p[2] for p in parts])
        m_low = np.concatenate([p[3] for p in parts])
        iters = np.concatenate([p[4] for p in parts])
        depth = max(len(p[5]) for p in parts)
        # Converged channels keep their final fraction for later iterations.
        history = []
        for j in range(depth):
            per = [p[5][min(j, len(p[5]) - 1)] for p in parts]
            history.append(float(np.concatenate(per).mean()))
        snapshots = []
        if record:
            for j in range(depth - 1):
                snaps = [p[6][min(j, len(p[6]) - 1)] for p in parts]
                snapshots.append(
                    BoundSnapshot(
                        j + 1,
                        *(np.concatenate([getattr(s, f) for s in snaps])
                          for f in ("s_up", "s_low", "m_up", "m_low")),
                    )
                )

        bounds = BoundState(s_up.astype(np.uint8), s_low.astype(np.uint8), int(iters.max()))
        fuzzy_rate = float(bounds.fuzzy.mean())
        spikes = resolve_fuzzy(bounds, k, m_up, m_low, mode, rng=seed)
        if squeeze:
            bounds = BoundState(bounds.s_up[0], bounds.s_low[0], bounds.iterations_run)
            spikes, k, m_up, m_low = spikes[0], k[0], m_up[0], m_low[0]
            iters = int(iters[0])
            for snap in snapshots:
                snap.s_up, snap.s_low = snap.s_up[0], snap.s_low[0]
                snap.m_up, snap.m_low = snap.m_up[0], snap.m_low[0]
        return PmbcResult(spikes, bounds, fuzzy_rate, history, k, m_up, m_low, iters, snapshots)


def pmbc_solve(params: NeuronParams, current, max_iters=DEFAULT_MAX_ITERS,
               mode=DEFAULT_FIRE_MODE, *, seed=None, record=False) -> PmbcResult:
    """Resolve the spike train of a single input trace with PMBC.

    Stops early once an iteration changes no bound element. Positions still
    fuzzy after ``max_iters`` iterations are filled according to ``mode``.
    """
    x = np.asarray(current, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError("pmbc_solve expects a non-empty 1-D input; use pmbc_solve_batch")
    return PmbcSolver(params, x.size).solve(x, max_iters, mode, seed=seed, record=record)


def pmbc_solve_batch(params: NeuronParams, currents, max_iters=DEFAULT_MAX_ITERS,
                     mode=DEFAULT_FIRE_MODE, *, seed=None, record=False) -> PmbcResult:
    """Resolve ``(channels, L)`` inputs that share neuron parameters."""
    x = np.asarray(currents, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ShapeError(f"expected a (channels, L) array, got shape {x.shape}")
    return PmbcSolver(params, x.shape[1]).solve(x, max_iters, mode, seed=seed, record=record)
