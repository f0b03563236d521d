"""Verification suites, speed benchmark, convergence study, energy and demo runs.

Each ``cmd_*`` function returns ``(exit_code, report)`` where ``report`` is a
JSON-ready dict with a flat ``rows`` table for CSV output.
"""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .block import Norm, random_block, spiking_rate_profile, standardize
from .config import Config
from .energy import LayerSpec, estimate_energy, linear_layer_ops
from .kernels import (
    KernelSpectrum,
    SsmLayerParams,
    causal_conv,
    direct_causal_conv,
    ssm_kernel,
    ssm_recurrent,
)
from .neuron import NeuronParams, ResetMode, decompose, serial_lif
from .solver import PmbcSolver, pmbc_solve

log = logging.getLogger(__name__)

__all__ = [
    "SuiteResult",
    "bound_trace",
    "cmd_bench",
    "cmd_converge",
    "cmd_demo",
    "cmd_energy",
    "cmd_verify",
    "has_near_tie",
    "random_instance",
    "random_neuron",
]

TIE_EPS = 1e-12
DECOMP_RTOL = 1e-9
FFT_ATOL = 1e-8
SSM_RTOL = 1e-6


def random_neuron(rng, mode: ResetMode) -> NeuronParams:
    """Neuron parameters drawn from the ranges used by every randomized check."""
    return NeuronParams(
        tau=rng.uniform(0.05, 0.95),
        tau_r=rng.uniform(0.0, 0.95),
        v_th=rng.uniform(0.5, 2.0),
        u_th=rng.uniform(0.0, 2.0),
        reset_mode=mode,
    )


def has_near_tie(params: NeuronParams, current, spikes, eps=TIE_EPS) -> bool:
    """True when some step sits within ``eps`` of the threshold."""
    d = decompose(params, current, spikes)
    return bool(np.any(np.abs(d.k - d.m) < eps))


def random_instance(rng, length, mode: ResetMode, eps=TIE_EPS):
    """Draw ``(params, current, spikes)`` with no near-threshold ties, resampling as needed."""
    while True:
        params = random_neuron(rng, mode)
        current = rng.standard_normal(length)
        spikes, _ = serial_lif(params, current)
        if not has_near_tie(params, current, spikes, eps):
            return params, current, spikes


def _params_dict(p: NeuronParams) -> dict:
    return dict(tau=p.tau, tau_r=p.tau_r, v_th=p.v_th, u_th=p.u_th, reset_mode=p.reset_mode.value)


def _first_mismatch(a, b):
    idx = np.flatnonzero(np.asarray(a) != np.asarray(b))
    return int(idx[0]) if idx.size else None


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list[dict] = field(default_factory=list)
    metric: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return dict(name=self.name, cases=self.cases, passed=self.passed,
                    metric=self.metric, failures=self.failures[:20])


def _case_rng(seed, suite, case):
    return np.random.default_rng([seed, suite, case])


_MODES = (ResetMode.SOFT_RESET, ResetMode.REFRACTORY)


def suite_oracle_equivalence(cases, seed, lengths=(16, 64, 256)) -> SuiteResult:
    """PMBC with an iteration budget of L reproduces the serial spike train exactly."""
    res = SuiteResult("oracle_equivalence")
    for i in range(cases):
        rng = _case_rng(seed, 1, i)
        length = int(rng.choice(lengths))
        mode = _MODES[i % 2]
        params, current, spikes = random_instance(rng, length, mode)
        out = pmbc_solve(params, current, max_iters=length)
        res.cases += 1
        if out.fuzzy_rate != 0.0 or not np.array_equal(out.spikes, spikes):
            res.failures.append(dict(seed=[seed, 1, i], length=length, params=_params_dict(params),
                                     fuzzy_rate=out.fuzzy_rate,
                                     first_mismatch=_first_mismatch(out.spikes, spikes)))
    res.metric = 1.0 - len(res.failures) / max(res.cases, 1)
    return res


def decomposition_error(params, current) -> float:
    """Largest relative gap between the serial membrane and ``k - m + v_th``.

    Each step is scaled by the largest magnitude among ``u_t``, ``k_t`` and
    ``m_t`` so cancellation near ``u_t = 0`` does not inflate the ratio.
    """
    spikes, u = serial_lif(params, current)
    d = decompose(params, current, spikes)
    scale = np.maximum.reduce([np.abs(u), np.abs(d.k), np.abs(d.m)])
    return float(np.max(np.abs(u - (d.k - d.m + params.v_th)) / scale))


def suite_decomposition(cases, seed, max_length=256) -> SuiteResult:
    res = SuiteResult("decomposition_identity")
    worst = 0.0
    for i in range(cases):
        rng = _case_rng(seed, 2, i)
        params = random_neuron(rng, _MODES[i % 2])
        current = rng.standard_normal(int(rng.integers(1, max_length + 1)))
        err = decomposition_error(params, current)
        worst = max(worst, err)
        res.cases += 1
        if not err <= DECOMP_RTOL:
            res.failures.append(dict(seed=[seed, 2, i], params=_params_dict(params), rel_error=err))
    res.metric = worst
    return res


def suite_fft(cases, seed, lengths=(16, 64, 256, 1024, 4096)) -> SuiteResult:
    res = SuiteResult("fft_convolution")
    worst = 0.0
    for i in range(cases):
        rng = _case_rng(seed, 3, i)
        length = lengths[i % len(lengths)]
        x = rng.uniform(-1, 1, length)
        k = rng.uniform(-1, 1, length)
        err = float(np.max(np.abs(causal_conv(x, k) - direct_causal_conv(x, k))))
        worst = max(worst, err)
        res.cases += 1
        if not err <= FFT_ATOL:
            res.failures.append(dict(seed=[seed, 3, i], length=length, max_abs_error=err))
    res.metric = worst
    return res


def random_ssm(rng, max_state=16) -> SsmLayerParams:
    n = int(rng.integers(1, max_state + 1))
    a = -rng.uniform(0.1, 2.0, n) + 1j * rng.uniform(-np.pi * n, np.pi * n, n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return SsmLayerParams(a, b, c, rng.uniform(0.001, 0.1))


def ssm_equivalence_error(params: SsmLayerParams, x) -> float:
    y_conv = causal_conv(x, ssm_kernel(params, len(x)))
    y_rec = ssm_recurrent(params, x)
    return float(np.max(np.abs(y_conv - y_rec)) / max(np.max(np.abs(y_rec)), 1e-300))


def suite_ssm(cases, seed, max_length=128) -> SuiteResult:
    res = SuiteResult("ssm_kernel_recurrence")
    worst = 0.0
    for i in range(cases):
        rng = _case_rng(seed, 4, i)
        params = random_ssm(rng)
        x = rng.standard_normal(int(rng.integers(1, max_length + 1)))
        err = ssm_equivalence_error(params, x)
        worst = max(worst, err)
        res.cases += 1
        if not err <= SSM_RTOL:
            res.failures.append(dict(seed=[seed, 4, i], state_size=params.state_size, rel_error=err))
    res.metric = worst
    return res


def check_bound_soundness(params, current, spikes) -> str | None:
    """Return a description of the first violated bound property, or ``None``."""
    out = pmbc_solve(params, current, max_iters=len(current), record=True)
    prev_up = np.ones_like(spikes)
    prev_low = np.zeros_like(spikes)
    prev_frac = 0.0
    for snap in out.snapshots:
        if np.any(snap.s_low > spikes) or np.any(spikes > snap.s_up):
            return f"iteration {snap.iteration}: true spikes outside bounds"
        if np.any(snap.s_low < prev_low) or np.any(snap.s_up > prev_up):
            return f"iteration {snap.iteration}: a bound loosened"
        frac = float(np.mean(snap.s_up == snap.s_low))
        if frac < prev_frac:
            return f"iteration {snap.iteration}: explicit fraction decreased"
        prev_up, prev_low, prev_frac = snap.s_up, snap.s_low, frac
    return None


def suite_bound_soundness(cases, seed, max_length=128) -> SuiteResult:
    res = SuiteResult("bound_soundness")
    for i in range(cases):
        rng = _case_rng(seed, 5, i)
        length = int(rng.integers(1, max_length + 1))
        params, current, spikes = random_instance(rng, length, _MODES[i % 2])
        problem = check_bound_soundness(params, current, spikes)
        res.cases += 1
        if problem:
            res.failures.append(dict(seed=[seed, 5, i], params=_params_dict(params), problem=problem))
    res.metric = 1.0 - len(res.failures) / max(res.cases, 1)
    return res


def _budget_probe(cfg: Config) -> dict:
    """Fuzzy rate at the configured budget on a dense-spiking input (informational only)."""
    rng = np.random.default_rng([cfg.seed, 6])
    params = cfg.neuron.params()
    if params.reset_mode not in _MODES:
        params = params.replace(reset_mode=ResetMode.SOFT_RESET)
    length = min(cfg.bench.lengths)
    current = params.v_th + rng.standard_normal((cfg.bench.channels, length))
    res = PmbcSolver(params, length).solve(current, cfg.bench.iters, cfg.bench.mode())
    return dict(iters=cfg.bench.iters, length=length, fuzzy_rate=res.fuzzy_rate,
                explicit_fraction=res.explicit_history[-1])


def cmd_verify(cfg: Config):
    n = cfg.bench.verify_cases
    suites = [
        suite_oracle_equivalence(n, cfg.seed),
        suite_decomposition(n, cfg.seed),
        suite_fft(n, cfg.seed),
        suite_ssm(n, cfg.seed),
        suite_bound_soundness(n, cfg.seed),
    ]
    ok = all(s.passed for s in suites)
    rows = [dict(suite=s.name, cases=s.cases, failures=len(s.failures), passed=s.passed,
                 metric=s.metric) for s in suites]
    report = dict(command="verify", seed=cfg.seed, passed=ok,
                  suites=[s.to_dict() for s in suites], budget_probe=_budget_probe(cfg), rows=rows)
    return (0 if ok else 1), report


def _median_time(fn, repeats, warmup):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def serial_batch(params: NeuronParams, currents) -> np.ndarray:
    """Serial neuron applied channel by channel."""
    return np.stack([serial_lif(params, row)[0] for row in currents])


def bench_length(params, length, channels, iters, mode, rng, repeats, warmup) -> dict:
    currents = rng.standard_normal((channels, length))

    def run_pmbc():
        return PmbcSolver(params, length).solve(currents, iters, mode, seed=0)

    t_serial = _median_time(lambda: serial_batch(params, currents), repeats, warmup)
    t_pmbc = _median_time(run_pmbc, repeats, warmup)
    reference = serial_batch(params, currents)
    result = run_pmbc()
    return dict(
        length=length,
        channels=channels,
        iters=iters,
        serial_s=t_serial,
        pmbc_s=t_pmbc,
        serial_its=1.0 / t_serial,
        pmbc_its=1.0 / t_pmbc,
        speedup=t_serial / t_pmbc,
        fuzzy_rate=result.fuzzy_rate,
        mismatch_rate=float(np.mean(result.spikes != reference)),
    )


def cmd_bench(cfg: Config):
    b = cfg.bench
    params = cfg.neuron.params()
    rows = []
    for length in b.lengths:
        rng = np.random.default_rng([cfg.seed, 7, int(length)])
        rows.append(bench_length(params, int(length), b.channels, b.iters, b.mode(), rng,
                                 b.repeats, b.warmup))
    return 0, dict(command="bench", seed=cfg.seed, neuron=cfg.to_dict()["neuron"], rows=rows)


def cmd_converge(cfg: Config):
    b = cfg.bench
    params = cfg.neuron.params()
    rows = []
    for length in b.lengths:
        rng = np.random.default_rng([cfg.seed, 8, int(length)])
        currents = rng.standard_normal((b.channels, int(length)))
        res = PmbcSolver(params, int(length)).solve(currents, b.iters, b.mode())
        hist = res.explicit_history
        for budget in range(1, b.iters + 1):
            frac = hist[min(budget, len(hist) - 1)]
            rows.append(dict(length=int(length), budget=budget, explicit_fraction=frac,
                             fuzzy_rate=1.0 - frac))
    return 0, dict(command="converge", seed=cfg.seed, rows=rows)


def cmd_energy(layers, model) -> tuple[int, dict]:
    report = estimate_energy(layers, model)
    rows = [dict(layer=r.layer, spiking_rate=r.spiking_rate, mac_ops=r.mac_ops, ac_ops=r.ac_ops,
                 energy_mac=r.energy_mac, energy_ac=r.energy_ac) for r in report.layers]
    out = report.to_dict()
    out.pop("layers")
    return 0, dict(command="energy", model=dict(e_mac=model.e_mac, e_ac=model.e_ac), totals=out,
                   rows=rows)


def build_blocks(cfg: Config, rng):
    s = cfg.ssm
    return [
        random_block(s.channels, s.state_size, cfg.neuron.params(), rng,
                     delta=(s.delta_min, s.delta_max), norm=Norm(s.norm))
        for _ in range(s.layers)
    ]


def bound_trace(params: NeuronParams, current, iters) -> tuple[list[dict], bool]:
    """Per-iteration ``k``, ``m_up``, ``m_low`` for one neuron, plus a monotonicity flag."""
    res = pmbc_solve(params, current, max_iters=iters, record=True)
    rows = []
    monotone = True
    prev = None
    for snap in res.snapshots:
        if prev is not None:
            tol = 1e-9 * (1.0 + np.abs(prev.m_up))
            monotone &= bool(np.all(snap.m_up <= prev.m_up + tol))
            monotone &= bool(np.all(snap.m_low >= prev.m_low - tol))
        for t in range(len(current)):
            rows.append(dict(iteration=snap.iteration, t=t + 1, k=float(res.k[t]),
                             m_up=float(snap.m_up[t]), m_low=float(snap.m_low[t]),
                             s_up=int(snap.s_up[t]), s_low=int(snap.s_low[t])))
        prev = snap
    return rows, monotone


def cmd_demo(cfg: Config, *, zero_input=False, export_trace=False):
    s = cfg.ssm
    rng = np.random.default_rng([cfg.seed, 9])
    blocks = build_blocks(cfg, rng)
    x = np.zeros((s.channels, s.length)) if zero_input else s.input_scale * rng.standard_normal(
        (s.channels, s.length))
    stats = spiking_rate_profile(blocks, x, cfg.bench.iters, cfg.bench.mode(), seed=cfg.seed)
    layer_specs = []
    rows = []
    for i, (blk, st) in enumerate(zip(blocks, stats)):
        dense = linear_layer_ops(s.length, blk.channels, 2 * blk.out_channels)
        layer_specs.append(LayerSpec(dense, st.spiking_rate))
        rows.append(dict(layer=i, spiking_rate=st.spiking_rate, fuzzy_rate=st.fuzzy_rate,
                         ssm_s=st.timing["ssm"], neuron_s=st.timing["neuron"], mix_s=st.timing["mix"]))
    energy = estimate_energy(layer_specs, cfg.energy.model()).to_dict()
    energy.pop("layers")
    report = dict(command="demo", seed=cfg.seed, rows=rows, energy=energy,
                  mean_spiking_rate=float(np.mean([r["spiking_rate"] for r in rows])))
    if export_trace:
        blk = blocks[0]
        ch = min(cfg.bench.export_channel, blk.channels - 1)
        h = standardize(x, blk.norm)
        y = KernelSpectrum.from_kernel(ssm_kernel(blk.ssm[ch], s.length)).apply(h[ch])
        params = blk.neuron_for(ch)
        if params.reset_mode not in _MODES:
            params = params.replace(reset_mode=ResetMode.SOFT_RESET)
        trace_rows, monotone = bound_trace(params, y, max(cfg.bench.iters, 1))
        report["bound_trace"] = dict(channel=ch, monotone=monotone, rows=trace_rows)
    return 0, report

