import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmbc.errors import DomainError, ParameterError, UnsupportedModeError
from pmbc.neuron import (
    NeuronParams,
    ResetMode,
    decompose,
    serial_lif,
    spike_rate,
    surrogate,
    surrogate_grad,
)

SOFT = ResetMode.SOFT_RESET
REFR = ResetMode.REFRACTORY


def test_soft_reset_hand_example():
    params = NeuronParams(tau=0.5, v_th=1.0, u_th=1.0)
    s, u = serial_lif(params, [1.2, 0.8, 0.1, 1.0])
    assert s.tolist() == [1, 0, 0, 1]
    np.testing.assert_allclose(u, [1.2, 0.4, 0.3, 1.15], rtol=0, atol=1e-12)


def test_refractory_hand_example():
    params = NeuronParams(tau=0.5, tau_r=0.5, v_th=1.0, u_th=1.0, reset_mode=REFR)
    s, u = serial_lif(params, [1.2, 0.8, 0.6, 1.0])
    assert s.tolist() == [1, 0, 0, 0]
    # R = (0, 1, 0.5, 0.25)
    np.testing.assert_allclose(u, [1.2, 0.4, 0.3, 0.9], atol=1e-12)


@pytest.mark.parametrize("mode", list(ResetMode))
def test_zero_input_never_fires(mode):
    params = NeuronParams(tau=0.3, tau_r=0.4, v_th=1.0, reset_mode=mode)
    s, u = serial_lif(params, np.zeros(8))
    assert not s.any()
    assert not u.any()


def test_hard_reset_returns_to_reset_value():
    params = NeuronParams(tau=0.5, v_th=1.0, reset_mode=ResetMode.HARD_RESET, u_r=0.25)
    s, u = serial_lif(params, [1.5, 0.0, 0.0])
    assert s.tolist() == [1, 0, 0]
    np.testing.assert_allclose(u, [1.5, 0.125, 0.0625])


def test_no_reset_is_plain_leaky_integration():
    params = NeuronParams(tau=0.5, v_th=1.0, reset_mode=ResetMode.NO_RESET)
    s, u = serial_lif(params, [1.0, 1.0, 0.0])
    np.testing.assert_allclose(u, [1.0, 1.5, 0.75])
    assert s.tolist() == [1, 1, 0]


def test_fires_exactly_at_threshold():
    s, _ = serial_lif(NeuronParams(tau=0.5, v_th=1.0), [1.0])
    assert s.tolist() == [1]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(tau=0.0),
        dict(tau=1.0),
        dict(tau_r=1.0),
        dict(tau_r=-0.1),
        dict(v_th=0.0),
        dict(u_th=-1.0),
        dict(tau=math.nan),
        dict(reset_mode="sideways"),
    ],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ParameterError):
        NeuronParams(**kwargs)


def test_empty_and_nonfinite_input():
    params = NeuronParams()
    with pytest.raises(DomainError):
        serial_lif(params, [])
    with pytest.raises(DomainError):
        serial_lif(params, [0.1, np.inf])


def test_decompose_worked_example():
    params = NeuronParams(tau=0.5, v_th=1.0, u_th=1.0)
    d = decompose(params, [1.2, 0.8], [1, 0])
    np.testing.assert_allclose(d.k, [1.2, 1.4])
    np.testing.assert_allclose(d.m, [1.0, 2.0])
    assert d.k[1] - d.m[1] + params.v_th == pytest.approx(0.4)


@pytest.mark.parametrize("mode", [SOFT, REFR])
def test_decompose_first_step(mode):
    params = NeuronParams(tau=0.7, tau_r=0.3, v_th=1.3, u_th=0.8, reset_mode=mode)
    d = decompose(params, [0.9, -0.2, 2.0], [0, 1, 1])
    assert d.k[0] == 0.9
    assert d.m[0] == 1.3


def test_decompose_without_spikes_is_threshold():
    params = NeuronParams(tau=0.4, tau_r=0.6, v_th=1.7, reset_mode=REFR)
    d = decompose(params, np.ones(6), np.zeros(6))
    np.testing.assert_array_equal(d.m, np.full(6, 1.7))


@pytest.mark.parametrize("mode", [ResetMode.NO_RESET, ResetMode.HARD_RESET])
def test_decompose_rejects_other_modes(mode):
    with pytest.raises(UnsupportedModeError):
        decompose(NeuronParams(reset_mode=mode), [1.0], [1])


def _decomp_rel_error(params, current):
    s, u = serial_lif(params, current)
    d = decompose(params, current, s)
    scale = np.maximum.reduce([np.abs(u), np.abs(d.k), np.abs(d.m)])
    return np.max(np.abs(u - (d.k - d.m + params.v_th)) / scale), s, d


@pytest.mark.parametrize("mode", [SOFT, REFR])
def test_decomposition_identity_random(mode):
    rng = np.random.default_rng(11)
    for _ in range(250):
        params = NeuronParams(
            tau=rng.uniform(0.05, 0.95),
            tau_r=rng.uniform(0.0, 0.95),
            v_th=rng.uniform(0.5, 2.0),
            u_th=rng.uniform(0.0, 2.0),
            reset_mode=mode,
        )
        current = rng.standard_normal(int(rng.integers(1, 257)))
        err, s, d = _decomp_rel_error(params, current)
        assert err <= 1e-9
        # Spikes follow the sign of k - m away from ties.
        clear = np.abs(d.k - d.m) > 1e-9
        np.testing.assert_array_equal(s[clear], (d.k - d.m >= 0)[clear])


currents = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=64)


@settings(max_examples=200, deadline=None)
@given(
    current=currents,
    tau=st.floats(0.05, 0.95),
    v_th=st.floats(0.5, 2.0),
    u_th=st.floats(0.0, 2.0),
)
def test_refractory_without_decay_equals_soft_reset(current, tau, v_th, u_th):
    soft = NeuronParams(tau=tau, v_th=v_th, u_th=u_th, reset_mode=SOFT)
    refr = soft.replace(reset_mode=REFR, tau_r=0.0)
    np.testing.assert_array_equal(serial_lif(soft, current)[0], serial_lif(refr, current)[0])


@settings(max_examples=200, deadline=None)
@given(current=currents, tau=st.floats(0.05, 0.95), v_th=st.floats(0.5, 2.0))
def test_zero_reset_magnitude_equals_no_reset(current, tau, v_th):
    soft = NeuronParams(tau=tau, v_th=v_th, u_th=0.0)
    plain = soft.replace(reset_mode=ResetMode.NO_RESET)
    np.testing.assert_array_equal(serial_lif(soft, current)[0], serial_lif(plain, current)[0])


@settings(max_examples=300, deadline=None)
@given(
    current=currents,
    tau=st.floats(0.05, 0.95),
    u_th=st.floats(0.0, 2.0),
    v_th=st.floats(0.5, 2.0),
    raise_by=st.floats(0.0, 1.5),
)
def test_raising_threshold_never_raises_rate(current, tau, u_th, v_th, raise_by):
    low = NeuronParams(tau=tau, v_th=v_th, u_th=u_th)
    high = low.replace(v_th=v_th + raise_by)
    assert spike_rate(serial_lif(high, current)[0]) <= spike_rate(serial_lif(low, current)[0])


def test_surrogate_reference_points():
    assert surrogate(0.0, 1.0) == 0.5
    assert surrogate_grad(0.0, 1.0) == 1.0
    assert surrogate(2.0, 1.0) == 1.0
    assert surrogate_grad(2.0, 1.0) == 0.0
    assert surrogate(-2.0, 1.0) == 0.0
    # continuity at the kinks
    assert surrogate(1.0, 1.0) == pytest.approx(1.0)
    assert surrogate(-1.0, 1.0) == pytest.approx(0.0)


def test_surrogate_grad_matches_finite_differences():
    rng = np.random.default_rng(5)
    alpha = 1.0
    x = rng.uniform(-3, 3, 400)
    x = x[np.abs(np.abs(x) - 1.0 / alpha) > 1e-3][:100]
    h = 1e-6
    fd = (surrogate(x + h, alpha) - surrogate(x - h, alpha)) / (2 * h)
    np.testing.assert_allclose(surrogate_grad(x, alpha), fd, atol=1e-4, rtol=0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.2, 4.0))
def test_surrogate_is_monotone(a, b, alpha):
    lo, hi = sorted((a, b))
    assert surrogate(lo, alpha) <= surrogate(hi, alpha)
    assert 0.0 <= surrogate(lo, alpha) <= 1.0


def test_surrogate_domain_errors():
    with pytest.raises(DomainError):
        surrogate(np.nan)
    with pytest.raises(ParameterError):
        surrogate_grad(0.0, alpha=0.0)
