import logging

import numpy as np
import pytest

from pmbc.block import (
    BlockParams,
    Norm,
    block_forward,
    glu,
    random_block,
    spiking_rate_profile,
    standardize,
)
from pmbc.errors import ShapeError
from pmbc.harness import has_near_tie, random_neuron
from pmbc.kernels import KernelSpectrum, SsmLayerParams, ssm_kernel
from pmbc.neuron import NeuronParams, ResetMode, serial_lif

REFR = ResetMode.REFRACTORY


def _scalar_block(neuron, mix=None):
    ssm = [SsmLayerParams([-1.0], [1.0], [1.0], np.log(2.0))]
    w = np.array([[1.0], [0.0]]) if mix is None else mix
    return BlockParams(ssm, neuron, w, np.zeros(2), residual=False)


def test_zero_input_gives_zero_everything():
    block = random_block(4, 4, NeuronParams(tau=0.5, v_th=1.0, tau_r=0.5, reset_mode=REFR), rng=0)
    out = block_forward(block, np.zeros((4, 32)))
    assert not out.spikes.any()
    assert not out.output.any()
    assert out.stats.spiking_rate == 0.0


def test_scalar_block_example():
    neuron = NeuronParams(tau=0.5, v_th=0.9, u_th=1.0)
    block = _scalar_block(neuron)
    x = np.array([[2.0, 0.0, 0.0, 0.0]])
    y = KernelSpectrum.from_kernel(ssm_kernel(block.ssm[0], 4)).apply(x[0])
    np.testing.assert_allclose(y, [1.0, 0.5, 0.25, 0.125], atol=1e-12)
    s, u = serial_lif(neuron, y)
    assert s.tolist() == [1, 0, 0, 0]
    np.testing.assert_allclose(u, [1.0, 0.0, 0.25, 0.25], atol=1e-12)
    out = block_forward(block, x)
    assert out.spikes.tolist() == [[1, 0, 0, 0]]
    # identity value half, zero gate input: spikes * sigmoid(0)
    np.testing.assert_allclose(out.output, [[0.5, 0, 0, 0]])


def test_glu_with_identity_weights():
    spikes = np.array([[1, 0, 1, 1], [0, 1, 1, 0]], dtype=np.float64)
    w = np.vstack([np.eye(2), np.eye(2)])
    out = glu(w @ spikes)
    np.testing.assert_allclose(out, spikes / (1 + np.exp(-spikes)))


def test_glu_rejects_odd_rows():
    with pytest.raises(ShapeError):
        glu(np.ones((3, 2)))


def test_standardize():
    x = np.array([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]])
    np.testing.assert_array_equal(standardize(x, Norm.NONE), x)
    b = standardize(x, Norm.BATCH)
    np.testing.assert_allclose(b.mean(axis=1), 0, atol=1e-12)
    layer = standardize(x, Norm.LAYER)
    np.testing.assert_allclose(layer.mean(axis=0), 0, atol=1e-12)


def test_shape_errors():
    block = random_block(3, 2, NeuronParams(), rng=1)
    with pytest.raises(ShapeError):
        block_forward(block, np.zeros((2, 8)))
    with pytest.raises(ShapeError):
        BlockParams(block.ssm, block.neuron, np.ones((6, 2)), np.zeros(6))
    with pytest.raises(ShapeError):
        BlockParams(block.ssm, block.neuron, np.ones((5, 3)), np.zeros(5))
    with pytest.raises(ShapeError):
        BlockParams(block.ssm, [NeuronParams()], np.ones((6, 3)), np.zeros(6))


def _tie_free_block(rng):
    while True:
        d = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        length = int(rng.integers(1, 257))
        per_channel = rng.random() < 0.5
        mode = REFR if rng.random() < 0.5 else ResetMode.SOFT_RESET
        neuron = [random_neuron(rng, mode) for _ in range(d)] if per_channel else random_neuron(rng, mode)
        block = random_block(d, n, neuron, rng, delta=(0.01, 0.5))
        x = 3.0 * rng.standard_normal((d, length))
        ys = [KernelSpectrum.from_kernel(ssm_kernel(p, length)).apply(x[c]) for c, p in enumerate(block.ssm)]
        if not any(has_near_tie(block.neuron_for(c), y, serial_lif(block.neuron_for(c), y)[0])
                   for c, y in enumerate(ys)):
            return block, x


def test_pmbc_backend_matches_serial_backend():
    rng = np.random.default_rng(31)
    total_spikes = 0
    for _ in range(100):
        block, x = _tie_free_block(rng)
        fast = block_forward(block, x, pmbc_iters=x.shape[1])
        slow = block_forward(block, x, backend="serial")
        np.testing.assert_array_equal(fast.spikes, slow.spikes)
        np.testing.assert_array_equal(fast.output, slow.output)
        assert fast.stats.fuzzy_rate == 0.0
        total_spikes += int(fast.spikes.sum())
    assert total_spikes > 0


def test_binary_interface_and_rate_bounds():
    rng = np.random.default_rng(32)
    neuron = NeuronParams(tau=0.2, tau_r=0.7, v_th=0.5, reset_mode=REFR)
    blocks = [random_block(6, 4, neuron, rng, norm=Norm.LAYER) for _ in range(3)]
    x = rng.standard_normal((6, 128))
    h = x
    for blk in blocks:
        out = block_forward(blk, h, 2, "midpoint")
        assert out.spikes.dtype == np.uint8
        assert set(np.unique(out.spikes)) <= {0, 1}
        assert 0.0 <= out.stats.spiking_rate <= 1.0
        assert np.all((out.stats.channel_rates >= 0) & (out.stats.channel_rates <= 1))
        assert set(out.stats.timing) == {"ssm", "neuron", "mix"}
        h = out.output


def test_profile_is_compositional():
    rng = np.random.default_rng(33)
    neuron = NeuronParams(tau=0.3, tau_r=0.5, v_th=0.8, reset_mode=REFR)
    blocks = [random_block(5, 4, neuron, rng) for _ in range(2)]
    x = rng.standard_normal((5, 200))
    profile = spiking_rate_profile(blocks, x, 3)
    first = block_forward(blocks[0], x, 3)
    second = block_forward(blocks[1], first.output, 3)
    assert [s.spiking_rate for s in profile] == [first.stats.spiking_rate, second.stats.spiking_rate]
    assert all(0.0 <= s.spiking_rate <= 1.0 for s in profile)
    with pytest.raises(ShapeError):
        spiking_rate_profile([], x)


def test_single_block_zero_input_profile():
    block = random_block(3, 3, NeuronParams(), rng=4)
    assert spiking_rate_profile([block], np.zeros((3, 16)))[0].spiking_rate == 0.0


def test_forward_is_deterministic():
    rng = np.random.default_rng(34)
    block = random_block(4, 4, NeuronParams(tau=0.9, v_th=0.5), rng)
    x = rng.standard_normal((4, 256))
    a = block_forward(block, x, 1, "meanrate", seed=9)
    b = block_forward(block, x, 1, "meanrate", seed=9)
    np.testing.assert_array_equal(a.spikes, b.spikes)
    np.testing.assert_array_equal(a.output, b.output)


def test_residual_added_or_dropped(caplog):
    rng = np.random.default_rng(35)
    neuron = NeuronParams(tau=0.5, v_th=1.0)
    same = random_block(3, 2, neuron, rng)
    x = rng.standard_normal((3, 16))
    with_res = block_forward(same, x)
    same.residual = False
    without = block_forward(same, x)
    np.testing.assert_allclose(with_res.output - without.output, x)
    wider = random_block(3, 2, neuron, rng, out_channels=5)
    with caplog.at_level(logging.WARNING):
        out = block_forward(wider, x)
    assert out.output.shape == (5, 16)
    assert "residual dropped" in caplog.text
