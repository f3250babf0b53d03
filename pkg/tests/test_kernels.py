import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from epne.kernels import (KernelBank, KernelConfigError, ShapeError, batch_features, causal_conv,
                          custom_haar_bank, decay_kernel, feature_dim, haar_bank, temporal_features)


def brute_conv(window, f):
    h, d = window.shape
    out = np.zeros(d)
    for k in range(h):
        for c in range(d):
            out[c] += window[k, c] * f[k]
    return out


def test_haar_h4_single_kernel():
    (k,) = haar_bank(4, 1)
    assert np.allclose(k.weights, [0.5, 0.5, -0.5, -0.5])


def test_haar_h8_tiling():
    bank = haar_bank(8, 3)
    assert len(bank) == 7
    assert [(k.params["support"], k.params["shift"]) for k in bank] == [
        (8, 0), (4, 0), (4, 4), (2, 0), (2, 2), (2, 4), (2, 6)]
    for k in bank:
        s, a = k.params["support"], k.params["shift"]
        assert np.allclose(k.weights[a:a + s // 2], 1 / math.sqrt(s))
        assert np.allclose(k.weights[a + s // 2:a + s], -1 / math.sqrt(s))
        assert np.count_nonzero(k.weights) == s


def test_haar_config_errors():
    with pytest.raises(KernelConfigError):
        haar_bank(8, 4)
    with pytest.raises(KernelConfigError):
        haar_bank(1, 1)
    with pytest.raises(KernelConfigError):
        haar_bank(8, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 64), st.data())
def test_haar_zero_mean_unit_norm(h, data):
    L = data.draw(st.integers(1, int(math.log2(h))))
    for k in haar_bank(h, L):
        assert abs(k.weights.sum()) < 1e-12
        assert np.linalg.norm(k.weights) == pytest.approx(1.0)


def test_decay_kernel_values():
    assert np.allclose(decay_kernel(3, math.log(2)).weights, [0.25, 0.5, 1.0])
    assert np.allclose(decay_kernel(5, 1e-9).weights, 1.0)
    big = decay_kernel(4, 50.0).weights
    assert big[-1] == 1.0 and big[:-1].max() < 1e-20
    for bad in (0.0, -1.0):
        with pytest.raises(KernelConfigError):
            decay_kernel(3, bad)


def test_causal_conv_examples():
    dec = decay_kernel(3, math.log(2))
    assert causal_conv(np.array([4.0, 2.0, 8.0]), dec)[0] == pytest.approx(10.0)
    rng = np.random.default_rng(0)
    w = rng.normal(size=(5, 3))
    pick = np.zeros(5)
    pick[-1] = 1
    assert np.array_equal(causal_conv(w, pick), w[-1])
    const = np.tile(rng.normal(size=3), (8, 1))
    for k in haar_bank(8, 3):
        assert np.allclose(causal_conv(const, k), 0, atol=1e-15)
    with pytest.raises(ShapeError):
        causal_conv(w, np.ones(4))


def test_causal_conv_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        h, d = rng.integers(1, 17), rng.integers(1, 9)
        w, f = rng.normal(size=(h, d)), rng.normal(size=h)
        assert np.allclose(causal_conv(w, f), brute_conv(w, f), rtol=0, atol=1e-12)


def test_feature_length_and_layout():
    bank = KernelBank.build(8, 3)
    assert feature_dim(32, bank) == 256
    rng = np.random.default_rng(2)
    win = rng.normal(size=(8, 4))
    fv = temporal_features(win, bank)
    assert fv.values.shape == (32,) and not fv.degenerate
    assert np.allclose(fv.values[:4], causal_conv(win, bank.decay))
    for b, k in enumerate(bank.haar, 1):
        assert np.allclose(fv.values[4 * b:4 * b + 4], causal_conv(win, k))
    assert np.allclose(temporal_features(win, bank, "time").values, fv.values[:4])
    assert np.allclose(temporal_features(win, bank, "freq").values, fv.values[4:])


def test_constant_history_features():
    bank = KernelBank.build(8, 3, decay_rate=0.5)
    u = np.array([1.0, -2.0, 0.5])
    fv = temporal_features(np.tile(u, (8, 1)), bank).values
    assert np.all(fv[3:] == 0)
    assert np.allclose(fv[:3], bank.decay.weights.sum() * u)


def test_window_of_one_is_degenerate():
    bank = KernelBank.build(8, 3)
    u = np.array([[0.3, 0.7]])
    fv = temporal_features(u, bank)
    assert fv.degenerate
    assert np.allclose(fv.values[:2], u[0])
    assert np.all(fv.values[2:] == 0)
    assert fv.values.shape == (16,)


def test_truncated_bank_regenerated():
    bank = KernelBank.build(8, 3)
    sub = bank.truncated(4)
    assert sub.n_haar == bank.n_haar
    supports = [k.params["support"] for k in sub.haar]
    assert supports == [4, 2, 2, 1, 1, 1, 1]
    assert [k.active for k in sub.haar] == [True, True, True, False, False, False, False]
    for k in sub.haar:
        assert abs(k.weights.sum()) < 1e-15


def test_custom_scales_social_example():
    h = 168 * 2
    bank = custom_haar_bank(h, [1.0, 1 / 24, 1 / 168])
    by_level = {}
    for k in bank:
        by_level.setdefault(k.params["level"], set()).add(k.params["support"])
    assert by_level == {1: {h}, 2: {h // 24}, 3: {h // 168}}
    with pytest.raises(KernelConfigError):
        custom_haar_bank(8, [1 / 8])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-10, 10)),
       arrays(np.float64, (6, 3), elements=st.floats(-10, 10)),
       st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 6))
def test_features_linear(U, V, a, b, m):
    bank = KernelBank.build(6, 2)
    lhs = temporal_features(a * U[-m:] + b * V[-m:], bank).values
    rhs = a * temporal_features(U[-m:], bank).values + b * temporal_features(V[-m:], bank).values
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    bank = KernelBank.build(8, 3)
    for m in (1, 3, 8):
        hist = rng.normal(size=(m, 5, 4))
        S, deg = batch_features(hist, bank)
        assert deg == (m < 2)
        for v in range(5):
            assert np.allclose(S[v], temporal_features(hist[:, v], bank).values)


def test_alternating_history_peaks_at_finest_scale():
    bank = KernelBank.build(8, 3)
    x = np.array([1.0, -1.0] * 4)[:, None]
    out = np.abs([causal_conv(x, k)[0] for k in bank.kernels])
    finest = [i for i, k in enumerate(bank.haar) if k.params["level"] == 3]
    assert out[finest].min() > np.delete(out, finest).max()
