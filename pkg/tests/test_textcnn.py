import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from veracity.exceptions import DimensionError, StateError
from veracity.tensor import gradient_errors, layer_backward_check
from veracity.textcnn import (ConvFilterBank, TimeDistributed, conv_feature_map, embed_sequence, max_pool,
                              textcnn_forward, time_distributed_textcnn)


def loop_conv(W, b, seg):
    h, k = W.shape
    out = []
    for i in range(seg.shape[0] - h + 1):
        s = b
        for r in range(h):
            for col in range(k):
                s += W[r, col] * seg[i + r, col]
        out.append(max(s, 0.0))
    return np.array(out)


def test_embed_sequence():
    table = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(embed_sequence([0], table), [[1, 2]])
    assert np.array_equal(embed_sequence([1, 0], table), [[3, 4], [1, 2]])
    padded = np.vstack([np.zeros(2), table])
    assert np.array_equal(embed_sequence([1, 0, 0], padded), [[1, 2], [0, 0], [0, 0]])
    with pytest.raises(ValueError, match="outside"):
        embed_sequence([2], table)
    with pytest.raises(ValueError):
        embed_sequence([-1], table)


@pytest.mark.parametrize("b", [0.0, -1.0])
def test_zero_filter_gives_zero_map(b):
    fmap = conv_feature_map(np.zeros((2, 3)), b, np.random.default_rng(0).standard_normal((5, 3)))
    assert fmap.shape == (4,) and np.all(fmap == 0.0)


def test_hand_convolution():
    fmap = conv_feature_map(np.array([[1.0], [1.0]]), 0.0, np.array([[1.0], [2.0], [3.0]]))
    assert np.array_equal(fmap, [3.0, 5.0])
    assert max_pool(fmap) == 5.0


def test_conv_matches_loop():
    rng = np.random.default_rng(1)
    W, seg = rng.standard_normal((3, 4)), rng.standard_normal((7, 4))
    np.testing.assert_allclose(conv_feature_map(W, 0.3, seg), loop_conv(W, 0.3, seg), rtol=0, atol=1e-12)


def test_conv_errors():
    with pytest.raises(DimensionError):
        conv_feature_map(np.ones((4, 2)), 0.0, np.ones((3, 2)))
    with pytest.raises(DimensionError):
        conv_feature_map(np.ones((2, 2)), 0.0, np.ones((3, 3)))


@given(hnp.arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
def test_max_pool_matches_scan(values):
    best = values[0]
    for v in values[1:]:
        if v > best:
            best = v
    assert max_pool(values) == best


def test_max_pool_edge_cases():
    assert max_pool(np.full(4, 2.5)) == 2.5
    with pytest.raises(DimensionError):
        max_pool(np.array([]))


def test_bank_defaults_and_shapes():
    bank = ConvFilterBank(rng=0)
    assert bank.out_dim == 96
    for h in (4, 6, 8):
        assert bank.params[f"W{h}"].shape == (32, h, 50)
    assert textcnn_forward(bank, np.zeros((32, 50))).shape == (96,)
    with pytest.raises(ValueError):
        ConvFilterBank(window_sizes=())


def test_zero_bank_gives_zero_vector():
    bank = ConvFilterBank(rng=0)
    for p in bank.params.values():
        p.fill(0.0)
    out = textcnn_forward(bank, np.random.default_rng(0).standard_normal((32, 50)))
    assert out.shape == (96,) and np.all(out == 0.0)


def test_single_filter_equals_hand_composition():
    rng = np.random.default_rng(2)
    bank = ConvFilterBank(k=3, window_sizes=(2,), d=1, rng=rng)
    bank.params["b2"][0] = 0.1
    seg = rng.standard_normal((5, 3))
    expected = max_pool(loop_conv(bank.params["W2"][0], 0.1, seg))
    assert textcnn_forward(bank, seg)[0] == pytest.approx(expected, abs=1e-12)


def test_bank_output_matches_per_filter_oracle():
    rng = np.random.default_rng(3)
    bank = ConvFilterBank(k=3, window_sizes=(2, 3), d=2, rng=rng)
    seg = rng.standard_normal((6, 3))
    out = textcnn_forward(bank, seg)
    expected = [max_pool(loop_conv(bank.params[f"W{h}"][f], bank.params[f"b{h}"][f], seg))
                for h in (2, 3) for f in range(2)]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_short_segment_is_zero_padded():
    bank = ConvFilterBank(k=2, window_sizes=(2, 4), d=1, rng=0)
    seg = np.ones((3, 2))
    out = bank.forward(seg[None])
    padded = np.vstack([seg, np.zeros((1, 2))])
    np.testing.assert_allclose(out, bank.forward(padded[None]))
    bank.forward(seg[None])
    assert bank.backward(np.ones_like(out)).shape == (1, 3, 2)


def test_time_distributed_properties():
    rng = np.random.default_rng(4)
    bank = ConvFilterBank(k=3, window_sizes=(2, 3), d=2, rng=rng)
    segs = rng.standard_normal((3, 6, 3))
    rows = time_distributed_textcnn(bank, segs)
    assert rows.shape == (3, 4)
    np.testing.assert_array_equal(time_distributed_textcnn(bank, segs[:1])[0], textcnn_forward(bank, segs[0]))
    same = time_distributed_textcnn(bank, np.stack([segs[0], segs[0]]))
    np.testing.assert_array_equal(same[0], same[1])
    perm = [2, 0, 1]
    np.testing.assert_array_equal(time_distributed_textcnn(bank, segs[perm]), rows[perm])
    with pytest.raises(DimensionError):
        time_distributed_textcnn(bank, segs[0])


def test_bank_gradient_check():
    rng = np.random.default_rng(5)
    bank = ConvFilterBank(k=3, window_sizes=(2, 3), d=2, rng=rng)
    for p in bank.params.values():
        if p.ndim == 1:
            p[...] = 0.5  # keep most units active
    assert layer_backward_check(bank, rng.standard_normal((3, 6, 3))) < 1e-4


def test_time_distributed_gradient_check():
    rng = np.random.default_rng(6)
    bank = ConvFilterBank(k=3, window_sizes=(2, 3), d=2, rng=rng)
    for h in (2, 3):
        bank.params[f"b{h}"][...] = 0.5
    errors = gradient_errors(TimeDistributed(bank), rng.standard_normal((2, 2, 6, 3)))
    assert max(errors.values()) < 1e-4


def test_gradient_only_reaches_argmax_windows():
    bank = ConvFilterBank(k=1, window_sizes=(1,), d=1, rng=0)
    bank.params["W1"][...] = 1.0
    seg = np.array([[[0.5], [3.0], [1.0], [2.0]]])
    bank.forward(seg)
    dx = bank.backward(np.ones((1, 1)))
    np.testing.assert_array_equal(dx[0, :, 0], [0.0, 1.0, 0.0, 0.0])


def test_ties_route_to_first_position():
    bank = ConvFilterBank(k=1, window_sizes=(1,), d=1, rng=0)
    bank.params["W1"][...] = 1.0
    bank.forward(np.array([[[2.0], [2.0]]]))
    np.testing.assert_array_equal(bank.backward(np.ones((1, 1)))[0, :, 0], [1.0, 0.0])


def test_shared_weights_accumulate_over_steps():
    rng = np.random.default_rng(7)
    bank = ConvFilterBank(k=3, window_sizes=(2,), d=2, rng=rng)
    bank.params["b2"][...] = 0.3
    td = TimeDistributed(bank)
    segs = rng.standard_normal((1, 2, 5, 3))
    up = rng.standard_normal((1, 2, 2))
    td.forward(segs)
    td.backward(up)
    both = {k: v.copy() for k, v in bank.grads.items()}
    total = {k: np.zeros_like(v) for k, v in both.items()}
    for t in range(2):
        td.forward(segs[:, t : t + 1])
        td.backward(up[:, t : t + 1])
        for k in total:
            total[k] += bank.grads[k]
    for k in both:
        np.testing.assert_allclose(both[k], total[k], atol=1e-12)


def test_time_distributed_shares_parameters():
    bank = ConvFilterBank(k=2, window_sizes=(2,), d=1, rng=0)
    td = TimeDistributed(bank)
    assert td.params["W2"] is bank.params["W2"]


def test_bank_errors():
    bank = ConvFilterBank(k=3, window_sizes=(2,), d=1, rng=0)
    with pytest.raises(DimensionError):
        bank.forward(np.ones((1, 4, 2)))
    with pytest.raises(StateError):
        ConvFilterBank(k=3, window_sizes=(2,), d=1).backward(np.ones((1, 1)))
