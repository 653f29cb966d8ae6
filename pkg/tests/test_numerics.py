import math

import numpy as np
import pytest

from frameparse import numerics as N


def make_gru(rng, dim_in=3, hidden=4, scale=0.5):
    ps = N.ParamSet()
    N.gru_init(rng, ps, "g", dim_in, hidden)
    for k in ps.params:
        ps.params[k][...] = rng.uniform(-scale, scale, ps.params[k].shape)
    return ps


def test_gru_cell_zero_params_halves_state():
    ps = N.ParamSet()
    N.gru_init(np.random.default_rng(0), ps, "g", 3, 4)
    for k in ps.params:
        ps.params[k].fill(0.0)
    v = np.array([1.0, -2.0, 0.5, 3.0])
    h, _ = N.gru_cell(np.zeros(3), v, ps, "g")
    np.testing.assert_allclose(h, 0.5 * v, rtol=0, atol=1e-15)
    h0, _ = N.gru_cell(np.zeros(3), np.zeros(4), ps, "g")
    np.testing.assert_array_equal(h0, np.zeros(4))


def test_gru_cell_shape_error():
    ps = make_gru(np.random.default_rng(1))
    with pytest.raises(N.ShapeError):
        N.gru_cell(np.zeros(5), np.zeros(4), ps, "g")


def test_gru_cell_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    ps = make_gru(rng)
    x = rng.normal(size=3)
    h_prev = rng.normal(size=4)
    w = rng.normal(size=4)

    def f(compute):
        h, cache = N.gru_cell(x, h_prev, ps, "g")
        if compute:
            N.gru_cell_backward(w, cache, ps, "g")
        return float(w @ h)

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-6


@pytest.mark.parametrize("reverse", [False, True])
def test_gru_sequence_gradients(reverse):
    rng = np.random.default_rng(3)
    ps = make_gru(rng)
    xs = rng.normal(size=(5, 3))
    w = rng.normal(size=(5, 4))

    def f(compute):
        hs, cache = N.gru_sequence(xs, ps, "g", reverse=reverse)
        if compute:
            N.gru_sequence_backward(w, cache, ps, "g")
        return float((w * hs).sum())

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-6


def test_gru_sequence_input_gradient():
    rng = np.random.default_rng(4)
    ps = make_gru(rng)
    xs = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 4))
    hs, cache = N.gru_sequence(xs, ps, "g")
    ps.zero_grads()
    dxs = N.gru_sequence_backward(w, cache, ps, "g")
    eps = 1e-6
    for t in range(4):
        for i in range(3):
            xs2 = xs.copy()
            xs2[t, i] += eps
            hp, _ = N.gru_sequence(xs2, ps, "g")
            xs2[t, i] -= 2 * eps
            hm, _ = N.gru_sequence(xs2, ps, "g")
            fd = ((w * hp).sum() - (w * hm).sum()) / (2 * eps)
            assert abs(fd - dxs[t, i]) < 1e-6


def test_highway_limits():
    rng = np.random.default_rng(5)
    ps = N.ParamSet()
    N.highway_init(rng, ps, "h", 3)
    x = rng.normal(size=3)
    tr = rng.normal(size=3)
    ps.params["h.W"].fill(0.0)
    ps.params["h.b"].fill(-20.0)
    out, _ = N.highway_combine(x, tr, ps, "h")
    np.testing.assert_allclose(out, x, atol=1e-8)
    ps.params["h.b"].fill(20.0)
    out, _ = N.highway_combine(x, tr, ps, "h")
    np.testing.assert_allclose(out, tr, atol=1e-8)


def test_highway_gradients():
    rng = np.random.default_rng(6)
    ps = N.ParamSet()
    N.highway_init(rng, ps, "h", 4)
    ps.params["h.W"][...] = rng.uniform(-0.5, 0.5, (4, 4))
    ps.params["h.b"][...] = rng.uniform(-0.5, 0.5, 4)
    x = rng.normal(size=(3, 4))
    tr = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 4))

    def f(compute):
        out, cache = N.highway_combine(x, tr, ps, "h")
        if compute:
            N.highway_backward(w, cache, ps, "h")
        return float((w * out).sum())

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-6


def test_highway_shape_error():
    ps = N.ParamSet()
    N.highway_init(np.random.default_rng(0), ps, "h", 3)
    with pytest.raises(N.ShapeError):
        N.highway_combine(np.zeros(3), np.zeros(4), ps, "h")


def test_conv_width1_unit_filter_is_tanh_of_max():
    ps = N.ParamSet()
    N.conv_maxpool_init(np.random.default_rng(0), ps, "c", 1, (1,), 1)
    ps.params["c.w1.F"][...] = 1.0
    ps.params["c.w1.b"][...] = 0.0
    seq = np.array([[0.3], [-1.2], [0.9], [0.1]])
    out, _ = N.conv_maxpool(seq, ps, "c", (1,))
    assert out.shape == (1,)
    assert out[0] == pytest.approx(np.tanh(0.9))


def test_conv_zero_filters_zero_output():
    ps = N.ParamSet()
    N.conv_maxpool_init(np.random.default_rng(0), ps, "c", 2, (2, 3), 4)
    for k in ps.params:
        ps.params[k].fill(0.0)
    out, _ = N.conv_maxpool(np.random.default_rng(1).normal(size=(5, 2)), ps, "c", (2, 3))
    np.testing.assert_array_equal(out, np.zeros(8))


def test_conv_too_short_sequence():
    ps = N.ParamSet()
    N.conv_maxpool_init(np.random.default_rng(0), ps, "c", 2, (2, 3), 4)
    with pytest.raises(N.ShapeError):
        N.conv_maxpool(np.zeros((2, 2)), ps, "c", (2, 3))


def test_conv_gradients_away_from_ties():
    rng = np.random.default_rng(7)
    ps = N.ParamSet()
    N.conv_maxpool_init(rng, ps, "c", 3, (2, 3), 2)
    for k in ps.params:
        ps.params[k][...] = rng.uniform(-0.6, 0.6, ps.params[k].shape)
    seq = rng.normal(size=(6, 3))
    w = rng.normal(size=4)

    def f(compute):
        out, cache = N.conv_maxpool(seq, ps, "c", (2, 3))
        if compute:
            N.conv_maxpool_backward(w, cache, ps, "c", (2, 3))
        return float(w @ out)

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-6


def test_conv_input_gradient_routes_through_argmax():
    rng = np.random.default_rng(8)
    ps = N.ParamSet()
    N.conv_maxpool_init(rng, ps, "c", 2, (2,), 3)
    for k in ps.params:
        ps.params[k][...] = rng.uniform(-0.6, 0.6, ps.params[k].shape)
    seq = rng.normal(size=(5, 2))
    w = rng.normal(size=3)
    out, cache = N.conv_maxpool(seq, ps, "c", (2,))
    ps.zero_grads()
    dseq = N.conv_maxpool_backward(w, cache, ps, "c", (2,))
    eps = 1e-6
    for t in range(5):
        for i in range(2):
            s2 = seq.copy()
            s2[t, i] += eps
            op, _ = N.conv_maxpool(s2, ps, "c", (2,))
            s2[t, i] -= 2 * eps
            om, _ = N.conv_maxpool(s2, ps, "c", (2,))
            fd = (w @ op - w @ om) / (2 * eps)
            assert abs(fd - dseq[t, i]) < 1e-6


def test_softmax_xent_uniform():
    loss, grad = N.softmax_xent(np.zeros(4), 2)
    assert loss == pytest.approx(math.log(4), abs=1e-12)
    np.testing.assert_allclose(grad, [0.25, 0.25, -0.75, 0.25], atol=1e-12)


def test_softmax_xent_saturated():
    loss, _ = N.softmax_xent(np.array([30.0, -30.0]), 0)
    assert loss < 1e-12


def test_softmax_xent_grad_sums_to_zero():
    rng = np.random.default_rng(9)
    for _ in range(25):
        logits = rng.normal(scale=5.0, size=rng.integers(2, 9))
        _, grad = N.softmax_xent(logits, int(rng.integers(len(logits))))
        assert abs(grad.sum()) < 1e-12


def test_softmax_xent_target_out_of_range():
    with pytest.raises(IndexError):
        N.softmax_xent(np.zeros(3), 3)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(10)
    for _ in range(25):
        logits = rng.normal(scale=20.0, size=(rng.integers(1, 6), rng.integers(2, 9)))
        p = N.softmax(logits)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0)


def test_forward_determinism():
    rng = np.random.default_rng(11)
    ps = make_gru(rng)
    xs = rng.normal(size=(6, 3))
    a, _ = N.gru_sequence(xs, ps, "g")
    b, _ = N.gru_sequence(xs.copy(), ps, "g")
    assert np.array_equal(a, b)


def test_grad_check_quadratic():
    ps = N.ParamSet()
    theta = ps.add("theta", np.array([3.0]))

    def f(compute):
        if compute:
            ps.grads["theta"][0] += 2.0 * theta[0]
        return float(theta[0] ** 2)

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-9


def test_grad_check_sine():
    ps = N.ParamSet()
    theta = ps.add("theta", np.array([1.0]))

    def f(compute):
        if compute:
            ps.grads["theta"][0] += math.cos(theta[0])
        return math.sin(theta[0])

    assert N.grad_check(f, ps, epsilon=1e-5) < 1e-8


def test_grad_check_rejects_non_finite():
    ps = N.ParamSet()
    ps.add("theta", np.array([1.0]))

    def f(compute):
        return float("nan")

    with pytest.raises(N.NumericError):
        N.grad_check(f, ps)


def test_clip_grads():
    ps = N.ParamSet()
    ps.add("a", np.zeros(3))
    ps.grads["a"][...] = [3.0, 4.0, 0.0]
    norm = ps.clip_grads(2.5)
    assert norm == pytest.approx(5.0)
    assert ps.global_grad_norm() == pytest.approx(2.5)
    ps.grads["a"][...] = [0.3, 0.4, 0.0]
    ps.clip_grads(2.5)
    np.testing.assert_allclose(ps.grads["a"], [0.3, 0.4, 0.0])


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    tensors = {
        "emb.word": rng.normal(size=(7, 3)),
        "out.b": rng.normal(size=5),
        "scalar": np.array(3.25),
    }
    path = tmp_path / "params.bin"
    N.save_tensors(path, tensors)
    loaded = N.load_tensors(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"NOPT" + b"\x00" * 16)
    with pytest.raises(ValueError, match="container"):
        N.load_tensors(path)


def test_glorot_uniform_range():
    rng = np.random.default_rng(13)
    w = N.glorot_uniform(rng, (20, 30))
    r = math.sqrt(6.0 / 50)
    assert np.all(np.abs(w) <= r)
    assert np.abs(w).max() > 0.5 * r


def test_conv_maxpool_tie_routes_to_first_window():
    ps = N.ParamSet()
    N.conv_maxpool_init(np.random.default_rng(0), ps, "c", 1, (1,), 1)
    ps.params["c.w1.F"][...] = 1.0
    ps.params["c.w1.b"][...] = 0.0
    seq = np.array([[0.7], [0.7], [0.1]])  # tie between windows 0 and 1
    out, cache = N.conv_maxpool(seq, ps, "c", (1,))
    assert cache["per_width"][1]["best"][0] == 0
    ps.zero_grads()
    dseq = N.conv_maxpool_backward(np.array([1.0]), cache, ps, "c", (1,))
    assert dseq[0, 0] != 0.0 and dseq[1, 0] == 0.0
