import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dynlf.gradcheck import check_function, check_op, op_checks
from dynlf.nn import (AdamState, NonFiniteError, StepSchedule, Tape, Tensor, adam_step,
                      load_checkpoint, ops, save_checkpoint, set_debug)
from dynlf.nn.layers import init_mlp, init_resnet, mlp, residual_block, resnet


def param(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


# --- forward examples ---------------------------------------------------------

def test_affine_identity_and_hand_sum(rng):
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(ops.affine(x, np.eye(3), np.zeros(3)).data, x)
    y = ops.affine(np.array([[1.0, 2.0]]), np.array([[1.0], [1.0]]), np.array([3.0]))
    np.testing.assert_array_equal(y.data, [[6.0]])


def test_affine_shape_errors(rng):
    with pytest.raises(ValueError):
        ops.affine(rng.normal(size=(4, 3)), rng.normal(size=(2, 5)), np.zeros(5))
    with pytest.raises(ValueError):
        ops.affine(rng.normal(size=(4, 3)), rng.normal(size=(3, 5)), np.zeros(4))


def test_conv_delta_kernel_is_identity(rng):
    x = rng.normal(size=(1, 6, 7))
    k = np.zeros((1, 1, 3, 3))
    k[0, 0, 1, 1] = 1
    np.testing.assert_array_equal(ops.conv3x3(x, k, np.zeros(1)).data, x)


def test_conv_ones_kernel_zero_padding():
    c = 0.7
    out = ops.conv3x3(np.full((1, 5, 6), c), np.ones((1, 1, 3, 3)), np.zeros(1)).data[0]
    assert out[2, 2] == pytest.approx(9 * c)
    for y, x in [(0, 0), (0, 5), (4, 0), (4, 5)]:
        assert out[y, x] == pytest.approx(4 * c)
    assert out[0, 2] == pytest.approx(6 * c)


def test_conv_matches_direct_loop(rng):
    x = rng.normal(size=(2, 4, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    out = ops.conv3x3(x, k, b).data
    p = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    for o in range(3):
        for y in range(4):
            for xx in range(5):
                ref = b[o] + (k[o] * p[:, y:y + 3, xx:xx + 3]).sum()
                assert out[o, y, xx] == pytest.approx(ref, abs=1e-12)


def test_conv_shape_errors(rng):
    with pytest.raises(ValueError):
        ops.conv3x3(rng.normal(size=(2, 4, 4)), rng.normal(size=(3, 3, 3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        ops.conv3x3(rng.normal(size=(4, 4)), rng.normal(size=(3, 1, 3, 3)), np.zeros(3))


def test_residual_block_zero_weights_and_shape(rng):
    p = init_resnet(rng, "r", 2, 4, 2, 1)
    for k in ("r.block0.conv1.w", "r.block0.conv1.b"):
        p[k].data[...] = 0
    x = Tensor(rng.normal(size=(4, 5, 5)))
    np.testing.assert_array_equal(residual_block(x, p, "r.block0").data, x.data)
    p = init_resnet(rng, "r", 2, 4, 2, 1)
    p["r.block0.conv2.w"].data[...] = rng.normal(size=(4, 4, 3, 3))
    assert residual_block(x, p, "r.block0").shape == x.shape


def test_softmax_examples(rng):
    np.testing.assert_allclose(ops.softmax(np.zeros((1, 5)), 1).data, 0.2, atol=1e-15)
    out = ops.softmax(np.array([1000.0, 0.0]), 0).data
    assert np.all(np.isfinite(out)) and out[0] == pytest.approx(1) and out[1] < 1e-300
    v = rng.normal(size=7) * 3
    got = ops.softmax(v, 0).data
    mpmath.mp.dps = 40
    e = [mpmath.exp(mpmath.mpf(float(a))) for a in v]
    ref = [float(a / mpmath.fsum(e)) for a in e]
    np.testing.assert_allclose(got, ref, atol=1e-12, rtol=0)


@given(arrays(np.float64, (3, 6), elements=st.floats(-30, 30)), st.floats(-50, 50))
@settings(max_examples=50)
def test_softmax_sums_to_one_and_shift_invariant(x, c):
    y = ops.softmax(x, 1).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(ops.softmax(x + c, 1).data, y, atol=1e-12)


def test_leaky_relu_concat_l1(rng):
    np.testing.assert_allclose(ops.leaky_relu(np.array([-1.0, 2.0])).data, [-0.1, 2.0])
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 5))
    c = ops.concat([a, b], axis=1).data
    assert c.shape == (2, 8)
    np.testing.assert_array_equal(c, np.hstack([a, b]))
    with pytest.raises(ValueError):
        ops.concat([a, rng.normal(size=(3, 5))], axis=1)
    assert ops.l1_mean(a, a).data == 0.0
    with pytest.raises(ValueError):
        ops.l1_mean(a, b)


# --- backward -----------------------------------------------------------------

def test_backward_sum_and_square(rng):
    x = param(rng.normal(size=(3, 4)))
    with Tape() as tape:
        loss = ops.sum(x)
    np.testing.assert_array_equal(tape.backward(loss)[x], np.ones((3, 4)))
    with Tape() as tape:
        loss = ops.mul(ops.sum(ops.mul(x, x)), 0.5)
    np.testing.assert_allclose(tape.backward(loss)[x], x.data, atol=1e-15)
    assert x.grad is not None


def test_backward_needs_scalar(rng):
    x = param(rng.normal(size=3))
    with Tape() as tape:
        y = ops.mul(x, 2.0)
    with pytest.raises(ValueError):
        tape.backward(y)


def test_no_recording_without_tape_or_grad(rng):
    x = param(rng.normal(size=3))
    y = ops.mul(x, 2.0)
    assert not y.requires_grad
    with Tape() as tape:
        ops.mul(Tensor(np.ones(3)), 2.0)
    assert len(tape) == 0


def test_shared_input_accumulates(rng):
    x = param(rng.normal(size=4))
    with Tape() as tape:
        loss = ops.sum(ops.add(ops.mul(x, 3.0), ops.mul(x, x)))
    np.testing.assert_allclose(tape.backward(loss)[x], 3.0 + 2 * x.data, atol=1e-14)


def test_debug_mode_traps_non_finite():
    set_debug(True)
    try:
        x = param(np.array([1.0, 0.0]))
        with Tape(), pytest.raises(NonFiniteError):
            with np.errstate(divide="ignore"):
                ops.mul(x, np.array([np.inf, 1.0]))
    finally:
        set_debug(False)


def test_every_registered_op_passes_gradcheck():
    results = op_checks(0)
    bad = [(r.name, r.max_rel_err) for r in results if not r.passed]
    assert not bad
    names = {r.name.split(" ")[0] for r in results}
    for op in ("affine", "conv3x3", "softmax", "leaky_relu", "concat", "l1_mean",
               "take_rows", "residual_block"):
        assert op in names


@pytest.mark.parametrize("seed", range(3))
def test_affine_random_gradcheck(seed):
    rng = np.random.default_rng(seed)
    r = check_op("affine", ops.affine, [rng.normal(size=(4, 8)), rng.normal(size=(8, 3)),
                                        rng.normal(size=3)], seed=seed)
    assert r.passed, r


def test_mlp_gradients(rng):
    p = init_mlp(rng, "m", (4, 6, 1))
    x = Tensor(rng.normal(size=(5, 4)))
    r = check_function("mlp", lambda: ops.sum(mlp(p, "m", x, 2)), list(p.values()))
    assert r.passed, r


def test_resnet_gradients(rng):
    p = init_resnet(rng, "r", 2, 3, 2, 2)
    for t in p.values():
        if not t.data.any():
            t.data[...] = 0.2 * rng.normal(size=t.shape)
    x = Tensor(rng.normal(size=(2, 4, 4)))
    w = rng.normal(size=(2, 4, 4))
    r = check_function("resnet", lambda: ops.sum(ops.mul(resnet(p, "r", x, 2), w)),
                       list(p.values()), max_entries=6)
    assert r.passed, r


# --- Adam -----------------------------------------------------------------------

def test_adam_zero_grad_is_identity(rng):
    p = {"a": param(rng.normal(size=(3, 2)))}
    before = p["a"].data.copy()
    st_ = AdamState()
    for _ in range(3):
        adam_step(p, {"a": np.zeros((3, 2))}, st_)
        adam_step(p, {}, st_)
    np.testing.assert_array_equal(p["a"].data, before)


def test_adam_first_step_closed_form():
    p = {"w": param(np.array(0.0))}
    adam_step(p, {"w": np.array(1.0)}, AdamState())
    # m_hat = 1, v_hat = 1 after bias correction
    m_hat = (Fraction(1, 10) * 1) / (1 - Fraction(9, 10))
    v_hat = (Fraction(1, 1000) * 1) / (1 - Fraction(999, 1000))
    expected = -1e-4 * float(m_hat) / (math.sqrt(float(v_hat)) + 1e-8)
    assert float(p["w"].data) == pytest.approx(expected, abs=1e-18)
    assert float(p["w"].data) == pytest.approx(-9.99999990e-5, rel=1e-8)


def test_adam_matches_reference_loop():
    p = {"w": param(np.array(1.0))}
    st_ = AdamState(schedule=StepSchedule(1e-2, 1e-2))
    w, m, v = 1.0, 0.0, 0.0
    for t in range(1, 11):
        g = 2 * float(p["w"].data)
        adam_step(p, {"w": np.array(g)}, st_)
        gr = 2 * w
        m = 0.9 * m + 0.1 * gr
        v = 0.999 * v + 0.001 * gr * gr
        w -= 1e-2 * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert float(p["w"].data) == pytest.approx(w, abs=1e-12)


def test_adam_shape_mismatch_and_schedule():
    p = {"w": param(np.zeros(3))}
    with pytest.raises(ValueError):
        adam_step(p, {"w": np.zeros(4)}, AdamState())
    s = StepSchedule(1e-4, 1e-5, 8)
    assert s(7) == 1e-4 and s(8) == 1e-5


# --- checkpoints ----------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path, rng):
    t = {"a.w": rng.normal(size=(3, 4)), "b": np.arange(5, dtype=np.float32)}
    save_checkpoint(tmp_path / "m.ckpt", t, {"mode": "dynamic"})
    back, meta = load_checkpoint(tmp_path / "m.ckpt")
    assert meta == {"mode": "dynamic"} and list(back) == ["a.w", "b"]
    for k in t:
        assert back[k].dtype == t[k].dtype
        np.testing.assert_array_equal(back[k], t[k])


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "x").write_bytes(b"hello world")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x")
