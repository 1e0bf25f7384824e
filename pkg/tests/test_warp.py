import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynlf.lightfield import SparseInput
from dynlf.metrics import psnr
from dynlf.oracle import Layer, gen_scene
from dynlf.warp import (WarpConfig, backward_warp, baseline_synthesize, fill_holes,
                        forward_warp_disparity, fuse_target_disparity, kernel_taps,
                        neighbor_table, neighborhood, sample_1d, warp_source_to_source)

ROW = np.array([[0.0, 1.0, 2.0, 3.0]])[:, :, None]


def keys_ref(x, a=-0.5):
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def test_sample_linear_grid_and_midpoint():
    assert sample_1d(ROW, 2.0, 0)[0] == 2.0
    assert sample_1d(ROW, 1.5, 0)[0] == 1.5


def test_sample_cubic_matches_keys_formula(rng):
    row = rng.uniform(size=(1, 8, 1))
    x = 3.3
    ref = sum(keys_ref(x - k) * row[0, k, 0] for k in range(2, 6))
    assert sample_1d(row, x, 0, "cubic")[0] == pytest.approx(ref, abs=1e-12)


def test_sample_cubic_exact_at_integers(rng):
    row = rng.uniform(size=(1, 8, 3))
    for x in range(8):
        np.testing.assert_allclose(sample_1d(row, float(x), 0, "cubic"), row[0, x], atol=1e-15)


def test_sample_rejects_non_finite():
    with pytest.raises(ValueError):
        sample_1d(ROW, float("nan"), 0)
    with pytest.raises(ValueError):
        sample_1d(ROW, float("inf"), 0)


def test_sample_replicates_borders():
    assert sample_1d(ROW, -3.7, 0)[0] == 0.0
    assert sample_1d(ROW, 10.2, 0, "cubic")[0] == pytest.approx(3.0)


@pytest.mark.parametrize("kernel", ["linear", "cubic"])
def test_kernel_weights_sum_to_one(kernel):
    x = np.linspace(-3, 3, 2001)
    _, w = kernel_taps(x, kernel)
    np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-12)


def test_backward_warp_zero_disparity_is_identity(rng):
    src = rng.uniform(size=(5, 9, 3))
    np.testing.assert_array_equal(backward_warp(src, np.zeros((5, 9)), 0, 2), src)


@given(st.integers(-3, 3))
def test_backward_warp_same_view_is_identity(t):
    src = np.random.default_rng(t + 10).uniform(size=(3, 6, 1))
    d = np.random.default_rng(t + 4).normal(size=(3, 6)) * 5
    np.testing.assert_array_equal(backward_warp(src, d, t, t), src)


@pytest.mark.parametrize("d", [2.0, 0.5])
def test_backward_warp_of_ramp(d):
    W = 16
    src = np.tile(np.arange(W) / W, (3, 1))[:, :, None]
    out = backward_warp(src, np.full((3, W), d), 1, 0)
    x = np.arange(W)
    inside = x + d <= W - 1
    np.testing.assert_allclose(out[:, inside, 0], np.tile((x[inside] + d) / W, (3, 1)),
                               atol=1e-15)


def test_backward_warp_shape_mismatch(rng):
    with pytest.raises(ValueError):
        backward_warp(rng.uniform(size=(4, 4, 1)), np.zeros((4, 5)), 0, 1)


def test_backward_warp_is_per_pixel(rng):
    src = rng.uniform(size=(4, 10, 3))
    d = rng.uniform(-2, 2, (4, 10))
    full = backward_warp(src, d, 3, 1)
    for y, x in [(0, 0), (2, 5), (3, 9)]:
        np.testing.assert_array_equal(full[y, x], sample_1d(src, x + d[y, x] * 2, y))


def test_source_to_source_on_oracle():
    sc = gen_scene(5, U=5, H=64, W=64, d_max=2.0, n_layers=2)
    lf = sc.lightfield
    for s, so in [(0, 4), (4, 0), (1, 3)]:
        w = warp_source_to_source(lf.view(so), lf.disparity(s), so, s)
        mask = ~sc.occlusion_mask(s, so)
        assert psnr(w, lf.view(s), mask) >= 40


def test_source_to_source_identity_and_constant(rng):
    img = rng.uniform(size=(4, 8, 3))
    np.testing.assert_array_equal(warp_source_to_source(img, rng.normal(size=(4, 8)), 2, 2), img)
    sc = gen_scene(1, U=3, H=8, W=32, layers=[Layer(1.25)], d_max=2.0)
    lf = sc.lightfield
    a = warp_source_to_source(lf.view(2), lf.disparity(0), 2, 0)
    b = backward_warp(lf.view(2), np.full((8, 32), 1.25), 2, 0)
    np.testing.assert_array_equal(a, b)


def test_forward_warp_constant_field():
    d = np.full((3, 12), 2.0)
    out = forward_warp_disparity(d, 0, 1)
    np.testing.assert_array_equal(out, d)


def brute_splat(d, s, t):
    H, W = d.shape
    out = np.full((H, W), -np.inf)
    for y in range(H):
        for x in range(W):
            v = x + d[y, x] * (t - s)
            xt = int(np.sign(v) * np.floor(abs(v) + 0.5))
            if 0 <= xt < W and d[y, x] > out[y, xt]:
                out[y, xt] = d[y, x]
    return out


def test_forward_warp_collisions_keep_larger():
    sc = gen_scene(2, U=5, H=32, W=48, layers=[Layer(2.0, (14, 30), (4, 28)), Layer(0.0)],
                   d_max=2.0)
    d0 = sc.gt_disparity[0].astype(np.float64)
    ref = brute_splat(d0, 0, 2)
    out = forward_warp_disparity(d0, 0, 2)
    valid = np.isfinite(ref)
    np.testing.assert_array_equal(out[valid], ref[valid])
    # some pixels receive both layers and keep the front one
    xs = np.round(np.arange(48) + d0 * 2)
    hit_front = np.zeros((32, 48), bool)
    hit_back = np.zeros((32, 48), bool)
    for y in range(32):
        for x in range(48):
            xt = int(xs[y, x])
            if 0 <= xt < 48:
                (hit_front if d0[y, x] == 2 else hit_back)[y, xt] = True
    both = hit_front & hit_back
    assert both.any()
    assert np.all(out[both] == 2.0)


def test_fill_holes_nearest_in_row():
    d = np.array([[5.0, 0, 0, 7.0, 0, 0, 0, 9.0]])
    valid = d != 0
    np.testing.assert_array_equal(fill_holes(d, valid), [[5, 5, 7, 7, 7, 7, 9, 9]])
    # equal distance goes left
    d = np.array([[1.0, 0, 3.0]])
    np.testing.assert_array_equal(fill_holes(d, d != 0), [[1, 1, 3]])


def test_two_pixel_hole_after_splat():
    # pixels 3 and 4 of the target receive nothing
    d = np.zeros((1, 10))
    d[0, 3:] = 2.0
    out_raw = np.full((1, 10), -np.inf)
    ref = brute_splat(d, 0, 1)
    hole = ~np.isfinite(ref[0])
    assert hole.sum() >= 2
    out = forward_warp_disparity(d, 0, 1)
    for x in np.flatnonzero(hole):
        valid = np.flatnonzero(~hole)
        dist = np.abs(valid - x)
        nearest = valid[dist == dist.min()][0]
        assert out[0, x] == ref[0, nearest]
    del out_raw


def test_neighborhood_examples():
    n = neighborhood(10, 0, 1, 0, WarpConfig(d_max=2.0), 64)
    assert list(n.coords) == [8, 9, 10, 11, 12] and n.K == 5
    n = neighborhood(10, 0, 1, 0, WarpConfig(d_max=1e-9), 64)
    assert list(n.coords) == [10] and n.K == 1
    n = neighborhood(1, 0, 0, 1, WarpConfig(d_max=3.0), 64)
    assert list(n.coords) == [0, 0, 0, 1, 2, 3, 4] and n.K == 7


@given(st.integers(0, 39), st.integers(-4, 4), st.floats(0.1, 3.0))
@settings(max_examples=60)
def test_neighborhood_size_is_position_independent(x, ds, d_max):
    cfg = WarpConfig(d_max=d_max)
    ks = {neighborhood(xx, 0, ds, 0, cfg, 40).K for xx in (0, x, 39)}
    assert len(ks) == 1
    n = neighborhood(x, 0, ds, 0, cfg, 40)
    assert np.all(np.diff(n.coords) >= 0) and n.coords.min() >= 0 and n.coords.max() <= 39
    np.testing.assert_array_equal(neighbor_table(40, ds, 0, d_max)[x], n.coords)


def test_baseline_oracle_bound_and_identity():
    sc = gen_scene(7, U=5, H=64, W=64, d_max=2.0, n_layers=2, integer_disparity=True)
    lf = sc.lightfield
    inputs = SparseInput.from_lightfield(lf, (0, 4))
    for t in (1, 2, 3):
        outs = baseline_synthesize(inputs, t, WarpConfig(d_max=2.0))
        for img, s in zip(outs, (0, 4)):
            assert psnr(img, lf.view(t), ~sc.occlusion_mask(t, s)) >= 40
    same = baseline_synthesize(inputs, 0, WarpConfig(d_max=2.0))[0]
    np.testing.assert_array_equal(same, inputs.views[0])


def test_baseline_degrades_with_corrupted_disparity():
    sc = gen_scene(8, U=5, H=64, W=64, d_max=2.0, n_layers=2, integer_disparity=True)
    lf = sc.lightfield
    clean = SparseInput.from_lightfield(lf, (0, 4))
    bad = []
    for s in (0, 4):
        d = lf.disparity(s).astype(np.float64).copy()
        edges = np.abs(np.diff(lf.view(s).mean(axis=2), axis=1, append=0)) > 0.01
        d[edges] += np.where(np.arange(edges.sum()) % 2, 1.0, -1.0)
        bad.append(d)
    noisy = SparseInput((0, 4), clean.views, tuple(bad))
    cfg = WarpConfig(d_max=2.0)
    for t in (1, 2, 3):
        a = baseline_synthesize(clean, t, cfg)[0]
        b = baseline_synthesize(noisy, t, cfg)[0]
        assert psnr(b, lf.view(t)) < psnr(a, lf.view(t))


def test_fused_target_disparity_matches_single_source():
    d = np.full((2, 8), 1.0)
    np.testing.assert_array_equal(fuse_target_disparity([(d, 0), (d, 4)], 2), d)
