import numpy as np
import pytest

from dynlf.lightfield import extract_epi
from dynlf.metrics import psnr
from dynlf.oracle import (BlockMatchConfig, Layer, estimate_disparity_bm, gen_scene,
                          perturb_disparity, random_texture)
from dynlf.warp import backward_warp


def test_single_layer_scene():
    sc = gen_scene(0, U=3, H=16, W=40, layers=[Layer(1.0)], d_max=2.0)
    assert np.all(sc.gt_disparity == 1.0)
    for t in range(3):
        for s in range(3):
            if s != t:
                m = sc.occlusion_mask(t, s)
                # only the columns that fall outside the frame are flagged
                assert not m[:, 3:-3].any()
    epi = extract_epi(sc.lightfield, 7)
    np.testing.assert_allclose(epi[1, 1:], epi[0, :-1], atol=1e-6)


def test_two_layer_occlusion_band_width():
    sc = gen_scene(0, U=5, H=20, W=60, layers=[Layer(2.0, (20, 36), (0, 20)), Layer(0.0)],
                   d_max=2.0)
    m = sc.occlusion_mask(2, 3)
    row = m[10]
    # background pixels to the right of the front layer lose their correspondent
    x_front_end = 36 + 2.0 * (2 - 2)
    band = np.flatnonzero(row[int(x_front_end):int(x_front_end) + 6])
    assert len(band) == 2
    m = sc.occlusion_mask(2, 1)
    band = np.flatnonzero(m[10, 14:20])
    assert len(band) == 2


def test_scene_validation():
    with pytest.raises(ValueError):
        gen_scene(0, layers=[Layer(3.5)], d_max=3.0)
    with pytest.raises(ValueError):
        gen_scene(0, layers=[Layer(0.0, (10, 20)), Layer(1.0)], d_max=3.0)
    with pytest.raises(ValueError):
        gen_scene(0, layers=[Layer(1.0, (10, 20))], d_max=3.0)


def test_rendering_is_deterministic():
    a = gen_scene(9, n_layers=3, d_max=2.0)
    b = gen_scene(9, n_layers=3, d_max=2.0)
    np.testing.assert_array_equal(a.lightfield.views, b.lightfield.views)
    np.testing.assert_array_equal(a.gt_disparity, b.gt_disparity)
    c = gen_scene(10, n_layers=3, d_max=2.0)
    assert not np.array_equal(a.lightfield.views, c.lightfield.views)


def test_disparities_take_layer_values():
    sc = gen_scene(4, n_layers=3, d_max=3.0)
    assert set(np.unique(sc.gt_disparity)) <= {np.float32(l.disparity) for l in sc.layers}


def test_texture_range(rng):
    tex = random_texture(rng)
    X, Y = np.meshgrid(np.arange(200.0), np.arange(200.0))
    v = tex(X, Y)
    assert v.min() >= 0.05 and v.max() <= 0.95


@pytest.mark.parametrize("seed", range(3))
def test_warp_consistency(seed):
    sc = gen_scene(seed, U=5, H=64, W=64, d_max=3.0, n_layers=2)
    lf = sc.lightfield
    for t in range(5):
        for s in range(5):
            if s == t:
                continue
            w = backward_warp(lf.view(s), lf.disparity(t), s, t)
            assert psnr(w, lf.view(t), ~sc.occlusion_mask(t, s)) >= 40


def test_block_matching_zero_for_identical_views(rng):
    sc = gen_scene(1, U=2, H=24, W=24, layers=[Layer(0.0)], d_max=2.0)
    v = sc.lightfield.view(0)
    np.testing.assert_array_equal(estimate_disparity_bm(v, v, 0, 1, BlockMatchConfig(d_max=2)), 0)


def test_block_matching_recovers_single_layer():
    sc = gen_scene(2, U=3, H=48, W=64, layers=[Layer(2.0)], d_max=3.0)
    lf = sc.lightfield
    d = estimate_disparity_bm(lf.view(0), lf.view(1), 0, 1, BlockMatchConfig(d_max=3.0))
    inner = d[8:-8, 8:-8]
    assert np.mean(np.abs(inner - 2.0) <= 0.5) >= 0.95
    d2 = estimate_disparity_bm(lf.view(2), lf.view(0), 2, 0, BlockMatchConfig(d_max=3.0))
    assert np.mean(np.abs(d2[8:-8, 8:-8] - 2.0) <= 0.5) >= 0.95


def test_block_matching_constant_image_ties_to_zero():
    v = np.full((12, 12, 3), 0.4)
    np.testing.assert_array_equal(estimate_disparity_bm(v, v, 0, 2), 0)
    with pytest.raises(ValueError):
        estimate_disparity_bm(v, v, 1, 1)
    with pytest.raises(ValueError):
        BlockMatchConfig(window=4)


def test_perturb_disparity(rng):
    d = rng.uniform(-1, 1, (64, 64))
    np.testing.assert_array_equal(perturb_disparity(d, 0.0, 3), d)
    a, b = perturb_disparity(d, 0.5, 3), perturb_disparity(d, 0.5, 3)
    np.testing.assert_array_equal(a, b)
    noise = perturb_disparity(d, 0.5, 4) - d
    assert abs(noise.mean()) <= 3 * 0.5 / 64
    clipped = perturb_disparity(d, 2.0, 5, d_max=1.5)
    assert np.abs(clipped).max() <= 1.5
    with pytest.raises(ValueError):
        perturb_disparity(d, -1.0, 0)
