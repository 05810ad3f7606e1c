import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from radsurf.field import FieldConfig, SdfColorField, analytic_field
from radsurf.geometry import Ray
from radsurf.render import (RenderConfig, composite, render_ray, render_rays, sample_stratified, sdf_to_opacity,
                            stratified_t)


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def opacity_oracle(s_i, s_next, kappa):
    a, b = logistic(kappa * s_i), logistic(kappa * s_next)
    return max((a - b) / max(a, 1e-7), 0.0)


def composite_oracle(alphas, colors):
    # plain loop over the product-form transmittance
    trans, weights, color = [], [], np.zeros(3)
    t = 1.0
    for a, c in zip(alphas, colors):
        trans.append(t)
        weights.append(t * a)
        color += t * a * np.asarray(c)
        t *= 1.0 - a
    return color, np.array(weights), np.array(trans)


def test_midpoints_without_jitter():
    s = sample_stratified(0.0, 1.0, 4, jitter=False)
    np.testing.assert_allclose(s.t, [0.125, 0.375, 0.625, 0.875], atol=1e-15)
    np.testing.assert_allclose(s.deltas, 0.25)


def test_jittered_samples_stay_in_bins_and_repeat_per_seed():
    for seed in range(20):
        t = stratified_t(2.0, 6.0, 16, np.random.default_rng(seed))[0]
        bins = np.floor((t - 2.0) / 0.25)
        np.testing.assert_array_equal(bins, np.arange(16))
        np.testing.assert_array_equal(t, stratified_t(2.0, 6.0, 16, np.random.default_rng(seed))[0])


def test_sampler_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        sample_stratified(1.0, 0.5, 8, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_stratified(0.0, 1.0, 1, jitter=False)


def test_opacity_examples():
    assert sdf_to_opacity(0.3, 0.3, 50.0) == 0.0
    assert sdf_to_opacity(0.2, 0.4, 50.0) == 0.0
    expected = (logistic(1) - logistic(-1)) / logistic(1)
    assert sdf_to_opacity(1.0, -1.0, 1.0) == pytest.approx(expected, abs=1e-12)
    assert sdf_to_opacity(1.0, -1.0, 1.0) == pytest.approx(0.63212, abs=1e-5)
    with pytest.raises(ValueError):
        sdf_to_opacity(0.1, 0.0, 0.0)


def test_opacity_matches_oracle_randomized():
    rng = np.random.default_rng(0)
    s = rng.uniform(-2, 2, (1000, 2))
    k = np.exp(rng.uniform(-2, 6, 1000))
    got = sdf_to_opacity(torch.from_numpy(s[:, 0]), torch.from_numpy(s[:, 1]), torch.from_numpy(k)).numpy()
    ref = np.array([opacity_oracle(a, b, c) for (a, b), c in zip(s, k)])
    np.testing.assert_allclose(got, ref, atol=1e-6)
    assert (got >= 0).all() and (got <= 1).all()


def test_composite_examples():
    colors = torch.rand(5, 3, dtype=torch.float64)
    c, w, _ = composite(torch.zeros(5, dtype=torch.float64), colors)
    assert torch.all(w == 0) and torch.all(c == 0)
    c, w, _ = composite(torch.tensor([1.0, 0.3, 0.7, 0.2, 0.9], dtype=torch.float64), colors)
    np.testing.assert_allclose(w.numpy(), [1, 0, 0, 0, 0])
    np.testing.assert_allclose(c.numpy(), colors[0].numpy())
    c, w, t = composite(torch.tensor([0.5, 0.5], dtype=torch.float64),
                        torch.tensor([[1.0, 0, 0], [0, 1.0, 0]], dtype=torch.float64))
    np.testing.assert_allclose(w.numpy(), [0.5, 0.25])
    np.testing.assert_allclose(c.numpy(), [0.5, 0.25, 0.0])
    np.testing.assert_allclose(t.numpy(), [1.0, 0.5])


def test_composite_single_sample_degenerates():
    c, w, t = composite(torch.tensor([0.4], dtype=torch.float64), torch.tensor([[0.5, 1.0, 0.25]], dtype=torch.float64))
    np.testing.assert_allclose(c.numpy(), [0.2, 0.4, 0.1])


def test_composite_rejects_out_of_range():
    with pytest.raises(ValueError):
        composite(torch.tensor([0.5, 1.2]), torch.zeros(2, 3))
    with pytest.raises(ValueError):
        composite(torch.tensor([-0.1, 0.2]), torch.zeros(2, 3))


def test_composite_matches_loop_oracle_randomized():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        a = rng.uniform(0, 1, n) * (rng.random(n) < 0.8)
        col = rng.random((n, 3))
        c, w, t = composite(torch.from_numpy(a), torch.from_numpy(col))
        rc, rw, rt = composite_oracle(a, col)
        np.testing.assert_allclose(c.numpy(), rc, atol=1e-6)
        np.testing.assert_allclose(w.numpy(), rw, atol=1e-6)
        np.testing.assert_allclose(t.numpy(), rt, atol=1e-6)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=64))
def test_composite_weight_invariants(alphas):
    _, w, t = composite(torch.tensor(alphas, dtype=torch.float64), torch.ones(len(alphas), 3, dtype=torch.float64))
    assert (w >= 0).all()
    assert w.sum().item() <= 1 + 1e-6
    assert t[0].item() == 1.0
    assert (t[1:] <= t[:-1]).all()


def sphere_hit(o, d, r):
    b = o @ d
    disc = b * b - (o @ o - r * r)
    return -b - math.sqrt(disc)


def test_depth_on_analytic_sphere():
    field = analytic_field("sphere", radius=0.5, kappa=400.0)
    ray = Ray([0.0, 0.0, -2.0], [0.0, 0.0, 1.0])
    out = render_ray(field, ray, (0.5, 3.5), RenderConfig(n_samples=128, jitter=False))
    seg = 3.0 / 128
    assert abs(out.depth.item() - 1.5) <= 2 * seg
    assert out.opacity.item() > 0.99


def test_missing_ray_is_transparent():
    field = analytic_field("sphere", radius=0.5, kappa=400.0)
    out = render_ray(field, Ray([0.0, 0.8, -2.0], [0.0, 0.0, 1.0]), (0.5, 3.5), RenderConfig(n_samples=128, jitter=False))
    assert out.opacity.item() < 0.01


def test_weight_mass_concentrates_near_surface():
    field = analytic_field("sphere", radius=0.5, kappa=2000.0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        o = rng.normal(size=3)
        o = 2.0 * o / np.linalg.norm(o)
        target = rng.uniform(-0.25, 0.25, 3)
        d = (target - o) / np.linalg.norm(target - o)
        out = render_ray(field, Ray(o, d), (0.2, 4.0), RenderConfig(n_samples=128), rng)
        t, w = out.t.numpy(), out.weights.numpy()
        hit = sphere_hit(o, d, 0.5)
        seg = 3.8 / 128
        near = np.abs(t[:-1] - hit) <= 3 * seg
        assert w[near].sum() >= 0.9 * w.sum()


def test_render_output_invariants_on_random_rays():
    torch.manual_seed(0)
    field = SdfColorField(FieldConfig(hidden_width=32, hidden_depth=3, color_width=16, color_depth=1)).double()
    rng = np.random.default_rng(3)
    o = rng.uniform(-1, 1, (1000, 3))
    d = rng.normal(size=(1000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    with torch.no_grad():
        out = render_rays(field, o, d, np.zeros(1000), np.full(1000, 2.0), RenderConfig(n_samples=32), rng)
    w, t = out.weights, out.transmittance
    assert (w >= 0).all() and (w.sum(-1) <= 1 + 1e-6).all()
    assert (t[:, 0] == 1).all() and (t[:, 1:] <= t[:, :-1]).all()
    assert (out.color >= 0).all() and (out.color <= 1).all()


def test_color_gradient_matches_finite_differences():
    torch.manual_seed(4)
    field = SdfColorField(FieldConfig(pos_freqs=2, dir_freqs=1, hidden_width=16, hidden_depth=3, color_width=8,
                                      color_depth=1, init_kappa=20.0)).double()
    o = np.array([[0.0, 0.0, -1.5], [0.2, -0.1, -1.5]])
    d = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    cfg = RenderConfig(n_samples=32, jitter=False)

    def scalar():
        out = render_rays(field, o, d, [0.2, 0.2], [2.8, 2.8], cfg)
        return out.color.sum()

    params = [field.trunk[0].weight, field.trunk[1].bias, field.sdf_out.weight, field.color_head[0].weight,
              field.kappa_exponent]
    field.zero_grad()
    scalar().backward()
    h = 1e-4
    for p in params:
        flat = p.data.view(-1)
        for idx in [0, flat.numel() // 2]:
            analytic = p.grad.view(-1)[idx].item()
            old = flat[idx].item()
            with torch.no_grad():
                flat[idx] = old + h
                up = scalar().item()
                flat[idx] = old - h
                down = scalar().item()
                flat[idx] = old
            fd = (up - down) / (2 * h)
            if abs(fd) < 1e-6 and abs(analytic) < 1e-6:
                continue
            assert abs(analytic - fd) / max(abs(fd), 1e-8) < 1e-2
