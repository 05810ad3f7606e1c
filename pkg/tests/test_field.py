import math

import numpy as np
import pytest
import torch

from radsurf.field import (FieldConfig, SdfColorField, analytic_field, encode_position, encoded_size, query_field,
                           sdf_gradient)

TINY = FieldConfig(pos_freqs=2, dir_freqs=1, hidden_width=16, hidden_depth=3, color_width=8, color_depth=1)


def tiny_field(seed=0, dtype=torch.float64, config=TINY):
    torch.manual_seed(seed)
    return SdfColorField(config).to(dtype)


@pytest.mark.parametrize("L", range(9))
def test_encoding_length(L):
    assert encode_position(torch.zeros(5, 3), L).shape == (5, encoded_size(L)) == (5, 3 + 6 * L)


def test_encoding_special_values():
    x = torch.tensor([0.25, -0.3, 0.7], dtype=torch.float64)
    assert torch.equal(encode_position(x, 0), x)
    enc = encode_position(torch.zeros(3, dtype=torch.float64), 4)
    assert torch.all(enc[3:15] == 0) and torch.all(enc[15:] == 1)
    enc = encode_position(torch.tensor([0.25, 0.0, 0.0], dtype=torch.float64), 1)
    assert enc[3].item() == pytest.approx(math.sin(math.pi / 4), abs=1e-12)
    assert enc[3].item() == pytest.approx(0.7071, abs=1e-4)


def test_query_is_deterministic_and_pure():
    f = tiny_field()
    before = {k: v.clone() for k, v in f.state_dict().items()}
    x = np.random.default_rng(0).uniform(-1, 1, (50, 3))
    d = np.tile([0.0, 0.0, 1.0], (50, 1))
    a, b = query_field(f, x, d), query_field(f, x, d)
    assert np.array_equal(a.sdf, b.sdf) and np.array_equal(a.color, b.color)
    for k, v in f.state_dict().items():
        assert torch.equal(v, before[k])


def test_geometric_init_is_sphere_like():
    f = SdfColorField(FieldConfig())
    center = query_field(f, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]).sdf
    rng = np.random.default_rng(1)
    shell = rng.normal(size=(200, 3))
    shell = 0.9 * shell / np.linalg.norm(shell, axis=1, keepdims=True)
    out = query_field(f, shell, np.tile([0, 0, 1.0], (200, 1))).sdf
    assert np.sign(center) == -1
    assert (np.sign(out) == 1).all()


def test_color_range():
    f = SdfColorField(FieldConfig())
    rng = np.random.default_rng(2)
    d = rng.normal(size=(1000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    c = query_field(f, rng.uniform(-1, 1, (1000, 3)), d).color
    assert c.min() >= 0 and c.max() <= 1


def test_non_finite_inputs_rejected():
    f = tiny_field()
    with pytest.raises(ValueError):
        query_field(f, [np.nan, 0, 0], [0, 0, 1])
    with pytest.raises(ValueError):
        sdf_gradient(f, torch.tensor([[np.inf, 0.0, 0.0]]))


def test_sdf_gradient_matches_central_differences():
    f = tiny_field(seed=3)
    rng = np.random.default_rng(3)
    x = torch.from_numpy(rng.uniform(-0.9, 0.9, (100, 3)))
    grad = sdf_gradient(f, x)
    h = 1e-4
    fd = torch.zeros_like(x)
    with torch.no_grad():
        for k in range(3):
            e = torch.zeros(3, dtype=x.dtype)
            e[k] = h
            fd[:, k] = (f.sdf(x + e) - f.sdf(x - e)) / (2 * h)
    rel = torch.linalg.norm(grad - fd, dim=1) / torch.linalg.norm(fd, dim=1)
    assert rel.max().item() < 1e-3
    assert torch.equal(grad, sdf_gradient(f, x))


def test_kappa_is_positive_by_construction():
    f = tiny_field()
    with torch.no_grad():
        f.kappa_exponent.fill_(-50.0)
    assert f.kappa.item() > 0


def test_analytic_examples():
    sphere = analytic_field("sphere", radius=0.5)
    assert sphere.sdf(torch.zeros(3, dtype=torch.float64)).item() == pytest.approx(-0.5)
    g = sdf_gradient(analytic_field("sphere", radius=0.3), torch.tensor([0.5, 0.0, 0.0]))
    np.testing.assert_allclose(g.numpy(), [1, 0, 0], atol=1e-12)
    plane = analytic_field("plane", normal=(0, 0, 1), offset=0.0)
    assert plane.sdf(torch.tensor([0.0, 0.0, 0.3], dtype=torch.float64)).item() == pytest.approx(0.3)
    box = analytic_field("box", lo=(0, 0, 0), hi=(1, 1, 1))
    assert box.sdf(torch.tensor([0.5, 0.5, 2.0], dtype=torch.float64)).item() == pytest.approx(1.0)
    s = query_field(sphere, [[0.1, 0.2, 0.3]], [[0, 0, 1.0]])
    np.testing.assert_array_equal(s.color, [[0.5, 0.5, 0.5]])


def test_box_sdf_against_point_sampling():
    box = analytic_field("box", lo=(-0.2, -0.3, -0.1), hi=(0.4, 0.3, 0.5))
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, (300, 3))
    got = box.sdf(torch.from_numpy(pts)).numpy()
    lo, hi = np.array([-0.2, -0.3, -0.1]), np.array([0.4, 0.3, 0.5])
    # outside: distance to the clamped point; inside: distance to the nearest face, negated
    clamped = np.clip(pts, lo, hi)
    outside = np.linalg.norm(pts - clamped, axis=1)
    inside = np.minimum(pts - lo, hi - pts).min(axis=1)
    ref = np.where(outside > 0, outside, -inside)
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_degenerate_shapes_rejected():
    with pytest.raises(ValueError):
        analytic_field("sphere", radius=0.0)
    with pytest.raises(ValueError):
        analytic_field("box", lo=(0, 0, 0), hi=(1, 0, 1))
    with pytest.raises(ValueError):
        analytic_field("torus")


@pytest.mark.parametrize("shape,params", [
    ("sphere", {"center": (0.1, -0.2, 0.05), "radius": 0.4}),
    ("plane", {"normal": (1.0, 2.0, -0.5), "offset": 0.1}),
    ("box", {"lo": (-0.5, -0.4, -0.3), "hi": (0.2, 0.6, 0.4)}),
])
def test_analytic_gradients_are_unit(shape, params):
    f = analytic_field(shape, **params)
    pts = torch.from_numpy(np.random.default_rng(6).uniform(-1, 1, (500, 3)))
    g = sdf_gradient(f, pts)
    norms = torch.linalg.norm(g, dim=1)
    if shape == "box":
        # skip points equidistant to two faces (gradient undefined on the medial axis)
        q = (pts - f.center).abs() - f.half_extent
        top2 = q.topk(2, dim=1).values
        norms = norms[(top2[:, 0] - top2[:, 1]).abs() > 1e-6]
    np.testing.assert_allclose(norms.numpy(), 1.0, atol=1e-6)
