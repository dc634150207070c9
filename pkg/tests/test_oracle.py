import numpy as np
import pytest

from minitwistor.errors import Miss
from minitwistor.oracle import (
    ImplicitSurface,
    Ray,
    intersect_ray_surface,
    plane_source_rays,
    point_source_rays,
    reflect_vector,
    trace_reflection,
    wavefront_by_path_length,
)


def test_reflect_vector_examples():
    n = np.array([0, 0, 1.0])
    assert np.allclose(reflect_vector([0, 0, -1.0], n), [0, 0, 1])
    assert np.allclose(reflect_vector([1.0, 0, 0], n), [1, 0, 0])
    assert np.allclose(reflect_vector(np.array([1, 0, -1.0]) / np.sqrt(2), n), np.array([1, 0, 1]) / np.sqrt(2))


def test_reflect_vector_properties(rng):
    d = rng.normal(size=(100, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    n = rng.normal(size=(100, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    out = reflect_vector(d, n)
    assert np.allclose(np.linalg.norm(out, axis=1), 1)
    assert np.allclose(np.sum(out * n, axis=1), -np.sum(d * n, axis=1))
    assert np.allclose(reflect_vector(out, n), d)


def test_ray_normalises():
    r = Ray([0, 0, 0], [0, 3.0, 4.0])
    assert np.linalg.norm(r.dir) == pytest.approx(1.0, abs=1e-12)


def test_sphere_hits():
    S = ImplicitSurface.sphere()
    hits = intersect_ray_surface(Ray([0, 0, 5.0], [0, 0, -1.0]), S)
    assert [h[0] for h in hits] == pytest.approx([4.0, 6.0])
    assert np.allclose(hits[0][1], [0, 0, 1])
    assert intersect_ray_surface(Ray([3.0, 0, 5.0], [0, 0, -1.0]), S) == []


def test_torus_hits():
    S = ImplicitSurface.torus(2.0, 1.0)
    hits = intersect_ray_surface(Ray([2.0, 0, 5.0], [0, 0, -1.0]), S)
    assert np.allclose(hits[0][1], [2, 0, 1], atol=1e-9)
    ray = Ray([-7.0, 0.3, 0.2], [1.0, 0.05, -0.02])
    hits = intersect_ray_surface(ray, S)
    s = [h[0] for h in hits]
    assert len(s) == 4 and s == sorted(s)
    for _, p in hits:
        assert abs(S.f(p)) < 1e-9


def test_generic_marching_matches_analytic(rng):
    ana = ImplicitSurface.torus(2.0, 1.0)
    gen = ImplicitSurface(ana.f, scale=1.0, bound=(np.zeros(3), 3.1))
    for _ in range(20):
        o = rng.normal(size=3)
        o = 6 * o / np.linalg.norm(o)
        d = rng.uniform(-1.5, 1.5, 3) - o
        ray = Ray(o, d)
        a = [h[0] for h in intersect_ray_surface(ray, ana)]
        g = [h[0] for h in intersect_ray_surface(ray, gen)]
        if len(a) == len(g) and a:
            assert a == pytest.approx(g, abs=1e-8)
            for _, p in intersect_ray_surface(ray, gen):
                assert abs(gen.f(p)) < 1e-9


def test_trace_reflection():
    S = ImplicitSurface.sphere()
    out = trace_reflection(Ray([0, 0, 5.0], [0, 0, -1.0]), S)
    assert np.allclose(out.origin, [0, 0, 1]) and np.allclose(out.dir, [0, 0, 1])
    P = ImplicitSurface.plane(0.0)
    out = trace_reflection(Ray([0, 0, 1.0], [1.0, 0, -1.0]), P)
    assert np.allclose(out.origin, [1, 0, 0]) and np.allclose(out.dir, np.array([1, 0, 1]) / np.sqrt(2))
    with pytest.raises(Miss):
        trace_reflection(Ray([5.0, 0, 5.0], [0, 0, -1.0]), S)


def test_wavefront_free_sphere(rng):
    d = rng.normal(size=(50, 3))
    o, d = point_source_rays([0, 0, 0], d)
    pts, missed = wavefront_by_path_length(o, d, None, 2.5)
    assert not missed.any()
    assert np.allclose(np.linalg.norm(pts, axis=1), 2.5)


def test_wavefront_sphere_axially_symmetric():
    o, d = plane_source_rays([0, 0, -1.0], 1.2, 41)
    pts, missed = wavefront_by_path_length(o, d, ImplicitSurface.sphere(), 12.0)
    hit = ~missed
    rho = np.hypot(o[:, 0], o[:, 1])
    assert np.all(missed[rho > 1.0 + 1e-9])
    # rays at the same distance from the axis land at the same height
    key = np.round(rho[hit], 9)
    z = pts[hit, 2]
    for k in np.unique(key)[:30]:
        assert np.ptp(z[key == k]) < 1e-9
    with pytest.raises(ValueError):
        wavefront_by_path_length(o, d, ImplicitSurface.sphere(), 1.0)
