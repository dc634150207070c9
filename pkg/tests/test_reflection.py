import numpy as np
import pytest

from minitwistor.closed_forms import gallery
from minitwistor.congruence import Grid, integrability_residual
from minitwistor.errors import NoIntersection
from minitwistor.oracle import reflect_vector
from minitwistor.reflection import (
    MISSED,
    NEAR_GRAZING,
    OFF_CHART,
    OK,
    incidence_eta,
    malus_defect,
    malus_residual,
    reflect_congruence,
    reflect_direction,
    reflect_line,
    reflect_through_point,
    solve_incidence,
)
from minitwistor.twistor import EuclidPoint, frame_centred_on, dir_to_vector, line_from_point_dir, point_from_line
from minitwistor.waves import plane_wave, spherical_wave


def cplx(rng, n, s=1.0):
    return s * (rng.normal(size=n) + 1j * rng.normal(size=n))


def test_reflect_direction_examples(rng):
    xi1 = cplx(rng, 20)
    assert np.allclose(reflect_direction(0j, xi1), 1 / np.conj(xi1))
    xi0 = cplx(rng, 20)
    assert np.allclose(reflect_direction(xi0, -1 / np.conj(xi0)), xi0)
    assert reflect_direction(0j, 1 + 0j) == pytest.approx(1)


def test_reflect_direction_matches_vector_law(rng):
    xi0, xi1 = cplx(rng, 200), cplx(rng, 200)
    n, d = dir_to_vector(xi0), dir_to_vector(xi1)
    assert np.allclose(dir_to_vector(reflect_direction(xi0, xi1)), reflect_vector(d, n), atol=1e-10)


def test_reflect_through_point(rng):
    xi0, xi = cplx(rng, 50), cplx(rng, 50)
    assert np.allclose(reflect_through_point(xi0, xi0), xi0)
    assert np.allclose(reflect_through_point(xi0, reflect_through_point(xi0, xi)), xi, atol=1e-11)
    assert np.allclose(reflect_through_point(0j, xi), -xi)


def test_incidence_eta(rng):
    xi0, eta0, r0, xi = cplx(rng, 50), cplx(rng, 50), rng.normal(size=50), cplx(rng, 50)
    assert np.allclose(incidence_eta(xi0, eta0, r0, xi0), eta0)
    assert np.allclose(incidence_eta(0j, eta0, 0.0, xi), eta0 - xi**2 * np.conj(eta0))
    p = point_from_line(xi0, eta0, r0)
    assert np.allclose(incidence_eta(xi0, eta0, r0, xi), line_from_point_dir(p, xi), atol=1e-10)


def test_reflect_line_plane_mirror(rng):
    eta0, xi1 = cplx(rng, 30), cplx(rng, 30)
    ev = reflect_line(0j, eta0, 0.0, xi1)
    assert np.allclose(ev.xi2, 1 / np.conj(xi1))
    assert np.allclose(ev.eta2, eta0 - np.conj(eta0) / np.conj(xi1) ** 2)


def test_reflect_line_retroreflection(rng):
    xi0 = cplx(rng, 30)
    ev = reflect_line(xi0, 0j, 1.0, -1 / np.conj(xi0))
    assert np.allclose(ev.xi2, xi0)
    assert np.allclose(ev.eta2, 0, atol=1e-12)


def test_reflect_line_postconditions(rng):
    xi0, eta0, r0, xi1 = cplx(rng, 100), cplx(rng, 100), rng.normal(size=100), cplx(rng, 100)
    ev = reflect_line(xi0, eta0, r0, xi1)
    p = point_from_line(xi0, eta0, r0)
    assert np.allclose(ev.point.xyz, p.xyz)
    assert np.allclose(ev.eta1, line_from_point_dir(p, xi1), atol=1e-9)
    assert np.allclose(ev.eta2, line_from_point_dir(p, ev.xi2), atol=1e-9)


def test_malus_defect_examples(rng):
    xi0, r0 = cplx(rng, 20), rng.normal(size=20)
    assert np.allclose(malus_defect(xi0, xi0, r0), -r0)
    assert np.allclose(malus_defect(xi0, -1 / np.conj(xi0), r0), r0)
    assert np.allclose(malus_defect(xi0, cplx(rng, 20), 0.0), 0)
    xi1 = cplx(rng, 20)
    nd = np.sum(dir_to_vector(xi0) * dir_to_vector(xi1), axis=-1)
    assert np.allclose(malus_defect(xi0, xi1, r0), -nd * r0)


def test_solve_incidence_vertical_on_sphere():
    # straight down, written in a chart tipped over so the direction is finite
    S = gallery("sphere")
    L = (np.inf, 0j)
    g = Grid.box(-0.1, 0.1, -0.1, 0.1, n=3)
    rc = reflect_congruence(plane_wave(L[0]), S, g)
    ev = rc.events(np.array([0j]))
    assert np.allclose(ev.point.xyz[0], [0, 0, 1], atol=1e-12)
    assert abs(ev.xi0[0]) < 1e-12


def test_torus_crest_is_off_chart():
    # the downward ray at x1 = 2 meets the crest (2, 0, 1), whose normal is the
    # singular direction xi0 = 0 of the torus chart
    S = gallery("torus", a=2.0, b=1.0)
    rc = reflect_congruence(plane_wave(np.inf), S)
    b = rc.trace(np.array([2.0 + 0j]))
    assert b.status[0] == OFF_CHART
    assert np.allclose(rc.events(np.array([2.0 + 0j])).point.xyz[0], [2, 0, 1], atol=1e-10)


def test_solve_incidence_torus_outer_equator():
    # horizontal ray towards the axis hits (3, 0, 0) with normal along x1, |xi0| = 1
    S = gallery("torus", a=2.0, b=1.0)
    xi1 = -1 + 0j
    ev = solve_incidence((xi1, line_from_point_dir(EuclidPoint(10 + 0j, 0.0), xi1)), S)
    assert np.allclose(ev.point.xyz, [3, 0, 0], atol=1e-10)
    assert abs(ev.xi0) == pytest.approx(1.0, abs=1e-10)
    assert ev.xi2 == pytest.approx(1.0)


def test_solve_incidence_spherical_source_near_cap():
    S = gallery("sphere", center=(0.0, 0.0, -2.0))
    xi1 = 0.2 + 0.1j
    # a ray from the origin with direction whose chart value is large: use the antipodal form
    xi_down = -1 / np.conj(xi1)
    ev = solve_incidence((xi_down, 0j), S, start=0.0)
    p = ev.point.xyz
    d = dir_to_vector(xi_down)
    # independent quadratic: |s d - c|^2 = 1
    c = np.array([0.0, 0.0, -2.0])
    b = np.dot(d, c)
    s = b - np.sqrt(b * b - (np.dot(c, c) - 1))
    assert np.allclose(p, s * d, atol=1e-10)
    assert p[2] > -2  # near cap


def test_solve_incidence_miss_raises():
    S = gallery("sphere")
    with pytest.raises(NoIntersection):
        solve_incidence((0j, line_from_point_dir(EuclidPoint(5 + 0j, 0.0), 0j)), S)


def test_reflected_congruence_status_and_potential():
    S = gallery("sphere")
    g = Grid.box(-1.2, 1.2, -1.2, 1.2, n=25)
    inc = plane_wave(np.inf)
    rc = reflect_congruence(inc, S, g, grazing_margin=0.2)
    nu = g.nu
    assert np.all(rc.status[np.abs(nu) > 1.0] == MISSED)
    assert np.all(rc.status[np.abs(nu) < 0.9] == OK)
    assert np.any(rc.status == NEAR_GRAZING)
    assert np.array_equal(rc.shadow, rc.missed)
    assert np.array_equal(rc.cast_shadow, ~rc.missed & g.active)
    # r2 = r1 + 2D with r1 = 0 for the plane wave
    nu = np.array([0.3 + 0.2j])
    assert np.allclose(rc.potential(nu), 2 * rc.malus_defect_at(nu))


def test_malus_residual_small():
    S = gallery("sphere")
    nu = np.array([0.1 + 0.2j, -0.3 + 0.1j, 0.4j])
    assert np.max(malus_residual(plane_wave(np.inf), S, nu)) < 1e-5
    T = gallery("torus")
    src = spherical_wave((0.0, 0.0, 3.0), frame=frame_centred_on(np.array([0.0, 0.0, -1.0])))
    nu = np.array([0.3 + 0.1j, 0.2 - 0.2j, -0.1 + 0.3j])
    rc = reflect_congruence(src, T)
    assert np.all(np.isfinite(rc.evaluate(nu)[0]))
    assert np.max(malus_residual(src, T, nu, reflected=rc)) < 1e-5


def test_malus_identity_for_non_integrable_incoming():
    from minitwistor.congruence import ParametricCongruence
    from minitwistor.twistor import reverse_line

    # a twisted bundle of downward lines: no wavefront is orthogonal to it
    def twisted(w):
        w = np.asarray(w, dtype=complex)
        return reverse_line(0.2 * w, 0.5 * np.conj(w) + 0.3j * w * np.conj(w))

    inc = ParametricCongruence(map=twisted)
    mirror = gallery("plane", height=-5.0)
    nu = np.array([0.5 + 0.3j, -0.4 + 0.6j, 0.7 - 0.2j])
    assert np.max(malus_residual(inc, mirror, nu)) < 1e-5
    a = integrability_residual(inc, nu)
    b = integrability_residual(reflect_congruence(inc, mirror), nu)
    assert np.all(a > 1e-3) and np.all(b > 1e-3)
    # a plane mirror preserves the twist
    assert np.allclose(a, b, rtol=1e-3)
