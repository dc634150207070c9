import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minitwistor.errors import ChartEscape
from minitwistor.twistor import (
    CANDIDATE_FRAMES,
    EuclidPoint,
    MobiusRotation,
    OrientedLine,
    Translation,
    affine_param,
    antipode,
    chart_vector,
    choose_frame,
    dir_to_vector,
    frame_centred_on,
    line_from_point_dir,
    point_from_line,
    reverse_line,
    rotate_line,
    translate_line,
    vector_to_dir,
)

coord = st.floats(-20, 20, allow_nan=False)
chart = st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False)


def foot_point(xi, eta):
    # independent: the foot point is the point of the line closest to the origin
    return point_from_line(xi, eta, 0.0).xyz


def test_dir_to_vector_known_values():
    assert np.allclose(dir_to_vector(0j), [0, 0, 1])
    assert np.allclose(dir_to_vector(1 + 0j), [1, 0, 0])
    assert np.allclose(dir_to_vector(1j), [0, 1, 0])
    assert np.allclose(dir_to_vector(-1 + 0j), [-1, 0, 0])


def test_dir_to_vector_rejects_south_pole():
    with pytest.raises(ChartEscape):
        dir_to_vector(1e9 + 0j)
    with pytest.raises(ChartEscape):
        vector_to_dir([0.0, 0.0, -1.0])


def test_vector_to_dir_inverts(rng):
    xi = 3 * (rng.normal(size=500) + 1j * rng.normal(size=500))
    assert np.allclose(vector_to_dir(dir_to_vector(xi)), xi, rtol=1e-12, atol=1e-12)


def test_line_from_point_dir_examples():
    assert line_from_point_dir(EuclidPoint(1 + 0j, 0.0), 0j) == pytest.approx(0.5)
    for t1 in (0.5, 2.0, -3.0):
        xi = 0.3 - 0.7j
        assert line_from_point_dir(EuclidPoint(0j, t1), xi) == pytest.approx(-t1 * xi)


def test_eta_is_shared_by_points_on_the_line(rng):
    xi = 0.4 + 0.2j
    d = dir_to_vector(xi)
    p = np.array([0.3, -1.1, 2.0])
    etas = [line_from_point_dir(EuclidPoint.from_xyz(p + s * d), xi) for s in rng.uniform(-5, 5, 8)]
    assert np.allclose(etas, etas[0], atol=1e-13)


def test_affine_param_measures_distance_from_foot(rng):
    xi = -0.8 + 0.5j
    d = dir_to_vector(xi)
    p = np.array([1.0, 2.0, -0.5])
    eta = line_from_point_dir(EuclidPoint.from_xyz(p), xi)
    foot = foot_point(xi, eta)
    assert abs(np.dot(foot, d)) < 1e-12
    s = rng.uniform(-4, 4)
    assert affine_param(EuclidPoint.from_xyz(foot + s * d), xi) == pytest.approx(s, abs=1e-12)


def test_foot_point_distance_is_twice_eta_norm():
    # |eta| relates to the distance of the line from the origin by 2|eta| / (1 + |xi|^2)
    xi = 0.6 + 0.0j
    eta = 0.9 - 0.4j
    dist = np.linalg.norm(foot_point(xi, eta))
    assert dist == pytest.approx(2 * abs(eta) / (1 + abs(xi) ** 2), rel=1e-12)


@given(coord, coord, coord, chart)
@settings(max_examples=200, deadline=None)
def test_point_roundtrip_property(x, y, t, xi):
    p = EuclidPoint(complex(x, y), t)
    eta = line_from_point_dir(p, xi)
    r = affine_param(p, xi)
    back = point_from_line(xi, eta, r)
    scale = max(1.0, abs(x), abs(y), abs(t))
    assert abs(back.z - p.z) < 1e-10 * scale
    assert abs(back.t - p.t) < 1e-10 * scale


def test_antipode_examples():
    # -1/conj(i) = -i: (0, 1, 0) goes to (0, -1, 0)
    assert antipode(1j) == pytest.approx(-1j)
    assert antipode(1 + 0j) == pytest.approx(-1)
    assert antipode(2 + 0j) == pytest.approx(-0.5)
    xi = 0.3 - 1.2j
    assert antipode(antipode(xi)) == pytest.approx(xi)
    assert np.allclose(dir_to_vector(antipode(0.3 + 0.4j)), -dir_to_vector(0.3 + 0.4j))
    with pytest.raises(ChartEscape):
        antipode(0j)


def test_reverse_line_keeps_points(rng):
    xi, eta = 0.7 - 0.2j, 0.3 + 1.1j
    xr, er = reverse_line(xi, eta)
    for r in rng.uniform(-3, 3, 5):
        p = point_from_line(xi, eta, r)
        q = point_from_line(xr, er, -r)
        assert np.allclose(p.xyz, q.xyz, atol=1e-12)


def test_rotation_matrix_is_orthogonal_and_matches_action(rng):
    a = complex(*rng.normal(size=2))
    b = complex(*rng.normal(size=2))
    n = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
    R = MobiusRotation(a / n, b / n)
    M = R.matrix()
    assert np.allclose(M @ M.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(M) == pytest.approx(1.0)
    xi = 0.2 + 0.5j
    assert np.allclose(dir_to_vector(R.apply(xi)), M @ dir_to_vector(xi), atol=1e-12)


def test_rotate_line_moves_points_rigidly(rng):
    R = MobiusRotation.sending_to_infinity(2.0 + 1.0j)
    M = R.matrix()
    xi, eta, r = 0.1 + 0.3j, -0.4 + 0.2j, 1.7
    (xi2, eta2), r2 = rotate_line(R, OrientedLine(xi, eta), r)
    assert r2 == r
    assert np.allclose(point_from_line(xi2, eta2, r2).xyz, M @ point_from_line(xi, eta, r).xyz, atol=1e-12)


def test_sending_to_infinity_escapes():
    R = MobiusRotation.sending_to_infinity(0.5 - 0.5j)
    with pytest.raises(ChartEscape):
        R.apply(0.5 - 0.5j)
    assert np.allclose(R.escape_direction, dir_to_vector(0.5 - 0.5j))


def test_composition_and_inverse(rng):
    R1 = MobiusRotation.sending_to_infinity(1.0 + 2j)
    R2 = MobiusRotation.sending_to_infinity(-0.3j)
    xi = 0.25 - 0.1j
    assert (R1 @ R2).apply(xi) == pytest.approx(R1.apply(R2.apply(xi)))
    assert R1.inverse().apply(R1.apply(xi)) == pytest.approx(xi)


def test_unit_sphere_translated():
    # normals of the unit sphere about (0, 0, -2): eta = 2 xi, r = 1 - 2(1 - |xi|^2)/(1 + |xi|^2)
    xi = np.array([0.0, 0.5, 1 + 1j, -2j])
    L, r = translate_line(Translation(0j, -2.0), OrientedLine(xi, np.zeros_like(xi)), 1.0)
    x = np.abs(xi) ** 2
    assert np.allclose(L.eta, 2 * xi)
    assert np.allclose(r, 1 - 2 * (1 - x) / (1 + x))


def test_translate_line_moves_points():
    T = Translation(1.0 - 2.0j, 0.5)
    xi, eta, r = -0.6 + 0.1j, 0.2 + 0.2j, -1.3
    (xi2, eta2), r2 = translate_line(T, (xi, eta), r)
    assert np.allclose(point_from_line(xi2, eta2, r2).xyz, point_from_line(xi, eta, r).xyz + T.xyz)


def test_candidate_frames_cover_every_direction(rng):
    d = rng.normal(size=(2000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    k = choose_frame(d)
    worst = 0.0
    for kk in np.unique(k):
        local = d[k == kk] @ CANDIDATE_FRAMES[int(kk)].matrix().T
        worst = max(worst, float(np.max(np.abs(vector_to_dir(local)))))
    # the chosen chart never puts a direction far out towards the south pole
    assert worst < 2.5


def test_frame_centred_on():
    for v in ([0, 0, 1.0], [0, 0, -1.0], [1.0, 2.0, -0.5]):
        R = frame_centred_on(np.array(v))
        u = np.asarray(v) / np.linalg.norm(v)
        assert np.allclose(R.matrix() @ u, [0, 0, 1], atol=1e-12)


def test_chart_vector_handles_infinity():
    out = chart_vector(np.array([np.inf + 0j, np.nan, 0j]))
    assert np.allclose(out[0], [0, 0, -1])
    assert np.all(np.isnan(out[1]))
    assert np.allclose(out[2], [0, 0, 1])


def test_point_from_line_examples():
    assert point_from_line(0j, 0j, 0.0) == (0j, 0.0)
    p = point_from_line(0j, 0.5 + 0j, 0.0)
    assert p.z == pytest.approx(1) and p.t == pytest.approx(0)
    p = point_from_line(1 + 0j, 0j, 2.0)
    assert p.z == pytest.approx(2) and p.t == pytest.approx(0)
    assert affine_param(EuclidPoint(1 + 0j, 0.0), 1 + 0j) == pytest.approx(1)
    assert affine_param(EuclidPoint(0j, 1.0), 0j) == pytest.approx(1)


def test_chord_is_along_direction(rng):
    xi = 2 * (rng.normal(size=100) + 1j * rng.normal(size=100))
    eta = rng.normal(size=100) + 1j * rng.normal(size=100)
    r, dr = rng.normal(size=100), rng.normal(size=100)
    chord = point_from_line(xi, eta, r + dr).xyz - point_from_line(xi, eta, r).xyz
    assert np.allclose(chord, dr[:, None] * dir_to_vector(xi), atol=1e-10)


def test_foot_point_is_closest(rng):
    xi, eta = 0.9 + 0.3j, -1.0 + 0.4j
    r = np.linspace(-1, 1, 201)
    norms = np.linalg.norm(point_from_line(np.full(r.shape, xi), np.full(r.shape, eta), r).xyz, axis=1)
    assert np.argmin(norms) == 100


def test_rotation_onto_south_pole_escapes():
    with pytest.raises(ChartEscape):
        rotate_line(MobiusRotation(0j, 1 + 0j), OrientedLine(0j, 0j))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_passes_through():
    p = point_from_line(np.array([np.nan + 0j, 0.5]), np.array([0j, 0j]), np.array([1.0, 1.0]))
    assert np.isnan(p.z[0]) and np.isfinite(p.z[1])
