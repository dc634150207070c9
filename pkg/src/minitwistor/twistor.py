"""Oriented lines in R^3 as points of the tangent bundle of the 2-sphere.

A line is encoded by ``(xi, eta)``: ``xi`` is the stereographic coordinate of
its unit direction (projection from the south pole onto the equatorial
plane) and ``eta`` is the perpendicular distance vector to the origin written
in the fibre over ``xi``.  A point on the line is fixed by its signed affine
distance ``r`` from the foot point (the point closest to the origin).

Points of R^3 = C + R are written ``(z, t)`` with ``z = x1 + i x2``, ``t = x3``.

All functions broadcast over numpy arrays.  NaN entries pass through
unchanged so masked grid nodes can flow through a pipeline; infinite or
huge ``xi`` raises :class:`ChartEscape`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ChartEscape

#: |xi| above this is treated as the chart boundary (south pole).
CHART_LIMIT = 1e8


class EuclidPoint(NamedTuple):
    z: np.ndarray | complex
    t: np.ndarray | float

    @property
    def xyz(self):
        z = np.asarray(self.z)
        return np.stack([z.real, z.imag, np.asarray(self.t, dtype=float)], axis=-1)

    @classmethod
    def from_xyz(cls, p):
        p = np.asarray(p, dtype=float)
        return cls(p[..., 0] + 1j * p[..., 1], p[..., 2])


class OrientedLine(NamedTuple):
    xi: np.ndarray | complex
    eta: np.ndarray | complex


def _require_chart(xi):
    xi = np.asarray(xi, dtype=complex)
    bad = ~np.isnan(xi) & ~(np.abs(xi) <= CHART_LIMIT)
    if np.any(bad):
        raise ChartEscape("direction outside the stereographic chart (south pole)")
    return xi


def _scalar(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def dir_to_vector(xi):
    """Unit 3-vector(s) for chart coordinate(s) ``xi``; shape ``xi.shape + (3,)``."""
    xi = _require_chart(xi)
    q = 1.0 + (xi * xi.conj()).real
    return np.stack([2 * xi.real / q, 2 * xi.imag / q, (2.0 - q) / q], axis=-1)


def vector_to_dir(v):
    """Chart coordinate of a (not necessarily unit) direction vector.

    Uses whichever of the two equivalent expressions is better conditioned,
    so only directions within ~1e-16 of (0, 0, -1) escape.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    w = x + 1j * y
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = w / (1.0 + z)
        lower = (1.0 - z) / np.conj(w)
    xi = np.where(z >= 0, upper, lower)
    if np.any(np.isfinite(z) & ~np.isfinite(xi)):
        raise ChartEscape("direction is the south pole")
    return _scalar(_require_chart(xi))


def line_from_point_dir(p: EuclidPoint, xi):
    """``eta`` of the oriented line through ``p`` with direction ``xi``."""
    xi = _require_chart(xi)
    z, t = np.asarray(p[0], dtype=complex), np.asarray(p[1], dtype=float)
    return _scalar(0.5 * (z - 2 * t * xi - z.conj() * xi * xi))


def affine_param(p: EuclidPoint, xi):
    """Signed distance of ``p`` from the foot point, along ``dir_to_vector(xi)``."""
    xi = _require_chart(xi)
    z, t = np.asarray(p[0], dtype=complex), np.asarray(p[1], dtype=float)
    q = 1.0 + (xi * xi.conj()).real
    return _scalar(((xi.conj() * z).real * 2 + (2.0 - q) * t) / q)


def point_from_line(xi, eta, r) -> EuclidPoint:
    """Point at affine distance ``r`` along the line ``(xi, eta)``."""
    xi = _require_chart(xi)
    eta = np.asarray(eta, dtype=complex)
    r = np.asarray(r, dtype=float)
    q = 1.0 + (xi * xi.conj()).real
    z = (2 * (eta - eta.conj() * xi * xi) + 2 * xi * q * r) / q**2
    t = (-4 * (eta * xi.conj()).real + (1.0 - (xi * xi.conj()).real ** 2) * r) / q**2
    return EuclidPoint(_scalar(z), _scalar(t))


def antipode(xi):
    """Chart coordinate of the opposite direction, ``-1/conj(xi)``."""
    xi = _require_chart(xi)
    if np.any(xi == 0):
        raise ChartEscape("antipode of the north pole is the south pole")
    return _scalar(-1.0 / xi.conj())


def reverse_line(xi, eta) -> OrientedLine:
    """The same line with the opposite orientation."""
    xi = _require_chart(xi)
    if np.any(xi == 0):
        raise ChartEscape("reversing a vertical line leaves the chart")
    eta = np.asarray(eta, dtype=complex)
    return OrientedLine(_scalar(-1.0 / xi.conj()), _scalar(-eta.conj() / xi.conj() ** 2))


@dataclass(frozen=True)
class MobiusRotation:
    """Rotation of R^3 about the origin acting on the chart by
    ``xi -> (alpha xi - conj(beta)) / (beta xi + conj(alpha))``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")

    @classmethod
    def identity(cls):
        return cls(1.0 + 0j, 0j)

    @classmethod
    def sending_to_infinity(cls, xi_bad):
        """The rotation that moves direction ``xi_bad`` to the south pole."""
        s = np.sqrt(1.0 + abs(xi_bad) ** 2)
        return cls(complex(-np.conj(xi_bad) / s), complex(1.0 / s))

    @property
    def escape_direction(self):
        """Unit vector of the direction this rotation sends out of the chart."""
        if self.beta == 0:
            return np.array([0.0, 0.0, -1.0])
        return dir_to_vector(-np.conj(self.alpha) / self.beta)

    def denominator(self, xi):
        return self.beta * np.asarray(xi, dtype=complex) + np.conj(self.alpha)

    def apply(self, xi):
        xi = _require_chart(xi)
        den = self.denominator(xi)
        if np.any(np.abs(den) * CHART_LIMIT < 1.0):
            raise ChartEscape("rotation sends this direction to the south pole")
        return _scalar((self.alpha * xi - np.conj(self.beta)) / den)

    def apply_line(self, xi, eta) -> OrientedLine:
        xi = _require_chart(xi)
        den = self.denominator(xi)
        if np.any(np.abs(den) * CHART_LIMIT < 1.0):
            raise ChartEscape("rotation sends this direction to the south pole")
        eta = np.asarray(eta, dtype=complex)
        return OrientedLine(
            _scalar((self.alpha * xi - np.conj(self.beta)) / den), _scalar(eta / den**2)
        )

    def inverse(self):
        return MobiusRotation(complex(np.conj(self.alpha)), complex(-self.beta))

    def __matmul__(self, other):
        """Composition ``self @ other`` = apply ``other`` first."""
        a1, b1, a2, b2 = self.alpha, self.beta, other.alpha, other.beta
        alpha = a1 * a2 - np.conj(b1) * b2
        beta = b1 * a2 + np.conj(a1) * b2
        # renormalise to kill drift from repeated composition
        n = np.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        return MobiusRotation(complex(alpha / n), complex(beta / n))

    def matrix(self):
        """The 3x3 rotation matrix acting on direction vectors."""
        a, b = self.alpha, self.beta
        cols = []
        for xi in (1.0 + 0j, 1j, 0j):
            den = b * xi + np.conj(a)
            if abs(den) < 1e-14:
                cols.append(np.array([0.0, 0.0, -1.0]))
            else:
                cols.append(dir_to_vector((a * xi - np.conj(b)) / den))
        return np.stack(cols, axis=1)


def rotate_line(R: MobiusRotation, L: OrientedLine, r=0.0):
    """Rotate an oriented line (and a point on it, given by ``r``) about the origin.

    Rotations fix the origin, hence the foot point's distance, so ``r`` is
    returned unchanged.
    """
    return R.apply_line(L[0], L[1]), r


@dataclass(frozen=True)
class Translation:
    z0: complex
    t0: float

    @property
    def xyz(self):
        return np.array([self.z0.real, self.z0.imag, self.t0])


def translate_line(T: Translation, L: OrientedLine, r=0.0):
    """Translate a line by ``(z0, t0)``; returns the new line and the shifted ``r``."""
    xi = _require_chart(L[0])
    p0 = EuclidPoint(T.z0, T.t0)
    eta = np.asarray(L[1], dtype=complex) + line_from_point_dir(p0, xi)
    return OrientedLine(_scalar(xi), _scalar(eta)), _scalar(
        np.asarray(r, dtype=float) + affine_param(p0, xi)
    )


def mobius_apply(alpha, beta, xi, eta=None):
    """Elementwise rotation with per-element ``alpha``/``beta`` arrays.

    No chart checking; entries sent to infinity come back as inf/nan.
    """
    xi = np.asarray(xi, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        den = beta * xi + np.conj(alpha)
        xi2 = (alpha * xi - np.conj(beta)) / den
        if eta is None:
            return xi2
        return xi2, np.asarray(eta, dtype=complex) / den**2


#: Working frames for pipelines.  Their escape directions are the six
#: octahedron vertices, so any three directions leave at least one frame in
#: which all of them sit comfortably inside the chart.
CANDIDATE_FRAMES = (
    MobiusRotation.identity(),
    MobiusRotation.sending_to_infinity(-1.0),  # the fixed alpha = beta = 1/sqrt(2)
    MobiusRotation.sending_to_infinity(1.0),
    MobiusRotation.sending_to_infinity(1j),
    MobiusRotation.sending_to_infinity(-1j),
    MobiusRotation.sending_to_infinity(0.0),
)
_ESCAPES = np.stack([F.escape_direction for F in CANDIDATE_FRAMES])


def frame_arrays(frame_index, base: MobiusRotation | None = None):
    """Per-element ``(alpha, beta)`` of ``CANDIDATE_FRAMES[k] @ base.inverse()``."""
    inv = MobiusRotation.identity() if base is None else base.inverse()
    comp = [F @ inv for F in CANDIDATE_FRAMES]
    a = np.array([c.alpha for c in comp])
    b = np.array([c.beta for c in comp])
    k = np.asarray(frame_index)
    return a[k], b[k]


def choose_frame(*vectors):
    """Index into ``CANDIDATE_FRAMES`` keeping all given unit vectors far from
    the chart boundary.  NaN vectors are ignored."""
    score = np.full(np.shape(vectors[0])[:-1] + (len(CANDIDATE_FRAMES),), np.inf)
    for v in vectors:
        v = np.asarray(v, dtype=float)
        d = np.linalg.norm(v[..., None, :] - _ESCAPES, axis=-1)
        d = np.where(np.isnan(d), np.inf, d)
        score = np.minimum(score, d)
    return np.argmax(score, axis=-1)


def chart_vector(xi):
    """Like :func:`dir_to_vector` but maps inf to the south pole and keeps NaN."""
    xi = np.asarray(xi, dtype=complex)
    out = np.full(xi.shape + (3,), np.nan)
    big = np.isinf(xi) | (np.abs(xi) > CHART_LIMIT)
    ok = np.isfinite(xi) & ~big
    q = 1.0 + np.abs(xi[ok]) ** 2
    out[ok] = np.stack([2 * xi[ok].real / q, 2 * xi[ok].imag / q, (2.0 - q) / q], axis=-1)
    out[big] = (0.0, 0.0, -1.0)
    return out


def frame_transfer(k_from, k_to=None, base: MobiusRotation | None = None):
    """Per-element ``(alpha, beta)`` taking ``CANDIDATE_FRAMES[k_from]``
    coordinates to ``CANDIDATE_FRAMES[k_to]`` (or to ``base``, identity by
    default, when ``k_to`` is None)."""
    n = len(CANDIDATE_FRAMES)
    target = [MobiusRotation.identity() if base is None else base] if k_to is None else CANDIDATE_FRAMES
    table_a = np.empty((n, len(target)), dtype=complex)
    table_b = np.empty_like(table_a)
    for i, F in enumerate(CANDIDATE_FRAMES):
        for j, T in enumerate(target):
            g = T @ F.inverse()
            table_a[i, j], table_b[i, j] = g.alpha, g.beta
    kf = np.asarray(k_from)
    kt = np.zeros_like(kf) if k_to is None else np.asarray(k_to)
    return table_a[kf, kt], table_b[kf, kt]


def frame_matrices(k):
    """Stacked 3x3 matrices of ``CANDIDATE_FRAMES[k]`` (world -> frame coordinates)."""
    mats = np.stack([F.matrix() for F in CANDIDATE_FRAMES])
    return mats[np.asarray(k)]


def frame_centred_on(v) -> MobiusRotation:
    """A rotation whose chart puts the direction ``v`` at ``xi = 0``."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    if v[2] > 1.0 - 1e-15:
        return MobiusRotation.identity()
    # the antipode goes to the south pole, so v lands on the north pole
    return MobiusRotation.sending_to_infinity(complex(vector_to_dir(-v)))
