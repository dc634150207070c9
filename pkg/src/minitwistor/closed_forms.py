"""Closed-form reflections: plane mirrors, plane and spherical wavefronts,
and a small gallery of surfaces with known twistor functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .congruence import ParametricSurface, TwistorSurface
from .errors import BranchUndefined, ChartEscape, DegenerateFocus, InvalidParams, UnknownCase
from .oracle import ImplicitSurface
from .reflection import _outgoing_eta, _reflect_direction
from .twistor import EuclidPoint, _require_chart, _scalar, affine_param, chart_vector, line_from_point_dir


def _c(x):
    return np.asarray(x, dtype=complex)


def reflect_in_plane(xi1, eta1):
    """Reflection of the line ``(xi1, eta1)`` in the x1x2-plane."""
    xi1 = _require_chart(xi1)
    if np.any(xi1 == 0):
        raise ChartEscape("a vertical ray reflects into the south pole")
    eta1 = _c(eta1)
    return _scalar(1.0 / xi1.conj()), _scalar(-eta1.conj() / xi1.conj() ** 2)


def plane_wave_by_surface_point(xi1, xi0, eta0, r0):
    """Reflected line of a plane wave with direction ``xi1``, labelled by the
    surface normal line ``(xi0, eta0, r0)`` at incidence."""
    xi0, xi1 = _require_chart(xi0), _require_chart(xi1)
    xi2 = _require_chart(_reflect_direction(xi0, xi1))
    return _scalar(xi2), _scalar(_outgoing_eta(xi0, _c(eta0), np.asarray(r0, float), xi1))


# -- gallery -----------------------------------------------------------------


@dataclass
class SurfaceGalleryEntry:
    """A reflecting surface: its normal-line description on one or more sheets
    plus the implicit form used by the oracle.  ``F``/``r`` are the first
    sheet's twistor function and potential (None for non-graph surfaces)."""

    name: str
    sheets: tuple
    implicit: ImplicitSurface
    params: dict = field(default_factory=dict)
    domain: float = 2.0

    @property
    def F(self) -> Callable | None:
        return getattr(self.sheets[0], "F", None)

    @property
    def r(self) -> Callable | None:
        return getattr(self.sheets[0], "r", None)

    @property
    def singular(self):
        return getattr(self.sheets[0], "singular", ())

    @property
    def mask_radius(self):
        return getattr(self.sheets[0], "mask_radius", 0.0)


def _sphere(center=(0.0, 0.0, 0.0), radius=1.0):
    c = np.asarray(center, dtype=float)
    if c.shape != (3,) or not np.all(np.isfinite(c)):
        raise InvalidParams(f"sphere center must be a finite 3-vector, got {center!r}")
    if not radius > 0:
        raise InvalidParams(f"sphere radius must be positive, got {radius!r}")
    p = EuclidPoint(complex(c[0], c[1]), float(c[2]))

    def F(xi):
        return line_from_point_dir(p, _c(xi))

    def r(xi):
        return radius + affine_param(p, _c(xi))

    S = TwistorSurface(F, r, name="sphere", implicit=ImplicitSurface.sphere(c, radius))
    return SurfaceGalleryEntry("sphere", (S,), S.implicit, {"center": c, "radius": float(radius)})


def _torus(a=2.0, b=1.0, mask_radius=1e-2):
    if not (b > 0 and a > b):
        raise InvalidParams(f"torus needs a > b > 0, got a={a!r}, b={b!r}")
    if mask_radius < 0:
        raise InvalidParams("mask_radius must be non-negative")

    def sheet(sign):
        def F(xi):
            xi = _c(xi)
            m = np.abs(xi)
            with np.errstate(invalid="ignore", divide="ignore"):
                return sign * 0.5 * a * (1.0 - m * m) * xi / m

        def r(xi):
            m = np.abs(_c(xi))
            return sign * 2.0 * a * m / (1.0 + m * m) + b

        return F, r

    implicit = ImplicitSurface.torus(a, b)
    max_abs = 1.0 / mask_radius if mask_radius > 0 else None
    outer = TwistorSurface(*sheet(1.0), singular=(0j,), mask_radius=mask_radius, max_abs=max_abs,
                           implicit=implicit, name="torus-outer")
    inner = TwistorSurface(*sheet(-1.0), singular=(0j,), mask_radius=mask_radius, max_abs=max_abs,
                           implicit=implicit, name="torus-inner")
    return SurfaceGalleryEntry("torus", (outer, inner), implicit,
                               {"a": float(a), "b": float(b), "mask_radius": float(mask_radius)})


def _plane(height=0.0):
    h = float(height)
    S = ParametricSurface(
        lines_fn=lambda nu: (0j, 0.5 * nu, h),
        hit_param=lambda p, n: p[..., 0] + 1j * p[..., 1],
        implicit=ImplicitSurface.plane(h),
        name="plane",
    )
    return SurfaceGalleryEntry("plane", (S,), S.implicit, {"height": h})


_GALLERY = {"sphere": _sphere, "torus": _torus, "plane": _plane}


def gallery(name, **params) -> SurfaceGalleryEntry:
    """Build a gallery surface: ``sphere(center, radius)``, ``torus(a, b,
    mask_radius)`` or ``plane(height)``."""
    try:
        build = _GALLERY[name]
    except KeyError:
        raise InvalidParams(f"unknown gallery surface {name!r}") from None
    try:
        return build(**params)
    except TypeError as e:
        raise InvalidParams(str(e)) from None


def gallery_names():
    return tuple(_GALLERY)


# -- plane wavefront parameterised by the outgoing direction ---------------


def _as_sheet(S):
    return S.sheets[0] if hasattr(S, "sheets") else S


def _normal_root(xi, xi1, s):
    """Normal direction reflecting the wave into ``xi`` (root ``s`` = +-1).

    The two roots are antipodal.  The cancelling root is rewritten via
    ``(-b + s w)(b + s w) = |beta|^2`` so it stays accurate near ``xi = 0``.
    """
    x2 = np.abs(xi) ** 2
    b = 1.0 - x2 * np.abs(xi1) ** 2
    beta = xi * (1.0 + xi.conj() * xi1) + xi1 * (1.0 + xi * xi1.conj())
    w = np.sqrt(b * b + np.abs(beta) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (-b + s * w) / beta.conj()
        stable = beta / (b + s * w)
    return np.where(s * b >= 0, stable, direct)


def plane_wave_by_direction(xi, xi1, S, branch=None):
    """Twistor function ``F2(xi)`` of a plane wave reflected off ``S``,
    labelled by the outgoing direction ``xi``.

    ``xi1`` is the *antipode* of the propagation direction: the wave moves
    along ``-1/conj(xi1)`` (so ``xi1 = 0`` means straight down).
    ``branch`` is +1, -1 or None; None picks, per point, the root whose
    surface normal faces the incoming wave.  Returns ``(F2, xi0, sign)``.
    """
    xi, xi1 = _require_chart(xi), _require_chart(xi1)
    xi, xi1 = np.broadcast_arrays(xi, xi1)
    sheet = _as_sheet(S)
    rad = (1 + np.abs(xi) ** 2) * (1 + np.abs(xi1) ** 2) * (1 + xi.conj() * xi1) * (1 + xi * xi1.conj())
    if np.any(rad.real < -1e-12 * np.abs(rad)):
        raise BranchUndefined("negative radicand: direction not reachable by one reflection")
    if branch is None:
        # physical root: normal has positive component along dir(xi1)
        xi0p = _normal_root(xi, xi1, 1.0)
        facing = np.sum(chart_vector(xi0p) * chart_vector(xi1), axis=-1)
        s = np.where(facing >= 0, 1.0, -1.0)
    else:
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        s = np.full(xi.shape, float(branch))
    xi0 = _normal_root(xi, xi1, s)
    phase = 1.0 + xi * xi1.conj()
    mag = np.abs(phase)
    unit = np.where(mag > 0, phase / np.where(mag > 0, mag, 1.0), 1.0)
    gamma = s * np.sqrt((1 + np.abs(xi) ** 2) / (1 + np.abs(xi1) ** 2)) * unit
    with np.errstate(invalid="ignore", divide="ignore"):
        F0 = _c(sheet.F(xi0))
        r0 = np.asarray(sheet.r(xi0), dtype=float)
    F2 = 0.25 * ((1 + gamma) ** 2 * F0 - (xi - gamma * xi1) ** 2 * F0.conj() + 2 * (xi1 - xi) * gamma * r0)
    return _scalar(F2), _scalar(xi0), _scalar(s)


def plane_wave_down_axis(xi, S):
    """``F2(xi)`` for a plane wave moving down the x3-axis (physical root)."""
    xi = _require_chart(xi)
    x = np.abs(xi) ** 2
    root = np.sqrt(1.0 + x)
    with np.errstate(invalid="ignore", divide="ignore"):
        xi0 = xi / (1.0 + root)
        sheet = _as_sheet(S)
        F0 = _c(sheet.F(xi0))
        r0 = np.asarray(sheet.r(xi0), dtype=float)
    return _scalar(0.25 * ((1 + root) ** 2 * F0 - xi**2 * F0.conj() - 2 * xi * root * r0))


# -- spherical wavefront with focus at the origin ---------------------------


def spherical_wave_reflection(xi0, eta0, r0, branch=None):
    """Reflected line ``(xi2, eta2)`` of the spherical wave focused at the
    origin, labelled by the surface normal line ``(xi0, eta0, r0)``.

    ``branch`` +1/-1 picks the radical sign; None chooses, per point, the
    sign whose outgoing direction has positive component along the normal.
    """
    xi0 = _require_chart(xi0)
    eta0 = _c(eta0)
    r0 = np.asarray(r0, dtype=float)
    xi0, eta0, r0 = np.broadcast_arrays(xi0, eta0, r0)
    q = 1.0 + np.abs(xi0) ** 2
    beta0 = np.sqrt(4 * np.abs(eta0) ** 2 + q * q * r0 * r0)
    if np.any(beta0 == 0):
        raise DegenerateFocus("surface passes through the focus")

    def lines(s):
        den = 2 * (xi0 * eta0.conj() - xi0.conj() * eta0) - q * q * r0 + s * (2.0 - q) * beta0
        with np.errstate(invalid="ignore", divide="ignore"):
            xi2 = (2 * eta0 + 2 * eta0.conj() * xi0**2 + s * 2 * xi0 * beta0) / den
            a1 = (2 * eta0.conj() * xi0 - q * r0 + s * beta0) / den
            a2 = (2 * eta0 + xi0 * q * r0 + s * xi0 * beta0) / den
            a3 = (4 * np.abs(eta0) ** 2 * xi0 - (eta0 - eta0.conj() * xi0**2) * q * r0
                  + s * (eta0 + eta0.conj() * xi0**2) * beta0) / den**2
        eta2 = a1**2 * eta0 - a2**2 * eta0.conj() - 2 * q * a3 * r0
        return xi2, eta2

    if branch is None:
        xp, ep = lines(1.0)
        xm, em = lines(-1.0)
        out_p = np.sum(chart_vector(xp) * chart_vector(xi0), axis=-1) >= 0
        xi2, eta2 = np.where(out_p, xp, xm), np.where(out_p, ep, em)
    else:
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        xi2, eta2 = lines(float(branch))
    return _scalar(xi2), _scalar(eta2)


# -- reference closed forms ---------------------------------------------------


@dataclass
class ReferenceSolution:
    """Closed-form reflected wave.  ``param`` is ``"xi"`` when the congruence
    is a graph over the outgoing direction (``xi2`` is then None) or
    ``"xi0"`` when it is labelled by the surface normal at incidence.
    ``r2`` is defined up to an additive constant."""

    F2: Callable
    r2: Callable
    xi2: Callable | None = None
    param: str = "xi"

    def __iter__(self):
        return iter((self.F2, self.r2))


def _sphere_plane_axis():
    def F2(xi):
        xi = _c(xi)
        return -0.5 * xi * np.sqrt(1 + np.abs(xi) ** 2)

    return ReferenceSolution(F2, lambda xi: 2.0 / np.sqrt(1 + np.abs(_c(xi)) ** 2))


def _torus_plane_axis():
    def F2(xi):
        xi = _c(xi)
        m = np.abs(xi)
        with np.errstate(invalid="ignore", divide="ignore"):
            return 0.5 * (2 * (1 - m * m) - m * np.sqrt(1 + m * m)) * xi / m

    def r2(xi):
        m = np.abs(_c(xi))
        return (4 * m + 2 * np.sqrt(1 + m * m)) / (1 + m * m)

    return ReferenceSolution(F2, r2)


def _torus_plane_general(xi1):
    if xi1 is None:
        raise UnknownCase("torus-plane-general needs xi1")
    x1 = complex(xi1)

    def den(x0):
        return (1 - np.abs(x0) ** 2) * np.conj(x1) - 2 * x0.conj()

    def eta2(x0):
        x0 = _c(x0)
        m2 = np.abs(x0) ** 2
        m = np.sqrt(m2)
        d = x0.conj() - np.conj(x1)
        a = 1 + x0 * np.conj(x1)
        num = (d * d * x0 - a * a * x0.conj()) * (1 - m2) + d * a * ((1 + m2) * m + 4 * m2)
        with np.errstate(invalid="ignore", divide="ignore"):
            return num / (m * den(x0) ** 2)

    def r2(x0):
        x0 = _c(x0)
        m2 = np.abs(x0) ** 2
        m = np.sqrt(m2)
        k1 = np.abs(x1) ** 2
        t1 = 2 * (np.abs(x0.conj() - np.conj(x1)) ** 2 - np.abs(1 + x0 * np.conj(x1)) ** 2) * m
        t2 = (m2 * (1 - k1) - (x0.conj() * x1 + x0 * np.conj(x1)).real) * (1 + m2)
        return 4 * (t1 + t2) / ((1 + k1) * (1 + m2) ** 2)

    def xi2(x0):
        x0 = _c(x0)
        return _reflect_direction(x0, np.asarray(x1, dtype=complex))

    return ReferenceSolution(eta2, r2, xi2, param="xi0")


def _sphere_spherical():
    def parts(x0):
        x0 = _c(x0)
        x = np.abs(x0) ** 2
        return x0, x, np.sqrt(1 + 10 * x + 9 * x * x)

    def xi2(x0):
        x0, x, b = parts(x0)
        return 2 * x0 * (2 * (1 + x) + b) / (1 - 2 * x - 3 * x * x + (1 - x) * b)

    def eta2(x0):
        x0, x, b = parts(x0)
        num = 4 * x0 * (1 - 3 * x) * (1 + 3 * x + b)
        return num / (1 + x - 7 * x * x + 9 * x**3 + (1 - 4 * x + 3 * x * x) * b)

    def r2(x0):
        _, x, b = parts(x0)
        return -2 * (1 - 3 * x) ** 2 * b / (1 + 11 * x + 19 * x * x + 9 * x**3)

    return ReferenceSolution(eta2, r2, xi2, param="xi0")


REFERENCE_CASES = (
    "sphere-plane-axis",
    "torus-plane-axis",
    "torus-plane-general",
    "sphere-at-(0,0,-2)-spherical",
)


def reference_reflected(name, case=None, xi1=None) -> ReferenceSolution:
    """Known reflected waves used as regression references.

    ``name`` may be a full case id from :data:`REFERENCE_CASES`, or a surface
    name plus ``case`` (``"plane-axis"``, ``"plane-general"``,
    ``"spherical"``).  The torus cases assume ``a = 2, b = 1``; the spherical
    case is the unit sphere centred at ``(0, 0, -2)`` with focus at the origin.
    """
    key = name if case is None else f"{name}-{case}"
    if key == "sphere-spherical":
        key = "sphere-at-(0,0,-2)-spherical"
    if key == "sphere-plane-axis":
        return _sphere_plane_axis()
    if key == "torus-plane-axis":
        return _torus_plane_axis()
    if key == "torus-plane-general":
        return _torus_plane_general(xi1)
    if key == "sphere-at-(0,0,-2)-spherical":
        return _sphere_spherical()
    raise UnknownCase(key)
