"""Brute-force Euclidean ray optics used to cross-check the twistor pipeline.

Nothing here knows about ``xi``/``eta`` coordinates: rays are plain
(origin, unit direction) pairs and surfaces are implicit functions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Miss

S_EPS = 1e-9


@dataclass
class Ray:
    origin: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.dir, dtype=float)
        self.dir = d / np.linalg.norm(d)

    def at(self, s):
        return self.origin + np.multiply.outer(s, self.dir)


def reflect_vector(d, n):
    """Mirror direction ``d`` in the plane with unit normal ``n``: ``d - 2 (d.n) n``."""
    d = np.asarray(d, dtype=float)
    n = np.asarray(n, dtype=float)
    return d - 2.0 * np.sum(d * n, axis=-1, keepdims=True) * n


def _unit(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return v / np.linalg.norm(v, axis=-1, keepdims=True)


class ImplicitSurface:
    """Zero set of ``f``; the gradient gives the outward normal.

    Built-in ``sphere``/``torus``/``plane`` shapes intersect analytically;
    anything else is marched with step ``1e-2 * scale`` inside the bounding
    ball and refined by bisection.
    """

    def __init__(self, f, gradient=None, scale=1.0, bound=(np.zeros(3), 10.0), kind="generic", params=None):
        self.f = f
        self._gradient = gradient
        self.scale = float(scale)
        self.bound = (np.asarray(bound[0], dtype=float), float(bound[1]))
        self.kind = kind
        self.params = dict(params or {})

    def __repr__(self):
        return f"ImplicitSurface({self.kind}, {self.params})"

    @classmethod
    def sphere(cls, center=(0.0, 0.0, 0.0), radius=1.0):
        c = np.asarray(center, dtype=float)
        return cls(
            lambda p: np.sum((p - c) ** 2, axis=-1) - radius**2,
            lambda p: 2.0 * (p - c),
            scale=radius,
            bound=(c, 1.01 * radius),
            kind="sphere",
            params={"center": c, "radius": float(radius)},
        )

    @classmethod
    def torus(cls, a=2.0, b=1.0):
        """Torus about the x3 axis: ``(sqrt(x1^2 + x2^2) - a)^2 + x3^2 = b^2``."""

        def f(p):
            rho = np.hypot(p[..., 0], p[..., 1])
            return (rho - a) ** 2 + p[..., 2] ** 2 - b**2

        def grad(p):
            rho = np.hypot(p[..., 0], p[..., 1])
            with np.errstate(invalid="ignore", divide="ignore"):
                k = 2.0 * (rho - a) / rho
                return np.stack([k * p[..., 0], k * p[..., 1], 2.0 * p[..., 2]], axis=-1)

        return cls(f, grad, scale=b, bound=(np.zeros(3), 1.01 * (a + b)), kind="torus",
                   params={"a": float(a), "b": float(b)})

    @classmethod
    def plane(cls, height=0.0):
        """The horizontal plane ``x3 = height`` with upward normal."""
        return cls(
            lambda p: p[..., 2] - height,
            lambda p: np.broadcast_to(np.array([0.0, 0.0, 1.0]), np.shape(p)),
            kind="plane",
            params={"height": float(height)},
        )

    def gradient(self, p):
        p = np.asarray(p, dtype=float)
        if self._gradient is not None:
            return self._gradient(p)
        h = 1e-6 * self.scale
        e = np.eye(3) * h
        return np.stack([(self.f(p + e[i]) - self.f(p - e[i])) / (2 * h) for i in range(3)], axis=-1)

    def normal(self, p):
        return _unit(self.gradient(p))

    # -- intersection ------------------------------------------------------

    def intersect(self, origins, dirs, s_min=S_EPS):
        """All hits ``s > s_min`` per ray, ascending, NaN-padded; shape (N, K)."""
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = _unit(np.atleast_2d(np.asarray(dirs, dtype=float)))
        o, d = np.broadcast_arrays(o, d)
        smin = np.broadcast_to(np.asarray(s_min, dtype=float), o.shape[:1])
        if self.kind == "plane":
            s = self._plane_roots(o, d)
        elif self.kind == "sphere":
            s = self._sphere_roots(o, d)
        elif self.kind == "torus":
            s = self._torus_roots(o, d)
        else:
            s = self._march(o, d, smin)
        s = np.where(s > smin[:, None] + S_EPS, s, np.nan)
        return np.sort(s, axis=1)

    def _plane_roots(self, o, d):
        h = self.params["height"]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (h - o[:, 2]) / d[:, 2]
        return np.where(np.isfinite(s), s, np.nan)[:, None]

    def _sphere_roots(self, o, d):
        c, R = self.params["center"], self.params["radius"]
        w = o - c
        b = np.sum(w * d, axis=1)
        cc = np.sum(w * w, axis=1) - R * R
        disc = b * b - cc
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        # numerically stable pair
        q = -(b + np.copysign(sq, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = q
            s2 = np.where(q != 0, cc / q, 0.0)
        s = np.stack([s1, s2], axis=1)
        s[~ok] = np.nan
        return s

    def _torus_roots(self, o, d):
        a, bb = self.params["a"], self.params["b"]
        # move each origin to the foot point to keep the quartic well scaled
        s0 = -np.sum(o * d, axis=1)
        o = o + s0[:, None] * d
        m = np.sum(o * d, axis=1)
        k = np.sum(o * o, axis=1) + a * a - bb * bb
        dxy = d[:, 0] ** 2 + d[:, 1] ** 2
        oxy = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
        pxy = o[:, 0] ** 2 + o[:, 1] ** 2
        c3 = 4 * m
        c2 = 4 * m * m + 2 * k - 4 * a * a * dxy
        c1 = 4 * m * k - 8 * a * a * oxy
        c0 = k * k - 4 * a * a * pxy
        comp = np.zeros((o.shape[0], 4, 4))
        comp[:, 0, :] = -np.stack([c3, c2, c1, c0], axis=1)
        comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
        roots = np.linalg.eigvals(comp)
        real = np.abs(roots.imag) <= 1e-6 * (1.0 + np.abs(roots.real))
        s = np.where(real, roots.real, np.nan)
        s = self._polish(o, d, s)
        return s + s0[:, None]

    def _polish(self, o, d, s, iters=4):
        for _ in range(iters):
            p = o[:, None, :] + s[..., None] * d[:, None, :]
            fp = self.f(p)
            df = np.sum(self.gradient(p) * d[:, None, :], axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(np.abs(df) > 1e-300, fp / df, 0.0)
            step = np.clip(step, -1e-3 * self.scale, 1e-3 * self.scale)
            s = s - np.where(np.isfinite(step), step, 0.0)
        p = o[:, None, :] + s[..., None] * d[:, None, :]
        # drop spurious roots that never reached the surface
        return np.where(np.abs(self.f(p)) < 1e-9, s, np.nan)

    def _march(self, o, d, smin):
        c, R = self.bound
        w = o - c
        b = np.sum(w * d, axis=1)
        disc = b * b - (np.sum(w * w, axis=1) - R * R)
        sq = np.sqrt(np.maximum(disc, 0.0))
        lo = np.maximum(-b - sq, smin + S_EPS)
        hi = -b + sq
        step = 1e-2 * self.scale
        n = int(np.ceil(np.nanmax(np.where(disc > 0, hi - lo, 0.0)) / step)) + 2 if np.any(disc > 0) else 2
        grid = lo[:, None] + step * np.arange(n)[None, :]
        vals = self.f(o[:, None, :] + grid[..., None] * d[:, None, :])
        inside = (grid <= hi[:, None]) & (disc[:, None] > 0)
        change = (np.sign(vals[:, :-1]) != np.sign(vals[:, 1:])) & inside[:, :-1] & inside[:, 1:]
        rows, cols = np.nonzero(change)
        a = grid[rows, cols]
        bnd = grid[rows, cols + 1]
        fa = vals[rows, cols]
        oo, dd = o[rows], d[rows]
        while np.any(bnd - a > 1e-12):
            mid = 0.5 * (a + bnd)
            fm = self.f(oo + mid[:, None] * dd)
            left = np.sign(fm) == np.sign(fa)
            a = np.where(left, mid, a)
            fa = np.where(left, fm, fa)
            bnd = np.where(left, bnd, mid)
        roots = 0.5 * (a + bnd)
        k = max(1, int(np.bincount(rows, minlength=o.shape[0]).max()) if rows.size else 1)
        out = np.full((o.shape[0], k), np.nan)
        slot = np.zeros(o.shape[0], dtype=int)
        for r_, s_ in zip(rows, roots):
            out[r_, slot[r_]] = s_
            slot[r_] += 1
        return out

    def first_hit(self, origins, dirs, s_min=S_EPS):
        """Nearest hit beyond ``s_min``: ``(s, point, outward_normal)``, NaN on miss."""
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = _unit(np.atleast_2d(np.asarray(dirs, dtype=float)))
        o, d = np.broadcast_arrays(o, d)
        s = self.intersect(o, d, s_min)[:, 0]
        p = o + s[:, None] * d
        n = self.normal(np.where(np.isfinite(p), p, 0.0))
        n[~np.isfinite(s)] = np.nan
        return s, p, n


def intersect_ray_surface(ray: Ray, S: ImplicitSurface):
    """All ``(s, point)`` with ``s > 1e-9``, ordered by ``s``; empty on a miss."""
    s = S.intersect(ray.origin[None, :], ray.dir[None, :])[0]
    s = s[np.isfinite(s)]
    return [(float(v), ray.at(v)) for v in s]


def trace_reflection(ray: Ray, S: ImplicitSurface) -> Ray:
    """The outgoing ray from the first hit, or :class:`Miss`."""
    hits = intersect_ray_surface(ray, S)
    if not hits:
        raise Miss("ray misses the surface")
    _, p = hits[0]
    n = S.normal(p)
    if np.dot(n, ray.dir) > 0:
        n = -n
    return Ray(p, reflect_vector(ray.dir, n))


def plane_source_rays(direction, half_width, n, distance=10.0, centre=(0.0, 0.0, 0.0)):
    """An ``n x n`` bundle of parallel rays, emitted from a square window
    ``distance`` behind ``centre`` (against ``direction``)."""
    d = _unit(direction)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = _unit(helper - np.dot(helper, d) * d)
    e2 = np.cross(d, e1)
    t = np.linspace(-half_width, half_width, n)
    uu, vv = np.meshgrid(t, t)
    origins = np.asarray(centre, dtype=float) - distance * d + uu[..., None] * e1 + vv[..., None] * e2
    origins = origins.reshape(-1, 3)
    return origins, np.broadcast_to(d, origins.shape).copy()


def point_source_rays(source, directions):
    d = _unit(directions)
    return np.broadcast_to(np.asarray(source, dtype=float), d.shape).copy(), d


def wavefront_by_path_length(origins, dirs, S: ImplicitSurface | None, total_path):
    """Equal-path-length wavefront after one reflection.

    Each ray travels ``total_path`` in total: to its first hit, then along
    the mirrored direction.  Returns ``(points, missed)``; missed rays get NaN.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=float))
    d = _unit(np.atleast_2d(np.asarray(dirs, dtype=float)))
    if S is None:
        return o + total_path * d, np.zeros(o.shape[0], dtype=bool)
    s, p, n = S.first_hit(o, d)
    missed = ~np.isfinite(s)
    if np.any(s[~missed] > total_path):
        raise ValueError("total_path is shorter than some hit distances")
    out = p + (total_path - s)[:, None] * reflect_vector(d, n)
    out[missed] = np.nan
    return out, missed
