"""Two-parameter families of oriented lines and their orthogonal surfaces.

A congruence is a map ``nu -> (xi(nu), eta(nu))``.  It is orthogonal to a
family of surfaces exactly when the real potential ``r`` solving

    dbar r = 2 (eta * conj(d xi) + conj(eta) * dbar xi) / (1 + |xi|^2)^2

exists.  The right-hand side is ``2 * theta`` below; ``theta`` is unchanged
by rotations about the origin, which lets every node be evaluated in
whichever candidate frame keeps its direction well inside the chart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._parallel import map_chunks
from .errors import NotIntegrable, PathMismatch
from .twistor import (
    CHART_LIMIT,
    EuclidPoint,
    MobiusRotation,
    chart_vector,
    choose_frame,
    frame_arrays,
    frame_matrices,
    mobius_apply,
    point_from_line,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _default_step(nu, rel):
    return rel * np.maximum(1.0, np.abs(nu))


def _partials(f, nu, h, richardson):
    """Central-difference partials of ``f`` in u and v, where ``nu = u + iv``."""

    def central(step):
        fp, fm = f(nu + step), f(nu - step)
        gp, gm = f(nu + 1j * step), f(nu - 1j * step)
        if isinstance(fp, tuple):
            fu = tuple((a - b) / (2 * step) for a, b in zip(fp, fm))
            fv = tuple((a - b) / (2 * step) for a, b in zip(gp, gm))
        else:
            fu, fv = (fp - fm) / (2 * step), (gp - gm) / (2 * step)
        return fu, fv

    fu, fv = central(h)
    if not richardson:
        return fu, fv
    fu2, fv2 = central(h / 2)
    if isinstance(fu, tuple):
        fu = tuple((4 * b - a) / 3 for a, b in zip(fu, fu2))
        fv = tuple((4 * b - a) / 3 for a, b in zip(fv, fv2))
    else:
        fu, fv = (4 * fu2 - fu) / 3, (4 * fv2 - fv) / 3
    return fu, fv


def wirtinger(f, nu, which="dbar", h=None, richardson=True):
    """Wirtinger derivative of ``f`` at ``nu`` by central differences.

    ``which`` is ``"d"`` for d/dnu = (d/du - i d/dv)/2 or ``"dbar"`` for
    d/dnu-bar = (d/du + i d/dv)/2.  ``f`` must accept complex arrays; it may
    return a tuple of arrays, in which case a tuple is returned.
    """
    nu = np.asarray(nu, dtype=complex)
    if h is None:
        h = _default_step(nu, 1e-5)
    fu, fv = _partials(f, nu, h, richardson)
    if which not in ("d", "dbar"):
        raise ValueError(f"which must be 'd' or 'dbar', not {which!r}")
    s = 1j if which == "dbar" else -1j
    if isinstance(fu, tuple):
        return tuple(0.5 * (a + s * b) for a, b in zip(fu, fv))
    return 0.5 * (fu + s * fv)


def wirtinger_pair(f, nu, h=None, richardson=True):
    """Both Wirtinger derivatives ``(d f, dbar f)`` from one set of samples."""
    nu = np.asarray(nu, dtype=complex)
    if h is None:
        h = _default_step(nu, 1e-5)
    fu, fv = _partials(f, nu, h, richardson)
    return 0.5 * (fu - 1j * fv), 0.5 * (fu + 1j * fv)


@dataclass
class Grid:
    """Rectangular lattice ``nu[i, j] = u[j] + 1j * v[i]`` with an exclusion mask."""

    u: np.ndarray
    v: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.mask is None:
            self.mask = np.zeros(self.shape, dtype=bool)

    @classmethod
    def box(cls, umin, umax, vmin, vmax, n=128, m=None, disk=None, mask_radius=0.0, singular=()):
        """Lattice over a box; ``disk`` clips to ``|nu| <= disk``; nodes within
        ``mask_radius`` of any point in ``singular`` are excluded."""
        m = n if m is None else m
        g = cls(np.linspace(umin, umax, n), np.linspace(vmin, vmax, m))
        nu = g.nu
        if disk is not None:
            g.mask |= np.abs(nu) > disk
        for s in singular:
            g.mask |= np.abs(nu - s) < mask_radius
        return g

    @property
    def shape(self):
        return (self.v.size, self.u.size)

    @property
    def nu(self):
        return self.u[None, :] + 1j * self.v[:, None]

    @property
    def active(self):
        return ~self.mask


@dataclass
class ParametricCongruence:
    """A congruence ``nu -> (xi, eta)`` expressed in coordinates rotated by ``frame``.

    ``derivatives`` (optional) returns ``(d xi, dbar xi, d eta, dbar eta)``;
    entries may be ``None``.  ``start`` gives the affine parameter at which
    each ray is emitted; ``None`` means rays arrive from infinity.
    ``potential`` (optional) is a known exact solution of the potential
    equation, used as a reference and to seed disconnected grid pieces.
    """

    map: Callable
    derivatives: Callable | None = None
    frame: MobiusRotation = field(default_factory=MobiusRotation.identity)
    start: Callable | None = None
    info: dict = field(default_factory=dict)
    potential: Callable | None = None

    @property
    def deriv_mode(self):
        return "finite-difference" if self.derivatives is None else "analytic-closure"

    def __call__(self, nu):
        return self.map(np.asarray(nu, dtype=complex))

    def evaluate(self, nu, frame_index=None):
        """``(xi, eta)`` in the native frame, or in ``CANDIDATE_FRAMES[frame_index]``."""
        xi, eta = self.map(np.asarray(nu, dtype=complex))
        if frame_index is None:
            return xi, eta
        a, b = frame_arrays(frame_index, self.frame)
        return mobius_apply(a, b, xi, eta)

    def directions(self, nu):
        """World-frame unit direction vectors."""
        xi, _ = self.map(np.asarray(nu, dtype=complex))
        return chart_vector(xi) @ self.frame.inverse().matrix().T

    def start_param(self, nu):
        nu = np.asarray(nu, dtype=complex)
        if self.start is None:
            return np.full(nu.shape, -np.inf)
        return np.broadcast_to(np.asarray(self.start(nu), dtype=float), nu.shape)

    def check_derivatives(self, nu, tol=1e-6):
        """Compare the analytic closure against finite differences.

        Returns the largest discrepancy; raises ``ValueError`` above ``tol``.
        """
        if self.derivatives is None:
            return 0.0
        nu = np.asarray(nu, dtype=complex)
        d_xi, db_xi = wirtinger_pair(lambda w: self.map(w)[0], nu)
        d_eta, db_eta = wirtinger_pair(lambda w: self.map(w)[1], nu)
        worst = 0.0
        for given, fd in zip(self.derivatives(nu), (d_xi, db_xi, d_eta, db_eta)):
            if given is None:
                continue
            err = np.abs(np.broadcast_to(given, fd.shape) - fd)
            worst = max(worst, float(np.nanmax(err)) if err.size else 0.0)
        if worst > tol:
            raise ValueError(f"analytic derivatives disagree with finite differences by {worst:.3g}")
        return worst


def _theta(c: ParametricCongruence, nu, h=None):
    """``(eta conj(d xi) + conj(eta) dbar xi) / (1 + |xi|^2)^2`` at each ``nu``."""
    nu = np.asarray(nu, dtype=complex)
    out = np.full(nu.shape, np.nan + 0j)
    todo = np.ones(nu.shape, dtype=bool)
    if c.derivatives is not None:
        xi, eta = c.evaluate(nu)
        ok = np.isfinite(xi) & (np.abs(xi) <= 10.0)
        if np.any(ok):
            d_xi, db_xi = c.derivatives(nu)[:2]
            d_xi = np.broadcast_to(np.asarray(d_xi, dtype=complex), nu.shape)
            db_xi = np.broadcast_to(np.asarray(db_xi, dtype=complex), nu.shape)
            q = 1.0 + np.abs(xi) ** 2
            th = (eta * np.conj(d_xi) + np.conj(eta) * db_xi) / q**2
            out[ok] = th[ok]
            todo = ~ok
    if not np.any(todo):
        return out
    sub = nu[todo]
    k = choose_frame(c.directions(sub))
    xi, eta = c.evaluate(sub, k)
    d_xi, db_xi = wirtinger_pair(lambda w: c.evaluate(w, k)[0], sub, h=h)
    q = 1.0 + np.abs(xi) ** 2
    with np.errstate(invalid="ignore", over="ignore"):
        out[todo] = (eta * np.conj(d_xi) + np.conj(eta) * db_xi) / q**2
    return out


def potential_form(c: ParametricCongruence, nu):
    """Right-hand side of the potential equation: the required ``dbar r``."""
    return 2.0 * _theta(c, nu)


_LADDER = (1.0, 1 / 3, 1 / 10, 1 / 30, 1 / 100)


def integrability_residual(c: ParametricCongruence, nu, h=None):
    """``|d theta - conj(d theta)|``; zero exactly for integrable congruences.

    The outer derivative uses a coarser step than the inner one so inner
    rounding noise is not amplified.  With ``h`` None the step is picked per
    node from ``1e-3 * max(1, |nu|)`` times ``_LADDER``: the estimate where two
    consecutive steps agree best wins, which keeps truncation error in check
    near grazing incidence where the congruence bends sharply.
    """
    nu = np.asarray(nu, dtype=complex)
    if h is not None:
        d_theta = wirtinger(lambda w: _theta(c, w), nu, "d", h=h)
        return np.abs(d_theta - np.conj(d_theta))
    h0 = _default_step(nu, 1e-3)
    est = np.stack([wirtinger(lambda w: _theta(c, w), nu, "d", h=h0 * f) for f in _LADDER])
    gaps = np.abs(np.diff(est, axis=0))
    gaps = np.where(np.isnan(gaps), np.inf, gaps)
    best = np.argmin(gaps, axis=0) + 1
    pick = np.take_along_axis(est, best[None, ...], axis=0)[0]
    return np.abs(pick - np.conj(pick))


@dataclass
class TwistorSurface:
    """A surface as a graph ``eta = F(xi)`` over its normal directions, with
    potential ``r`` (signed distance of the surface point along the normal).

    ``implicit`` is an optional oracle surface used to seed incidence solves.
    Nodes within ``mask_radius`` of ``singular`` points are outside the domain.
    """

    F: Callable
    r: Callable
    singular: tuple = ()
    mask_radius: float = 0.0
    max_abs: float | None = None
    implicit: object = None
    name: str = "surface"
    frame: MobiusRotation = field(default_factory=MobiusRotation.identity)

    def lines(self, nu):
        nu = np.asarray(nu, dtype=complex)
        return nu, np.asarray(self.F(nu), dtype=complex), np.asarray(self.r(nu), dtype=float)

    def valid(self, nu):
        nu = np.asarray(nu, dtype=complex)
        ok = np.isfinite(nu)
        if self.max_abs is not None:
            ok &= np.abs(nu) <= self.max_abs
        for s in self.singular:
            ok &= np.abs(nu - s) >= self.mask_radius
        return ok

    def param_from_hit(self, point, normal):
        """Surface parameter for an oracle hit: the chart coordinate of the normal."""
        n = np.asarray(normal, dtype=float) @ self.frame.matrix().T
        return np.asarray(chart_vector_to_xi(n), dtype=complex)

    def point(self, nu) -> EuclidPoint:
        return point_from_line(*self.lines(nu))

    def congruence(self) -> ParametricCongruence:
        one = np.complex128(1.0)
        return ParametricCongruence(
            map=lambda nu: (nu, np.asarray(self.F(nu), dtype=complex)),
            derivatives=lambda nu: (one, 0j, None, None),
            frame=self.frame,
        )


@dataclass
class ParametricSurface:
    """A surface given by an arbitrary parameterisation of its normal lines,
    ``nu -> (xi0, eta0, r0)``, for surfaces (like planes) that are not graphs
    over their normal directions.

    ``hit_param(point, normal)`` recovers ``nu`` from an oracle hit, both
    given in ``frame`` coordinates.
    """

    lines_fn: Callable
    hit_param: Callable
    valid_fn: Callable | None = None
    implicit: object = None
    name: str = "surface"
    frame: MobiusRotation = field(default_factory=MobiusRotation.identity)

    def lines(self, nu):
        nu = np.asarray(nu, dtype=complex)
        xi, eta, r = self.lines_fn(nu)
        return (
            np.broadcast_to(np.asarray(xi, dtype=complex), nu.shape),
            np.broadcast_to(np.asarray(eta, dtype=complex), nu.shape),
            np.broadcast_to(np.asarray(r, dtype=float), nu.shape),
        )

    def valid(self, nu):
        nu = np.asarray(nu, dtype=complex)
        ok = np.isfinite(nu)
        if self.valid_fn is not None:
            ok &= self.valid_fn(nu)
        return ok

    def param_from_hit(self, point, normal):
        M = self.frame.matrix()
        return np.asarray(
            self.hit_param(np.asarray(point) @ M.T, np.asarray(normal) @ M.T), dtype=complex
        )

    def point(self, nu) -> EuclidPoint:
        return point_from_line(*self.lines(nu))


def chart_vector_to_xi(v):
    """NaN-tolerant inverse of :func:`chart_vector` (south pole becomes inf)."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        w = x + 1j * y
        return np.where(z >= 0, w / (1.0 + z), (1.0 - z) / np.conj(w))


def potential_residual(S: TwistorSurface, xi):
    """``|dbar r - 2 F / (1 + |xi|^2)^2|`` for a graph surface."""
    xi = np.asarray(xi, dtype=complex)
    lhs = wirtinger(lambda w: np.asarray(S.r(w), dtype=complex), xi, "dbar")
    return np.abs(lhs - 2.0 * np.asarray(S.F(xi)) / (1.0 + np.abs(xi) ** 2) ** 2)


def congruence_potential_residual(c: ParametricCongruence, r, nu):
    """Same check for a general parameterisation: ``|dbar r - potential_form|``."""
    nu = np.asarray(nu, dtype=complex)
    lhs = wirtinger(lambda w: np.asarray(r(w), dtype=complex), nu, "dbar")
    return np.abs(lhs - potential_form(c, nu))


@dataclass
class PotentialSolution:
    grid: Grid
    r: np.ndarray
    r_row: np.ndarray
    r_col: np.ndarray
    discrepancy: float
    integrability: float
    base: tuple

    @property
    def defined(self):
        return np.isfinite(self.r)


def _sweep_rows(r, H):
    n = r.shape[1]
    for j in range(1, n):
        m = np.isnan(r[:, j]) & np.isfinite(r[:, j - 1]) & np.isfinite(H[:, j - 1])
        r[m, j] = r[m, j - 1] + H[m, j - 1]
    for j in range(n - 2, -1, -1):
        m = np.isnan(r[:, j]) & np.isfinite(r[:, j + 1]) & np.isfinite(H[:, j])
        r[m, j] = r[m, j + 1] - H[m, j]


def _sweep_cols(r, V):
    _sweep_rows(r.T, V.T)


def _integrate(r0, H, V, rows_first):
    r = r0.copy()
    sweeps = (_sweep_rows, _sweep_cols) if rows_first else (_sweep_cols, _sweep_rows)
    edges = (H, V) if rows_first else (V, H)
    known = -1
    while np.count_nonzero(np.isfinite(r)) != known:
        known = np.count_nonzero(np.isfinite(r))
        for sweep, e in zip(sweeps, edges):
            sweep(r, e)
    return r


def solve_potential(
    c: ParametricCongruence,
    grid: Grid,
    base_nu=None,
    r_base=0.0,
    check_integrability=True,
    integrability_tol=1e-5,
    path_tol=1e-4,
    stride=1,
    seed=None,
):
    """Invert the dbar operator by integrating the exact 1-form ``dr`` on ``grid``.

    ``dr = 4 Re(theta) du + 4 Im(theta) dv`` is integrated edge by edge with
    4-point Gauss-Legendre quadrature, once along rows first and once along
    columns first.  The two answers must agree to ``path_tol``.

    Only the connected piece of the grid containing the base node is
    reached from it.  If ``seed`` (a callable giving a trusted potential) is
    supplied, every other piece starts from ``seed`` at its node closest to
    the grid centre; ``r_base`` is then ignored in favour of ``seed`` too.

    Raises
    ------
    NotIntegrable
        if the integrability residual exceeds ``integrability_tol`` at any
        checked node (every ``stride``-th node in each direction).
    PathMismatch
        if the two integration orders disagree by more than ``path_tol``.
    """
    nu = grid.nu
    nv, nn = grid.shape
    theta_nodes = map_chunks(lambda w: _theta(c, w), nu)
    bad_node = grid.mask | ~np.isfinite(theta_nodes)

    integ = 0.0
    if check_integrability:
        sel = np.zeros(grid.shape, dtype=bool)
        sel[::stride, ::stride] = True
        sel &= ~bad_node
        if np.any(sel):
            res = map_chunks(lambda w: integrability_residual(c, w), nu[sel])
            res = res[np.isfinite(res)]
            integ = float(res.max()) if res.size else 0.0
            if integ > integrability_tol:
                raise NotIntegrable(
                    f"integrability residual {integ:.3g} exceeds {integrability_tol:g}", integ
                )

    du = np.diff(grid.u)
    dv = np.diff(grid.v)
    hp = nu[:, :-1, None] + _GL_NODES * du[None, :, None]
    vp = nu[:-1, :, None] + 1j * _GL_NODES * dv[:, None, None]
    th_h = map_chunks(lambda w: _theta(c, w), hp)
    th_v = map_chunks(lambda w: _theta(c, w), vp)
    H = du[None, :] * np.sum(_GL_WEIGHTS * 4.0 * th_h.real, axis=-1)
    V = dv[:, None] * np.sum(_GL_WEIGHTS * 4.0 * th_v.imag, axis=-1)
    H[bad_node[:, :-1] | bad_node[:, 1:]] = np.nan
    V[bad_node[:-1, :] | bad_node[1:, :]] = np.nan

    if base_nu is None:
        centre = 0.5 * (grid.u[0] + grid.u[-1]) + 0.5j * (grid.v[0] + grid.v[-1])
        dist = np.where(bad_node, np.inf, np.abs(nu - centre))
    else:
        dist = np.abs(nu - base_nu)
    ib, jb = np.unravel_index(np.argmin(dist), grid.shape)
    if bad_node[ib, jb]:
        raise ValueError("base node of the potential is masked")

    r0 = np.full(grid.shape, np.nan)
    r0[ib, jb] = r_base if seed is None else float(np.asarray(seed(nu[ib, jb])))
    r_row = _integrate(r0, H, V, rows_first=True)
    if seed is not None:
        centre = 0.5 * (grid.u[0] + grid.u[-1]) + 0.5j * (grid.v[0] + grid.v[-1])
        while True:
            left = ~bad_node & np.isnan(r_row)
            if not np.any(left):
                break
            i, j = np.unravel_index(np.argmin(np.where(left, np.abs(nu - centre), np.inf)), grid.shape)
            val = float(np.asarray(seed(nu[i, j])))
            if not np.isfinite(val):
                bad_node[i, j] = True
                continue
            r0[i, j] = r_row[i, j] = val
            r_row = _integrate(r_row, H, V, rows_first=True)
    r_col = _integrate(r0, H, V, rows_first=False)
    both = np.isfinite(r_row) & np.isfinite(r_col)
    disc = float(np.max(np.abs(r_row[both] - r_col[both]))) if np.any(both) else 0.0
    if disc > path_tol:
        raise PathMismatch(f"path-integration orders differ by {disc:.3g}", disc)
    r = np.where(np.isfinite(r_row), r_row, r_col)
    return PotentialSolution(grid, r, r_row, r_col, disc, integ, (int(ib), int(jb)))


@dataclass
class WavefrontSample:
    """Reconstructed wavefront points; array fields share the lattice shape."""

    nu: np.ndarray
    point: EuclidPoint
    offset: float

    @property
    def xyz(self):
        return self.point.xyz


def wavefront_points(c: ParametricCongruence, r, C, nu) -> WavefrontSample:
    """Points ``point_from_line(xi, eta, r + C)`` at each parameter in ``nu``.

    ``r`` is an array matching ``nu`` (e.g. ``PotentialSolution.r``) or a
    callable of ``nu``.  Each node is reconstructed in the candidate frame
    farthest from its chart edge, and the result is in world coordinates.
    NaN in ``r`` gives NaN points.
    """
    nu = np.asarray(nu, dtype=complex)
    rv = np.broadcast_to(np.asarray(r(nu) if callable(r) else r, dtype=float), nu.shape)
    d = np.asarray(c.directions(nu), dtype=float)
    k = choose_frame(d)
    xi, eta = c.evaluate(nu, k)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(xi) & (np.abs(xi) <= CHART_LIMIT) & np.isfinite(rv)
        xyz = np.full(nu.shape + (3,), np.nan)
        if np.any(ok):
            p = point_from_line(xi[ok], eta[ok], rv[ok] + C)
            local = np.atleast_2d(EuclidPoint(p.z, p.t).xyz)
            xyz[ok] = np.einsum("nji,nj->ni", frame_matrices(k[ok]), local)
    return WavefrontSample(nu, EuclidPoint.from_xyz(xyz), float(C))
