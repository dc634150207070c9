"""The law of reflection on line coordinates and the full reflection pipeline.

Single events work in whatever chart the caller supplies.  The congruence
pipeline picks, per ray, one of the candidate frames so the normal, the
incoming and the outgoing directions all stay inside the chart, solves for
the incidence point there and rotates the answer to the requested frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_chunks
from .congruence import Grid, ParametricCongruence, _theta, wirtinger
from .errors import ChartEscape, NoConvergence, NoIntersection
from .twistor import (
    CANDIDATE_FRAMES,
    CHART_LIMIT,
    EuclidPoint,
    MobiusRotation,
    _require_chart,
    _scalar,
    chart_vector,
    choose_frame,
    frame_arrays,
    frame_matrices,
    frame_transfer,
    mobius_apply,
    point_from_line,
)

GRAZING_TOL = 1e-8
NEWTON_MAX_ITER = 50

# per-ray status codes of the pipeline
OK, MISSED, OFF_CHART, DIVERGED, NEAR_GRAZING = 0, 1, 2, 3, 4


def _c(x):
    return np.asarray(x, dtype=complex)


def _reflaw_den(xi0, xi1):
    return (1.0 - (xi0 * xi0.conj()).real) * xi1.conj() - 2.0 * xi0.conj()


def _reflect_direction(xi0, xi1):
    with np.errstate(divide="ignore", invalid="ignore"):
        return (2.0 * xi0 * xi1.conj() + 1.0 - (xi0 * xi0.conj()).real) / _reflaw_den(xi0, xi1)


def reflect_direction(xi0, xi1):
    """Outgoing direction for incoming direction ``xi1`` at normal ``xi0``."""
    xi0, xi1 = _require_chart(xi0), _require_chart(xi1)
    return _scalar(_require_chart(_reflect_direction(xi0, xi1)))


def reflect_through_point(xi0, xi):
    """Half-turn of the sphere about the direction ``xi0``."""
    xi0, xi = _require_chart(xi0), _require_chart(xi)
    q = (xi0 * xi0.conj()).real
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ((q - 1.0) * xi + 2.0 * xi0) / (2.0 * xi0.conj() * xi + 1.0 - q)
    return _scalar(_require_chart(out))


def _incidence_eta(xi0, eta0, r0, xi):
    q = 1.0 + (xi0 * xi0.conj()).real
    a = 1.0 + xi0.conj() * xi
    d = xi0 - xi
    return (a * a * eta0 - d * d * eta0.conj() + d * a * q * r0) / (q * q)


def incidence_eta(xi0, eta0, r0, xi_i):
    """``eta`` of the line with direction ``xi_i`` through the surface point
    ``point_from_line(xi0, eta0, r0)``."""
    xi0, xi_i = _require_chart(xi0), _require_chart(xi_i)
    return _scalar(_incidence_eta(xi0, _c(eta0), np.asarray(r0, dtype=float), xi_i))


def _outgoing_eta(xi0, eta0, r0, xi1):
    q = 1.0 + (xi0 * xi0.conj()).real
    d = xi0.conj() - xi1.conj()
    a = 1.0 + xi0 * xi1.conj()
    with np.errstate(divide="ignore", invalid="ignore"):
        return (d * d * eta0 - a * a * eta0.conj() + d * a * q * r0) / _reflaw_den(xi0, xi1) ** 2


def malus_defect(xi0, xi1, r0):
    """Real scalar whose dbar links the incoming and reflected 1-forms.

    Equals ``-(n . d1) r0`` with ``n``, ``d1`` the unit normal and incoming
    direction.
    """
    xi0, xi1 = _c(xi0), _c(xi1)
    num = np.abs(xi0 - xi1) ** 2 - np.abs(1.0 + xi0 * xi1.conj()) ** 2
    den = (1.0 + np.abs(xi0) ** 2) * (1.0 + np.abs(xi1) ** 2)
    return _scalar(num * np.asarray(r0, dtype=float) / den)


@dataclass
class ReflectionEvent:
    """One (or an array of) reflection events, all in one chart.

    ``frame`` is None for caller-supplied charts, or an index array into
    ``CANDIDATE_FRAMES`` for pipeline output.
    """

    nu0: object
    xi0: object
    eta0: object
    r0: object
    xi1: object
    eta1: object
    xi2: object
    eta2: object
    point: EuclidPoint
    grazing: object = False
    frame: object = None
    status: object = OK

    def in_frame(self, k_to=None):
        """Line data re-expressed in ``CANDIDATE_FRAMES[k_to]`` (world if None).

        Only valid for pipeline events; rays sent to the south pole of the
        target chart come back as inf/nan.
        """
        if self.frame is None:
            raise ValueError("event chart is caller-defined")
        a, b = frame_transfer(self.frame, k_to)
        out = {}
        for x, e in (("xi0", "eta0"), ("xi1", "eta1"), ("xi2", "eta2")):
            out[x], out[e] = mobius_apply(a, b, getattr(self, x), getattr(self, e))
        return out


def reflect_line(xi0, eta0, r0, xi1, nu0=None) -> ReflectionEvent:
    """Reflect the ray with direction ``xi1`` at the surface point carried by
    the normal line ``(xi0, eta0)`` at distance ``r0``."""
    xi0, xi1 = _require_chart(xi0), _require_chart(xi1)
    eta0, r0 = _c(eta0), np.asarray(r0, dtype=float)
    xi2 = _require_chart(_reflect_direction(xi0, xi1))
    eta1 = _incidence_eta(xi0, eta0, r0, xi1)
    eta2 = _outgoing_eta(xi0, eta0, r0, xi1)
    p = point_from_line(xi0, eta0, r0)
    n = chart_vector(xi0)
    d = chart_vector(xi1)
    graz = np.abs(np.sum(n * d, axis=-1)) < GRAZING_TOL
    s = _scalar
    return ReflectionEvent(
        nu0=xi0 if nu0 is None else nu0,
        xi0=s(xi0), eta0=s(eta0), r0=s(r0), xi1=s(xi1), eta1=s(eta1),
        xi2=s(xi2), eta2=s(eta2), point=p, grazing=s(graz),
    )


# -- incidence solving ------------------------------------------------------


def surface_parts(S):
    """``(sheets, implicit)`` for a gallery entry or a single surface."""
    sheets = getattr(S, "sheets", None)
    if sheets is None:
        sheets = (S,)
    return tuple(sheets), getattr(S, "implicit", None)


def _to_world(k, v):
    return np.einsum("...ji,...j->...i", frame_matrices(k), v)


def _newton(resid, x0, tol=1e-13):
    """Damped Newton on a complex residual of a complex unknown (2 real x 2 real)."""
    x = x0.copy()
    f = resid(x)
    nf = np.abs(f)
    done = ~np.isfinite(nf) | (nf == 0)
    it = 0
    while not np.all(done):
        it += 1
        if it > NEWTON_MAX_ITER:
            break
        act = ~done
        xa, fa = x[act], f[act]
        h = 1e-7 * np.maximum(1.0, np.abs(xa))
        fu = (resid(xa + h, act) - resid(xa - h, act)) / (2 * h)
        fv = (resid(xa + 1j * h, act) - resid(xa - 1j * h, act)) / (2 * h)
        a11, a12, a21, a22 = fu.real, fv.real, fu.imag, fv.imag
        det = a11 * a22 - a12 * a21
        with np.errstate(divide="ignore", invalid="ignore"):
            du = -(a22 * fa.real - a12 * fa.imag) / det
            dv = -(-a21 * fa.real + a11 * fa.imag) / det
        step = du + 1j * dv
        lam = np.ones(xa.shape)
        new = xa + step
        fn = resid(new, act)
        for _ in range(10):
            worse = ~(np.abs(fn) <= np.abs(fa)) & (np.abs(fa) > tol)
            if not np.any(worse):
                break
            lam[worse] *= 0.5
            new[worse] = xa[worse] + lam[worse] * step[worse]
            fn[worse] = resid(new[worse], np.flatnonzero(act)[worse])
        idx = np.flatnonzero(act)
        x[idx], f[idx] = new, fn
        small = np.abs(lam * step) <= 1e-15 * np.maximum(1.0, np.abs(new))
        done[idx] = small | ~np.isfinite(fn) | (np.abs(fn) == 0)
    return x, f, done


@dataclass
class _Batch:
    status: np.ndarray
    frame: np.ndarray
    sheet: np.ndarray
    nu0: np.ndarray
    xi0: np.ndarray
    eta0: np.ndarray
    r0: np.ndarray
    xi1: np.ndarray
    eta1: np.ndarray
    xi2: np.ndarray
    eta2: np.ndarray
    point: np.ndarray
    normal: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    residual: np.ndarray

    @property
    def grazing(self):
        return np.abs(np.sum(self.normal * self.d1, axis=-1)) < GRAZING_TOL

    def event(self, k_to=None) -> ReflectionEvent:
        ev = ReflectionEvent(
            self.nu0, self.xi0, self.eta0, self.r0, self.xi1, self.eta1, self.xi2, self.eta2,
            EuclidPoint.from_xyz(self.point), self.grazing, self.frame, self.status,
        )
        if k_to is None and not np.any(self.frame):
            return ev
        # re-express in a single requested frame
        data = ev.in_frame(k_to)
        for key, val in data.items():
            setattr(ev, key, val)
        ev.frame = None if k_to is None else np.broadcast_to(k_to, self.frame.shape)
        ev.point = EuclidPoint.from_xyz(
            self.point if k_to is None else np.einsum("...ij,...j->...i", frame_matrices(k_to), self.point)
        )
        return ev


def _solve_batch(xi1, eta1, base: MobiusRotation, start, surface, newton_tol=1e-13):
    """Trace a flat batch of incoming lines (given in ``base`` coordinates)."""
    xi1 = _c(xi1).ravel()
    eta1 = _c(eta1).ravel()
    start = np.broadcast_to(np.asarray(start, dtype=float), xi1.shape).ravel()
    n = xi1.size
    sheets, implicit = surface_parts(surface)
    if implicit is None:
        raise NoIntersection("surface has no implicit form to seed the incidence solve")

    status = np.full(n, MISSED)
    out = {k: np.full(n, np.nan + 0j) for k in ("nu0", "xi0", "eta0", "xi1", "eta1", "xi2", "eta2")}
    r0 = np.full(n, np.nan)
    point = np.full((n, 3), np.nan)
    normal = np.full((n, 3), np.nan)
    d2 = np.full((n, 3), np.nan)
    resid_out = np.full(n, np.nan)
    frame = np.zeros(n, dtype=int)
    sheet_idx = np.full(n, -1)

    finite = np.isfinite(xi1) & np.isfinite(eta1)
    d1_base = chart_vector(xi1)
    Binv = base.inverse().matrix()
    d1 = d1_base @ Binv.T
    # a point on each incoming ray, in world coordinates
    k0 = choose_frame(d1)
    a0, b0 = frame_arrays(k0, base)
    x1k, e1k = mobius_apply(a0, b0, xi1, eta1)
    r_origin = np.where(np.isfinite(start), start, 0.0)
    with np.errstate(invalid="ignore"):
        pk = point_from_line(np.where(finite, x1k, 0), np.where(finite, e1k, 0), r_origin)
    origin = _to_world(k0, EuclidPoint(pk.z, pk.t).xyz)
    s_min = np.where(np.isfinite(start), 0.0, -np.inf)

    idx = np.flatnonzero(finite)
    s, hit, nrm = implicit.first_hit(origin[idx], d1[idx], s_min[idx])
    got = np.isfinite(s)
    idx = idx[got]
    hit, nrm = hit[got], nrm[got]
    if idx.size == 0:
        return _Batch(status, frame, sheet_idx, out["nu0"], out["xi0"], out["eta0"], r0, out["xi1"],
                      out["eta1"], out["xi2"], out["eta2"], point, normal, d1, d2, resid_out)

    # which sheet does the hit lie on, and its parameter there
    best = np.full(idx.size, np.inf)
    seed = np.full(idx.size, np.nan + 0j)
    which = np.full(idx.size, -1)
    for j, sh in enumerate(sheets):
        nu = np.atleast_1d(sh.param_from_hit(hit, nrm))
        ok = np.isfinite(nu) & (np.abs(nu) <= CHART_LIMIT)
        with np.errstate(invalid="ignore", over="ignore"):
            p = np.full((idx.size, 3), np.nan)
            if np.any(ok):
                q = sh.point(nu[ok])
                p[ok] = EuclidPoint(q.z, q.t).xyz @ sh.frame.matrix()
        dist = np.linalg.norm(p - hit, axis=1)
        better = dist < best
        best[better], seed[better], which[better] = dist[better], nu[better], j
    valid = np.zeros(idx.size, dtype=bool)
    for j, sh in enumerate(sheets):
        m = which == j
        valid[m] = sh.valid(seed[m])
    status[idx] = np.where(valid, DIVERGED, OFF_CHART)
    point[idx], normal[idx] = hit, nrm
    idx, seed, which, hit, nrm = idx[valid], seed[valid], which[valid], hit[valid], nrm[valid]

    d2w = d1[idx] - 2.0 * np.sum(d1[idx] * nrm, axis=1, keepdims=True) * nrm
    k = choose_frame(nrm, d1[idx], d2w)
    frame[idx] = k
    ai, bi = frame_arrays(k, base)
    xi1k, eta1k = mobius_apply(ai, bi, xi1[idx], eta1[idx])

    for j, sh in enumerate(sheets):
        m = np.flatnonzero(which == j)
        if m.size == 0:
            continue
        as_, bs_ = frame_arrays(k[m], sh.frame)

        def surf(nu, sel=None, as_=as_, bs_=bs_, sh=sh):
            a_ = as_ if sel is None else as_[sel]
            b_ = bs_ if sel is None else bs_[sel]
            x0, e0, rr = sh.lines(nu)
            x0k, e0k = mobius_apply(a_, b_, x0, e0)
            return x0k, e0k, rr

        tgt_xi, tgt_eta = xi1k[m], eta1k[m]

        def resid(nu, sel=None, surf=surf, tgt_xi=tgt_xi, tgt_eta=tgt_eta):
            x0k, e0k, rr = surf(nu, sel)
            tx = tgt_xi if sel is None else tgt_xi[sel]
            te = tgt_eta if sel is None else tgt_eta[sel]
            with np.errstate(invalid="ignore", over="ignore"):
                return _incidence_eta(x0k, e0k, rr, tx) - te

        scale = 1.0 + np.abs(tgt_eta)
        nu0, f, _ = _newton(resid, seed[m], newton_tol)
        x0k, e0k, rr = surf(nu0)
        conv = np.abs(f) <= 1e-10 * scale
        g = idx[m]
        sheet_idx[g] = j
        status[g] = np.where(conv, OK, DIVERGED)
        resid_out[g] = np.abs(f)
        out["nu0"][g], out["xi0"][g], out["eta0"][g], r0[g] = nu0, x0k, e0k, rr
        out["xi1"][g], out["eta1"][g] = tgt_xi, tgt_eta
        out["xi2"][g] = _reflect_direction(x0k, tgt_xi)
        out["eta2"][g] = _outgoing_eta(x0k, e0k, rr, tgt_xi)
        with np.errstate(invalid="ignore"):
            pk = point_from_line(x0k, e0k, rr)
        point[g] = _to_world(k[m], EuclidPoint(pk.z, pk.t).xyz)
        normal[g] = _to_world(k[m], chart_vector(x0k))
        d2[g] = _to_world(k[m], chart_vector(out["xi2"][g]))

    bad = status != OK
    for key in ("nu0", "xi0", "eta0", "xi2", "eta2"):
        out[key][bad] = np.nan
    r0[bad] = np.nan
    d2[bad] = np.nan
    point[status == MISSED] = np.nan
    return _Batch(status, frame, sheet_idx, out["nu0"], out["xi0"], out["eta0"], r0, out["xi1"],
                  out["eta1"], out["xi2"], out["eta2"], point, normal, d1, d2, resid_out)


def solve_incidence(L1, S, start=None, frame: MobiusRotation | None = None, k_to=None) -> ReflectionEvent:
    """Incidence point and reflection of the oriented line ``L1 = (xi1, eta1)``.

    ``L1`` is given in ``frame`` coordinates (identity by default); ``start``
    is the affine parameter where the ray is emitted (None: from infinity).
    The first hit beyond ``start`` is taken.  The result is expressed in
    ``CANDIDATE_FRAMES[k_to]`` (world chart when None), so a ray sent to the
    south pole shows up as inf there.

    Raises :class:`NoIntersection` if the ray misses or meets the surface
    outside its chart domain, and :class:`NoConvergence` if Newton stalls.
    """
    xi1, eta1 = _c(L1[0]), _c(L1[1])
    shape = np.broadcast_shapes(xi1.shape, eta1.shape)
    xi1, eta1 = np.broadcast_to(xi1, shape), np.broadcast_to(eta1, shape)
    st = -np.inf if start is None else start
    b = _solve_batch(xi1, eta1, frame or MobiusRotation.identity(), st, S)
    if np.any(b.status == MISSED):
        raise NoIntersection("incoming ray misses the surface")
    if np.any(b.status == OFF_CHART):
        raise NoIntersection("incoming ray meets the surface outside its chart domain")
    if np.any(b.status == DIVERGED):
        raise NoConvergence("incidence Newton iteration did not converge", float(np.nanmax(b.residual)))
    ev = b.event(k_to)
    for name in ("nu0", "xi0", "eta0", "r0", "xi1", "eta1", "xi2", "eta2", "grazing", "status"):
        setattr(ev, name, _scalar(np.reshape(getattr(ev, name), shape)))
    ev.point = EuclidPoint(_scalar(np.reshape(ev.point.z, shape)), _scalar(np.reshape(ev.point.t, shape)))
    if ev.frame is not None:
        ev.frame = _scalar(np.reshape(ev.frame, shape))
    return ev


# -- reflected congruences ---------------------------------------------------


@dataclass
class ReflectedCongruence(ParametricCongruence):
    """Outgoing congruence parameterised by the incoming parameter.

    Native frame is the world frame.  Rays that miss the surface evaluate to
    NaN; ``missed`` / ``off_chart`` masks are filled on the sampled grid.
    """

    incoming: ParametricCongruence | None = None
    surface: object = None
    grid: Grid | None = None
    status: np.ndarray | None = None

    def trace(self, nu) -> _Batch:
        nu = _c(nu)
        xi1, eta1 = self.incoming.map(nu.ravel())
        start = self.incoming.start_param(nu.ravel())
        return _solve_batch(xi1, eta1, self.incoming.frame, start, self.surface)

    def events(self, nu, k_to=None) -> ReflectionEvent:
        """Events at ``nu`` expressed in ``CANDIDATE_FRAMES[k_to]`` (world if None)."""
        nu = _c(nu)
        ev = self.trace(nu).event(k_to)
        for name in ("nu0", "xi0", "eta0", "r0", "xi1", "eta1", "xi2", "eta2", "grazing", "status"):
            setattr(ev, name, np.reshape(getattr(ev, name), nu.shape))
        ev.point = EuclidPoint(np.reshape(ev.point.z, nu.shape), np.reshape(ev.point.t, nu.shape))
        return ev

    def evaluate(self, nu, frame_index=None):
        nu = _c(nu)
        if frame_index is None:
            b = self.trace(nu)
            a_, b_ = frame_transfer(b.frame)
            xi, eta = mobius_apply(a_, b_, b.xi2, b.eta2)
            return xi.reshape(nu.shape), eta.reshape(nu.shape)
        k = np.broadcast_to(np.asarray(frame_index), nu.shape).ravel()
        b = self.trace(nu)
        a_, b_ = frame_transfer(b.frame, k)
        xi, eta = mobius_apply(a_, b_, b.xi2, b.eta2)
        return xi.reshape(nu.shape), eta.reshape(nu.shape)

    def directions(self, nu):
        nu = _c(nu)
        return self.trace(nu).d2.reshape(nu.shape + (3,))

    def malus_defect_at(self, nu):
        nu = _c(nu)
        b = self.trace(nu)
        return malus_defect(b.xi0, b.xi1, b.r0).reshape(nu.shape)

    @property
    def missed(self):
        return None if self.status is None else self.status == MISSED

    @property
    def shadow(self):
        """Boolean mask: True where the incoming ray misses the surface."""
        return self.missed

    @property
    def cast_shadow(self):
        """Grid nodes whose rays the surface intercepts (the shadow it casts)."""
        if self.status is None:
            return None
        return (self.status != MISSED) & self.grid.active

    @property
    def undefined(self):
        """Nodes without a reflected line (missed, off-chart or diverged)."""
        return None if self.status is None else self.status != OK


def reflect_congruence(
    incoming: ParametricCongruence, S, grid: Grid | None = None, grazing_margin=0.0
) -> ReflectedCongruence:
    """The reflected congruence, parameterised by the incoming parameter.

    With a ``grid``, every node is traced once and the per-node status
    (hit, missed, outside the surface chart, diverged) is recorded.  Hits
    with ``|d1 . n| < grazing_margin`` are marked ``NEAR_GRAZING``: they
    reflect fine but sit next to the silhouette, where the congruence has a
    square-root singularity that spoils finite differences.

    When the incoming congruence knows its potential ``r1``, the reflected
    one gets ``r2 = r1 + 2 D`` with ``D`` the Malus defect.
    """
    rc = ReflectedCongruence(map=lambda nu: None, incoming=incoming, surface=S, grid=grid)
    rc.map = lambda nu: rc.evaluate(nu)
    if incoming.potential is not None:
        def potential(nu):
            nu = _c(nu)
            b = rc.trace(nu)
            r1 = np.asarray(incoming.potential(nu.ravel()), dtype=float)
            return (r1 + 2.0 * malus_defect(b.xi0, b.xi1, b.r0)).reshape(nu.shape)

        rc.potential = potential
    if grid is not None:

        def status(w):
            b = rc.trace(w)
            st = b.status.copy()
            cos = np.abs(np.sum(b.d1 * b.normal, axis=-1))
            st[(st == OK) & (cos < grazing_margin)] = NEAR_GRAZING
            return st

        st = map_chunks(status, grid.nu)
        rc.status = np.where(grid.mask, MISSED, st)
    return rc


def malus_residual(incoming: ParametricCongruence, S, nu1, reflected: ReflectedCongruence | None = None):
    """``|theta_2 - theta_1 - dbar_1 D|`` with ``D`` the Malus defect; all
    derivatives by finite differences in the incoming parameter."""
    rc = reflected if reflected is not None else reflect_congruence(incoming, S)
    nu1 = _c(nu1)
    th2 = _theta(rc, nu1)
    th1 = _theta(incoming, nu1)
    dD = wirtinger(lambda w: rc.malus_defect_at(w).astype(complex), nu1, "dbar")
    return np.abs(th2 - th1 - dD)
