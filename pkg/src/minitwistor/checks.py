"""Self-checks behind ``minitwistor verify``.

Each check returns a :class:`Check`; the report prints one line per check:
name, worst residual, tolerance, PASS/FAIL.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_forms import gallery, reference_reflected
from .congruence import (
    Grid,
    chart_vector_to_xi,
    ParametricCongruence,
    congruence_potential_residual,
    integrability_residual,
    potential_residual,
    solve_potential,
)
from .errors import TwistorError
from .oracle import reflect_vector
from .reflection import OK, _to_world, malus_residual, reflect_line, solve_incidence
from .scene import SceneConfig, parse_scene
from .twistor import (
    CANDIDATE_FRAMES,
    CHART_LIMIT,
    EuclidPoint,
    affine_param,
    chart_vector,
    choose_frame,
    line_from_point_dir,
    point_from_line,
    vector_to_dir,
)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        out = f"{self.name}\t{self.value:.3e}\t{self.tol:.1e}\t{status}"
        return out + (f"\t{self.note}" if self.note else "")


def _check(name, value, tol, note=""):
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value < tol), note)


def _scaled(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


# -- correspondence -----------------------------------------------------------


def check_roundtrip(n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-5, 5, (n, 3))
    xi = vector_to_dir(rng.normal(size=(n, 3)))
    P = EuclidPoint.from_xyz(p)
    eta = line_from_point_dir(P, xi)
    r = affine_param(P, xi)
    back = point_from_line(xi, eta, r).xyz
    return _check("roundtrip", np.max(np.abs(back - p)), 1e-10)


# -- oracle equivalence -------------------------------------------------------


_ORACLE_SURFACES = {
    "plane": dict(height=0.0),
    "sphere": dict(center=(0.0, 0.0, 0.0), radius=1.0),
    "torus": dict(a=2.0, b=1.0),
}


def random_events(entry, n, seed):
    """Random rays that hit gallery surface ``entry``: origins on a far shell
    aimed at points near the surface.  Returns ``(origins, dirs)``."""
    rng = np.random.default_rng(seed)
    imp = entry.implicit
    plane = imp.kind == "plane"
    centre, extent = (np.zeros(3), 3.0) if plane else imp.bound
    if plane:
        centre = np.array([0.0, 0.0, imp.params["height"]])
    o_all, d_all = [], []
    while sum(len(o) for o in o_all) < n:
        m = 4 * n
        target = centre + rng.uniform(-extent, extent, (m, 3))
        if plane:
            target[:, 2] = centre[2]
        o = rng.normal(size=(m, 3))
        o = centre + 8.0 * extent * o / np.linalg.norm(o, axis=1, keepdims=True)
        if plane:
            o[:, 2] = centre[2] + np.abs(o[:, 2] - centre[2]) + 0.5
        d = target - o
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        s, p_hit, nrm = imp.first_hit(o, d)
        hit = np.isfinite(s)
        # drop hits where every sheet's chart is singular (e.g. torus crest)
        inside = np.zeros(m, dtype=bool)
        for sheet in entry.sheets:
            with np.errstate(all="ignore"):
                inside |= sheet.valid(sheet.param_from_hit(p_hit, nrm))
        hit &= inside
        # stay clear of grazing incidence, where both sides lose digits
        cos = np.abs(np.sum(np.where(hit[:, None], nrm, 0.0) * d, axis=1))
        keep = hit & (cos > 1e-3)
        o_all.append(o[keep])
        d_all.append(d[keep])
    return np.concatenate(o_all)[:n], np.concatenate(d_all)[:n]


def oracle_comparison(entry, origins, dirs):
    """Worst direction mismatch and incidence-point distance between the
    twistor reflection and the classical tracer."""
    s, p_hit, nrm = entry.implicit.first_hit(origins, dirs)
    d_out = reflect_vector(dirs, nrm)
    k = choose_frame(dirs)
    worst_dir = worst_line = 0.0
    for kk in np.unique(k):
        sel = k == kk
        F = CANDIDATE_FRAMES[int(kk)]
        M = F.matrix()
        o, d = origins[sel] @ M.T, dirs[sel] @ M.T
        P = EuclidPoint.from_xyz(o)
        xi1 = vector_to_dir(d)
        eta1 = line_from_point_dir(P, xi1)
        # compare in a chart where the outgoing direction is well inside
        kf = choose_frame(d_out[sel])
        ev = solve_incidence((xi1, eta1), entry, start=affine_param(P, xi1), frame=F, k_to=kf)
        d2 = _to_world(kf, chart_vector(ev.xi2))
        foot = _to_world(kf, point_from_line(ev.xi2, ev.eta2, 0.0).xyz)
        worst_dir = max(worst_dir, float(np.max(np.linalg.norm(d2 - d_out[sel], axis=-1))))
        rel = p_hit[sel] - foot
        perp = rel - np.sum(rel * d2, axis=-1, keepdims=True) * d2
        worst_line = max(worst_line, float(np.max(np.linalg.norm(perp, axis=-1))))
    return worst_dir, worst_line


def check_oracle(names=("plane", "sphere", "torus"), n=1000, seed=1):
    out = []
    per = -(-n // len(names))
    for i, name in enumerate(names):
        entry = gallery(name, **_ORACLE_SURFACES[name]) if isinstance(name, str) else name
        name = name if isinstance(name, str) else entry.name
        o, d = random_events(entry, per, seed + i)
        try:
            wd, wl = oracle_comparison(entry, o, d)
        except TwistorError as e:
            out.append(Check(f"oracle_{name}", np.inf, 1e-9, False, type(e).__name__))
            continue
        out.append(_check(f"oracle_{name}_direction", wd, 1e-9))
        out.append(_check(f"oracle_{name}_line", wl, 1e-9))
    return out


# -- surfaces -----------------------------------------------------------------


def check_surface_potential(entry, name=None):
    """``dbar r = 2F/(1+|xi|^2)^2`` on a direction lattice through ``xi = 0``.

    Nodes inside the surface's singular mask are skipped; a mask radius of
    zero therefore exposes the singular node, which is reported as a
    configuration error.
    """
    name = name or entry.name
    out = []
    for sheet in entry.sheets:
        if not hasattr(sheet, "F"):
            continue
        g = Grid.box(-2, 2, -2, 2, n=65, singular=getattr(sheet, "singular", ()),
                     mask_radius=getattr(sheet, "mask_radius", 0.0))
        xi = g.nu[g.active]
        with np.errstate(all="ignore"):
            res = potential_residual(sheet, xi)
        bad = ~np.isfinite(res) | (res >= 1e-6)
        note = ""
        if np.any(bad) and getattr(sheet, "singular", ()) and getattr(sheet, "mask_radius", 1.0) == 0:
            note = f"config error: {int(bad.sum())} singular nodes near xi=0 (mask radius 0)"
        worst = float(np.max(np.where(np.isfinite(res), res, np.inf))) if res.size else 0.0
        out.append(_check(f"surface_potential_{getattr(sheet, 'name', name)}", worst, 1e-6, note))
    return out


# -- closed forms -------------------------------------------------------------


def _plane_scene(surface, xi1, radius, n, **params):
    text = f"[surface]\ntype = {surface}\n"
    text += "".join(f"{k} = {v}\n" for k, v in params.items())
    text += f"[wave]\ntype = plane\nxi1 = {xi1}\n[grid]\nn = {n}\nradius = {radius}\n"
    return parse_scene(text)


def _spherical_scene(n=64):
    return parse_scene(
        "[surface]\ntype = sphere\ncenter = 0, 0, -2\n[wave]\ntype = spherical\n"
        f"[grid]\nn = {n}\nradius = 0.3\n"
    )


def _mirror_scene(n=32, t1=1.5):
    return parse_scene(
        f"[surface]\ntype = plane\n[wave]\ntype = spherical\nsource = 0, 0, {t1}\n"
        f"[grid]\nn = {n}\nradius = 0.95\n"
    )


SCENES = {
    "sphere-axis": lambda n=128: _plane_scene("sphere", "inf", 0.894, n),
    "torus-axis": lambda n=128: _plane_scene("torus", "inf", 3.2, n, a=2.0, b=1.0),
    "torus-x1": lambda n=128: _plane_scene("torus", 1 + 0j, 3.2, n, a=2.0, b=1.0),
    "torus-45": lambda n=128: _plane_scene("torus", 2.4 + 0j, 3.2, n, a=2.0, b=1.0),
    "sphere-spherical": lambda n=64: _spherical_scene(n),
    "mirror-spherical": lambda n=32: _mirror_scene(n),
}


def _reflected(cfg):
    from .reflection import reflect_congruence

    S = cfg.build_surface()
    inc = cfg.build_wave()
    g = cfg.build_grid()
    rc = reflect_congruence(inc, S, g, grazing_margin=cfg.solver.grazing_margin)
    return S, inc, g, rc


def check_closed_form_sphere(n=64, samples=1000, seed=3):
    cfg = SCENES["sphere-axis"](n)
    S, inc, g, rc = _reflected(cfg)
    work = Grid(g.u, g.v, g.mask | rc.undefined)
    ev = rc.events(g.nu)
    xi2, eta2 = np.asarray(ev.xi2), np.asarray(ev.eta2)
    ref = reference_reflected("sphere-plane-axis")
    ok = work.active & (np.abs(xi2) <= 2)
    f_err = np.max(_scaled(eta2[ok], ref.F2(xi2[ok])))
    sol = solve_potential(rc, work, stride=cfg.solver.stride)
    rng = np.random.default_rng(seed)
    idx = rng.choice(np.flatnonzero(ok & sol.defined), size=min(samples, int(np.sum(ok & sol.defined))),
                     replace=False)
    diff = sol.r.ravel()[idx] - ref.r2(xi2.ravel()[idx])
    return [_check("closed_form_sphere_F2", f_err, 1e-8),
            _check("closed_form_sphere_r2", np.ptp(diff), 1e-5)]


def check_closed_form_torus(n=64):
    out = []
    axis = reference_reflected("torus-plane-axis")
    for label, xi1 in (("axis", None), ("x1", 1 + 0j), ("45", 2.4 + 0j)):
        cfg = SCENES[f"torus-{label}"](n)
        S, inc, g, rc = _reflected(cfg)
        b = rc.trace(g.nu)
        ok = (b.status == OK) & (b.sheet == 0) & g.active.ravel()
        ev = b.event()
        xi0, xi2, eta2 = (np.asarray(v).ravel()[ok] for v in (ev.xi0, ev.xi2, ev.eta2))
        # only the outer sheet is labelled by its normal direction
        if label == "axis":
            err = np.max(_scaled(eta2, axis.F2(xi2)))
        else:
            ref = reference_reflected("torus-plane-general", xi1=xi1)
            err = max(np.max(_scaled(xi2, ref.xi2(xi0))), np.max(_scaled(eta2, ref.F2(xi0))))
        out.append(_check(f"closed_form_torus_{label}", err, 1e-8))
    # r2 of the general case against its own fibre, through the potential equation
    for xi1 in (1 + 0j, 2.4 + 0j):
        ref = reference_reflected("torus-plane-general", xi1=xi1)
        c = ParametricCongruence(map=lambda w, ref=ref: (ref.xi2(w), ref.F2(w)))
        g = Grid.box(-0.95, 0.95, -0.95, 0.95, n=41, singular=(0j,), mask_radius=0.1, disk=0.95)
        xi0 = g.nu[g.active]
        with np.errstate(all="ignore"):
            res = congruence_potential_residual(c, ref.r2, xi0)
        out.append(_check(f"torus_r2_potential_xi1={xi1.real:g}", np.nanmax(res), 1e-5))
    return out


def check_closed_form_spherical(n=96):
    S = gallery("sphere", center=(0.0, 0.0, -2.0))
    ref = reference_reflected("sphere-spherical")
    sheet = S.sheets[0]

    def labelled(nu):
        nu = np.asarray(nu, dtype=complex)
        e0, r0 = sheet.F(nu), sheet.r(nu)
        xi1 = chart_vector_to_xi(point_from_line(nu, e0, r0).xyz)
        # the head-on ray at xi0 = 0 points straight down, off this chart
        xi1 = np.where(np.abs(xi1) <= CHART_LIMIT, xi1, np.nan)
        ev = reflect_line(nu, e0, r0, xi1)
        return ev.xi2, ev.eta2

    g = Grid.box(-1.5, 1.5, -1.5, 1.5, n=n, disk=1.5)
    xi0 = g.nu[g.active]
    xi2, eta2 = labelled(xi0)
    pole = np.abs(np.abs(xi0) - np.sqrt(0.6)) < 1e-3
    ex = _scaled(xi2[~pole], ref.xi2(xi0[~pole]))
    ee = _scaled(eta2, ref.F2(xi0))
    sol = solve_potential(ParametricCongruence(map=labelled), g, stride=4)
    diff = (sol.r - ref.r2(g.nu))[sol.defined]
    return [_check("closed_form_spherical_xi2", np.max(ex), 1e-8),
            _check("closed_form_spherical_eta2", np.max(ee), 1e-8),
            _check("closed_form_spherical_r2", np.ptp(diff), 1e-5)]


# -- identities ---------------------------------------------------------------


def _interior(g, rc):
    good = g.active & (rc.status == OK)
    inner = good.copy()
    inner[1:, :] &= good[:-1, :]
    inner[:-1, :] &= good[1:, :]
    inner[:, 1:] &= good[:, :-1]
    inner[:, :-1] &= good[:, 1:]
    return inner


def check_malus(label, cfg, stride=4):
    S, inc, g, rc = _reflected(cfg)
    inner = _interior(g, rc)
    inner &= _stride_mask(g.shape, stride)
    nu = g.nu[inner]
    if nu.size == 0:
        return [Check(f"malus_{label}", np.nan, 1e-5, False, "no interior nodes")]
    with np.errstate(all="ignore"):
        res = malus_residual(inc, S, nu, reflected=rc)
        inc_res = integrability_residual(inc, nu)
        ref_res = integrability_residual(rc, nu)
    frac = float(np.mean(res < 1e-5))
    q95 = float(np.quantile(np.where(np.isfinite(res), res, np.inf), 0.95))
    quiet = inc_res < 1e-6
    cor = float(np.max(ref_res[quiet])) if np.any(quiet) else 0.0
    return [_check(f"malus_identity_{label}", q95, 1e-5, f"{100 * frac:.1f}% of nodes below tol"),
            _check(f"malus_corollary_{label}", cor, 1e-4)]


def _stride_mask(shape, stride):
    m = np.zeros(shape, dtype=bool)
    m[::stride, ::stride] = True
    return m


def check_virtual_source(n=1000, t1=1.5, seed=4):
    from .reflection import reflect_congruence

    cfg = _mirror_scene(t1=t1)
    S, inc = cfg.build_surface(), cfg.build_wave()
    rng = np.random.default_rng(seed)
    nu = np.sqrt(rng.uniform(0, 0.9, n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    rc = reflect_congruence(inc, S)
    xi2, eta2 = rc.evaluate(nu)
    q = eta2 / xi2
    spread = np.max(np.abs(q - np.mean(q))) / np.abs(np.mean(q))
    offset = abs(np.mean(q) - t1) / t1
    return [_check("virtual_source_spread", spread, 1e-10),
            _check("virtual_source_position", offset, 1e-10)]


def annulus_defects(mask, grid, centre=0j, azimuths=256, samples=400):
    """Azimuths along which ``mask`` is not a single radial interval."""
    R = min(abs(grid.u[0]), abs(grid.u[-1]), abs(grid.v[0]), abs(grid.v[-1]))
    rad = np.linspace(0, R, samples)
    phi = 2 * np.pi * np.arange(azimuths) / azimuths
    pts = centre + rad[None, :] * np.exp(1j * phi[:, None])
    du, dv = grid.u[1] - grid.u[0], grid.v[1] - grid.v[0]
    j = np.clip(np.rint((pts.real - grid.u[0]) / du).astype(int), 0, grid.u.size - 1)
    i = np.clip(np.rint((pts.imag - grid.v[0]) / dv).astype(int), 0, grid.v.size - 1)
    prof = mask[i, j]
    flips = np.sum(prof[:, 1:] != prof[:, :-1], axis=1)
    # a ring: off at the centre, on for one radial interval, then off
    return int(np.sum((flips != 2) | prof[:, 0] | prof[:, -1]))


def check_shadow(n=256):
    cfg = _plane_scene("torus", "inf", 3.5, n, a=2.0, b=1.0)
    S, inc, g, rc = _reflected(cfg)
    g_all = Grid(g.u, g.v)
    ring = ~rc.missed & g.active
    return [_check("shadow_annulus", annulus_defects(ring, g_all), 0.5)]


def check_path(label, cfg):
    S, inc, g, rc = _reflected(cfg)
    work = Grid(g.u, g.v, g.mask | rc.undefined)
    try:
        sol = solve_potential(rc, work, stride=cfg.solver.stride, path_tol=np.inf, seed=rc.potential)
    except TwistorError as e:
        return [Check(f"path_{label}", np.inf, 1e-4, False, type(e).__name__)]
    return [_check(f"path_{label}", sol.discrepancy, cfg.solver.path_tol)]


# -- drivers ------------------------------------------------------------------


def run_verify(target="all"):
    """List of :class:`Check` for ``"all"`` or for one :class:`SceneConfig`."""
    if isinstance(target, SceneConfig):
        return verify_scene(target)
    if target != "all":
        raise ValueError(f"unknown verify target {target!r}")
    checks = [check_roundtrip()]
    checks += check_oracle()
    for name in ("sphere", "torus"):
        checks += check_surface_potential(gallery(name), name)
    checks += check_closed_form_sphere()
    checks += check_closed_form_torus()
    checks += check_closed_form_spherical()
    for label in ("sphere-axis", "torus-axis", "torus-x1", "torus-45", "sphere-spherical"):
        checks += check_malus(label, SCENES[label](64))
    checks += check_virtual_source()
    checks += check_shadow()
    for label in ("sphere-axis", "torus-axis", "torus-x1", "torus-45", "sphere-spherical"):
        checks += check_path(label, SCENES[label]())
    return checks


def verify_scene(cfg: SceneConfig):
    """Checks relevant to one scene: correspondence, oracle agreement on its
    surface, the surface potential, Malus and the path self-check."""
    checks = [check_roundtrip(n=1000)]
    S = cfg.build_surface()
    checks += check_oracle((S,), n=200)
    checks += check_surface_potential(S, cfg.surface)
    checks += check_malus("scene", cfg)
    checks += check_path("scene", cfg)
    return checks


def report(checks):
    lines = [c.line() for c in checks]
    failed = [c for c in checks if not c.passed]
    cfg_err = [c for c in checks if c.note.startswith("config error")]
    summary = f"# {len(checks) - len(failed)}/{len(checks)} checks passed"
    if cfg_err:
        summary += "; configuration error"
    return "\n".join(lines + [summary]), not failed
