"""Scene-level pipelines behind the command line: reflect and wavefront."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace

import numpy as np

from .congruence import Grid, PotentialSolution, solve_potential, wavefront_points
from .errors import NotIntegrable
from .export import csv_text, obj_text, records
from .reflection import ReflectedCongruence, reflect_congruence
from .scene import SceneConfig

log = logging.getLogger(__name__)


@dataclass
class SceneRun:
    cfg: SceneConfig
    surface: object
    incoming: object
    reflected: ReflectedCongruence
    grid: Grid
    potential: PotentialSolution | None = None


def _grid_for(cfg, grid):
    if grid is None:
        return cfg.build_grid()
    n, m = grid
    return replace(cfg, grid=replace(cfg.grid, n=n, m=m)).build_grid()


def prepare(cfg: SceneConfig, grid=None, solve=True, require_potential=False) -> SceneRun:
    """Trace the scene on its grid and (optionally) integrate the potential.

    ``grid`` is an optional ``(n, m)`` resolution override.  With
    ``require_potential`` a non-integrable congruence raises
    ``NotIntegrable``; otherwise the potential is simply left out.
    """
    S = cfg.build_surface()
    inc = cfg.build_wave()
    g = _grid_for(cfg, grid)
    rc = reflect_congruence(inc, S, g, grazing_margin=cfg.solver.grazing_margin)
    run = SceneRun(cfg, S, inc, rc, g)
    if not solve:
        return run
    work = Grid(g.u, g.v, g.mask | rc.undefined)
    if not np.any(work.active):
        log.warning("no reflected rays on the grid")
        return run
    try:
        run.potential = solve_potential(
            rc,
            work,
            integrability_tol=cfg.solver.integrability_tol,
            path_tol=cfg.solver.path_tol,
            stride=cfg.solver.stride,
            seed=rc.potential,
        )
    except NotIntegrable:
        if require_potential:
            raise
        log.warning("reflected congruence is not integrable; no potential exported")
    return run


def _oriented(run: SceneRun, branch):
    """World-frame ``(xi, eta, r)``; branch '-' reverses every line."""
    g = run.grid
    xi, eta = run.reflected.evaluate(g.nu)
    r = run.potential.r if run.potential is not None else np.full(g.shape, np.nan)
    if branch == "-":
        with np.errstate(divide="ignore", invalid="ignore"):
            xr = -1.0 / np.conj(xi)
            er = -eta / np.conj(xi) ** 2
        return xr, er, -r
    return xi, eta, r


def _rows(run, xi, eta, r, xyz, C):
    g = run.grid
    keep = g.active.ravel()
    cols = records(g.nu, xi, eta, r, C, xyz, run.reflected.missed)
    return {k: v[keep] for k, v in cols.items()}


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def run_reflect(cfg: SceneConfig, out_dir=None, branch=None, grid=None, run=None):
    """Export the reflected congruence on the scene grid as CSV.

    ``r`` is the reflected potential, ``C = 0`` and ``x`` is the point at
    affine distance ``r`` along the line.  Returns the file path.
    """
    out_dir = cfg.output.path if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    run = prepare(cfg, grid) if run is None else run
    xi, eta, r = _oriented(run, branch or cfg.solver.branch)
    # reversing the line and negating r gives the same point
    r_phys = run.potential.r if run.potential is not None else np.full(run.grid.shape, np.nan)
    xyz = wavefront_points(run.reflected, r_phys, 0.0, run.grid.nu).xyz
    cols = _rows(run, xi, eta, r, xyz, 0.0)
    return _write(os.path.join(out_dir, "reflected.csv"), csv_text(cols))


def run_wavefront(cfg: SceneConfig, out_dir=None, offsets=None, grid=None, run=None):
    """One point cloud per offset ``C``; CSV and/or OBJ per the scene output
    format.  Raises ``NotIntegrable`` when the congruence has no potential."""
    out_dir = cfg.output.path if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    run = prepare(cfg, grid, require_potential=True) if run is None else run
    if run.potential is None:
        raise NotIntegrable("no potential for this scene")
    offsets = cfg.output.offsets if offsets is None else tuple(offsets)
    digest = cfg.digest()
    xi, eta = run.reflected.evaluate(run.grid.nu)
    paths = []
    for k, C in enumerate(offsets):
        w = wavefront_points(run.reflected, run.potential.r, C, run.grid.nu)
        stem = os.path.join(out_dir, f"wavefront_{k:03d}")
        if cfg.output.format in ("csv", "both"):
            cols = _rows(run, xi, eta, run.potential.r, w.xyz, C)
            paths.append(_write(stem + ".csv", csv_text(cols)))
        if cfg.output.format in ("obj", "both"):
            pts = w.xyz[run.grid.active & ~run.reflected.missed]
            paths.append(_write(stem + ".obj", obj_text(pts, digest, C)))
    return paths
