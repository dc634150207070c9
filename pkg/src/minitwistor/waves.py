"""Incoming wavefronts as parametric congruences."""
from __future__ import annotations

import numpy as np

from .congruence import ParametricCongruence
from .twistor import (
    CANDIDATE_FRAMES,
    EuclidPoint,
    MobiusRotation,
    affine_param,
    chart_vector,
    choose_frame,
    line_from_point_dir,
)


def _direction_vector(direction):
    if np.iscomplexobj(direction) or np.ndim(direction) == 0:
        v = chart_vector(np.asarray(direction, dtype=complex))
    else:
        v = np.asarray(direction, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"bad direction {direction!r}")
    return v / np.linalg.norm(v)


def transverse_basis(d):
    """Orthonormal ``(e1, e2)`` spanning the plane orthogonal to ``d``.

    For ``d = (0, 0, -1)`` this is ``(x1, x2)``, so the parameter of a wave
    travelling down the x3-axis is ``x1 + i x2``.
    """
    d = np.asarray(d, dtype=float)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, d) * d
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(e1, d)


def plane_wave(direction, origin=(0.0, 0.0, 0.0), basis=None, frame: MobiusRotation | None = None):
    """Parallel rays with propagation ``direction`` (3-vector, or a chart
    value; ``inf`` means straight down).

    The ray with parameter ``nu = u + iv`` passes through
    ``origin + u e1 + v e2``.  Coordinates live in ``frame``, by default the
    candidate frame that keeps the direction farthest from the chart edge.
    """
    d = _direction_vector(direction)
    e1, e2 = transverse_basis(d) if basis is None else (np.asarray(basis[0], float), np.asarray(basis[1], float))
    if frame is None:
        frame = CANDIDATE_FRAMES[int(choose_frame(d))]
    M = frame.matrix()
    df, of, e1f, e2f = (M @ v for v in (d, np.asarray(origin, float), e1, e2))
    xi = complex(df[0] + 1j * df[1]) / (1.0 + df[2])

    def eta_of(p):
        return line_from_point_dir(EuclidPoint(p[0] + 1j * p[1], p[2]), xi)

    # eta is real-linear in the transverse position
    eta_o = eta_of(of)
    eta_1 = eta_of(e1f)
    eta_2 = eta_of(e2f)
    d_eta = 0.5 * (eta_1 - 1j * eta_2)
    db_eta = 0.5 * (eta_1 + 1j * eta_2)

    def map_(nu):
        nu = np.asarray(nu, dtype=complex)
        return np.full(nu.shape, xi), eta_o + nu.real * eta_1 + nu.imag * eta_2

    zero = np.complex128(0.0)
    return ParametricCongruence(
        map=map_,
        derivatives=lambda nu: (zero, zero, d_eta, db_eta),
        frame=frame,
        potential=lambda nu: np.zeros(np.shape(nu)),
        info={"kind": "plane", "direction": d, "origin": np.asarray(origin, float), "basis": (e1, e2)},
    )


def spherical_wave(source=(0.0, 0.0, 0.0), frame: MobiusRotation | None = None):
    """All rays leaving the point ``source``, parameterised by their direction
    in ``frame`` coordinates (``nu = xi``).  Rays start at the source."""
    frame = MobiusRotation.identity() if frame is None else frame
    s = frame.matrix() @ np.asarray(source, dtype=float)
    p = EuclidPoint(complex(s[0] + 1j * s[1]), float(s[2]))

    def map_(nu):
        nu = np.asarray(nu, dtype=complex)
        return nu, line_from_point_dir(p, nu)

    one, zero = np.complex128(1.0), np.complex128(0.0)
    return ParametricCongruence(
        map=map_,
        derivatives=lambda nu: (one, zero, -p.t - np.conj(p.z) * np.asarray(nu), zero),
        frame=frame,
        start=lambda nu: affine_param(p, np.asarray(nu, dtype=complex)),
        potential=lambda nu: affine_param(p, np.asarray(nu, dtype=complex)),
        info={"kind": "spherical", "source": np.asarray(source, float)},
    )


def graph_congruence(F, frame: MobiusRotation | None = None):
    """The congruence ``xi -> (xi, F(xi))``, e.g. the normals of a surface."""
    one, zero = np.complex128(1.0), np.complex128(0.0)
    return ParametricCongruence(
        map=lambda nu: (np.asarray(nu, dtype=complex), np.asarray(F(nu), dtype=complex)),
        derivatives=lambda nu: (one, zero, None, None),
        frame=frame or MobiusRotation.identity(),
        info={"kind": "graph"},
    )
