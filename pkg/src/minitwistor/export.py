"""CSV and OBJ writers for congruences and wavefront point clouds."""
from __future__ import annotations

import csv
import io

import numpy as np

FIELDS = ("nu_re", "nu_im", "xi_re", "xi_im", "eta_re", "eta_im", "r", "C", "x1", "x2", "x3", "shadow")
# cells left empty on shadow rows
_GEOMETRY = ("xi_re", "xi_im", "eta_re", "eta_im", "r", "x1", "x2", "x3")


def _num(x):
    return "%.17g" % x


def records(nu, xi, eta, r, C, xyz, shadow):
    """Column arrays keyed by :data:`FIELDS`, flattened in row-major order."""
    nu = np.ravel(nu)
    n = nu.size
    xyz = np.asarray(xyz, dtype=float).reshape(n, 3)
    return {
        "nu_re": nu.real,
        "nu_im": nu.imag,
        "xi_re": np.ravel(xi).real,
        "xi_im": np.ravel(xi).imag,
        "eta_re": np.ravel(eta).real,
        "eta_im": np.ravel(eta).imag,
        "r": np.broadcast_to(np.asarray(r, dtype=float), n).ravel() if np.ndim(r) == 0 else np.ravel(r),
        "C": np.full(n, float(C)),
        "x1": xyz[:, 0],
        "x2": xyz[:, 1],
        "x3": xyz[:, 2],
        "shadow": np.ravel(shadow).astype(bool),
    }


def csv_text(cols) -> str:
    """RFC 4180 CSV with 17 significant digits.

    Shadow rows carry only the parameter, the offset and the flag.  Any
    other non-finite value is also written as an empty cell.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(FIELDS)
    n = len(cols["nu_re"])
    for k in range(n):
        shadow = bool(cols["shadow"][k])
        row = []
        for f in FIELDS:
            if f == "shadow":
                row.append("1" if shadow else "0")
                continue
            v = float(cols[f][k])
            row.append("" if (shadow and f in _GEOMETRY) or not np.isfinite(v) else _num(v))
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, cols):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(cols))


def read_csv(path):
    """Read a file written by :func:`write_csv`; empty cells become NaN."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for f in FIELDS:
        if f == "shadow":
            out[f] = np.array([row[f] == "1" for row in rows], dtype=bool)
        else:
            out[f] = np.array([float(row[f]) if row[f] else np.nan for row in rows])
    return out


def obj_text(xyz, digest, offset=None) -> str:
    """Vertices-only OBJ; non-finite points are dropped."""
    pts = np.asarray(xyz, dtype=float).reshape(-1, 3)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    head = ["# minitwistor wavefront point cloud", f"# scene {digest}"]
    if offset is not None:
        head.append(f"# offset {_num(offset)}")
    head.append(f"# vertices {len(pts)}")
    body = [f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in pts]
    return "\n".join(head + body) + "\n"


def write_obj(path, xyz, digest, offset=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(obj_text(xyz, digest, offset))
