"""Scene files: a small line-oriented ``[section]`` / ``key = value`` format.

Example::

    [surface]
    type = torus
    a = 2
    b = 1

    [wave]
    type = plane
    xi1 = 2.4      # propagation direction in the chart; inf = straight down

    [grid]
    n = 128
    radius = 2

configparser is not used because errors must carry line numbers and keys
must be checked strictly against a schema.
"""
from __future__ import annotations

import ast
import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidParams, ParseError, ValidationError

# -- expressions -------------------------------------------------------------

_FUNCS = {"conj": np.conj, "sqrt": lambda x: np.sqrt(np.asarray(x, dtype=complex)), "abs": np.abs}
_CONSTS = {"i": 1j, "pi": math.pi, "inf": math.inf}
_VARS = ("xi", "nu")
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class Expression:
    """Complex arithmetic over ``xi``/``nu`` with ``conj``, ``sqrt``, ``abs``.

    ``sqrt`` is the principal branch.  ``nu`` and ``xi`` name the same
    variable, so formulas can be pasted with either spelling.
    """

    def __init__(self, text):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as e:
            raise ValueError(f"bad expression {text!r}: {e.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name) and (node.id in _VARS or node.id in _CONSTS):
            pass
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise ValueError(f"{node.func.id}() takes exactly one argument")
            self._check(node.args[0])
        else:
            raise ValueError(f"unsupported syntax in expression {self.text!r}: {ast.dump(node)[:40]}")

    def _eval(self, node, x):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, x), self._eval(node.right, x))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, x)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return x if node.id in _VARS else _CONSTS[node.id]
        return _FUNCS[node.func.id](self._eval(node.args[0], x))

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._eval(self._tree, x)
        return np.broadcast_to(np.asarray(out, dtype=complex), x.shape).copy()

    def __eq__(self, other):
        return isinstance(other, Expression) and other.text == self.text

    def __repr__(self):
        return f"Expression({self.text!r})"


# -- config ------------------------------------------------------------------


@dataclass
class WaveSpec:
    kind: str = "plane"
    xi1: complex = complex(math.inf, 0.0)
    source: tuple = (0.0, 0.0, 0.0)
    axis: tuple | None = None
    F: Expression | None = None
    r: Expression | None = None


@dataclass
class GridSpec:
    n: int = 128
    m: int = 128
    radius: float | None = 2.0
    umin: float | None = None
    umax: float | None = None
    vmin: float | None = None
    vmax: float | None = None

    def bounds(self):
        R = self.radius if self.radius is not None else 2.0
        return (
            -R if self.umin is None else self.umin,
            R if self.umax is None else self.umax,
            -R if self.vmin is None else self.vmin,
            R if self.vmax is None else self.vmax,
        )


@dataclass
class SolverSpec:
    grazing_margin: float = 0.2
    path_tol: float = 1e-4
    integrability_tol: float = 1e-5
    stride: int = 4
    branch: str = "auto"


@dataclass
class OutputSpec:
    path: str = "out"
    format: str = "both"
    offsets: tuple = (0.0,)


@dataclass
class SceneConfig:
    surface: str = "sphere"
    surface_params: dict = field(default_factory=dict)
    wave: WaveSpec = field(default_factory=WaveSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def offsets(self):
        return self.output.offsets

    def digest(self):
        """Short content hash of the canonical serialisation."""
        return hashlib.sha256(serialize_scene(self).encode()).hexdigest()[:16]

    def build_surface(self):
        from .closed_forms import gallery

        return gallery(self.surface, **self.surface_params)

    def build_wave(self):
        from .twistor import frame_centred_on
        from .waves import graph_congruence, plane_wave, spherical_wave

        w = self.wave
        if w.kind == "plane":
            return plane_wave(w.xi1)
        if w.kind == "spherical":
            axis = self.wave_axis()
            return spherical_wave(w.source, frame=frame_centred_on(axis))
        c = graph_congruence(w.F)
        if w.r is not None:
            c.potential = lambda nu: np.asarray(w.r(nu)).real
        return c

    def wave_axis(self):
        """Direction of the ``nu = 0`` ray of a spherical wave: the scene axis
        if given, else from the source towards the surface."""
        if self.wave.axis is not None:
            return np.asarray(self.wave.axis, dtype=float)
        src = np.asarray(self.wave.source, dtype=float)
        p = self.surface_params
        if self.surface == "sphere":
            target = np.asarray(p.get("center", (0.0, 0.0, 0.0)), dtype=float)
        elif self.surface == "plane":
            target = np.array([src[0], src[1], p.get("height", 0.0)])
        else:
            target = np.zeros(3)
        v = target - src
        return v if np.linalg.norm(v) > 0 else np.array([0.0, 0.0, -1.0])

    def build_grid(self, singular=(), mask_radius=0.0):
        from .congruence import Grid

        g = self.grid
        return Grid.box(*g.bounds(), n=g.n, m=g.m, disk=g.radius, singular=singular, mask_radius=mask_radius)


# surface parameter schemas: key -> kind
_SURFACES = {
    "sphere": {"center": "vec3", "radius": "float"},
    "torus": {"a": "float", "b": "float", "mask_radius": "float"},
    "plane": {"height": "float"},
}
_WAVE_KEYS = {
    "plane": {"xi1": "chart"},
    "spherical": {"source": "vec3", "axis": "vec3?"},
    "custom": {"F": "expr", "r": "expr"},
}
_SECTION_KEYS = {
    "grid": {"n": "int", "m": "int", "radius": "float?", "umin": "float?", "umax": "float?",
             "vmin": "float?", "vmax": "float?"},
    "solver": {"grazing_margin": "float", "path_tol": "float", "integrability_tol": "float",
               "stride": "int", "branch": "branch"},
    "output": {"path": "str", "format": "format", "offsets": "floats"},
}


def _convert(kind, raw):
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "float?":
        return None if raw.lower() == "none" else _convert("float", raw)
    if kind == "int":
        v = int(raw)
        if v < 1:
            raise ValueError("must be a positive integer")
        return v
    if kind == "complex":
        v = complex(Expression(raw)(0.0))
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError("must be finite")
        return v
    if kind == "chart":
        # a direction in the stereographic chart; inf is straight down
        if raw.strip().lower() == "inf":
            return complex(math.inf, 0.0)
        return _convert("complex", raw)
    if kind == "vec3?":
        if raw.lower() == "none":
            return None
        v = _convert("vec3", raw)
        if not any(v):
            raise ValueError("must be a nonzero vector")
        return v
    if kind == "vec3":
        parts = [p for p in raw.replace("(", " ").replace(")", " ").replace(",", " ").split()]
        if len(parts) != 3:
            raise ValueError("expected three numbers")
        return tuple(_convert("float", p) for p in parts)
    if kind == "floats":
        parts = [p for p in raw.replace(",", " ").split()]
        if not parts:
            raise ValueError("expected at least one number")
        return tuple(_convert("float", p) for p in parts)
    if kind == "expr":
        return Expression(raw)
    if kind == "branch":
        if raw not in ("auto", "+", "-"):
            raise ValueError("must be auto, + or -")
        return raw
    if kind == "format":
        if raw not in ("csv", "obj", "both"):
            raise ValueError("must be csv, obj or both")
        return raw
    return raw


def _tokenize(text):
    """Yield ``(line, section, key, value)``; section headers give key None."""
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("["):
            if not s.endswith("]") or len(s) < 3:
                raise ParseError(lineno, f"malformed section header {s!r}")
            section = s[1:-1].strip().lower()
            yield lineno, section, None, None
            continue
        if "=" not in s:
            raise ParseError(lineno, f"expected key = value, got {s!r}")
        if section is None:
            raise ParseError(lineno, "key outside of any [section]")
        key, value = (p.strip() for p in s.split("=", 1))
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ParseError(lineno, "empty key")
        yield lineno, section, key, value


def parse_scene(text, strict=True) -> SceneConfig:
    """Parse and validate scene text.

    Unknown sections and keys raise ``ValidationError`` when ``strict``
    (the default) and are ignored otherwise.  Missing values take defaults:
    unit sphere, plane wave straight down, 128 x 128 grid over ``|nu| <= 2``.
    """
    raw = {}
    lines = {}
    seen = set()
    for lineno, section, key, value in _tokenize(text):
        if key is None:
            if section in seen:
                raise ParseError(lineno, f"duplicate section [{section}]")
            seen.add(section)
            if section not in ("surface", "wave", *_SECTION_KEYS):
                if strict:
                    raise ValidationError(section, "unknown section", lineno)
            raw.setdefault(section, {})
            continue
        sec = raw.setdefault(section, {})
        if key in sec:
            raise ParseError(lineno, f"duplicate key {key!r}")
        sec[key] = value
        lines[(section, key)] = lineno

    def fail(sec, key, msg):
        raise ValidationError(f"{sec}.{key}", msg, lines.get((sec, key)))

    def pick(sec, schema, skip=("type",)):
        out = {}
        for key, value in raw.get(sec, {}).items():
            if key in skip:
                continue
            if key not in schema:
                if strict:
                    fail(sec, key, "unknown key")
                continue
            try:
                out[key] = _convert(schema[key], value)
            except ValueError as e:
                fail(sec, key, str(e))
        return out

    cfg = SceneConfig()
    surf = raw.get("surface", {})
    stype = surf.get("type", "sphere").lower()
    if stype not in _SURFACES:
        fail("surface", "type", f"unknown surface {stype!r} (choose from {', '.join(_SURFACES)})")
    cfg.surface = stype
    cfg.surface_params = pick("surface", _SURFACES[stype])
    if stype == "torus":
        a, b = cfg.surface_params.get("a", 2.0), cfg.surface_params.get("b", 1.0)
        if not (b > 0 and a > b):
            fail("surface", "a" if "a" in surf else "b", f"torus requires a > b > 0, got a={a:g}, b={b:g}")
    try:
        cfg.build_surface()
    except InvalidParams as e:
        key = next(iter(cfg.surface_params), "type")
        fail("surface", key, str(e))

    wave = raw.get("wave", {})
    wtype = wave.get("type", "plane").lower()
    if wtype not in _WAVE_KEYS:
        fail("wave", "type", f"unknown wave {wtype!r} (choose from {', '.join(_WAVE_KEYS)})")
    cfg.wave = WaveSpec(kind=wtype, **pick("wave", _WAVE_KEYS[wtype]))
    if wtype == "custom" and cfg.wave.F is None:
        raise ValidationError("wave.F", "custom wave needs an F expression", lines.get(("wave", "type")))

    cfg.grid = replace(cfg.grid, **pick("grid", _SECTION_KEYS["grid"], skip=()))
    if cfg.grid.radius is not None and cfg.grid.radius <= 0:
        fail("grid", "radius", "must be positive")
    umin, umax, vmin, vmax = cfg.grid.bounds()
    if not (umin < umax and vmin < vmax):
        fail("grid", "umin", "empty grid bounds")
    cfg.solver = replace(cfg.solver, **pick("solver", _SECTION_KEYS["solver"], skip=()))
    if not 0 <= cfg.solver.grazing_margin < 1:
        fail("solver", "grazing_margin", "must lie in [0, 1)")
    cfg.output = replace(cfg.output, **pick("output", _SECTION_KEYS["output"], skip=()))
    return cfg


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, Expression):
        return v.text
    if isinstance(v, complex):
        if math.isinf(v.real):
            return "inf"
        return f"{v.real!r} + {v.imag!r}*i"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_scene(cfg: SceneConfig) -> str:
    """Canonical text for ``cfg``; ``parse_scene`` inverts it exactly."""
    out = ["[surface]", f"type = {cfg.surface}"]
    out += [f"{k} = {_fmt(v)}" for k, v in sorted(cfg.surface_params.items())]
    out += ["", "[wave]", f"type = {cfg.wave.kind}"]
    for key in _WAVE_KEYS[cfg.wave.kind]:
        v = getattr(cfg.wave, key)
        if v is not None:
            out.append(f"{key} = {_fmt(v)}")
    for name in ("grid", "solver", "output"):
        spec = getattr(cfg, name)
        out += ["", f"[{name}]"]
        out += [f"{f.name} = {_fmt(getattr(spec, f.name))}" for f in fields(spec)]
    return "\n".join(out) + "\n"


def load_scene(path, strict=True) -> SceneConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read(), strict=strict)
