"""Geometric optics in minitwistor coordinates.

Oriented lines in R^3 are points ``(xi, eta)`` of TP^1: ``xi`` is the
stereographic direction and ``eta`` the perpendicular-distance vector.
Reflection off a surface acts on these coordinates directly, and wavefronts
are recovered from an integrable congruence through its potential.
"""
from .closed_forms import (
    REFERENCE_CASES,
    ReferenceSolution,
    SurfaceGalleryEntry,
    gallery,
    gallery_names,
    plane_wave_by_direction,
    plane_wave_by_surface_point,
    plane_wave_down_axis,
    reference_reflected,
    reflect_in_plane,
    spherical_wave_reflection,
)
from .congruence import (
    Grid,
    ParametricCongruence,
    ParametricSurface,
    PotentialSolution,
    TwistorSurface,
    congruence_potential_residual,
    integrability_residual,
    potential_form,
    potential_residual,
    solve_potential,
    wavefront_points,
)
from .errors import (
    BranchUndefined,
    ChartEscape,
    DegenerateFocus,
    InvalidParams,
    Miss,
    NoConvergence,
    NoIntersection,
    NotIntegrable,
    ParseError,
    PathMismatch,
    TwistorError,
    UnknownCase,
    ValidationError,
)
from .oracle import (
    ImplicitSurface,
    Ray,
    intersect_ray_surface,
    reflect_vector,
    trace_reflection,
    wavefront_by_path_length,
)
from .reflection import (
    ReflectedCongruence,
    ReflectionEvent,
    malus_defect,
    malus_residual,
    reflect_congruence,
    reflect_direction,
    reflect_line,
    solve_incidence,
)
from .scene import SceneConfig, load_scene, parse_scene, serialize_scene
from .twistor import (
    CANDIDATE_FRAMES,
    EuclidPoint,
    MobiusRotation,
    OrientedLine,
    Translation,
    affine_param,
    antipode,
    dir_to_vector,
    line_from_point_dir,
    point_from_line,
    reverse_line,
    rotate_line,
    translate_line,
    vector_to_dir,
)
from .waves import graph_congruence, plane_wave, spherical_wave

__version__ = "0.1.0"
