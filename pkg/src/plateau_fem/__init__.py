"""Finite element and ADMM minimization of line/surface energies around a particle."""

from .admm import AdmmParams, AdmmState, Gamma0Field, RunResult, admm_run, build_u0, compute_c_m, diagnostics, prox_weighted_l1
from .mesh import TetMesh, build_box_mesh, read_msh
from .regions import Region, RegionLabels, classify_cells
from .shapes import Croissant, Donut, Peanut, Shape, Sphere, field_direction, make_shape

__all__ = [
    "AdmmParams",
    "AdmmState",
    "Croissant",
    "Donut",
    "Gamma0Field",
    "Peanut",
    "Region",
    "RegionLabels",
    "RunResult",
    "Shape",
    "Sphere",
    "TetMesh",
    "admm_run",
    "build_box_mesh",
    "build_u0",
    "classify_cells",
    "compute_c_m",
    "diagnostics",
    "field_direction",
    "make_shape",
    "prox_weighted_l1",
    "read_msh",
]
