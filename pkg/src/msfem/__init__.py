"""Finite element solver for the Maxwell-Schroedinger system in the temporal gauge."""
from .mesh import Mesh, build_unit_cube_mesh
from .assembly import FormContext

__all__ = ["Mesh", "build_unit_cube_mesh", "FormContext"]
__version__ = "0.1.0"
