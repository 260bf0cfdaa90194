"""Harmonic virtual element method for the Laplace equation on polygonal meshes."""

from .element import StabChoice, local_stiffness
from .generators import generate_graded_mesh, generate_hexagonal_mesh, generate_square_mesh
from .mesh import Mesh, MeshError, assign_layers, read_mesh, write_mesh
from .solver import assemble, assign_degrees, build_global_layout, solve, solve_dirichlet
from .study import computable_error, fit, run_h_study, run_hp_study

__version__ = "0.1.0"

__all__ = [
    "Mesh", "MeshError", "StabChoice", "assemble", "assign_degrees", "assign_layers",
    "build_global_layout", "computable_error", "fit", "generate_graded_mesh",
    "generate_hexagonal_mesh", "generate_square_mesh", "local_stiffness", "read_mesh",
    "run_h_study", "run_hp_study", "solve", "solve_dirichlet", "write_mesh",
]
