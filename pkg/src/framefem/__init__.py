"""High-order finite elements represented by L²-stable local frames.

Modules: :mod:`~framefem.mesh`, :mod:`~framefem.polylib`,
:mod:`~framefem.framespace`, :mod:`~framefem.assembly`,
:mod:`~framefem.spectral`, :mod:`~framefem.solver` and :mod:`~framefem.cli`.
"""
from .assembly import BilinearFormSpec, SymmetricMatrix, assemble, assemble_load, evaluate_solution
from .framespace import GlobalFrame, StandardBasis, enumerate_frame, frame_eval, frame_grad
from .mesh import SimplicialMesh, build_mesh, generate_mesh
from .solver import build_schwarz, pcg
from .spectral import Tolerances, frame_condition, generalized_condition, sym_eigvals

__version__ = "0.1.0"

__all__ = [
    "BilinearFormSpec", "GlobalFrame", "SimplicialMesh", "StandardBasis", "SymmetricMatrix", "Tolerances",
    "assemble", "assemble_load", "build_mesh", "build_schwarz", "enumerate_frame", "evaluate_solution",
    "frame_condition", "frame_eval", "frame_grad", "generalized_condition", "generate_mesh", "pcg",
    "sym_eigvals",
]
