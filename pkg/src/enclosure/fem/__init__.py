"""Finite element forward solver for the welded cracked plate."""

from .mesh import Mesh, build_mesh
from .solver import DiscreteSolution, SolverError, assemble_and_solve
from .trace import (JUMP_COLUMNS, TRACE_COLUMNS, boundary_trace, jump_csv, read_jump_csv, read_trace_csv,
                    sigma_jump, trace_csv)

__all__ = ["Mesh", "build_mesh", "DiscreteSolution", "SolverError", "assemble_and_solve",
           "boundary_trace", "sigma_jump", "TRACE_COLUMNS", "JUMP_COLUMNS", "trace_csv", "jump_csv",
           "read_trace_csv", "read_jump_csv"]
