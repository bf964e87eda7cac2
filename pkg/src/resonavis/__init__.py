"""Vibration modes of two layered dissipative fluids in a rigid cavity.

The package discretizes the quadratic eigenvalue problem for the fluid
displacement with lowest-order Raviart-Thomas elements on a structured
triangulation, solves it by shift-invert Arnoldi, and cross-checks the
computed eigenvalues against the semi-analytic dispersion relation of the
layered rectangular cavity.
"""

from .assembly import (
    AssemblyError,
    Fluid,
    MaterialConfig,
    assemble_global,
    rt0_element_matrices,
    write_matrix_coo,
)
from .dispersion import (
    DispersionError,
    DispersionProblem,
    contour_grid,
    dispersion_residual,
    f_m,
    find_roots,
    homogeneous_lambda,
    inviscid_rectangle_modes,
    r_m,
)
from .linalg import (
    Factorization,
    KrylovState,
    LinAlgError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    arnoldi,
    factor_complex,
    factor_spd,
    hessenberg_eig,
    spmv,
)
from .mesh import (
    GeometryConfig,
    Mesh,
    MeshError,
    build_rect_mesh,
    mesh_stats,
    write_mesh_text,
)
from .solver import (
    EigenPair,
    NoConvergedPairsError,
    QuadraticPencil,
    ResidualReport,
    ShiftInvertOperator,
    SolverError,
    SpectralBand,
    build_pencil,
    check_eigenpair,
    default_shift,
    essential_band,
    filter_spurious,
    fit_convergence_order,
    prepare_shift_invert,
    shift_invert_apply,
    solve_qep,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "DispersionError",
    "DispersionProblem",
    "EigenPair",
    "Factorization",
    "Fluid",
    "GeometryConfig",
    "KrylovState",
    "LinAlgError",
    "MaterialConfig",
    "Mesh",
    "MeshError",
    "NoConvergedPairsError",
    "NotPositiveDefiniteError",
    "QuadraticPencil",
    "ResidualReport",
    "ShiftInvertOperator",
    "SingularMatrixError",
    "SolverError",
    "SpectralBand",
    "arnoldi",
    "assemble_global",
    "build_pencil",
    "build_rect_mesh",
    "check_eigenpair",
    "contour_grid",
    "default_shift",
    "dispersion_residual",
    "essential_band",
    "f_m",
    "factor_complex",
    "factor_spd",
    "filter_spurious",
    "find_roots",
    "fit_convergence_order",
    "hessenberg_eig",
    "homogeneous_lambda",
    "inviscid_rectangle_modes",
    "mesh_stats",
    "prepare_shift_invert",
    "r_m",
    "rt0_element_matrices",
    "shift_invert_apply",
    "solve_qep",
    "spmv",
    "write_matrix_coo",
    "write_mesh_text",
]
