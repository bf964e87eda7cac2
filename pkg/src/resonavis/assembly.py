"""Element matrices and global assembly for the damped acoustic pencil.

The displacement field is discretized with lowest-order Raviart-Thomas
elements: one degree of freedom per edge, the (constant) normal component
of the field across that edge.  The quadratic pencil

    lambda^2 M + lambda K1 + K2

collects the mass form rho (u, v), the damping form 2 nu (div u, div v)
and the stiffness form rho c^2 (div u, div v), with coefficients constant
per subdomain.  Degrees of freedom on the cavity wall are eliminated,
which enforces the zero normal-displacement wall condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class AssemblyError(ValueError):
    """Raised for element geometry the assembly cannot handle."""


@dataclass(frozen=True)
class Fluid:
    """Acoustic medium: density, sound speed, bulk viscosity.

    Units are kg/m^3, m/s and N s/m^2; ``nu = 0`` gives a lossless fluid.
    """

    rho: float
    c: float
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")

    @property
    def rho_c2(self) -> float:
        """Bulk modulus rho c^2."""
        return self.rho * self.c * self.c


@dataclass(frozen=True)
class MaterialConfig:
    """Fluids below (subdomain 1) and above (subdomain 2) the interface."""

    lower: Fluid
    upper: Fluid

    def fluid(self, subdomain: int) -> Fluid:
        if subdomain == 1:
            return self.lower
        if subdomain == 2:
            return self.upper
        raise ValueError(f"unknown subdomain tag {subdomain}")

    @property
    def fluids(self) -> tuple[Fluid, Fluid]:
        return (self.lower, self.upper)

    @property
    def inviscid(self) -> bool:
        return self.lower.nu == 0.0 and self.upper.nu == 0.0


def rt0_element_matrices(coords: np.ndarray, signs: np.ndarray, fluid: Fluid):
    """Element mass, damping and stiffness matrices on one triangle.

    Parameters
    ----------
    coords : (3, 2) array
        Vertex coordinates.
    signs : (3,) array
        Orientation of each local edge relative to its global edge, +1/-1.
    fluid : Fluid
        Material coefficients on the triangle.

    Returns
    -------
    (Me, K1e, K2e) : three (3, 3) arrays

    Notes
    -----
    The basis function of local edge ``i`` (opposite vertex ``i``) is
    ``signs[i] * L_i / (2 |T|) * (x - p_i)`` with unit normal component
    along its edge, so ``div phi_i = signs[i] * L_i / |T|`` is constant and
    the damping/stiffness matrices are closed-form.  The mass matrix uses
    the three-point edge-midpoint rule, which is exact for the quadratic
    integrand on affine triangles.
    """
    coords = np.asarray(coords, dtype=float)
    signs = np.asarray(signs, dtype=float)
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    lengths = np.array(
        [
            np.hypot(*(coords[2] - coords[1])),
            np.hypot(*(coords[0] - coords[2])),
            np.hypot(*(coords[1] - coords[0])),
        ]
    )
    if area <= 1e-14 * lengths.max() ** 2:
        raise AssemblyError(f"degenerate triangle, area {area:.3e}")

    div = signs * lengths / area
    K1e = 2.0 * fluid.nu * area * np.outer(div, div)
    K2e = fluid.rho_c2 * area * np.outer(div, div)

    mids = 0.5 * (coords[[1, 2, 0]] + coords[[2, 0, 1]])
    factor = signs * lengths / (2.0 * area)
    Me = np.zeros((3, 3))
    for mid in mids:
        phi = factor[:, None] * (mid - coords)
        Me += (area / 3.0) * (phi @ phi.T)
    return fluid.rho * Me, K1e, K2e


def assemble_global(mesh: Mesh, materials: MaterialConfig):
    """Assemble the pencil matrices on interior (non-wall) edge DOFs.

    Returns
    -------
    (M, K1, K2) : scipy.sparse.csr_matrix
        Symmetric matrices sharing one sparsity pattern, indexed by the
        mesh's interior edges in their lexicographic order.
    """
    verts = mesh.vertices
    tris = mesh.triangles
    tri_edges = mesh.triangle_edges
    signs = mesh.triangle_edge_signs.astype(float)

    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    lengths = mesh.edge_lengths()[tri_edges]
    if np.any(areas <= 1e-14 * lengths.max(axis=1) ** 2):
        raise AssemblyError("degenerate triangle in mesh")

    rho = np.empty(len(tris))
    rho_c2 = np.empty(len(tris))
    two_nu = np.empty(len(tris))
    for tag in (1, 2):
        fluid = materials.fluid(tag)
        where = mesh.triangle_subdomain == tag
        rho[where] = fluid.rho
        rho_c2[where] = fluid.rho_c2
        two_nu[where] = 2.0 * fluid.nu

    div = signs * lengths / areas[:, None]
    div_outer = div[:, :, None] * div[:, None, :] * areas[:, None, None]
    K1e = two_nu[:, None, None] * div_outer
    K2e = rho_c2[:, None, None] * div_outer

    factor = signs * lengths / (2.0 * areas[:, None])
    Me = np.zeros((len(tris), 3, 3))
    for k in range(3):
        mid = 0.5 * (p[:, (k + 1) % 3] + p[:, (k + 2) % 3])
        phi = factor[:, :, None] * (mid[:, None, :] - p)
        Me += (areas / 3.0)[:, None, None] * np.einsum("tie,tje->tij", phi, phi)
    Me *= rho[:, None, None]

    ne = mesh.num_edges
    rows = np.broadcast_to(tri_edges[:, :, None], (len(tris), 3, 3)).ravel()
    cols = np.broadcast_to(tri_edges[:, None, :], (len(tris), 3, 3)).ravel()

    def collect(values: np.ndarray) -> sp.csr_matrix:
        mat = sp.coo_matrix((values.ravel(), (rows, cols)), shape=(ne, ne))
        return mat.tocsr()

    keep = mesh.interior_edges()
    M = collect(Me)[keep][:, keep].tocsr()
    K1 = collect(K1e)[keep][:, keep].tocsr()
    K2 = collect(K2e)[keep][:, keep].tocsr()
    return M, K1, K2


def write_matrix_coo(matrix: sp.spmatrix, path) -> None:
    """Write a sparse matrix as ``row col value`` lines, zero-based indices."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="ascii") as out:
        out.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            if np.iscomplexobj(coo.data):
                out.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")
            else:
                out.write(f"{r} {c} {float(v)!r}\n")
