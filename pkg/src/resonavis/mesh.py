"""Structured triangulations of a rectangular cavity holding two stacked fluids.

The cavity (0, width) x (0, height) is covered by square cells of side
width/n, each split into two triangles along a diagonal that alternates
between neighboring cells.  The horizontal line y = interface_height
separates the lower
fluid (subdomain 1) from the upper fluid (subdomain 2) and must coincide
with a mesh line, so eigenvalue convergence is not polluted by cells that
straddle the material jump.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Raised when the requested refinement cannot tile the geometry."""


@dataclass(frozen=True)
class GeometryConfig:
    """Cavity dimensions in meters.

    Attributes
    ----------
    width : float
        Horizontal extent of the cavity.
    height : float
        Vertical extent of the cavity.
    interface_height : float
        Elevation of the fluid-fluid interface, strictly between 0 and
        ``height``.
    """

    width: float
    height: float
    interface_height: float

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("cavity dimensions must be positive")
        if not 0 < self.interface_height < self.height:
            raise ValueError("interface_height must lie strictly inside (0, height)")


@dataclass(frozen=True)
class Mesh:
    """Triangulation with the edge data needed by lowest-order H(div) elements.

    Edges are stored with the lower vertex index first and are numbered in
    lexicographic order of (min vertex, max vertex).  The positive normal of
    an edge is its tangent (from lower to higher vertex index) rotated a
    quarter turn clockwise.  ``triangle_edge_signs[t, k]`` is +1 when the
    outward normal of triangle ``t`` on its k-th edge (the edge opposite
    local vertex k) agrees with that positive normal, -1 otherwise.
    """

    geometry: GeometryConfig
    refinement: int
    vertices: np.ndarray
    triangles: np.ndarray
    triangle_subdomain: np.ndarray
    edges: np.ndarray
    edge_is_boundary: np.ndarray
    triangle_edges: np.ndarray
    triangle_edge_signs: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_boundary_edges(self) -> int:
        return int(self.edge_is_boundary.sum())

    @property
    def num_interior_edges(self) -> int:
        return self.num_edges - self.num_boundary_edges

    @property
    def h(self) -> float:
        """Side length of the square cells."""
        return self.geometry.width / self.refinement

    def interior_edges(self) -> np.ndarray:
        """Indices of non-boundary edges, ascending."""
        return np.flatnonzero(~self.edge_is_boundary)

    def edge_lengths(self) -> np.ndarray:
        delta = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(delta[:, 0], delta[:, 1])

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def edge_normals(self) -> np.ndarray:
        """Unit positive normals, tangent rotated clockwise."""
        delta = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        length = np.hypot(delta[:, 0], delta[:, 1])
        return np.column_stack((delta[:, 1], -delta[:, 0])) / length[:, None]

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _as_integer(value: float, what: str) -> int:
    rounded = round(value)
    if abs(value - rounded) > 1e-9 * max(1.0, abs(value)):
        raise MeshError(what)
    return int(rounded)


def build_rect_mesh(geometry: GeometryConfig, n: int) -> Mesh:
    """Build the structured triangulation with ``n`` cells across the width.

    Square cells of side ``width / n`` are each split into two triangles;
    the split diagonal alternates between neighboring cells so the mesh has
    no preferred direction.

    Parameters
    ----------
    geometry : GeometryConfig
        Cavity dimensions and interface elevation.
    n : int
        Number of square cells across the width; the cell side is
        ``width / n``.

    Returns
    -------
    Mesh

    Raises
    ------
    MeshError
        If ``height / width * n`` is not an integer (cells would not tile
        the height) or ``interface_height / width * n`` is not an integer
        (the interface would cut through cells).
    """
    if n < 1:
        raise MeshError("refinement must be at least 1")
    rows = _as_integer(
        geometry.height / geometry.width * n,
        f"non-integer row count: {n} cells across the width do not tile the height",
    )
    interface_row = _as_integer(
        geometry.interface_height / geometry.width * n,
        f"misaligned interface: y = {geometry.interface_height} is not a mesh "
        f"line at refinement {n}",
    )

    h = geometry.width / n
    cols = n
    nvx = cols + 1
    xs = np.arange(nvx) * h
    ys = np.arange(rows + 1) * h
    vertices = np.column_stack(
        (np.tile(xs, rows + 1), np.repeat(ys, nvx))
    )

    triangles = np.empty((2 * cols * rows, 3), dtype=np.int64)
    subdomain = np.empty(2 * cols * rows, dtype=np.int8)
    t = 0
    for iy in range(rows):
        tag = 1 if iy < interface_row else 2
        base = iy * nvx
        for ix in range(cols):
            v00 = base + ix
            v10 = v00 + 1
            v01 = v00 + nvx
            v11 = v01 + 1
            # Diagonal direction alternates checkerboard-fashion so the
            # triangulation carries no preferred slant; a single fixed
            # direction biases the high modes noticeably on coarse meshes.
            # Both triangles are counterclockwise either way.
            if (ix + iy) % 2 == 0:
                triangles[t] = (v00, v10, v11)
                triangles[t + 1] = (v00, v11, v01)
            else:
                triangles[t] = (v00, v10, v01)
                triangles[t + 1] = (v10, v11, v01)
            subdomain[t] = subdomain[t + 1] = tag
            t += 2

    # local edge k joins vertices (k+1)%3 and (k+2)%3, i.e. sits opposite vertex k
    ends_a = triangles[:, [1, 2, 0]]
    ends_b = triangles[:, [2, 0, 1]]
    lo = np.minimum(ends_a, ends_b)
    hi = np.maximum(ends_a, ends_b)
    pairs = np.column_stack((lo.ravel(), hi.ravel()))
    edges, inverse, counts = np.unique(
        pairs, axis=0, return_inverse=True, return_counts=True
    )

    triangle_edges = inverse.reshape(-1, 3)
    # counterclockwise traversal runs lower -> higher index exactly when the
    # triangle's outward normal agrees with the edge's positive normal
    triangle_edge_signs = np.where(ends_a < ends_b, 1, -1).astype(np.int8)
    edge_is_boundary = counts == 1

    return Mesh(
        geometry=geometry,
        refinement=n,
        vertices=vertices,
        triangles=triangles,
        triangle_subdomain=subdomain,
        edges=edges,
        edge_is_boundary=edge_is_boundary,
        triangle_edges=triangle_edges,
        triangle_edge_signs=triangle_edge_signs,
    )


def mesh_stats(mesh: Mesh) -> dict:
    """Entity counts and the cell size, as written by the CLI."""
    return {
        "refinement": mesh.refinement,
        "num_vertices": mesh.num_vertices,
        "num_triangles": mesh.num_triangles,
        "num_edges": mesh.num_edges,
        "num_boundary_edges": mesh.num_boundary_edges,
        "num_interior_edges": mesh.num_interior_edges,
        "h": mesh.h,
    }


def write_mesh_text(mesh: Mesh, path) -> None:
    """Dump the mesh as plain text.

    Three sections, each introduced by a header line with the entity count:
    vertices as ``x y``, triangles as ``v0 v1 v2 subdomain``, edges as
    ``v0 v1 boundary_flag``.
    """
    with open(path, "w", encoding="ascii") as out:
        out.write(f"vertices {mesh.num_vertices}\n")
        for x, y in mesh.vertices:
            out.write(f"{x:.17g} {y:.17g}\n")
        out.write(f"triangles {mesh.num_triangles}\n")
        for (a, b, c), tag in zip(mesh.triangles, mesh.triangle_subdomain):
            out.write(f"{a} {b} {c} {tag}\n")
        out.write(f"edges {mesh.num_edges}\n")
        for (a, b), flag in zip(mesh.edges, mesh.edge_is_boundary):
            out.write(f"{a} {b} {int(flag)}\n")
