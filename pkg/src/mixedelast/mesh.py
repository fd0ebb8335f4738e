"""Conforming triangulations of rectangular domains.

Meshes are immutable after construction.  Edges carry a global orientation
(lower vertex index -> higher vertex index); per-triangle incidence signs
record whether the counterclockwise traversal of a triangle agrees with that
orientation.  Boundary edges are tagged for the Dirichlet / Neumann split,
with everything Dirichlet by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class Mesh:
    """Triangulation with globally oriented edges.

    Attributes:
        vertices: (V, 2) coordinates.
        triangles: (T, 3) vertex indices, counterclockwise.
        edges: (E, 2) vertex pairs with edges[:, 0] < edges[:, 1].
        triangle_edges: (T, 3) edge indices; local edge l joins local
            vertices l and (l + 1) % 3.
        edge_signs: (T, 3) incidence signs, +1 when the local traversal
            agrees with the global low-to-high orientation.
        boundary_edges: indices of edges lying on the domain boundary.
        boundary_tags: tag per boundary edge, aligned with boundary_edges.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    edge_signs: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple = field(default=())

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_triangles(self) -> np.ndarray:
        """(E, 2) incident triangle indices, -1 in column 1 for boundary edges."""
        inc = -np.ones((self.num_edges, 2), dtype=int)
        for t in range(self.num_triangles):
            for e in self.triangle_edges[t]:
                inc[e, 0 if inc[e, 0] < 0 else 1] = t
        return inc

    def dump(self, stream) -> None:
        """Plain-text dump: count header, coordinate rows, connectivity rows."""
        stream.write(f"{self.num_vertices} {self.num_edges} {self.num_triangles}\n")
        for x, y in self.vertices:
            stream.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in self.triangles:
            stream.write(f"{a} {b} {c}\n")


def _connect(vertices: np.ndarray, triangles: np.ndarray,
             boundary_tag_of_edge) -> Mesh:
    """Derive edges, incidence and boundary data from a vertex/triangle list."""
    areas = 0.5 * _cross2(
        vertices[triangles[:, 1]] - vertices[triangles[:, 0]],
        vertices[triangles[:, 2]] - vertices[triangles[:, 0]],
    )
    if np.any(areas <= 0.0):
        raise GeometryError("all triangles must be counterclockwise with positive area")

    edge_index: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int]] = []
    tri_edges = np.empty_like(triangles)
    signs = np.empty_like(triangles)
    edge_count = np.zeros(3 * len(triangles), dtype=int)
    for t, tri in enumerate(triangles):
        for loc in range(3):
            a, b = int(tri[loc]), int(tri[(loc + 1) % 3])
            key = (min(a, b), max(a, b))
            e = edge_index.get(key)
            if e is None:
                e = len(edge_list)
                edge_index[key] = e
                edge_list.append(key)
            tri_edges[t, loc] = e
            signs[t, loc] = 1 if a < b else -1
            edge_count[e] += 1
    edges = np.array(edge_list, dtype=int)
    edge_count = edge_count[: len(edges)]
    if np.any(edge_count > 2):
        raise GeometryError("non-manifold edge found")
    boundary = np.flatnonzero(edge_count == 1)
    tags = tuple(boundary_tag_of_edge(edges[e]) for e in boundary)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=tri_edges,
        edge_signs=signs,
        boundary_edges=boundary,
        boundary_tags=tags,
    )


def build_uniform_square_mesh(n: int, diagonal: str = "lower_left_to_upper_right") -> Mesh:
    """Uniform n x n triangulation of the unit square.

    Each grid cell is split along its lower-left to upper-right diagonal,
    giving (n+1)^2 vertices, 2 n^2 triangles, and h = sqrt(2)/n.  All
    boundary edges are tagged Dirichlet.
    """
    if n < 1:
        raise GeometryError(f"subdivision count must be >= 1, got {n}")
    if diagonal != "lower_left_to_upper_right":
        raise GeometryError(f"unsupported diagonal pattern: {diagonal!r}")
    s = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(s, s, indexing="ij")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=int)
    return _connect(vertices, triangles, lambda edge: DIRICHLET)


def refine(mesh: Mesh) -> Mesh:
    """Regular 1 -> 4 refinement through edge midpoints.

    Children of a counterclockwise parent are counterclockwise; boundary
    tags are inherited from the parent edge containing each child edge.
    """
    nv = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    tris = []
    for t, (v0, v1, v2) in enumerate(mesh.triangles):
        m01 = nv + mesh.triangle_edges[t, 0]
        m12 = nv + mesh.triangle_edges[t, 1]
        m20 = nv + mesh.triangle_edges[t, 2]
        tris.extend([(v0, m01, m20), (m01, v1, m12), (m20, m12, v2), (m01, m12, m20)])
    triangles = np.array(tris, dtype=int)

    parent_tag = {}
    for e, tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        a, b = mesh.edges[e]
        mid = nv + e
        parent_tag[(min(a, mid), max(a, mid))] = tag
        parent_tag[(min(b, mid), max(b, mid))] = tag

    def tag_of(edge):
        key = (int(edge[0]), int(edge[1]))
        try:
            return parent_tag[key]
        except KeyError:
            raise GeometryError(f"boundary edge {key} has no parent boundary edge")

    return _connect(vertices, triangles, tag_of)


def mesh_diameter(mesh: Mesh) -> float:
    """Maximum over triangles of the longest edge length."""
    return float(mesh.edge_lengths().max())
