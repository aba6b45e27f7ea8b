"""Discrete mean curvature estimation on triangle meshes.

Per-vertex mean curvature magnitude is the half magnitude of the
cotangent Laplace-Beltrami of the position function, normalized by the
mixed Voronoi vertex area. The estimate converges to the analytic value
on refined smooth meshes (sphere: 1/r, cylinder: 1/(2r), plane: 0).

Boundary vertices have no meaningful one-ring integral, so they borrow
the average of their interior neighbors; the same fallback applies to
vertices whose mixed area degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .mesh import TexturedMesh, bounding_box

# triangles with area below this fraction of bbox_extent^2 are excluded
# from cotangent sums; their cotangents explode numerically
DEGENERATE_AREA_FRACTION = 1e-12


@dataclass(frozen=True)
class CurvatureField:
    """Per-vertex mean curvature magnitudes, aligned with mesh vertex indices."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("curvature values must be finite and non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


def mean_curvature(mesh: TexturedMesh) -> CurvatureField:
    """Estimate per-vertex mean curvature magnitude of a triangle mesh."""
    if mesh.triangle_count == 0:
        raise DegenerateGeometryError("mesh has no triangles")
    pos = mesh.vertices
    tris = mesh.triangles
    nv = mesh.vertex_count

    p0, p1, p2 = pos[tris[:, 0]], pos[tris[:, 1]], pos[tris[:, 2]]
    cross = np.cross(p1 - p0, p2 - p0)
    double_area = np.linalg.norm(cross, axis=1)
    area = 0.5 * double_area

    scale = bounding_box(mesh).max_extent
    keep = area > DEGENERATE_AREA_FRACTION * max(scale * scale, np.finfo(float).tiny)
    if not np.any(keep):
        raise DegenerateGeometryError("all triangles are degenerate")

    tk = tris[keep]
    corners = (pos[tk[:, 0]], pos[tk[:, 1]], pos[tk[:, 2]])

    # cotangent of the angle at each corner k, opposite edge (k+1, k+2)
    cots = np.empty((len(tk), 3))
    for k in range(3):
        u = corners[(k + 1) % 3] - corners[k]
        w = corners[(k + 2) % 3] - corners[k]
        cots[:, k] = np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)

    # Laplacian of position: edge opposite corner k contributes cot_k to
    # both endpoints of that edge
    lap = np.zeros((nv, 3))
    for k in range(3):
        i = tk[:, (k + 1) % 3]
        j = tk[:, (k + 2) % 3]
        w = cots[:, k][:, None]
        np.add.at(lap, i, w * (pos[j] - pos[i]))
        np.add.at(lap, j, w * (pos[i] - pos[j]))

    mixed_area = _mixed_voronoi_areas(pos, tk, cots, nv)

    boundary = _boundary_vertices(tk, nv)
    referenced = np.zeros(nv, dtype=bool)
    referenced[tk.ravel()] = True
    good = referenced & ~boundary & (mixed_area > np.finfo(float).tiny)

    h = np.zeros(nv)
    h[good] = np.linalg.norm(lap[good], axis=1) / (4.0 * mixed_area[good])

    h = _fill_from_interior_neighbors(mesh, h, good)
    return CurvatureField(h)


def _mixed_voronoi_areas(
    pos: np.ndarray, tris: np.ndarray, cots: np.ndarray, nv: int
) -> np.ndarray:
    """Mixed Voronoi area per vertex.

    Non-obtuse triangles contribute their true Voronoi region
    (1/8)(|e_next|^2 cot_next + |e_prev|^2 cot_prev); obtuse ones fall back
    to area/2 at the obtuse corner, area/4 elsewhere.
    """
    corners = (pos[tris[:, 0]], pos[tris[:, 1]], pos[tris[:, 2]])
    edge_sq = np.empty((len(tris), 3))
    for k in range(3):
        e = corners[(k + 2) % 3] - corners[(k + 1) % 3]
        edge_sq[:, k] = np.einsum("ij,ij->i", e, e)

    area = 0.5 * np.linalg.norm(
        np.cross(corners[1] - corners[0], corners[2] - corners[0]), axis=1
    )
    obtuse_corner = np.argmin(cots, axis=1)
    is_obtuse = cots[np.arange(len(tris)), obtuse_corner] < 0.0

    contrib = np.empty((len(tris), 3))
    for k in range(3):
        voronoi = 0.125 * (
            edge_sq[:, (k + 2) % 3] * cots[:, (k + 2) % 3]
            + edge_sq[:, (k + 1) % 3] * cots[:, (k + 1) % 3]
        )
        fallback = np.where(obtuse_corner == k, 0.5 * area, 0.25 * area)
        contrib[:, k] = np.where(is_obtuse, fallback, voronoi)

    mixed = np.zeros(nv)
    for k in range(3):
        np.add.at(mixed, tris[:, k], contrib[:, k])
    return mixed


def _boundary_vertices(tris: np.ndarray, nv: int) -> np.ndarray:
    """Vertices on an edge used by fewer than two triangles."""
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    flag = np.zeros(nv, dtype=bool)
    flag[uniq[counts == 1].ravel()] = True
    return flag


def _fill_from_interior_neighbors(
    mesh: TexturedMesh, h: np.ndarray, good: np.ndarray
) -> np.ndarray:
    """Replace flagged values by the average over adjacent good vertices, else 0."""
    from .mesh import vertex_adjacency

    if np.all(good):
        return h
    indptr, indices = vertex_adjacency(mesh)
    out = h.copy()
    for v in np.nonzero(~good)[0]:
        nbrs = indices[indptr[v]:indptr[v + 1]]
        nbrs = nbrs[good[nbrs]]
        out[v] = h[nbrs].mean() if len(nbrs) else 0.0
    return out
