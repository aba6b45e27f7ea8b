"""Nearest-point correspondence from a distorted mesh onto a reference surface.

Each distorted vertex maps to its exact closest point on the reference
triangle mesh. Queries go through a k-d tree over triangle centroids:
the nearest centroids give an upper bound on the surface distance, and
every triangle whose centroid lies within that bound plus the largest
centroid-to-corner radius is checked exactly, so the result equals a
brute-force scan over all triangles.

The closest-point primitive classifies the query against the triangle's
Voronoi regions (vertices, edges, interior), vectorized over a batch of
triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .curvature import CurvatureField
from .errors import EmptyInputError
from .mesh import TexturedMesh


def closest_points_on_triangles(
    query: np.ndarray, tri_pts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Closest point to ``query`` on each triangle of a batch.

    query:   (3,) point
    tri_pts: (n, 3, 3) triangle corner positions

    Returns (points (n, 3), barycentric (n, 3)).
    """
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]
    ab = b - a
    ac = c - a
    ap = query - a

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = query - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = query - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = len(tri_pts)
    bary = np.zeros((n, 3))
    done = np.zeros(n, dtype=bool)

    def settle(mask, u, v, w):
        m = mask & ~done
        bary[m, 0] = u[m] if isinstance(u, np.ndarray) else u
        bary[m, 1] = v[m] if isinstance(v, np.ndarray) else v
        bary[m, 2] = w[m] if isinstance(w, np.ndarray) else w
        done[m] = True

    settle((d1 <= 0) & (d2 <= 0), 1.0, np.zeros(n), np.zeros(n))
    settle((d3 >= 0) & (d4 <= d3), np.zeros(n), np.ones(n), np.zeros(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 != d3, d1 / (d1 - d3), 0.0)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), 1.0 - v_ab, v_ab, np.zeros(n))
    settle((d6 >= 0) & (d5 <= d6), np.zeros(n), np.zeros(n), np.ones(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        w_ac = np.where(d2 != d6, d2 / (d2 - d6), 0.0)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), 1.0 - w_ac, np.zeros(n), w_ac)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_bc = np.where(
            (d4 - d3) + (d5 - d6) != 0, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0
        )
    settle(
        (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
        np.zeros(n),
        1.0 - w_bc,
        w_bc,
    )

    inside = ~done
    if np.any(inside):
        denom = va[inside] + vb[inside] + vc[inside]
        safe = np.where(np.abs(denom) > np.finfo(float).tiny, denom, 1.0)
        v_in = vb[inside] / safe
        w_in = vc[inside] / safe
        bary[inside, 0] = 1.0 - v_in - w_in
        bary[inside, 1] = v_in
        bary[inside, 2] = w_in

    # clip tiny negative weights from roundoff and renormalize
    np.clip(bary, 0.0, 1.0, out=bary)
    bary /= bary.sum(axis=1, keepdims=True)
    points = np.einsum("nk,nkj->nj", bary, tri_pts)
    return points, bary


@dataclass(frozen=True)
class CorrespondenceMap:
    """Per distorted vertex: nearest reference triangle, barycentric
    coordinates of the nearest point, distance to it, and the reference
    curvature interpolated there."""

    triangle: np.ndarray
    barycentric: np.ndarray
    distance: np.ndarray
    reference_curvature: np.ndarray

    def __post_init__(self):
        for name in ("triangle", "barycentric", "distance", "reference_curvature"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.triangle)


class ReferenceSurface:
    """Reference mesh indexed for repeated exact nearest-point queries."""

    def __init__(self, mesh: TexturedMesh):
        if mesh.triangle_count == 0:
            raise EmptyInputError("reference mesh has no triangles")
        self.mesh = mesh
        self.tri_pts = mesh.vertices[mesh.triangles]
        centroids = self.tri_pts.mean(axis=1)
        self._tree = cKDTree(centroids)
        # largest distance from a centroid to its own corners; bounds how
        # far a triangle's surface can reach beyond its centroid
        self._reach = float(
            np.max(np.linalg.norm(self.tri_pts - centroids[:, None, :], axis=2))
        )
        self._k = min(8, mesh.triangle_count)

    def nearest(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact nearest surface point for each query point.

        Returns (triangle indices, barycentric coords, distances).
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        n = len(points)
        _, knn = self._tree.query(points, k=self._k)
        knn = np.atleast_2d(knn)

        tri_idx = np.empty(n, dtype=np.int64)
        bary = np.empty((n, 3))
        dist = np.empty(n)
        for i in range(n):
            cand = knn[i]
            pts, b = closest_points_on_triangles(points[i], self.tri_pts[cand])
            d = np.linalg.norm(pts - points[i], axis=1)
            best = int(np.argmin(d))
            d_best = d[best]

            # any triangle beating d_best must have its centroid within
            # d_best + reach of the query
            wider = self._tree.query_ball_point(points[i], d_best + self._reach)
            wider = np.setdiff1d(np.asarray(wider, dtype=np.int64), cand)
            if len(wider):
                pts2, b2 = closest_points_on_triangles(points[i], self.tri_pts[wider])
                d2 = np.linalg.norm(pts2 - points[i], axis=1)
                best2 = int(np.argmin(d2))
                if d2[best2] < d_best:
                    tri_idx[i] = wider[best2]
                    bary[i] = b2[best2]
                    dist[i] = d2[best2]
                    continue
            tri_idx[i] = cand[best]
            bary[i] = b[best]
            dist[i] = d_best
        return tri_idx, bary, dist


def correspond(
    distorted: TexturedMesh,
    reference: TexturedMesh,
    reference_curvature: CurvatureField,
) -> CorrespondenceMap:
    """Map every distorted vertex to its closest reference surface point."""
    if distorted.vertex_count == 0:
        raise EmptyInputError("distorted mesh is empty")
    surface = ReferenceSurface(reference)
    tri_idx, bary, dist = surface.nearest(distorted.vertices)
    corner_curv = reference_curvature.values[reference.triangles[tri_idx]]
    interp = np.einsum("nk,nk->n", bary, corner_curv)
    return CorrespondenceMap(
        triangle=tri_idx,
        barycentric=bary,
        distance=dist,
        reference_curvature=interp,
    )


def brute_force_nearest(
    query: np.ndarray, mesh: TexturedMesh
) -> tuple[int, np.ndarray, float]:
    """Nearest surface point by scanning every triangle (small-mesh oracle)."""
    tri_pts = mesh.vertices[mesh.triangles]
    pts, bary = closest_points_on_triangles(np.asarray(query, dtype=np.float64), tri_pts)
    d = np.linalg.norm(pts - query, axis=1)
    best = int(np.argmin(d))
    return best, bary[best], float(d[best])


def geometry_rmse(distorted: TexturedMesh, reference: TexturedMesh) -> float:
    """Root mean square distance from distorted vertices to the reference surface."""
    if distorted.vertex_count == 0 or reference.triangle_count == 0:
        raise EmptyInputError("meshes must be non-empty")
    surface = ReferenceSurface(reference)
    _, _, dist = surface.nearest(distorted.vertices)
    return float(np.sqrt(np.mean(dist**2)))
