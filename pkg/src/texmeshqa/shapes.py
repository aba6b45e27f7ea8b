"""Synthetic triangle meshes with known differential geometry.

These are the workhorses of the test and demo suites: spheres and
cylinders have analytic mean curvature, planes have zero, and the bumpy
sphere provides a large mesh with spatially varying curvature for metric
experiments.
"""

from __future__ import annotations

import numpy as np

from .mesh import TexturedMesh


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TexturedMesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to a sphere.

    Vertex count is 10 * 4**subdivisions + 2.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]

    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint_cache:
                m = np.array(verts[a]) + np.array(verts[b])
                m /= np.linalg.norm(m)
                midpoint_cache[key] = len(verts)
                verts.append(tuple(m))
            return midpoint_cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces

    return TexturedMesh(
        vertices=np.array(verts, dtype=np.float64) * radius,
        triangles=np.array(faces, dtype=np.int64),
    )


def grid_plane(nx: int = 10, ny: int = 10, spacing: float = 1.0) -> TexturedMesh:
    """Flat regular grid in the z=0 plane, (nx+1)*(ny+1) vertices."""
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    verts = np.stack(
        [xs.ravel() * spacing, ys.ravel() * spacing, np.zeros(xs.size)], axis=1
    )
    tris = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = a + (ny + 1)
            tris += [(a, b, a + 1), (b, b + 1, a + 1)]
    return TexturedMesh(vertices=verts, triangles=np.array(tris, dtype=np.int64))


def grid_interior_vertices(nx: int, ny: int) -> np.ndarray:
    """Indices of grid_plane vertices not on the boundary."""
    idx = []
    for i in range(1, nx):
        for j in range(1, ny):
            idx.append(i * (ny + 1) + j)
    return np.array(idx, dtype=np.int64)


def cylinder(
    radius: float = 2.0, height: float = 20.0, n_theta: int = 64, n_z: int = 40
) -> TexturedMesh:
    """Open cylinder tube around the z axis (no caps, boundary at both rims)."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    zs = np.linspace(0.0, height, n_z + 1)
    verts = []
    for z in zs:
        for t in thetas:
            verts.append((radius * np.cos(t), radius * np.sin(t), z))
    tris = []
    for ring in range(n_z):
        for k in range(n_theta):
            a = ring * n_theta + k
            b = ring * n_theta + (k + 1) % n_theta
            c = a + n_theta
            d = b + n_theta
            tris += [(a, b, c), (b, d, c)]
    return TexturedMesh(
        vertices=np.array(verts, dtype=np.float64),
        triangles=np.array(tris, dtype=np.int64),
    )


def cylinder_interior_vertices(n_theta: int, n_z: int, margin: int = 2) -> np.ndarray:
    """Cylinder vertices at least ``margin`` rings away from either rim."""
    rings = range(margin, n_z + 1 - margin)
    return np.array([r * n_theta + k for r in rings for k in range(n_theta)], dtype=np.int64)


def bumpy_sphere(
    subdivisions: int = 5, amplitude: float = 0.03, frequency: float = 25.0
) -> TexturedMesh:
    """Sphere with a smooth deterministic radial displacement field.

    Gives >10k vertices at 5 subdivisions. The displacement wavelength is
    a few edge lengths, so the surface carries curvature detail at mesh
    resolution the way scanned models do; washing that detail out (by
    smoothing) or drowning it in position noise (by quantization) moves
    curvature statistics in clearly separated steps.
    """
    base = icosphere(subdivisions=subdivisions, radius=1.0)
    v = base.vertices
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    bump = np.sin(frequency * x) * np.sin(frequency * y) + 0.5 * np.sin(
        frequency * z
    ) * np.cos(frequency * x)
    r = 1.0 + amplitude * bump
    return base.with_vertices(v * r[:, None])


def two_triangle_quad() -> TexturedMesh:
    """Unit quad in the z=0 plane split into two triangles with UVs."""
    verts = np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], dtype=np.float64)
    tris = np.array([(0, 1, 2), (0, 2, 3)], dtype=np.int64)
    uv = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=np.float64)
    corner_uvs = uv[tris]
    return TexturedMesh(vertices=verts, triangles=tris, corner_uvs=corner_uvs)
