"""In-memory model for textured triangle meshes.

The mesh model is immutable after construction: arrays are marked
read-only so a mesh can be shared freely across threads and reused as
the reference of many comparisons. Texture coordinates live on triangle
corners, not vertices, so a vertex sitting on a texture seam keeps a
distinct UV pair per incident triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, MeshValidationError


@dataclass(frozen=True)
class TextureImage:
    """8-bit texture image, single channel (grayscale) or 3 channels (RGB).

    pixels has shape (height, width, channels) with dtype uint8.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise MeshValidationError(
                f"texture pixels must be (h, w, 1|3) uint8, got shape {px.shape}"
            )
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise MeshValidationError("texture dimensions must be >= 1")
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def texel_count(self) -> int:
        return self.height * self.width


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(lo > hi):
            raise MeshValidationError("bounding box min exceeds max")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def max_extent(self) -> float:
        return float(np.max(self.max - self.min))


NO_MATERIAL = -1


@dataclass(frozen=True)
class TexturedMesh:
    """Indexed triangle mesh with optional per-corner UVs and texture images.

    vertices:             (nv, 3) float64
    triangles:            (nt, 3) int64 vertex indices
    corner_uvs:           (nt, 3, 2) float64 per-corner texture coordinates,
                          or None for a geometry-only mesh
    material_of_triangle: (nt,) int64 texture index per triangle,
                          NO_MATERIAL (-1) where unset
    textures:             tuple of TextureImage
    """

    vertices: np.ndarray
    triangles: np.ndarray
    corner_uvs: np.ndarray | None = None
    material_of_triangle: np.ndarray | None = None
    textures: tuple[TextureImage, ...] = field(default_factory=tuple)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        uvs = self.corner_uvs
        if uvs is not None:
            uvs = np.asarray(uvs, dtype=np.float64)
            if uvs.shape != (len(tris), 3, 2):
                raise MeshValidationError(
                    f"corner_uvs must have shape ({len(tris)}, 3, 2), got {uvs.shape}"
                )
        mats = self.material_of_triangle
        if mats is None:
            mats = np.full(len(tris), NO_MATERIAL, dtype=np.int64)
        else:
            mats = np.asarray(mats, dtype=np.int64).reshape(-1)
            if mats.shape != (len(tris),):
                raise MeshValidationError("material_of_triangle length must match triangle count")

        if len(tris):
            if tris.min() < 0 or tris.max() >= len(verts):
                raise MeshValidationError(
                    f"triangle index out of range (vertex count {len(verts)})"
                )
            same = (tris[:, 0] == tris[:, 1]) & (tris[:, 1] == tris[:, 2])
            if np.any(same):
                raise MeshValidationError(
                    f"triangle {int(np.nonzero(same)[0][0])} repeats a single vertex index"
                )
        if len(self.textures):
            if mats.max(initial=NO_MATERIAL) >= len(self.textures):
                raise MeshValidationError(
                    f"material index exceeds texture count {len(self.textures)}"
                )
        if np.any(mats < NO_MATERIAL):
            raise MeshValidationError("material indices must be >= -1")

        for arr in (verts, tris, mats) + ((uvs,) if uvs is not None else ()):
            arr.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "corner_uvs", uvs)
        object.__setattr__(self, "material_of_triangle", mats)
        object.__setattr__(self, "textures", tuple(self.textures))

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def with_vertices(self, vertices: np.ndarray) -> "TexturedMesh":
        """Copy of this mesh with replaced vertex positions (same connectivity)."""
        return TexturedMesh(
            vertices=np.array(vertices, dtype=np.float64),
            triangles=self.triangles,
            corner_uvs=self.corner_uvs,
            material_of_triangle=self.material_of_triangle,
            textures=self.textures,
        )

    def with_textures(self, textures) -> "TexturedMesh":
        """Copy of this mesh with a replaced texture list (same count required)."""
        textures = tuple(textures)
        if len(textures) != len(self.textures):
            raise MeshValidationError("replacement texture count must match")
        return TexturedMesh(
            vertices=self.vertices,
            triangles=self.triangles,
            corner_uvs=self.corner_uvs,
            material_of_triangle=self.material_of_triangle,
            textures=textures,
        )


def bounding_box(mesh: TexturedMesh) -> Aabb:
    """Componentwise min/max over the mesh vertices."""
    if mesh.vertex_count == 0:
        raise EmptyInputError("cannot compute a bounding box of an empty mesh")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def vertex_adjacency(mesh: TexturedMesh) -> tuple[np.ndarray, np.ndarray]:
    """Vertex-to-vertex adjacency in CSR form (indptr, indices).

    Every triangle edge connects its endpoints both ways; duplicates from
    shared edges are removed.
    """
    tris = mesh.triangles
    nv = mesh.vertex_count
    if len(tris) == 0:
        return np.zeros(nv + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    src = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2], tris[:, 1], tris[:, 2], tris[:, 0]])
    dst = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0], tris[:, 0], tris[:, 1], tris[:, 2]])
    pairs = np.unique(np.stack([src, dst], axis=1), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.add.at(indptr, pairs[:, 0] + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, pairs[:, 1].astype(np.int64)
