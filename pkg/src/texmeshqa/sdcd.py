"""Curvature-difference geometry metric for distorted/reference mesh pairs.

The metric compares per-vertex mean curvature of the distorted mesh with
the curvature interpolated at the nearest reference surface point. Around
every distorted vertex, the population standard deviation of normalized
curvature differences is taken over a connected Euclidean neighborhood at
three scales; per-vertex scores are the scale average, and the global
distance is their root mean square. Identical meshes score distance 0
(similarity 1).

Both curvature fields are first divided by their joint maximum, making
the stabilizer constant dimensionless and the metric invariant to the
model's absolute scale.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .correspondence import CorrespondenceMap, correspond
from .curvature import CurvatureField, mean_curvature
from .mesh import TexturedMesh, bounding_box, vertex_adjacency

# base neighborhood scale as a fraction of the reference bbox max extent
SCALE_FRACTION = 0.025
SCALE_MULTIPLIERS = (2.0, 3.0, 4.0)
DEFAULT_STABILIZER = 0.01


@dataclass(frozen=True)
class ScaleSet:
    """Neighborhood radii for the multi-scale deviation measurements."""

    epsilon: float
    radii: tuple[float, ...]

    def __post_init__(self):
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if list(self.radii) != sorted(self.radii) or len(set(self.radii)) != len(self.radii):
            raise ValueError("radii must be strictly increasing")

    @classmethod
    def from_reference(cls, reference: TexturedMesh) -> "ScaleSet":
        eps = SCALE_FRACTION * bounding_box(reference).max_extent
        return cls(epsilon=eps, radii=tuple(m * eps for m in SCALE_MULTIPLIERS))


@dataclass(frozen=True)
class SdcdConfig:
    """Stabilizer constant and neighborhood scales for the geometry metric."""

    scales: ScaleSet
    stabilizer: float = DEFAULT_STABILIZER

    def __post_init__(self):
        if self.stabilizer <= 0:
            raise ValueError("stabilizer must be positive")

    @classmethod
    def from_reference(cls, reference: TexturedMesh, stabilizer: float = DEFAULT_STABILIZER):
        return cls(scales=ScaleSet.from_reference(reference), stabilizer=stabilizer)


@dataclass(frozen=True)
class SdcdResult:
    """Per-vertex deviations, their RMS pooling, and the similarity index."""

    per_vertex: np.ndarray
    distance: float
    similarity: float = field(init=False)

    def __post_init__(self):
        pv = np.asarray(self.per_vertex, dtype=np.float64)
        pv.flags.writeable = False
        object.__setattr__(self, "per_vertex", pv)
        object.__setattr__(self, "similarity", 1.0 - self.distance)


def normalized_curvature_differences(
    distorted_curv: np.ndarray, reference_curv: np.ndarray, stabilizer: float
) -> np.ndarray:
    """Per-vertex (ref - dist) / (max(ref, dist) + a) after joint max-normalization."""
    cd = np.asarray(distorted_curv, dtype=np.float64)
    cr = np.asarray(reference_curv, dtype=np.float64)
    scale = max(cd.max(initial=0.0), cr.max(initial=0.0), np.finfo(float).tiny)
    cd = cd / scale
    cr = cr / scale
    return (cr - cd) / (np.maximum(cr, cd) + stabilizer)


def neighborhood(
    mesh: TexturedMesh, v: int, radius: float,
    adjacency: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Vertices reachable from v through edges while staying within
    Euclidean distance ``radius`` of v, including v itself."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    indptr, indices = adjacency if adjacency is not None else vertex_adjacency(mesh)
    pos = mesh.vertices
    r2 = radius * radius
    seen = {int(v)}
    queue = deque([int(v)])
    while queue:
        u = queue.popleft()
        for w in indices[indptr[u]:indptr[u + 1]]:
            w = int(w)
            if w not in seen and np.sum((pos[w] - pos[v]) ** 2) <= r2:
                seen.add(w)
                queue.append(w)
    return np.array(sorted(seen), dtype=np.int64)


def local_delta(
    v: int,
    radius: float,
    distorted_curv: CurvatureField,
    corr: CorrespondenceMap,
    mesh: TexturedMesh,
    stabilizer: float = DEFAULT_STABILIZER,
) -> float:
    """Deviation of normalized curvature differences around one vertex.

    Population standard deviation over the connected Euclidean
    neighborhood, clamped to [0, 1]. A neighborhood smaller than two
    vertices has zero deviation by convention.
    """
    diffs = normalized_curvature_differences(
        distorted_curv.values, corr.reference_curvature, stabilizer
    )
    nbrs = neighborhood(mesh, v, radius)
    if len(nbrs) < 2:
        return 0.0
    d = diffs[nbrs]
    return float(min(1.0, np.sqrt(np.mean((d - d.mean()) ** 2))))


@njit(cache=True)
def _deltas_all_vertices(indptr, indices, pos, diffs, radii):  # pragma: no cover
    nv = diffs.shape[0]
    ns = radii.shape[0]
    out = np.zeros((nv, ns))
    stamp = np.full(nv, -1, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    tag = 0
    for v in range(nv):
        px, py, pz = pos[v, 0], pos[v, 1], pos[v, 2]
        for s in range(ns):
            r2 = radii[s] * radii[s]
            head, tail = 0, 0
            stamp[v] = tag
            queue[tail] = v
            tail += 1
            total = 0.0
            while head < tail:
                u = queue[head]
                head += 1
                total += diffs[u]
                for e in range(indptr[u], indptr[u + 1]):
                    w = indices[e]
                    if stamp[w] != tag:
                        dx = pos[w, 0] - px
                        dy = pos[w, 1] - py
                        dz = pos[w, 2] - pz
                        if dx * dx + dy * dy + dz * dz <= r2:
                            stamp[w] = tag
                            queue[tail] = w
                            tail += 1
            tag += 1
            if tail >= 2:
                mean = total / tail
                var = 0.0
                for q in range(tail):
                    dd = diffs[queue[q]] - mean
                    var += dd * dd
                var /= tail
                d = np.sqrt(var)
                out[v, s] = 1.0 if d > 1.0 else d
    return out


def per_vertex_deltas(
    mesh: TexturedMesh, diffs: np.ndarray, radii: tuple[float, ...]
) -> np.ndarray:
    """Deviation of ``diffs`` over the neighborhood of every vertex at every radius."""
    indptr, indices = vertex_adjacency(mesh)
    return _deltas_all_vertices(
        indptr,
        indices,
        np.ascontiguousarray(mesh.vertices),
        np.ascontiguousarray(diffs, dtype=np.float64),
        np.asarray(radii, dtype=np.float64),
    )


def sdcd(
    distorted: TexturedMesh,
    reference: TexturedMesh,
    config: SdcdConfig | None = None,
    distorted_curvature: CurvatureField | None = None,
    reference_curvature: CurvatureField | None = None,
) -> SdcdResult:
    """Multi-scale curvature-deviation distance between two meshes.

    Precomputed curvature fields can be passed to amortize repeated
    comparisons against the same reference.
    """
    if config is None:
        config = SdcdConfig.from_reference(reference)
    if distorted_curvature is None:
        distorted_curvature = mean_curvature(distorted)
    if reference_curvature is None:
        reference_curvature = mean_curvature(reference)

    corr = correspond(distorted, reference, reference_curvature)
    diffs = normalized_curvature_differences(
        distorted_curvature.values, corr.reference_curvature, config.stabilizer
    )
    deltas = per_vertex_deltas(distorted, diffs, config.scales.radii)
    per_vertex = deltas.mean(axis=1)
    distance = float(np.sqrt(np.mean(per_vertex**2)))
    return SdcdResult(per_vertex=per_vertex, distance=distance)
