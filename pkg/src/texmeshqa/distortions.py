"""Distortion generators for building evaluation corpora.

Geometric distortions (quantization, smoothing) alter vertex positions
only; connectivity, UVs and materials pass through untouched. Texture
distortions (sub-sampling, recompression) replace texture images.
Externally produced distorted meshes (e.g. simplified ones) are ingested
from files rather than regenerated.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .mesh import TextureImage, TexturedMesh
from .obj_io import load_mesh


def quantize(mesh: TexturedMesh, bits: int) -> TexturedMesh:
    """Snap each coordinate to the center of one of 2**bits uniform cells
    spanning the mesh's own bounding range on that axis.

    Axes with zero extent pass through unchanged.
    """
    if not 1 <= bits <= 24:
        raise ValueError(f"bits must be in [1, 24], got {bits}")
    v = mesh.vertices
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    extent = hi - lo
    cells = float(2**bits)
    out = v.copy()
    for axis in range(3):
        if extent[axis] <= 0:
            continue
        idx = np.floor((v[:, axis] - lo[axis]) / extent[axis] * cells)
        np.clip(idx, 0, cells - 1, out=idx)
        out[:, axis] = lo[axis] + (idx + 0.5) * (extent[axis] / cells)
    return mesh.with_vertices(out)


def laplacian_smooth(mesh: TexturedMesh, iterations: int, step: float = 0.5) -> TexturedMesh:
    """Uniform-weight Laplacian smoothing.

    Each iteration moves every vertex by ``step`` times the offset from
    itself to its neighbor average, computed synchronously from the
    previous iteration. Isolated vertices stay put.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not 0 < step <= 1:
        raise ValueError(f"step must be in (0, 1], got {step}")
    from .mesh import vertex_adjacency

    indptr, indices = vertex_adjacency(mesh)
    degree = np.diff(indptr).astype(np.float64)
    has_nbrs = degree > 0
    safe_degree = np.where(has_nbrs, degree, 1.0)

    pos = mesh.vertices.copy()
    for _ in range(iterations):
        sums = np.zeros_like(pos)
        np.add.at(sums, np.repeat(np.arange(len(pos)), np.diff(indptr)), pos[indices])
        avg = sums / safe_degree[:, None]
        moved = pos + step * (avg - pos)
        pos = np.where(has_nbrs[:, None], moved, pos)
    return mesh.with_vertices(pos)


def bilinear_resize(img: TextureImage, width: int, height: int) -> TextureImage:
    """Resize with center-aligned bilinear sampling.

    Output pixel (i, j) samples the input at
    ((i + 0.5) * in/out - 0.5) per axis, clamped to the image.
    """
    if width < 1 or height < 1:
        raise ValueError("target dimensions must be >= 1")
    src = img.pixels.astype(np.float64)
    h, w = img.height, img.width
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]

    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return TextureImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def subsample_texture(img: TextureImage, percent: float) -> TextureImage:
    """Shrink a texture to ``percent`` of its linear resolution per axis."""
    if not 0 < percent <= 100:
        raise ValueError(f"percent must be in (0, 100], got {percent}")
    if percent == 100:
        return img
    width = max(1, int(round(percent / 100.0 * img.width)))
    height = max(1, int(round(percent / 100.0 * img.height)))
    return bilinear_resize(img, width, height)


def resample_back(img: TextureImage, width: int, height: int) -> TextureImage:
    """Bilinearly restore a sub-sampled texture to reference dimensions."""
    if img.width == width and img.height == height:
        return img
    return bilinear_resize(img, width, height)


def jpeg_recompress(img: TextureImage, quality: int) -> TextureImage:
    """Round-trip a texture through baseline JPEG at the given quality."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    arr = img.pixels[:, :, 0] if img.channels == 1 else img.pixels
    buf = io.BytesIO()
    try:
        Image.fromarray(arr).save(buf, format="JPEG", quality=quality)
        buf.seek(0)
        with Image.open(buf) as decoded:
            mode = "L" if img.channels == 1 else "RGB"
            out = np.asarray(decoded.convert(mode), dtype=np.uint8)
    except OSError as exc:
        raise RuntimeError(f"JPEG codec failed: {exc}") from exc
    if out.ndim == 2:
        out = out[:, :, None]
    return TextureImage(out)


@dataclass(frozen=True)
class DistortionSpec:
    """Parsed distortion request, e.g. quantize:7 or smooth:50."""

    kind: str
    bits: int | None = None
    iterations: int | None = None
    step: float = 0.5
    percent: float | None = None
    quality: int | None = None
    path: str | None = None

    KINDS = ("quantize", "smooth", "subsample", "jpeg", "external")

    @classmethod
    def parse(cls, text: str) -> "DistortionSpec":
        kind, sep, arg = text.partition(":")
        if not sep or kind not in cls.KINDS:
            raise ValueError(
                f"bad distortion spec {text!r}; expected kind:level with kind in {cls.KINDS}"
            )
        try:
            if kind == "quantize":
                bits = int(arg)
                if not 1 <= bits <= 24:
                    raise ValueError
                return cls(kind=kind, bits=bits)
            if kind == "smooth":
                first, sep2, rest = arg.partition(":")
                iterations = int(first)
                step = float(rest) if sep2 else 0.5
                if iterations < 1 or not 0 < step <= 1:
                    raise ValueError
                return cls(kind=kind, iterations=iterations, step=step)
            if kind == "subsample":
                percent = float(arg)
                if not 0 < percent <= 100:
                    raise ValueError
                return cls(kind=kind, percent=percent)
            if kind == "jpeg":
                quality = int(arg)
                if not 1 <= quality <= 100:
                    raise ValueError
                return cls(kind=kind, quality=quality)
        except ValueError:
            raise ValueError(f"bad distortion spec {text!r}: invalid level {arg!r}") from None
        return cls(kind="external", path=arg)

    def describe(self) -> str:
        if self.kind == "quantize":
            return f"quantize:{self.bits}"
        if self.kind == "smooth":
            return f"smooth:{self.iterations}" + (f":{self.step}" if self.step != 0.5 else "")
        if self.kind == "subsample":
            return f"subsample:{self.percent:g}"
        if self.kind == "jpeg":
            return f"jpeg:{self.quality}"
        return f"external:{self.path}"


def apply_distortion(mesh: TexturedMesh, spec: DistortionSpec) -> TexturedMesh:
    """Apply one distortion spec to a mesh (geometry or all of its textures)."""
    if spec.kind == "quantize":
        return quantize(mesh, spec.bits)
    if spec.kind == "smooth":
        return laplacian_smooth(mesh, spec.iterations, spec.step)
    if spec.kind == "subsample":
        return mesh.with_textures(
            subsample_texture(t, spec.percent) for t in mesh.textures
        )
    if spec.kind == "jpeg":
        return mesh.with_textures(jpeg_recompress(t, spec.quality) for t in mesh.textures)
    if spec.kind == "external":
        return load_mesh(spec.path)
    raise ValueError(f"unknown distortion kind {spec.kind!r}")
