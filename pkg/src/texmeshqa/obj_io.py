"""Wavefront OBJ reading and writing.

Supported records: v, vt, vn, f, usemtl, mtllib, o, g and # comments.
Faces may reference texture coordinates (v/vt or v/vt/vn); polygons are
fan-triangulated from their first corner; negative indices are resolved
relative to the counts seen so far. Stored normals are ignored, every
geometric consumer recomputes what it needs.

Materials resolve to texture images through a caller-supplied resolver so
parsing stays independent of the filesystem. ``load_mesh`` wires the
resolver to MTL files (map_Kd only) and PNG/JPEG images next to the OBJ.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .errors import MeshFormatError, MeshValidationError, TextureResolutionError
from .mesh import NO_MATERIAL, TextureImage, TexturedMesh


def parse_obj(
    data: bytes | str,
    texture_resolver: Callable[[str], TextureImage] | None = None,
    mtl_resolver: Callable[[str], bytes | str] | None = None,
) -> TexturedMesh:
    """Parse OBJ text into a TexturedMesh.

    texture_resolver maps a texture name to a TextureImage. When an
    ``mtllib`` is present and ``mtl_resolver`` is given, material names go
    through the MTL's map_Kd entries first; otherwise the ``usemtl`` name
    itself is handed to the texture resolver.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data

    positions: list[tuple[float, float, float]] = []
    uvs: list[tuple[float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    corner_uv_idx: list[tuple[int, int, int]] = []
    tri_material: list[int] = []
    tri_line: list[int] = []

    material_to_texture: dict[str, str] = {}
    texture_index: dict[str, int] = {}
    textures: list[TextureImage] = []
    current_material = NO_MATERIAL

    def resolve_material(name: str, line_no: int) -> int:
        if texture_resolver is None:
            return NO_MATERIAL
        tex_name = material_to_texture.get(name, name)
        if tex_name not in texture_index:
            image = texture_resolver(tex_name)
            texture_index[tex_name] = len(textures)
            textures.append(image)
        return texture_index[tex_name]

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        keyword, args = fields[0], fields[1:]

        if keyword == "v":
            if len(args) < 3:
                raise MeshFormatError(f"vertex record needs 3 coordinates: {raw!r}", line_no)
            try:
                positions.append((float(args[0]), float(args[1]), float(args[2])))
            except ValueError:
                raise MeshFormatError(f"bad vertex coordinate in {raw!r}", line_no) from None
        elif keyword == "vt":
            if len(args) < 2:
                raise MeshFormatError(f"texture coordinate needs 2 values: {raw!r}", line_no)
            try:
                uvs.append((float(args[0]), float(args[1])))
            except ValueError:
                raise MeshFormatError(f"bad texture coordinate in {raw!r}", line_no) from None
        elif keyword == "f":
            if len(args) < 3:
                raise MeshFormatError(f"face needs at least 3 corners: {raw!r}", line_no)
            corners = [_parse_corner(tok, len(positions), len(uvs), line_no) for tok in args]
            for i in range(1, len(corners) - 1):
                fan = (corners[0], corners[i], corners[i + 1])
                triangles.append(tuple(c[0] for c in fan))
                corner_uv_idx.append(tuple(c[1] for c in fan))
                tri_material.append(current_material)
                tri_line.append(line_no)
        elif keyword == "usemtl":
            if not args:
                raise MeshFormatError("usemtl without a material name", line_no)
            current_material = resolve_material(args[0], line_no)
        elif keyword == "mtllib":
            if mtl_resolver is not None:
                for name in args:
                    material_to_texture.update(parse_mtl(mtl_resolver(name)))
        elif keyword in ("vn", "o", "g", "s"):
            continue
        else:
            raise MeshFormatError(f"unsupported record {keyword!r}", line_no)

    tri_arr = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    for t, (tri, line_no) in enumerate(zip(tri_arr, tri_line)):
        if np.any(tri < 0) or np.any(tri >= len(positions)):
            raise MeshValidationError(
                f"line {line_no}: face references vertex {int(tri.max()) + 1} "
                f"but only {len(positions)} vertices exist"
            )

    idx = np.array(corner_uv_idx, dtype=np.int64).reshape(-1, 3)
    corner_uvs = None
    if len(idx) and np.any(idx >= 0):
        if np.any(idx < 0):
            bad = tri_line[int(np.nonzero((idx < 0).any(axis=1))[0][0])]
            raise MeshValidationError(
                f"line {bad}: face mixes corners with and without texture coordinates"
            )
        uv_arr = np.array(uvs, dtype=np.float64).reshape(-1, 2)
        if np.any(idx >= len(uvs)):
            t = int(np.nonzero((idx >= len(uvs)).any(axis=1))[0][0])
            raise MeshValidationError(
                f"line {tri_line[t]}: face references texture coordinate "
                f"{int(idx[t].max()) + 1} but only {len(uvs)} exist"
            )
        corner_uvs = uv_arr[idx]

    return TexturedMesh(
        vertices=np.array(positions, dtype=np.float64).reshape(-1, 3),
        triangles=tri_arr,
        corner_uvs=corner_uvs,
        material_of_triangle=np.array(tri_material, dtype=np.int64),
        textures=tuple(textures),
    )


def _parse_corner(token: str, n_vertices: int, n_uvs: int, line_no: int) -> tuple[int, int]:
    """One face corner ``v``, ``v/vt``, ``v/vt/vn`` or ``v//vn`` -> (vertex, uv) indices.

    Returns 0-based indices, uv index -1 when absent. Negative OBJ indices
    count back from the current element counts.
    """
    parts = token.split("/")
    if len(parts) > 3 or not parts[0]:
        raise MeshFormatError(f"bad face corner {token!r}", line_no)
    try:
        v = int(parts[0])
        vt = int(parts[1]) if len(parts) > 1 and parts[1] else 0
    except ValueError:
        raise MeshFormatError(f"bad face corner {token!r}", line_no) from None
    v_idx = v - 1 if v > 0 else n_vertices + v
    if v == 0 or v_idx < 0:
        raise MeshFormatError(f"vertex index {v} out of range", line_no)
    if vt == 0:
        return v_idx, -1
    vt_idx = vt - 1 if vt > 0 else n_uvs + vt
    if vt_idx < 0:
        raise MeshFormatError(f"texture coordinate index {vt} out of range", line_no)
    return v_idx, vt_idx


def parse_mtl(data: bytes | str) -> dict[str, str]:
    """Material name -> diffuse texture file name (map_Kd entries only)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    mapping: dict[str, str] = {}
    current = None
    for raw in data.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "newmtl" and len(fields) > 1:
            current = fields[1]
        elif fields[0] == "map_Kd" and current is not None and len(fields) > 1:
            mapping[current] = fields[-1]
    return mapping


def write_obj(mesh: TexturedMesh) -> bytes:
    """Serialize a mesh to OBJ text.

    Positions print at full repr precision so a parse of the output
    reproduces them exactly. Identical UV pairs are shared between corners;
    seams survive because sharing is by exact value. Materials are written
    as ``usemtl tex<i>`` where i is the texture index.
    """
    out = io.StringIO()
    for x, y, z in mesh.vertices.tolist():
        out.write(f"v {x!r} {y!r} {z!r}\n")

    uv_index: dict[tuple[float, float], int] = {}
    corner_uv_ids = None
    if mesh.corner_uvs is not None:
        corner_uv_ids = np.empty((mesh.triangle_count, 3), dtype=np.int64)
        uvs = mesh.corner_uvs.tolist()
        for t in range(mesh.triangle_count):
            for c in range(3):
                key = (uvs[t][c][0], uvs[t][c][1])
                if key not in uv_index:
                    uv_index[key] = len(uv_index)
                    out.write(f"vt {key[0]!r} {key[1]!r}\n")
                corner_uv_ids[t, c] = uv_index[key]

    current_material = None
    has_textures = len(mesh.textures) > 0
    for t in range(mesh.triangle_count):
        if has_textures:
            mat = int(mesh.material_of_triangle[t])
            if mat != current_material and mat != NO_MATERIAL:
                out.write(f"usemtl tex{mat}\n")
                current_material = mat
        corners = []
        for c in range(3):
            v = int(mesh.triangles[t, c]) + 1
            if corner_uv_ids is not None:
                corners.append(f"{v}/{int(corner_uv_ids[t, c]) + 1}")
            else:
                corners.append(str(v))
        out.write("f " + " ".join(corners) + "\n")
    return out.getvalue().encode("utf-8")


def make_index_resolver(textures) -> Callable[[str], TextureImage]:
    """Resolver for meshes written by ``write_obj``: maps ``tex<i>`` back to textures[i]."""
    textures = tuple(textures)

    def resolve(name: str) -> TextureImage:
        if name.startswith("tex"):
            try:
                return textures[int(name[3:])]
            except (ValueError, IndexError):
                pass
        raise TextureResolutionError(name)

    return resolve


def load_texture_image(path: str | Path) -> TextureImage:
    """Decode a PNG or JPEG file to an 8-bit texture image."""
    path = Path(path)
    if not path.is_file():
        raise TextureResolutionError(str(path))
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            arr = np.asarray(img.convert("L"), dtype=np.uint8)[:, :, None]
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return TextureImage(arr)


def load_mesh(path: str | Path) -> TexturedMesh:
    """Load an OBJ from disk, resolving MTL files and textures next to it."""
    path = Path(path)
    base = path.parent

    def mtl_resolver(name: str) -> bytes:
        mtl_path = base / name
        if not mtl_path.is_file():
            raise TextureResolutionError(name)
        return mtl_path.read_bytes()

    def texture_resolver(name: str) -> TextureImage:
        return load_texture_image(base / name)

    return parse_obj(path.read_bytes(), texture_resolver, mtl_resolver)


def save_mesh(mesh: TexturedMesh, path: str | Path, texture_prefix: str | None = None) -> None:
    """Write mesh to an OBJ file; textures saved as PNG files alongside it.

    With textures present an MTL is emitted so standard viewers can pick
    the images up; ``load_mesh`` re-reads the result.
    """
    path = Path(path)
    data = write_obj(mesh).decode("utf-8")
    if mesh.textures:
        prefix = texture_prefix or path.stem
        mtl_name = f"{prefix}.mtl"
        mtl_lines = []
        for i, tex in enumerate(mesh.textures):
            img_name = f"{prefix}_tex{i}.png"
            arr = tex.pixels[:, :, 0] if tex.channels == 1 else tex.pixels
            Image.fromarray(arr).save(path.parent / img_name)
            mtl_lines.append(f"newmtl tex{i}\nmap_Kd {img_name}\n")
        (path.parent / mtl_name).write_text("".join(mtl_lines))
        data = f"mtllib {mtl_name}\n" + data
    path.write_text(data)
