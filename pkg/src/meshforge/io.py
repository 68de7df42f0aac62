"""Mesh file I/O (OBJ, ASCII/binary PLY) and batch concatenation.

Color conventions: OBJ vertex colors are floats in [0, 1], PLY colors are
uchar in [0, 255]. Both are mapped to feature channels in [-1, 1] on load,
appended after the x/y/z channels. Meshes with >= 6 feature channels are
saved with colors (channels 3:6 mapped back).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshFormatError, StructuralError
from .mesh import BatchedMesh, TriMesh

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class MeshFileStats:
    """Summary of a parsed mesh file."""

    vertex_count: int
    facet_count: int
    has_color: bool
    bbox_min: np.ndarray
    bbox_max: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "MeshFileStats":
        return cls(
            vertex_count=mesh.n_vertices,
            facet_count=mesh.n_facets,
            has_color=mesh.n_channels >= 6,
            bbox_min=mesh.positions.min(axis=0),
            bbox_max=mesh.positions.max(axis=0),
        )


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return "obj"
    if suffix == ".ply":
        return "ply"
    raise MeshFormatError(
        f"cannot infer format from suffix {suffix!r}; pass format='obj' or 'ply'",
        path=path,
    )


def load_mesh(path, format: str = "auto") -> TriMesh:
    """Load a triangular mesh from an OBJ or PLY file.

    Polygons with more than 3 vertices are fan-triangulated. Vertex colors,
    when present, become feature channels rescaled to [-1, 1], after the
    x/y/z channels.
    """
    path = Path(path)
    if format == "auto":
        format = _detect_format(path)
    if format == "obj":
        return _load_obj(path)
    if format == "ply":
        return _load_ply(path)
    raise ValueError(f"unknown mesh format {format!r}")


def save_mesh(mesh: TriMesh, path, format: str = "auto") -> None:
    """Save a mesh as OBJ (text) or PLY (binary little-endian)."""
    path = Path(path)
    if format == "auto":
        format = _detect_format(path)
    if format == "obj":
        _save_obj(mesh, path)
    elif format == "ply":
        _save_ply(mesh, path)
    else:
        raise ValueError(f"unknown mesh format {format!r}")


def _fan_triangulate(indices: list[int]) -> list[tuple[int, int, int]]:
    return [(indices[0], indices[k], indices[k + 1]) for k in range(1, len(indices) - 1)]


def _load_obj(path: Path) -> TriMesh:
    positions: list[list[float]] = []
    colors: list[list[float]] = []
    triangles: list[tuple[int, int, int]] = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshFormatError(str(exc), path=path) from exc

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        tag = parts[0]
        if tag == "v":
            try:
                values = [float(p) for p in parts[1:]]
            except ValueError:
                raise MeshFormatError("malformed vertex line", path=path, line=lineno)
            if len(values) < 3 or len(values) in (5,) or len(values) > 7:
                raise MeshFormatError(
                    f"vertex line has {len(values)} values, expected 3 (xyz), "
                    "4 (xyzw) or 6 (xyz rgb)",
                    path=path, line=lineno,
                )
            positions.append(values[:3])
            colors.append(values[-3:] if len(values) >= 6 else [])
        elif tag == "f":
            refs = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    idx = int(head)
                except ValueError:
                    raise MeshFormatError(
                        f"malformed facet reference {token!r}", path=path, line=lineno
                    )
                if idx == 0:
                    raise MeshFormatError(
                        "OBJ facet indices are 1-based; 0 is invalid",
                        path=path, line=lineno,
                    )
                refs.append(idx - 1 if idx > 0 else len(positions) + idx)
            if len(refs) < 3:
                raise MeshFormatError(
                    "facet needs at least 3 vertices", path=path, line=lineno
                )
            for tri in _fan_triangulate(refs):
                if any(i < 0 or i >= len(positions) for i in tri):
                    raise MeshFormatError(
                        f"facet {len(triangles)} references vertex "
                        f"{max(tri) + 1} of {len(positions)}",
                        path=path, line=lineno,
                    )
                triangles.append(tri)
        # vn/vt/o/g/s/usemtl/mtllib and anything else: ignored
    if not positions:
        raise MeshFormatError("no vertices found", path=path)
    pos = np.asarray(positions, dtype=np.float64)
    features = pos.copy()
    if all(len(c) == 3 for c in colors):
        rgb = np.asarray(colors, dtype=np.float64) * 2.0 - 1.0
        features = np.concatenate([features, rgb], axis=1)
    facets = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    try:
        return TriMesh(pos, facets, features)
    except StructuralError as exc:
        raise MeshFormatError(str(exc), path=path) from exc


def _save_obj(mesh: TriMesh, path: Path) -> None:
    lines = []
    write_color = mesh.n_channels >= 6
    for i in range(mesh.n_vertices):
        x, y, z = mesh.positions[i]
        if write_color:
            r, g, b = np.clip((mesh.features[i, 3:6] + 1.0) / 2.0, 0.0, 1.0)
            lines.append(f"v {x:.9g} {y:.9g} {z:.9g} {r:.9g} {g:.9g} {b:.9g}")
        else:
            lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for f in mesh.facets:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(lines) + "\n")


def _parse_ply_header(data: bytes, path: Path):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError("not a PLY file (missing header)", path=path)
    end = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii", errors="replace")
    fmt = None
    elements = []  # list of (name, count, [(prop_name, dtype | ('list', cdt, idt))])
    for lineno, line in enumerate(header.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info", "end_header"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshFormatError(
                    f"unsupported PLY format {fmt!r} "
                    "(ascii and binary_little_endian are supported)",
                    path=path, line=lineno,
                )
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("property before element", path=path, line=lineno)
            if parts[1] == "list":
                count_t, item_t = parts[2], parts[3]
                if count_t not in _PLY_DTYPES or item_t not in _PLY_DTYPES:
                    raise MeshFormatError(
                        f"unsupported list types {count_t}/{item_t}",
                        path=path, line=lineno,
                    )
                elements[-1][2].append((parts[4], ("list", _PLY_DTYPES[count_t], _PLY_DTYPES[item_t])))
            else:
                if parts[1] not in _PLY_DTYPES:
                    raise MeshFormatError(
                        f"unsupported property type {parts[1]!r}", path=path, line=lineno
                    )
                elements[-1][2].append((parts[2], _PLY_DTYPES[parts[1]]))
    if fmt is None:
        raise MeshFormatError("PLY header has no format line", path=path)
    return fmt, elements, data[end:], end


def _load_ply(path: Path) -> TriMesh:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MeshFormatError(str(exc), path=path) from exc
    fmt, elements, body, body_offset = _parse_ply_header(data, path)

    vertex_props = facet_props = None
    vertex_count = facet_count = 0
    order = []
    for name, count, props in elements:
        order.append((name, count, props))
        if name == "vertex":
            vertex_props, vertex_count = props, count
        elif name == "face":
            facet_props, facet_count = props, count
    if vertex_props is None:
        raise MeshFormatError("PLY file has no vertex element", path=path)

    if fmt == "ascii":
        tokens = body.decode("ascii", errors="replace").split()
        cursor = 0

        def take(n):
            nonlocal cursor
            if cursor + n > len(tokens):
                raise MeshFormatError("unexpected end of ASCII data", path=path)
            out = tokens[cursor:cursor + n]
            cursor += n
            return out
    else:
        cursor = 0

        def take_bytes(dtype_str, n):
            nonlocal cursor
            dt = np.dtype("<" + dtype_str)
            need = dt.itemsize * n
            if cursor + need > len(body):
                raise MeshFormatError(
                    "unexpected end of binary data", path=path,
                    offset=body_offset + cursor,
                )
            out = np.frombuffer(body, dtype=dt, count=n, offset=cursor)
            cursor += need
            return out

    positions = colors = None
    triangles: list[tuple[int, int, int]] = []
    triangle_blocks: list[np.ndarray] = []
    color_names = ("red", "green", "blue")

    def read_faces_binary_fast(count, props) -> bool:
        """Vectorized read of a uniform-arity binary face element."""
        nonlocal cursor
        if len(props) != 1 or not isinstance(props[0][1], tuple):
            return False
        if props[0][0] not in ("vertex_indices", "vertex_index") or count == 0:
            return False
        _, count_t, item_t = props[0][1]
        count_dt, item_dt = np.dtype("<" + count_t), np.dtype("<" + item_t)
        if count_dt.itemsize != 1:
            return False
        arity = int(np.frombuffer(body, dtype=count_dt, count=1, offset=cursor)[0])
        record = 1 + arity * item_dt.itemsize
        needed = record * count
        if arity < 3 or cursor + needed > len(body):
            return False
        block = np.frombuffer(body, dtype=np.uint8, count=needed, offset=cursor)
        block = block.reshape(count, record)
        if not (block[:, 0].view(count_dt) == arity).all():
            return False
        indices = (
            block[:, 1:].copy().view(item_dt).reshape(count, arity).astype(np.int64)
        )
        cursor += needed
        if arity == 3:
            triangle_blocks.append(indices)
        else:
            for row in indices.tolist():
                triangles.extend(_fan_triangulate(row))
        return True

    for name, count, props in order:
        if name == "vertex":
            if any(isinstance(ptype, tuple) for _, ptype in props):
                raise MeshFormatError(
                    "list properties on vertices are not supported", path=path
                )
            # fixed-size records: read the whole element in one shot
            if fmt == "ascii":
                width = len(props)
                table = np.array(take(count * width), dtype=np.float64).reshape(
                    count, width
                )
                rows = {pname: table[:, k] for k, (pname, _) in enumerate(props)}
            else:
                record = np.dtype([(pname, "<" + pt) for pname, pt in props])
                if cursor + record.itemsize * count > len(body):
                    raise MeshFormatError(
                        "unexpected end of binary data", path=path,
                        offset=body_offset + cursor,
                    )
                table = np.frombuffer(body, dtype=record, count=count, offset=cursor)
                cursor += record.itemsize * count
                rows = {pname: table[pname].astype(np.float64) for pname, _ in props}
            missing = [ax for ax in ("x", "y", "z") if ax not in rows]
            if missing:
                raise MeshFormatError(f"vertex element lacks {missing} properties", path=path)
            positions = np.stack([rows["x"], rows["y"], rows["z"]], axis=1)
            if all(c in rows for c in color_names):
                for pname, ptype in props:
                    if pname in color_names and ptype != "u1":
                        raise MeshFormatError(
                            f"color property {pname!r} must be uchar", path=path
                        )
                colors = np.stack([rows[c] for c in color_names], axis=1)
        elif name == "face":
            if fmt == "binary_little_endian" and read_faces_binary_fast(count, props):
                continue
            for i in range(count):
                refs = None
                for pname, ptype in props:
                    if isinstance(ptype, tuple):
                        _, count_t, item_t = ptype
                        if fmt == "ascii":
                            n = int(take(1)[0])
                            values = [int(v) for v in take(n)]
                        else:
                            n = int(take_bytes(count_t, 1)[0])
                            values = take_bytes(item_t, n).astype(np.int64).tolist()
                        if pname in ("vertex_indices", "vertex_index"):
                            refs = values
                    else:
                        if fmt == "ascii":
                            take(1)
                        else:
                            take_bytes(ptype, 1)
                if refs is None:
                    raise MeshFormatError(
                        "face element lacks a vertex_indices list", path=path
                    )
                if len(refs) < 3:
                    raise MeshFormatError(f"face {i} has {len(refs)} vertices", path=path)
                triangles.extend(_fan_triangulate(refs))
        else:
            # unknown element: consume and discard its records
            for _ in range(count):
                for _, ptype in props:
                    if isinstance(ptype, tuple):
                        _, count_t, item_t = ptype
                        if fmt == "ascii":
                            n = int(take(1)[0])
                            take(n)
                        else:
                            n = int(take_bytes(count_t, 1)[0])
                            take_bytes(item_t, n)
                    else:
                        if fmt == "ascii":
                            take(1)
                        else:
                            take_bytes(ptype, 1)

    if positions is None:
        raise MeshFormatError("PLY file has no vertex data", path=path)
    features = positions.copy()
    if colors is not None:
        features = np.concatenate([features, colors / 255.0 * 2.0 - 1.0], axis=1)
    facets = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if triangle_blocks:
        facets = np.concatenate(triangle_blocks + [facets], axis=0)
    if facet_count and len(facets) < facet_count:
        raise MeshFormatError("PLY face data ended early", path=path)
    try:
        return TriMesh(positions, facets, features)
    except StructuralError as exc:
        raise MeshFormatError(str(exc), path=path) from exc


def _save_ply(mesh: TriMesh, path: Path) -> None:
    write_color = mesh.n_channels >= 6
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}"]
    header += ["property float x", "property float y", "property float z"]
    if write_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [
        f"element face {mesh.n_facets}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    chunks = [("\n".join(header) + "\n").encode("ascii")]

    pos = mesh.positions.astype("<f4")
    if write_color:
        rgb = np.clip(np.round((mesh.features[:, 3:6] + 1.0) * 127.5), 0, 255).astype("u1")
        record = np.empty(mesh.n_vertices, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
        record["xyz"] = pos
        record["rgb"] = rgb
        chunks.append(record.tobytes())
    else:
        chunks.append(pos.tobytes())

    face = np.empty(mesh.n_facets, dtype=[("n", "u1"), ("idx", "<i4", 3)])
    face["n"] = 3
    face["idx"] = mesh.facets.astype("<i4")
    chunks.append(face.tobytes())
    path.write_bytes(b"".join(chunks))


def concat_batch(meshes: list[TriMesh]) -> BatchedMesh:
    """Concatenate meshes into one batch, shifting facet indices per mesh.

    All meshes must share the same feature channel count.
    """
    if not meshes:
        raise ValueError("concat_batch needs at least one mesh")
    channels = {m.n_channels for m in meshes}
    if len(channels) != 1:
        raise StructuralError(f"meshes have mismatched channel counts: {sorted(channels)}")
    vertex_offsets = np.zeros(len(meshes) + 1, dtype=np.int64)
    facet_offsets = np.zeros(len(meshes) + 1, dtype=np.int64)
    np.cumsum([m.n_vertices for m in meshes], out=vertex_offsets[1:])
    np.cumsum([m.n_facets for m in meshes], out=facet_offsets[1:])
    positions = np.concatenate([m.positions for m in meshes], axis=0)
    features = np.concatenate([m.features for m in meshes], axis=0)
    facets = np.concatenate(
        [m.facets + vertex_offsets[b] for b, m in enumerate(meshes)], axis=0
    )
    return BatchedMesh(
        mesh=TriMesh(positions, facets, features),
        vertex_offsets=vertex_offsets,
        facet_offsets=facet_offsets,
    )
