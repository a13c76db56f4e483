"""PLY reading and writing, and voxelization of float clouds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StreamError
from .geometry import VoxelCloud

__all__ = ["PlyData", "PlyError", "VoxelTransform", "read_ply", "voxelize", "write_ply"]

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
_FORMATS = {"ascii", "binary_little_endian"}


class PlyError(StreamError):
    """PLY parse failure; ``line`` (header/ascii) or ``offset`` (binary) locate it."""

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"PLY: {message}" + (f" ({', '.join(where)})" if where else ""))
        self.line = line
        self.offset = offset


@dataclass
class PlyData:
    positions: np.ndarray
    normals: np.ndarray | None = None

    def __iter__(self):
        yield self.positions
        yield self.normals


@dataclass
class _Element:
    name: str
    count: int
    props: list  # (name, dtype) or (name, (count dtype, item dtype)) for lists

    @property
    def has_lists(self) -> bool:
        return any(isinstance(t, tuple) for _, t in self.props)


def _parse_header(data: bytes):
    if not data.startswith(b"ply"):
        raise PlyError("missing 'ply' magic", line=1)
    end = data.find(b"end_header")
    if end < 0:
        raise PlyError("missing end_header")
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    lines = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements: list[_Element] = []
    for i, raw in enumerate(lines, start=1):
        tok = raw.split()
        if not tok or tok[0] in ("ply", "comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in _FORMATS:
                raise PlyError(f"unsupported format {' '.join(tok[1:2])!r}", line=i)
            fmt = tok[1]
        elif tok[0] == "element":
            try:
                elements.append(_Element(tok[1], int(tok[2]), []))
            except (IndexError, ValueError):
                raise PlyError("bad element line", line=i) from None
            if elements[-1].count < 0:
                raise PlyError("negative element count", line=i)
        elif tok[0] == "property":
            if not elements:
                raise PlyError("property before element", line=i)
            try:
                if tok[1] == "list":
                    prop = (tok[4], (_PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
                else:
                    prop = (tok[2], _PLY_TYPES[tok[1]])
            except (IndexError, KeyError):
                raise PlyError("bad property line", line=i) from None
            elements[-1].props.append(prop)
        else:
            raise PlyError(f"unknown header keyword {tok[0]!r}", line=i)
    if fmt is None:
        raise PlyError("missing format line")
    return fmt, elements, body_start, len(lines) + 2


def _vertex_fields(el: _Element, line: int):
    names = [n for n, _ in el.props]
    for axis in "xyz":
        if axis not in names:
            raise PlyError(f"vertex element lacks property {axis!r}", line=line)
    normals = all(n in names for n in ("nx", "ny", "nz"))
    return names, normals


def _read_ascii(text_lines, first_line, elements):
    pos = 0
    for el in elements:
        if el.name != "vertex":
            pos += el.count
            continue
        rows = text_lines[pos:pos + el.count]
        if len(rows) < el.count:
            raise PlyError(f"expected {el.count} vertices, found {len(rows)}", line=first_line + pos + len(rows))
        names, _ = _vertex_fields(el, first_line)
        if el.has_lists:
            raise PlyError("list properties on vertices are not supported", line=first_line + pos)
        out = np.empty((el.count, len(names)), dtype=np.float64)
        for j, row in enumerate(rows):
            tok = row.split()
            if len(tok) < len(names):
                raise PlyError("too few values", line=first_line + pos + j)
            try:
                out[j] = [float(t) for t in tok[:len(names)]]
            except ValueError:
                raise PlyError("non-numeric value", line=first_line + pos + j) from None
        return names, out
    raise PlyError("no vertex element")


def _read_binary(data, start, elements):
    off = start
    for el in elements:
        if el.name == "vertex":
            names, _ = _vertex_fields(el, 0)
            if el.has_lists:
                raise PlyError("list properties on vertices are not supported", offset=off)
            dt = np.dtype([(f"p{i}", "<" + t) for i, (_, t) in enumerate(el.props)])
            need = dt.itemsize * el.count
            if len(data) - off < need:
                raise PlyError(f"truncated vertex data: need {need} bytes, have {len(data) - off}", offset=off)
            rec = np.frombuffer(data, dtype=dt, count=el.count, offset=off)
            out = np.column_stack([rec[f"p{i}"].astype(np.float64) for i in range(len(names))]) \
                if el.count else np.empty((0, len(names)))
            return names, out
        if el.has_lists:
            raise PlyError(f"cannot skip list element {el.name!r} before vertices", offset=off)
        off += el.count * sum(np.dtype(t).itemsize for _, t in el.props)
        if off > len(data):
            raise PlyError(f"truncated element {el.name!r}", offset=len(data))
    raise PlyError("no vertex element")


def read_ply(data: bytes) -> PlyData:
    """Parse vertex positions (and ``nx/ny/nz`` normals if present) from a PLY file's bytes.

    Other vertex properties and non-vertex elements are skipped.
    """
    data = bytes(data)
    fmt, elements, body_start, first_line = _parse_header(data)
    if not any(el.name == "vertex" for el in elements):
        raise PlyError("no vertex element")
    if fmt == "ascii":
        lines = [ln for ln in data[body_start:].decode("ascii", errors="replace").splitlines()]
        names, table = _read_ascii(lines, first_line, elements)
    else:
        names, table = _read_binary(data, body_start, elements)
    col = {n: i for i, n in enumerate(names)}
    positions = table[:, [col["x"], col["y"], col["z"]]]
    if not np.all(np.isfinite(positions)):
        raise PlyError("non-finite coordinate")
    normals = None
    if all(n in col for n in ("nx", "ny", "nz")):
        normals = table[:, [col["nx"], col["ny"], col["nz"]]]
    return PlyData(positions, normals)


def write_ply(cloud, format: str = "binary", normals=None) -> bytes:
    """Vertex-only PLY with float coordinates, points in canonical order.

    ``format`` is ``"ascii"`` or ``"binary"`` (little endian). ``normals``
    must follow the cloud's point order.
    """
    if format not in ("ascii", "binary"):
        raise ValueError("format must be 'ascii' or 'binary'")
    pts = np.asarray(getattr(cloud, "points", cloud)).reshape(-1, 3)
    cols = [pts.astype(np.float64)]
    names = ["x", "y", "z"]
    if normals is not None:
        nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if len(nrm) != len(pts):
            raise ValueError("one normal per point is required")
        cols.append(nrm)
        names += ["nx", "ny", "nz"]
    table = np.hstack(cols) if len(pts) else np.empty((0, len(names)))
    fmt_name = "ascii" if format == "ascii" else "binary_little_endian"
    header = [
        "ply",
        f"format {fmt_name} 1.0",
        f"element vertex {len(pts)}",
        *[f"property float {n}" for n in names],
        "end_header",
    ]
    head = ("\n".join(header) + "\n").encode("ascii")
    if format == "binary":
        return head + table.astype("<f4").tobytes()
    body = []
    for row in table:
        body.append(" ".join(f"{v:.9g}" for v in row.astype(np.float32)))
    return head + ("\n".join(body) + ("\n" if body else "")).encode("ascii")


@dataclass(frozen=True)
class VoxelTransform:
    """``voxel = round_half_up((position - offset) * scale)``."""

    offset: np.ndarray
    scale: float

    def to_original(self, voxels) -> np.ndarray:
        return np.asarray(voxels, dtype=np.float64) / self.scale + self.offset


def voxelize(positions, bitdepth: int, return_transform: bool = False):
    """Map float positions onto the ``2^bitdepth`` grid.

    The min corner goes to the origin and the largest extent is scaled to
    ``2^bitdepth - 1`` (same factor on every axis). Duplicates collapse.
    """
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(pos) == 0:
        raise ValueError("empty cloud")
    if not 1 <= bitdepth <= 21:
        raise ValueError("bitdepth must be in [1, 21]")
    if not np.all(np.isfinite(pos)):
        raise ValueError("non-finite coordinate")
    offset = pos.min(axis=0)
    extent = float((pos.max(axis=0) - offset).max())
    scale = (2 ** bitdepth - 1) / extent if extent > 0 else 1.0
    vox = np.floor((pos - offset) * scale + 0.5).astype(np.int64)
    np.clip(vox, 0, 2 ** bitdepth - 1, out=vox)
    cloud = VoxelCloud(vox, bitdepth)
    if return_transform:
        return cloud, VoxelTransform(offset, scale)
    return cloud
