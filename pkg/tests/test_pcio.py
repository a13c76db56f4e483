import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cloud
from hpsr.geometry import VoxelCloud
from hpsr.pcio import PlyError, read_ply, voxelize, write_ply


def test_single_vertex_ascii():
    data = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1.5 2 3\n"
    pos, normals = read_ply(data)
    assert pos.tolist() == [[1.5, 2.0, 3.0]]
    assert normals is None


def test_ascii_skips_colors_and_faces():
    data = (b"ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty uchar red\nproperty float x\n"
            b"property float y\nproperty float z\nproperty uchar green\nelement face 1\n"
            b"property list uchar int vertex_indices\nend_header\n255 1 2 3 7\n0 4 5 6 8\n3 0 1 1\n")
    assert read_ply(data).positions.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_binary_with_skipped_properties_and_normals():
    head = (b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
            b"property double z\nproperty uchar red\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n")
    body = struct.pack("<dddBfff", 1, 2, 3, 9, 0, 0, 1) + struct.pack("<dddBfff", 4, 5, 6, 9, 1, 0, 0)
    ply = read_ply(head + body)
    assert ply.positions.tolist() == [[1, 2, 3], [4, 5, 6]]
    assert ply.normals.tolist() == [[0, 0, 1], [1, 0, 0]]


def test_binary_skips_fixed_element_before_vertices():
    head = (b"ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty float fov\n"
            b"element vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n")
    body = struct.pack("<f", 60.0) + struct.pack("<fff", 7, 8, 9)
    assert read_ply(head + body).positions.tolist() == [[7, 8, 9]]


@pytest.mark.parametrize("data, where", [
    (b"plx\n", "line"),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n", "line"),
    (b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n", "line"),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 a 3\n", "line"),
    (b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n" + bytes(12), "byte"),
])
def test_parse_errors_are_located(data, where):
    with pytest.raises(PlyError, match=where):
        read_ply(data)


def test_missing_vertex_element():
    with pytest.raises(PlyError, match="no vertex element"):
        read_ply(b"ply\nformat ascii 1.0\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n")


def test_unsupported_format():
    with pytest.raises(PlyError, match="unsupported format"):
        read_ply(b"ply\nformat binary_big_endian 1.0\nend_header\n")


def test_empty_cloud_header():
    text = write_ply(VoxelCloud(np.empty((0, 3), dtype=int)), "ascii").decode()
    assert "element vertex 0" in text
    assert read_ply(text.encode()).positions.shape == (0, 3)


@pytest.mark.parametrize("fmt", ["ascii", "binary"])
def test_write_read_roundtrip(rng, fmt):
    V = random_cloud(rng, 1000, 21)
    pos, _ = read_ply(write_ply(V, fmt))
    assert np.array_equal(pos, V.points)
    assert VoxelCloud(pos.astype(np.int64)) == V


def test_ascii_and_binary_agree_with_normals(rng):
    V = random_cloud(rng, 300, 10)
    n = rng.normal(size=(len(V), 3))
    a = read_ply(write_ply(V, "ascii", n))
    b = read_ply(write_ply(V, "binary", n))
    assert np.array_equal(a.positions, b.positions)
    assert np.allclose(a.normals, b.normals, rtol=1e-6)


def test_voxelize_identity_on_integer_grid(rng):
    V = random_cloud(rng, 500, 8)
    pts = np.vstack([V.points, [[0, 0, 0], [255, 255, 255]]])
    assert voxelize(pts.astype(float), 8) == VoxelCloud(pts)


def test_voxelize_two_points():
    out, tf = voxelize([[1.0, 1.0, 1.0], [3.0, 2.0, 1.5]], 4, return_transform=True)
    assert out.points.tolist() == [[0, 0, 0], [15, 8, 4]]  # 7.5 -> 8, 3.75 -> 4
    assert np.allclose(tf.to_original([[15, 0, 0]]), [[3.0, 1.0, 1.0]])


def test_voxelize_degenerate_and_duplicates():
    assert voxelize(np.full((5, 3), 2.5), 6).points.tolist() == [[0, 0, 0]]
    with pytest.raises(ValueError):
        voxelize(np.empty((0, 3)), 6)
    with pytest.raises(ValueError):
        voxelize([[0, 0, 0]], 22)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-1e3, 1e3, allow_nan=False)] * 3), min_size=1, max_size=60),
       st.integers(1, 16))
def test_voxelize_idempotent(pts, b):
    once = voxelize(pts, b)
    assert (once.points >= 0).all() and (once.points < 2 ** b).all()
    assert voxelize(once.points.astype(float), b) == once
