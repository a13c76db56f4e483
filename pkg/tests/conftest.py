import numpy as np
import pytest

from hpsr.geometry import VoxelCloud


def sphere_shell(radius=89, center=256, bitdepth=9):
    """Voxels within half a voxel of a sphere surface."""
    r = int(radius) + 2
    g = np.stack(np.meshgrid(*[np.arange(-r, r + 1)] * 3, indexing="ij"), -1).reshape(-1, 3)
    d = np.linalg.norm(g, axis=1)
    return VoxelCloud(g[(d >= radius - 0.5) & (d < radius + 0.5)] + center, bitdepth)


def random_cloud(rng, n, bitdepth, kind="uniform"):
    """Random voxels: ``uniform`` (sparse), ``blob`` (clustered) or ``surface``."""
    top = 2 ** bitdepth - 1
    if kind == "uniform":
        pts = rng.integers(0, top + 1, size=(n, 3))
    elif kind == "blob":
        centers = rng.uniform(0, top, size=(max(1, n // 500), 3))
        pts = centers[rng.integers(0, len(centers), n)] + rng.normal(0, top / 16 + 1, size=(n, 3))
    elif kind == "surface":
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        pts = top / 2 + v * top * rng.uniform(0.3, 0.49)
    else:
        raise ValueError(kind)
    pts = np.clip(np.rint(pts), 0, top).astype(np.int64)
    return VoxelCloud(pts, bitdepth)


def solid_box(lo, hi, bitdepth):
    ax = np.arange(lo, hi)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    return VoxelCloud(g, bitdepth)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
