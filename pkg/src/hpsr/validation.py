"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .geometry import VoxelCloud


def check_voxels(X, bitdepth: int | None = None) -> VoxelCloud:
    """Validate an ``(n_points, 3)`` array of voxel coordinates.

    Accepts a :class:`VoxelCloud` unchanged. Otherwise the values must be
    finite, non-negative and integral; duplicates are removed.
    """
    if isinstance(X, VoxelCloud):
        if len(X) == 0:
            raise ValueError("empty cloud")
        return X
    arr = check_array(X, dtype=None, ensure_2d=True, ensure_min_samples=1)
    if arr.shape[1] != 3:
        raise ValueError(f"expected 3 coordinates per point, got {arr.shape[1]}")
    if arr.dtype.kind == "f":
        if not np.array_equal(arr, np.round(arr)):
            raise ValueError("coordinates must be integers; voxelize float clouds first")
    elif arr.dtype.kind not in "iu":
        raise ValueError(f"unsupported coordinate dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise ValueError("negative coordinate")
    return VoxelCloud(arr, bitdepth)


def check_rational(value, name: str):
    """Parse ``"a/b"`` strings and ints into a Fraction, rejecting floats."""
    from .geometry import as_fraction

    try:
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"{name} must be a rational like '3/8': {exc}") from None
