"""Geometry distortion (D1 point-to-point, D2 point-to-plane), PSNR and BD-rate."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "NormalField",
    "RdPoint",
    "bd_rate",
    "d1_mse",
    "d2_mse",
    "estimate_normals",
    "nearest_neighbors",
    "psnr",
    "rd_csv",
]

CSV_COLUMNS = ("rate_id", "bpp", "base_bits", "prior_bits", "d1_psnr", "d2_psnr")


def _points(cloud) -> np.ndarray:
    pts = getattr(cloud, "points", cloud)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("empty cloud")
    return pts


def nearest_neighbors(src, ref) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest neighbour in ``ref`` of every point of ``src``.

    Returns ``(squared_distance, index)``.
    """
    src, ref = _points(src), _points(ref)
    _, idx = cKDTree(ref).query(src, k=1)
    diff = src - ref[idx]
    return np.einsum("ij,ij->i", diff, diff), idx


def _one_way_d1(src, ref) -> float:
    return float(nearest_neighbors(src, ref)[0].mean())


def d1_mse(A, B) -> float:
    """Symmetric point-to-point MSE: the larger of the two one-way errors."""
    return max(_one_way_d1(A, B), _one_way_d1(B, A))


def _one_way_d2(src, ref, ref_normals) -> float:
    src, ref = _points(src), _points(ref)
    n = np.asarray(ref_normals, dtype=np.float64).reshape(-1, 3)
    if len(n) != len(ref):
        raise ValueError("one normal per reference point is required")
    _, idx = nearest_neighbors(src, ref)
    proj = np.einsum("ij,ij->i", src - ref[idx], n[idx])
    return float((proj ** 2).mean())


def d2_mse(A, B, normals_A=None, normals_B=None) -> float:
    """Symmetric point-to-plane MSE.

    Errors of ``A`` are projected on the normals of their nearest point in
    ``B`` and vice versa.
    """
    if normals_A is None or normals_B is None:
        raise ValueError("D2 needs normals on both clouds; read them from the PLY or call estimate_normals")
    return max(_one_way_d2(A, B, normals_B), _one_way_d2(B, A, normals_A))


@dataclass
class NormalField:
    vectors: np.ndarray
    n_degenerate: int = 0

    def __array__(self, dtype=None, copy=None):
        return self.vectors if dtype is None else self.vectors.astype(dtype)

    def __len__(self):
        return len(self.vectors)


def estimate_normals(cloud, k: int = 12, *, rank_tol: float = 1e-9) -> NormalField:
    """PCA normals from the ``k`` nearest neighbours (the point included).

    Each normal is the eigenvector of the smallest covariance eigenvalue,
    oriented to positive z (then y, then x on ties). Neighbourhoods of rank
    below two get ``(0, 0, 1)`` and are counted in ``n_degenerate``.
    """
    pts = _points(cloud)
    if not (3 <= k < len(pts)):
        raise ValueError(f"need 3 <= k < number of points, got k={k}, n={len(pts)}")
    _, idx = cKDTree(pts).query(pts, k=k)
    nb = pts[idx]
    nb = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", nb, nb) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0]
    degenerate = evals[:, 1] <= rank_tol * np.maximum(evals[:, 2], 1.0)
    normals[degenerate] = (0.0, 0.0, 1.0)

    tie = 1e-12
    flip = normals[:, 2] < -tie
    zero_z = np.abs(normals[:, 2]) <= tie
    flip |= zero_z & (normals[:, 1] < -tie)
    flip |= zero_z & (np.abs(normals[:, 1]) <= tie) & (normals[:, 0] < 0)
    normals[flip] *= -1
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    n_bad = int(degenerate.sum())
    if n_bad:
        warnings.warn(f"{n_bad} degenerate neighbourhoods; normal set to (0, 0, 1)", stacklevel=2)
    return NormalField(normals, n_bad)


def psnr(mse: float, bitdepth: int) -> float:
    """``10 log10(3 (2^b - 1)^2 / mse)``; ``inf`` for a perfect match."""
    if mse < 0:
        raise ValueError("mse must be non-negative")
    if mse == 0:
        return math.inf
    peak = 3.0 * (2 ** bitdepth - 1) ** 2
    return 10.0 * math.log10(peak / mse)


@dataclass
class RdPoint:
    """One rate-distortion measurement."""

    rate_id: str
    bpp: float
    d1_psnr: float
    d2_psnr: float = math.nan
    base_bits: int = 0
    prior_bits: int = 0
    header_bits: int = 0
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def total_bits(self) -> int:
        return self.base_bits + self.prior_bits + self.header_bits

    def row(self) -> list:
        return [self.rate_id, f"{self.bpp:.6f}", self.base_bits, self.prior_bits,
                _fmt_db(self.d1_psnr), _fmt_db(self.d2_psnr)]


def _fmt_db(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return ""
    return f"{x:.4f}"


def rd_csv(points, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow(p.row())
    return buf.getvalue()


def _curve(points, which: str) -> tuple[np.ndarray, np.ndarray]:
    attr = {"d1": "d1_psnr", "d2": "d2_psnr"}[which.lower()]
    pts = list(points)
    if len(pts) < 4:
        raise ValueError("BD-rate needs at least 4 rate points per curve")
    rate = np.array([p.bpp if isinstance(p, RdPoint) else p[0] for p in pts], dtype=np.float64)
    dist = np.array([getattr(p, attr) if isinstance(p, RdPoint) else p[1] for p in pts], dtype=np.float64)
    if np.any(np.diff(rate) <= 0):
        raise ValueError("rates must be strictly increasing")
    if np.any(rate <= 0) or not np.all(np.isfinite(dist)):
        raise ValueError("BD-rate needs positive rates and finite PSNR values")
    return np.log10(rate), dist


def bd_rate(anchor, test, which: str = "d1") -> float:
    """Average bitrate difference of ``test`` against ``anchor`` at equal PSNR, in percent.

    Curves are sequences of :class:`RdPoint` or ``(bpp, psnr)`` pairs. Each is
    fitted by a cubic in PSNR -> log10(bpp) and the gap is averaged over the
    common PSNR interval. Negative values are savings.
    """
    lr_a, q_a = _curve(anchor, which)
    lr_b, q_b = _curve(test, which)
    lo = max(q_a.min(), q_b.min())
    hi = min(q_a.max(), q_b.max())
    if hi <= lo:
        raise ValueError("no overlap between the PSNR ranges")
    int_a = np.polyint(np.polyfit(q_a, lr_a, 3))
    int_b = np.polyint(np.polyfit(q_b, lr_b, 3))
    gap = ((np.polyval(int_b, hi) - np.polyval(int_b, lo))
           - (np.polyval(int_a, hi) - np.polyval(int_a, lo))) / (hi - lo)
    return 100.0 * (10.0 ** gap - 1.0)
