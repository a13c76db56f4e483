"""Lossy point-cloud geometry coding by hierarchical prior-based super resolution.

The encoder downsamples a voxel cloud into a pyramid, codes the coarsest
level losslessly and transmits per-level interpolation patterns; the decoder
super-resolves the base cloud level by level using those patterns.
"""
from .codec import HPSRCodec, NaiveCodec, decode, encode, naive_reconstruct, resolve_q
from .errors import StreamError
from .geometry import NeighborSet, VoxelCloud, neighbor_set, phi, preimage_interval, round_half_up
from .metrics import RdPoint, bd_rate, d1_mse, d2_mse, estimate_normals, psnr
from .pcio import read_ply, voxelize, write_ply
from .pyramid import build_pyramid, derive_params, map_s_to_q

__version__ = "0.1.0"

__all__ = [
    "HPSRCodec",
    "NaiveCodec",
    "NeighborSet",
    "RdPoint",
    "StreamError",
    "VoxelCloud",
    "bd_rate",
    "build_pyramid",
    "d1_mse",
    "d2_mse",
    "decode",
    "derive_params",
    "encode",
    "estimate_normals",
    "map_s_to_q",
    "naive_reconstruct",
    "neighbor_set",
    "phi",
    "preimage_interval",
    "psnr",
    "read_ply",
    "resolve_q",
    "round_half_up",
    "voxelize",
    "write_ply",
]
