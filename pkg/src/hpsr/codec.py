"""End-to-end encoder/decoder and the estimator-style front end."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .basecodec import decode_base, encode_base
from .container import HEADER_SIZE, Header, read_container, write_container
from .geometry import VoxelCloud, neighbor_set, round_scaled
from .prior import HierPrior, build_hier_prior, intermediate_keys, levelK_keys
from .priorcodec import PriorMode, PriorReader, encode_prior
from .pyramid import Pyramid, PyramidParams, build_pyramid, derive_params, map_s_to_q
from .superres import (
    extra_sr,
    final_upscale,
    interpolate_base,
    interpolate_intermediate,
)
from .validation import check_rational, check_voxels

__all__ = ["EncodeResult", "HPSRCodec", "NaiveCodec", "decode", "encode", "naive_reconstruct", "resolve_q"]


@dataclass
class EncodeResult:
    stream: bytes
    header: Header
    pyramid: Pyramid
    prior: HierPrior
    level0: VoxelCloud
    reconstruction: VoxelCloud

    @property
    def params(self) -> PyramidParams:
        return self.pyramid.params

    def bit_accounting(self) -> dict[str, int]:
        return self.header.bit_accounting()


def resolve_q(q=None, s=None) -> Fraction:
    """Exactly one of ``q`` (pyramid factor) or ``s`` (octree step) must be set."""
    if (q is None) == (s is None):
        raise ValueError("give exactly one of q or s")
    if s is not None:
        return map_s_to_q(check_rational(s, "s"))
    return check_rational(q, "q")


def encode(V, q, *, K_max: int = 2, Kprime_max: int = 2, nbr_k: int = 18, nbr_i: int = 6,
           prior_mode="raw") -> EncodeResult:
    V = check_voxels(V)
    if V.bitdepth > 21:
        raise ValueError("input bitdepth must be at most 21")
    nbr_k, nbr_i = neighbor_set(nbr_k), neighbor_set(nbr_i)
    params = derive_params(check_rational(q, "q"), K_max, Kprime_max)
    pyr = build_pyramid(V, params)
    prior, level0 = build_hier_prior(pyr, nbr_k, nbr_i)
    recon = level0
    if params.Kprime:
        recon = extra_sr(level0, prior.intermediates[-1], params.Kprime, nbr_i)
    recon = final_upscale(recon, params)
    base = encode_base(pyr.base)
    prior_bytes = encode_prior(prior, PriorMode.parse(prior_mode))
    header = Header(V.bitdepth, params.q, params.K, params.Kprime, nbr_k.id, nbr_i.id,
                    len(base), len(prior_bytes))
    stream = write_container(header, base, prior_bytes)
    return EncodeResult(stream, header, pyr, prior, level0, recon)


def decode(stream: bytes, *, skip_kprime: bool = False, return_prior: bool = False):
    """Reconstruct a cloud from a container.

    With ``skip_kprime`` the extra reuse iterations are skipped and the final
    upscale absorbs the missing doublings.
    """
    header, base, prior_bytes = read_container(stream)
    params = header.params
    VK = decode_base(base)
    reader = PriorReader(prior_bytes)
    c, r = levelK_keys(VK, params.g, header.nbr_k)
    level_k = reader.read_level_k({cc: np.unique(r[c == cc]) for cc in range(1, 8)})
    vhat = interpolate_base(VK, level_k, params.g, header.nbr_k)
    inter = []
    for _ in range(params.K - 1):
        table = reader.read_intermediate(np.unique(intermediate_keys(vhat, header.nbr_i)))
        inter.append(table)
        vhat = interpolate_intermediate(vhat, table, header.nbr_i)
    reader.finish()
    kprime = 0 if skip_kprime else params.Kprime
    if kprime:
        vhat = extra_sr(vhat, inter[-1], kprime, header.nbr_i)
    out = final_upscale(vhat, params, kprime)
    if return_prior:
        return out, HierPrior(level_k, inter)
    return out


def naive_reconstruct(VK: VoxelCloud, q) -> VoxelCloud:
    """Direct upscaling ``[p / q]`` of the base cloud; no prior."""
    q = check_rational(q, "q")
    return VoxelCloud(round_scaled(VK.points, q.denominator, q.numerator))


class HPSRCodec(TransformerMixin, BaseEstimator):
    """Point-cloud geometry codec with an estimator interface.

    ``fit`` learns the content-dependent prior of a cloud and produces its
    bitstream; ``transform`` returns the lossy reconstruction.

    Parameters
    ----------
    q, s : str, int or Fraction
        Exactly one of the pyramid factor ``q`` or the octree step ``s``
        (mapped to ``q``). Give rationals as strings such as ``"3/8"``.
    K_max, Kprime_max : int
        Caps on the pyramid depth and on the number of reuse iterations.
    nbr_k, nbr_i : {6, 18, 26}
        Neighbour sets for the base level and for the intermediate levels.
    prior_mode : {"raw", "entropy"}
        How pattern values are written.

    Attributes
    ----------
    params_ : PyramidParams
    prior_ : HierPrior
    stream_ : bytes
    reconstruction_ : ndarray of shape (n_out, 3)
    n_points_ : int
    """

    def __init__(self, q=None, s=None, K_max=2, Kprime_max=2, nbr_k=18, nbr_i=6, prior_mode="raw"):
        self.q = q
        self.s = s
        self.K_max = K_max
        self.Kprime_max = Kprime_max
        self.nbr_k = nbr_k
        self.nbr_i = nbr_i
        self.prior_mode = prior_mode

    def fit(self, X, y=None):
        V = check_voxels(X)
        q = resolve_q(self.q, self.s)
        result = encode(V, q, K_max=self.K_max, Kprime_max=self.Kprime_max,
                        nbr_k=self.nbr_k, nbr_i=self.nbr_i, prior_mode=self.prior_mode)
        self.result_ = result
        self.params_ = result.params
        self.prior_ = result.prior
        self.stream_ = result.stream
        self.reconstruction_ = np.array(result.reconstruction.points)
        self.n_points_ = len(V)
        return self

    def transform(self, X):
        """Downsample ``X`` and super-resolve it with the fitted prior.

        For the cloud passed to ``fit`` this is the decoder's output.
        """
        check_is_fitted(self, "prior_")
        V = check_voxels(X)
        pyr = build_pyramid(V, self.params_)
        nbr_k, nbr_i = neighbor_set(self.nbr_k), neighbor_set(self.nbr_i)
        vhat = interpolate_base(pyr.base, self.prior_.level_k, self.params_.g, nbr_k)
        for table in self.prior_.intermediates:
            vhat = interpolate_intermediate(vhat, table, nbr_i)
        if self.params_.Kprime:
            vhat = extra_sr(vhat, self.prior_.intermediates[-1], self.params_.Kprime, nbr_i)
        return np.array(final_upscale(vhat, self.params_).points)

    def bit_accounting(self) -> dict[str, int]:
        check_is_fitted(self, "stream_")
        return self.result_.bit_accounting()

    def bpp(self) -> float:
        check_is_fitted(self, "stream_")
        return 8 * len(self.stream_) / self.n_points_


class NaiveCodec(TransformerMixin, BaseEstimator):
    """Baseline: same base coder, direct upscaling and no prior.

    Isolates what the prior's bits buy at a given base-cloud rate.
    """

    def __init__(self, q=None, s=None, K_max=2, Kprime_max=2):
        self.q = q
        self.s = s
        self.K_max = K_max
        self.Kprime_max = Kprime_max

    def fit(self, X, y=None):
        V = check_voxels(X)
        self.params_ = derive_params(resolve_q(self.q, self.s), self.K_max, self.Kprime_max)
        base = build_pyramid(V, self.params_).base
        self.base_stream_ = encode_base(base)
        self.reconstruction_ = np.array(naive_reconstruct(base, self.params_.q).points)
        self.n_points_ = len(V)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        base = build_pyramid(check_voxels(X), self.params_).base
        return np.array(naive_reconstruct(base, self.params_.q).points)

    def bit_accounting(self) -> dict[str, int]:
        check_is_fitted(self, "base_stream_")
        return {"header_bits": 8 * HEADER_SIZE, "base_bits": 8 * len(self.base_stream_), "prior_bits": 0}

    def bpp(self) -> float:
        return sum(self.bit_accounting().values()) / self.n_points_
