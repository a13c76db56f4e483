"""Command line: ``hpsr encode|decode|eval|sweep``.

Exit status is 0 on success, 1 for usage errors and 2 for bad input data.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from .codec import decode, encode, naive_reconstruct, resolve_q
from .container import read_container
from .errors import StreamError
from .metrics import RdPoint, bd_rate, d1_mse, d2_mse, estimate_normals, psnr, rd_csv
from .pcio import read_ply, voxelize, write_ply
from .pyramid import derive_params
from .validation import check_voxels

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DEFAULT_LADDER = ("1/16", "1/8", "1/4", "1/2", "3/4", "7/8")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _normals_option(text: str):
    if text in ("file", "none"):
        return text
    if text.startswith("estimate:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 3:
            return ("estimate", k)
    raise argparse.ArgumentTypeError("expected 'file', 'none' or 'estimate:k' with k >= 3")


def _threads() -> int:
    raw = os.environ.get("HPSR_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"HPSR_THREADS must be a positive integer, got {raw!r}")
    return n


def _load_ply(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise StreamError(f"cannot read {path}: {exc.strerror}") from None
    return read_ply(data)


def _load_cloud(path: str, bitdepth: int | None):
    """Read a PLY as voxels: voxelize at ``bitdepth`` or require integer coordinates."""
    ply = _load_ply(path)
    if len(ply.positions) == 0:
        raise StreamError(f"{path}: empty cloud")
    if bitdepth is not None:
        return voxelize(ply.positions, bitdepth), ply
    try:
        return check_voxels(ply.positions), ply
    except ValueError as exc:
        raise StreamError(f"{path}: {exc}; pass --bitdepth to voxelize") from None


def _write_atomic(path: str, data: bytes) -> None:
    tmp = f"{path}.part"
    Path(tmp).write_bytes(data)
    os.replace(tmp, path)


def _scale_from(args):
    if (args.q is None) == (args.s is None):
        raise UsageError("give exactly one of --q or --s")
    q = resolve_q(args.q, args.s)
    _check_rate(q, args)
    return q


def _check_rate(q, args) -> None:
    try:
        derive_params(q, args.K, args.Kprime)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_encode(args) -> int:
    q = _scale_from(args)
    V, _ = _load_cloud(args.input, args.bitdepth)
    res = encode(V, q, K_max=args.K, Kprime_max=args.Kprime, nbr_k=args.nbrK, nbr_i=args.nbrI,
                 prior_mode=args.prior_mode)
    _write_atomic(args.output, res.stream)
    stats = dict(res.bit_accounting())
    p = res.params
    stats.update(points=len(V), bpp=8 * len(res.stream) / len(V), q=str(p.q), K=p.K, Kprime=p.Kprime,
                 base_points=len(res.pyramid.base))
    print(json.dumps(stats))
    return EXIT_OK


def cmd_decode(args) -> int:
    stream = Path(args.input).read_bytes()
    out = decode(stream, skip_kprime=args.skip_kprime)
    _write_atomic(args.output, write_ply(out, args.format))
    return EXIT_OK


def _normals_for(points, source, file_normals, label):
    if source == "file":
        if file_normals is None:
            raise StreamError(f"{label} has no nx/ny/nz properties; use --normals estimate:k")
        return file_normals
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return estimate_normals(points, source[1]).vectors


def cmd_eval(args) -> int:
    ref, test = _load_ply(args.ref), _load_ply(args.test)
    A, B = ref.positions, test.positions
    if len(A) == 0 or len(B) == 0:
        raise StreamError("empty cloud")
    bitdepth = args.bitdepth
    if bitdepth is None:
        bitdepth = max(1, int(np.ceil(A.max())).bit_length())
    pt = RdPoint(Path(args.test).stem, math.nan, psnr(d1_mse(A, B), bitdepth))
    if args.stream:
        header, _, _ = read_container(Path(args.stream).read_bytes())
        acc = header.bit_accounting()
        pt.base_bits, pt.prior_bits, pt.header_bits = acc["base_bits"], acc["prior_bits"], acc["header_bits"]
        pt.bpp = pt.total_bits / len(A)
    if args.d2 and args.normals in (None, "none"):
        if ref.normals is None or test.normals is None:
            raise StreamError("D2 needs normals on both clouds; pass --normals file or --normals estimate:k")
        source = "file"
    else:
        source = args.normals
    if source not in (None, "none"):
        nA = _normals_for(A, source, ref.normals, args.ref)
        nB = _normals_for(B, source, test.normals, args.test)
        pt.d2_psnr = psnr(d2_mse(A, B, nA, nB), bitdepth)
    row = pt.row()
    if not args.stream:
        row[1:4] = ["", "", ""]
    sys.stdout.write(",".join(("rate_id", "bpp", "base_bits", "prior_bits", "d1_psnr", "d2_psnr")) + "\n")
    sys.stdout.write(",".join(str(x) for x in row) + "\n")
    return EXIT_OK


def _sweep_point(V, q, args, ref_normals):
    res = encode(V, q, K_max=args.K, Kprime_max=args.Kprime, nbr_k=args.nbrK, nbr_i=args.nbrI,
                 prior_mode=args.prior_mode)
    recon = decode(res.stream)
    acc = res.bit_accounting()
    n = len(V)
    base = res.pyramid.base
    naive = naive_reconstruct(base, res.params.q)
    rows = []
    for tag, cloud, prior_bits in (("hpsr", recon, acc["prior_bits"]), ("naive", naive, 0)):
        header_bits = acc["header_bits"]
        total = header_bits + acc["base_bits"] + prior_bits
        pt = RdPoint(f"{tag}:q={q}", total / n, math.nan,
                     base_bits=acc["base_bits"], prior_bits=prior_bits, header_bits=header_bits)
        rows.append(pt)
        if len(cloud) == 0:
            # every pattern rejected every candidate; distortion is undefined
            print(f"hpsr: warning: {pt.rate_id} reconstructs an empty cloud", file=sys.stderr)
            continue
        pt.d1_psnr = psnr(d1_mse(V, cloud), V.bitdepth)
        if ref_normals is not None and len(cloud) > args.k_normals:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                nb = estimate_normals(cloud, args.k_normals).vectors
            pt.d2_psnr = psnr(d2_mse(V, cloud, ref_normals, nb), V.bitdepth)
    return rows


def _rate_list(items, parse):
    try:
        return [parse(r.strip()) for r in items]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_sweep(args) -> int:
    if args.q and args.s:
        raise UsageError("give rates with --q or --s, not both")
    if args.q:
        rates = _rate_list(args.q.split(","), lambda r: resolve_q(q=r))
    else:
        rates = _rate_list(args.s.split(",") if args.s else DEFAULT_LADDER, lambda r: resolve_q(s=r))
    if args.bd and len(rates) < 4:
        raise UsageError("--bd needs at least 4 rate points")
    for q in rates:
        _check_rate(q, args)
    threads = _threads()
    V, ply = _load_cloud(args.input, args.bitdepth)
    args.k_normals = 12
    ref_normals = None
    if args.normals != "none":
        if args.normals == "file":
            if ply.normals is None or args.bitdepth is not None:
                raise StreamError("--normals file needs an integer-coordinate PLY with nx/ny/nz")
            order = np.lexsort(ply.positions.T[::-1])
            ref_normals = ply.normals[order]
            if len(ref_normals) != len(V):
                raise StreamError("--normals file needs a PLY without duplicate points")
        else:
            args.k_normals = args.normals[1]
            if len(V) > args.k_normals:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    ref_normals = estimate_normals(V, args.k_normals).vectors
    with ThreadPoolExecutor(max_workers=min(threads, len(rates))) as pool:
        results = list(pool.map(lambda q: _sweep_point(V, q, args, ref_normals), rates))
    hpsr = [r[0] for r in results]
    naive = [r[1] for r in results]
    out = rd_csv(hpsr + naive)
    if args.bd:
        parts = []
        for which in ("d1", "d2"):
            try:
                a = sorted(naive, key=lambda p: p.bpp)
                b = sorted(hpsr, key=lambda p: p.bpp)
                parts.append(f"bd_rate_{which}={bd_rate(a, b, which):.4f}%")
            except ValueError as exc:
                print(f"hpsr: warning: no {which.upper()} BD-rate: {exc}", file=sys.stderr)
                parts.append(f"bd_rate_{which}=nan")
        out += "# hpsr vs naive: " + " ".join(parts) + "\n"
    if args.output:
        _write_atomic(args.output, out.encode())
    else:
        sys.stdout.write(out)
    return EXIT_OK


def _codec_flags(p):
    p.add_argument("--bitdepth", type=int, help="voxelize float input at this bitdepth")
    p.add_argument("--K", type=int, default=2, help="cap on pyramid depth (default 2)")
    p.add_argument("--Kprime", type=int, default=2, help="cap on reuse iterations (default 2)")
    p.add_argument("--nbrK", type=int, choices=(6, 18, 26), default=18, help="base-level neighbour set")
    p.add_argument("--nbrI", type=int, choices=(6, 18, 26), default=6, help="intermediate neighbour set")
    p.add_argument("--prior-mode", choices=("raw", "entropy"), default="raw")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hpsr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="compress a PLY cloud")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--q", type=_fraction, help="pyramid factor, e.g. 1/8")
    p.add_argument("--s", type=_fraction, help="octree step, mapped to q")
    _codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a cloud from a stream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--skip-kprime", action="store_true", help="skip reuse iterations for speed")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="D1/D2 PSNR of a test cloud against a reference")
    p.add_argument("ref")
    p.add_argument("test")
    p.add_argument("--bitdepth", type=int, help="PSNR peak bitdepth (default: tight bitdepth of ref)")
    p.add_argument("--stream", help="compressed stream, for bpp and bit accounting")
    p.add_argument("--normals", type=_normals_option, help="'file' or 'estimate:k'; enables D2")
    p.add_argument("--d2", action="store_true", help="report D2 (needs normals)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="rate-distortion sweep against the naive baseline")
    p.add_argument("input")
    p.add_argument("--q", help="comma-separated q values")
    p.add_argument("--s", help="comma-separated s values (default ladder: %s)" % ",".join(DEFAULT_LADDER))
    p.add_argument("--bd", action="store_true", help="append a BD-rate summary line")
    p.add_argument("--normals", type=_normals_option, default=("estimate", 12),
                   help="reference normals for D2: 'file', 'estimate:k' (default k=12) or 'none'")
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    _codec_flags(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hpsr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StreamError, ValueError, OSError) as exc:
        print(f"hpsr: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
