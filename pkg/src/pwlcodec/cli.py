"""Command line front end.

Exit codes: 0 success, 1 data error, 2 usage error. ``-`` selects
stdin/stdout for trajectory and container streams.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

import numpy as np

from . import mdsim
from .analysis import EPS_GRID, LAMBDA_GRID, container_stats, rows_to_csv, sweep
from .codec import CodecError
from .container import ContainerError, raw_from_bytes, read_raw, write_raw
from .quantizer import ErrorBudget, InputError, RangeError
from .scheduler import BlockPlan, Compressor, Decompressor

DATA_ERRORS = (InputError, RangeError, ContainerError, CodecError, OSError)
STREAM_ROWS = 4096


class UsageError(Exception):
    pass


def _open_in(path: str):
    return nullcontext(sys.stdin.buffer) if path == "-" else open(path, "rb")


def _open_out(path: str):
    return nullcontext(sys.stdout.buffer) if path == "-" else open(path, "wb")


def _budget(args) -> ErrorBudget:
    try:
        return ErrorBudget(args.eps, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_bounds(pair: Optional[List[float]]):
    if pair is None:
        return None
    lo, hi = pair
    if not lo <= hi:
        raise UsageError("--bounds needs LO <= HI")
    return lo, hi


def _default_seed() -> int:
    return int(os.environ.get("HRTC_SEED", "42"))


def _compress_file(x: np.ndarray, out_path: str, budget: ErrorBudget, plan: BlockPlan,
                   kernel: str, bounds) -> int:
    lower, upper = (x.min(axis=0), x.max(axis=0)) if bounds is None else bounds
    with _open_out(out_path) as out:
        comp = Compressor(out, x.shape[1], budget, lower, upper, plan, kernel, n_frames=x.shape[0])
        comp.write(x)
        comp.close()
        return comp.pos


def _compress_part(args):
    path, start, stop, out_path, eps, lam, block, chunk, kernel, bounds = args
    x = read_raw(path)[:, start:stop].astype(np.float64)
    return _compress_file(x, out_path, ErrorBudget(eps, lam), BlockPlan(block, chunk), kernel, bounds)


def cmd_compress(args) -> int:
    budget = _budget(args)
    plan = BlockPlan(args.block, args.chunk)
    bounds = _parse_bounds(args.bounds)
    if args.input == "-":
        if args.nd is None or bounds is None:
            raise UsageError("reading from stdin requires --nd and --bounds")
        if args.jobs > 1:
            raise UsageError("--jobs needs a file input")
        with _open_out(args.output) as out:
            comp = Compressor(out, args.nd, budget, bounds[0], bounds[1], plan, args.kernel)
            frame_bytes = 4 * args.nd
            pending = b""
            while True:
                data = sys.stdin.buffer.read(frame_bytes * STREAM_ROWS)
                if not data:
                    break
                pending += data
                whole = len(pending) - len(pending) % frame_bytes
                if whole:
                    comp.write(raw_from_bytes(pending[:whole], args.nd))
                    pending = pending[whole:]
            if pending:
                raise InputError("trailing partial frame on stdin")
            comp.close()
            out.flush()
        n_frames, size = comp.t, comp.pos
        nd = args.nd
    else:
        x = read_raw(args.input, args.nd)
        n_frames, nd = x.shape
        if args.jobs > 1:
            size = _compress_parallel(args, nd, n_frames, bounds)
        else:
            size = _compress_file(x.astype(np.float64), args.output, budget, plan, args.kernel, bounds)
    bits = 8.0 * size / (n_frames * nd)
    print(f"frames={n_frames} nd={nd} bytes={size} ratio={32 / bits:.1f} "
          f"bits_per_sample={bits:.4f}", file=sys.stderr)
    return 0


def _compress_parallel(args, nd: int, n_frames: int, bounds) -> int:
    if args.output == "-":
        raise UsageError("--jobs writes a manifest and part files; give an output path")
    edges = np.linspace(0, nd, min(args.jobs, nd) + 1).astype(int)
    parts = []
    tasks = []
    for i, (start, stop) in enumerate(zip(edges[:-1], edges[1:])):
        part = f"{args.output}.part{i}"
        parts.append({"file": os.path.basename(part), "dims": [int(start), int(stop)]})
        tasks.append((args.input, start, stop, part, args.eps, args.lam, args.block, args.chunk,
                      args.kernel, bounds))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        sizes = list(pool.map(_compress_part, tasks))
    manifest = {"nd": nd, "frames": n_frames, "parts": parts}
    text = json.dumps(manifest)
    with open(args.output, "w") as f:
        f.write(text)
    return sum(sizes) + len(text)


def _load_compressed(path: str) -> np.ndarray:
    """Decode a container or a ``--jobs`` manifest into a float64 array."""
    with _open_in(path) as f:
        data = f.read()
    if data[:1] == b"{":
        manifest = json.loads(data)
        base = os.path.dirname(os.path.abspath(path))
        out = np.empty((manifest["frames"], manifest["nd"]))
        for part in manifest["parts"]:
            with open(os.path.join(base, part["file"]), "rb") as f:
                start, stop = part["dims"]
                out[:, start:stop] = Decompressor.from_bytes(f.read()).read_all()
        return out
    return Decompressor.from_bytes(data).read_all()


def _error_budget(path: str) -> float:
    with _open_in(path) as f:
        data = f.read()
    if data[:1] == b"{":
        manifest = json.loads(data)
        base = os.path.dirname(os.path.abspath(path))
        with open(os.path.join(base, manifest["parts"][0]["file"]), "rb") as f:
            data = f.read()
    h = Decompressor.from_bytes(data).header
    return h.eps_q + h.eps_f


def cmd_decompress(args) -> int:
    y = _load_compressed(args.input)
    if args.output == "-":
        sys.stdout.buffer.write(y.astype("<f4").tobytes())
        sys.stdout.buffer.flush()
    else:
        write_raw(args.output, y)
    return 0


def cmd_verify(args) -> int:
    x = read_raw(args.original).astype(np.float64)
    y = _load_compressed(args.compressed)
    if x.shape != y.shape:
        print(f"FAIL shape {x.shape} != {y.shape}")
        return 1
    eps = _error_budget(args.compressed)
    err = float(np.max(np.abs(x - y))) if x.size else 0.0
    ok = err <= eps * (1 + 1e-9)
    print(f"{'PASS' if ok else 'FAIL'} max_error={err:.6g} bound={eps:.6g}")
    return 0 if ok else 1


def cmd_stats(args) -> int:
    with _open_in(args.input) as f:
        data = f.read()
    if not data:
        raise ContainerError("empty container")
    s = container_stats(data)
    info = {
        "nd": s.nd, "frames": s.n_frames, "eps_q": s.eps_q, "eps_f": s.eps_f,
        "total_bytes": s.total_bytes, "header_bytes": s.header_bytes,
        "footer_bytes": s.footer_bytes, "block_bytes": s.block_bytes,
        "support_vectors": s.n_vectors, "bits_per_sample": s.bits_per_sample,
        "ratio_vs_f32": s.ratio, "segment_length_histogram": s.segment_hist,
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        for key, value in info.items():
            print(f"{key}: {value}")
    return 0


def _sim_config(args) -> mdsim.SimConfig:
    return mdsim.SimConfig(n_particles=args.particles, equil_steps=args.equil,
                           run_steps=args.steps, subsample=args.subsample,
                           seed=_default_seed() if args.seed is None else args.seed)


def cmd_gen(args) -> int:
    frames = mdsim.run(_sim_config(args))
    if args.output == "-":
        sys.stdout.buffer.write(frames.astype("<f4").tobytes())
    else:
        write_raw(args.output, frames)
    return 0


def cmd_bench(args) -> int:
    if args.input:
        traj = read_raw(args.input)
    else:
        traj = mdsim.run(_sim_config(args))
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    elif args.sweep == "eps":
        values = list(EPS_GRID)
    elif args.sweep == "lambda":
        values = list(LAMBDA_GRID)
    else:
        values = [s for s in (2**i for i in range(12)) if s <= len(traj)]
    if args.sweep == "subsample":
        values = [int(v) for v in values]
    rows = sweep(traj, args.sweep, values, eps=args.eps, lam=args.lam,
                 plan=BlockPlan(args.block, args.chunk), kernel=args.kernel)
    text = rows_to_csv(rows)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as f:
            f.write(text)
    return 0


def _add_codec_flags(p, eps_required: bool):
    p.add_argument("--eps", type=float, required=eps_required, default=None if eps_required else 0.01,
                   help="total error bound (coordinate units)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="share of the error spent on quantization, in (0, 1]")
    p.add_argument("--block", type=int, default=2048, help="frames per block")
    p.add_argument("--chunk", type=int, default=1024, help="support vectors per chunk")
    p.add_argument("--kernel", choices=("divfree", "reference"), default="divfree")


def _add_sim_flags(p, steps: int, equil: int, particles: int):
    p.add_argument("--particles", type=int, default=particles)
    p.add_argument("--steps", type=int, default=steps, help="production steps")
    p.add_argument("--equil", type=int, default=equil, help="discarded equilibration steps")
    p.add_argument("--subsample", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="defaults to $HRTC_SEED or 42")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwlcodec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="raw f32 trajectory -> container")
    p.add_argument("input")
    p.add_argument("output")
    _add_codec_flags(p, eps_required=True)
    p.add_argument("--bounds", nargs=2, type=float, metavar=("LO", "HI"),
                   help="bounds for every coordinate; required for stdin input")
    p.add_argument("--nd", type=int, help="coordinates per frame (overrides the sidecar)")
    p.add_argument("--jobs", type=int, default=1, help="split dimensions over N containers")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="container -> raw f32 trajectory")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("verify", help="check the error bound against the original")
    p.add_argument("original")
    p.add_argument("compressed")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="sizes, bits per sample, segment lengths")
    p.add_argument("input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="run the benchmark simulation")
    p.add_argument("output")
    _add_sim_flags(p, steps=100_000, equil=20_000, particles=512)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="parameter sweep as CSV")
    p.add_argument("--sweep", choices=("eps", "lambda", "subsample"), required=True)
    p.add_argument("--values", help="comma separated sweep values")
    p.add_argument("--input", help="raw trajectory to use instead of simulating")
    p.add_argument("--output", help="CSV path (default stdout)")
    _add_codec_flags(p, eps_required=False)
    _add_sim_flags(p, steps=100_000, equil=20_000, particles=128)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "block"):
            if args.block < 2 or args.chunk < 1:
                raise UsageError("--block must be >= 2 and --chunk >= 1")
            if args.eps is not None and not args.eps > 0:
                raise UsageError("--eps must be positive")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"pwlcodec: usage error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"pwlcodec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
