"""Command-line entry point: ``tubsim {simulate,profile,report,gen-tensor}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 file I/O or
parse failure, 3 verification mismatch. Every artifact lands under
``--out`` with a fixed filename, next to a ``run_config.toml`` that
records the full invocation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import tomli_w

from . import synth
from .arith import Precision
from .dataflow import ConvShape, convolve, reference_convolution
from .errors import TensorFormatError, TextFormatError, TubSimError, ValidationError
from .pe_array import PcuConfig
from .perf import load_calibration, report_to_csv, report_to_text, workload_report
from .profiler import build_profile, load_profile, profile_to_csv, profile_to_text, tile_layers
from .tensorio import QuantTensor, load_tensor, save_tensor

log = logging.getLogger("tubsim")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_MISMATCH = 3

OUTPUT_TENSOR = "output.tqt"
SIM_SUMMARY = "summary.toml"
SIM_HISTOGRAM = "atom_histogram.csv"
PROFILE_TEXT = "profile.toml"
PROFILE_CSV = "profile_histogram.csv"
REPORT_TEXT = "report.toml"
REPORT_CSV = "report.csv"
RUN_CONFIG = "run_config.toml"


class VerificationError(TubSimError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        params = {}
        for key, value in sorted(vars(args).items()):
            if key in ("func", "command") or value is None:
                continue
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, (list, tuple)):
                value = [str(v) if isinstance(v, Path) else v for v in value]
            params[key] = value
        return cls(args.command, params)

    def to_text(self) -> str:
        return tomli_w.dumps({"command": self.command, "params": self.params})


def _pair(text: str) -> tuple[int, int]:
    parts = [int(p) for p in str(text).split(",")]
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError(f"expected N or N,M, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    path.write_text(text)
    return path


def _histogram_csv(hist: dict[int, int], key: str) -> str:
    lines = [f"{key},frequency"]
    lines += [f"{k},{v}" for k, v in sorted(hist.items())]
    return "\n".join(lines) + "\n"


def _infer_precision(explicit: Optional[str], tensors: Sequence[QuantTensor]) -> Precision:
    if explicit:
        return Precision.parse(explicit)
    return Precision(max(t.precision for t in tensors))


def cmd_simulate(args) -> int:
    weights = load_tensor(args.weights)
    activations = load_tensor(args.activations)
    precision = _infer_precision(args.precision, [weights, activations])
    cfg = PcuConfig(args.k, args.n, precision, args.handshake_cycles, args.period_ns)
    shape = ConvShape.from_tensors(weights, activations, args.stride, args.padding)
    result = convolve(shape, weights, activations, args.engine, cfg)

    out = args.out
    save_tensor(result.output, out / OUTPUT_TENSOR)
    summary = {
        "engine": result.engine,
        "precision": precision.label,
        "k": cfg.k,
        "n": cfg.n,
        "output_dims": list(result.output.dims),
        "atom_count": result.atom_count,
        "total_compute_cycles": result.total_compute_cycles,
        "total_cycles": result.total_cycles,
        "verified": bool(args.verify),
    }
    _write(out, SIM_HISTOGRAM, _histogram_csv(dict(result.cycle_histogram), "cycles"))
    print(f"{result.engine}: {result.atom_count} atoms, {result.total_compute_cycles} compute cycles, "
          f"{result.total_cycles} total cycles")

    if args.verify:
        other = "binary" if args.engine == "tub" else "tub"
        baseline = convolve(shape, weights, activations, other, cfg).output.data.copy()
        if args.corrupt_baseline:
            baseline.flat[0] += 1
        reference = reference_convolution(shape, weights, activations)
        mismatches = {
            other: int(np.count_nonzero(baseline != result.output.data)),
            "reference": int(np.count_nonzero(reference != result.output.data)),
        }
        summary["mismatches"] = mismatches
        _write(out, SIM_SUMMARY, tomli_w.dumps(summary))
        if any(mismatches.values()):
            raise VerificationError(f"verification failed: mismatching elements {mismatches}")
        print(f"verified against {other} engine and reference convolution")
    else:
        _write(out, SIM_SUMMARY, tomli_w.dumps(summary))
    return EXIT_OK


def cmd_profile(args) -> int:
    layers = [load_tensor(p) for p in args.weights]
    precision = _infer_precision(args.precision, layers)
    stats = tile_layers(layers, args.k, args.n, layout=args.layout, concat=args.concat_layers)
    profile = build_profile(stats, precision, include_ragged=args.include_ragged)
    _write(args.out, PROFILE_TEXT, profile_to_text(profile))
    _write(args.out, PROFILE_CSV, profile_to_csv(profile))
    print(f"{profile.tile_count} tiles, average {profile.average_cycles:.3f} cycles, "
          f"{profile.average_silent_pes:.3f} silent PEs/tile, {profile.word_sparsity_percent:.3f}% zeros")
    return EXIT_OK


def cmd_report(args) -> int:
    profile = load_profile(args.profile)
    cal = load_calibration(args.calibration)
    precision = Precision.parse(args.precision) if args.precision else profile.precision
    k = args.k if args.k is not None else profile.tile_k
    n = args.n if args.n is not None else profile.tile_n
    binary_dp, tub_dp = cal.pair(precision, k, n)
    rep = workload_report(profile, binary_dp, tub_dp, args.period_ns, cal)
    _write(args.out, REPORT_TEXT, report_to_text(rep))
    _write(args.out, REPORT_CSV, report_to_csv(rep))
    print(f"binary {rep.binary.energy_pj:.2f} pJ, tub {rep.tub.energy_pj:.2f} pJ, gap {rep.gap:.2f}x, "
          f"iso-area multiple {rep.iso_area.multiple} (ratio {rep.iso_area.ratio:.3f})")
    return EXIT_OK


def cmd_gen_tensor(args) -> int:
    dims = _int_list(args.dims)
    if args.dist == "uniform":
        t = synth.uniform(dims, args.precision, args.seed)
    elif args.dist == "clustered":
        if args.magnitude is None:
            raise ValidationError("--magnitude is required for the clustered distribution")
        t = synth.clustered(dims, args.magnitude, args.spread, args.precision, args.seed)
    elif args.dist == "sparse":
        t = synth.sparse(dims, args.sparsity, args.precision, args.seed)
    else:
        if not args.tile_maxima:
            raise ValidationError("--tile-maxima is required for the tile-max distribution")
        t = synth.tile_max(dims, _int_list(args.tile_maxima), args.zeros_per_tile, args.k, args.n,
                           args.precision, args.seed)
    save_tensor(t, args.out / args.name)
    print(f"wrote {t.dtype} tensor {t.dims} to {args.out / args.name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tubsim", description="Simulate, profile and cost tub convolution cores.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, k_default: Optional[int] = 16, n_default: Optional[int] = 16):
        p.add_argument("--k", type=int, default=k_default, help="PE cells per array (tile rows)")
        p.add_argument("--n", type=int, default=n_default, help="multipliers per cell (tile columns)")
        p.add_argument("--precision", choices=["int2", "int4", "int8"])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("simulate", help="run a convolution through the tub or binary engine")
    common(p)
    p.add_argument("--weights", type=Path, required=True, help="(K, C, R, S) weight tensor")
    p.add_argument("--activations", type=Path, required=True, help="(C, H, W) activation tensor")
    p.add_argument("--engine", choices=["tub", "binary"], default="tub")
    p.add_argument("--stride", type=_pair, default=(1, 1))
    p.add_argument("--padding", type=_pair, default=(0, 0))
    p.add_argument("--period-ns", type=float, default=4.0)
    p.add_argument("--handshake-cycles", type=int, default=2)
    p.add_argument("--verify", action="store_true", help="cross-check against the other engine and a reference")
    p.add_argument("--corrupt-baseline", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="k x n max-pool latency and sparsity profile of weight tensors")
    common(p)
    p.add_argument("--weights", type=Path, nargs="+", required=True)
    p.add_argument("--layout", choices=["kcrs", "atom"], default="kcrs")
    p.add_argument("--concat-layers", action="store_true", help="tile all layers as one stacked matrix")
    p.add_argument("--include-ragged", action="store_true", help="count padded edge tiles in silent-PE averages")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("report", help="energy / iso-area throughput report for a profile")
    common(p, None, None)
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--calibration", type=Path, default=None, help="calibration file (default: shipped table)")
    p.add_argument("--period-ns", type=float, default=4.0)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gen-tensor", help="generate a synthetic quantized tensor")
    common(p)
    p.set_defaults(precision="int8")
    p.add_argument("--dims", required=True, help="comma separated dims, e.g. 64,8,3,3")
    p.add_argument("--dist", choices=synth.DISTRIBUTIONS, default="uniform")
    p.add_argument("--magnitude", type=int, help="clustered: centre magnitude")
    p.add_argument("--spread", type=float, default=4.0, help="clustered: magnitude std-dev")
    p.add_argument("--sparsity", type=float, default=0.0, help="sparse: exact zero fraction")
    p.add_argument("--tile-maxima", help="tile-max: comma separated tile maxima, used in equal shares")
    p.add_argument("--zeros-per-tile", type=int, default=0, help="tile-max: zeros in every tile")
    p.add_argument("--name", default="tensor.tqt")
    p.set_defaults(func=cmd_gen_tensor)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / RUN_CONFIG).write_text(RunConfig.from_args(args).to_text())
        return args.func(args)
    except VerificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (TensorFormatError, TextFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TubSimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
