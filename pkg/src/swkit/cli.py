"""Command-line experiment drivers.

Each subcommand is a pure function of its flags, seed, and input files:
re-running writes bit-identical CSV/JSON outputs.  Every run also writes a
manifest recording the full parameter set, content hashes of inputs and
outputs, and the wall time, so results stay attributable to the exact
invocation that produced them.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .colors import read_image, transfer_colors, write_image
from .datasets import (
    eight_gaussians_2d,
    embed,
    embedding_subspace,
    gaussian_pair_subspace,
    knot_2d,
    swiss_roll_2d,
)
from .errors import ContractError, UnsupportedInputError
from .essf import essf_variance_curve, validate_theorem
from .flow import FlowConfig, lr_sweep, run_flow, save_sweep_csv, save_trace_csv
from .measures import WeightedCloud, load_cloud_csv, save_cloud_csv
from .rng import derive_seed, stream
from .slicing import sample_uniform_sphere
from .variants import (
    ENERGY_EXP,
    ENERGY_ID1,
    WeightingScheme,
    ebsw,
    max_sw,
    rescaled_sw,
    rpsw,
    sw_mc,
)

__all__ = ["main", "color_transfer_main", "parse_lr_grid"]

_DIM_GRID = (10, 30, 50, 80, 100, 300, 500, 800, 1000)
_DATASETS = {
    "swiss": swiss_roll_2d,
    "eight-gaussians": eight_gaussians_2d,
    "knot": knot_2d,
}
_GRID_RE = re.compile(r"^\{([^{}]+)\}e\{(-?\d+)\.\.(-?\d+)\}$")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def parse_lr_grid(spec: str) -> list[float]:
    """Expand a learning-rate grid spec into the list of rates.

    Accepts either ``{m1,m2,...}e{lo..hi}`` (every mantissa times every power
    of ten in the inclusive exponent range, ascending) or a plain
    comma-separated list of positive numbers.
    """
    text = spec.strip()
    match = _GRID_RE.match(text)
    if match:
        try:
            mantissas = [float(tok) for tok in match.group(1).split(",")]
        except ValueError:
            raise UnsupportedInputError(f"bad mantissa list in lr grid {spec!r}")
        lo, hi = int(match.group(2)), int(match.group(3))
        if hi < lo:
            raise UnsupportedInputError(f"empty exponent range in lr grid {spec!r}")
        values = [m * 10.0**e for e in range(lo, hi + 1) for m in mantissas]
    else:
        try:
            values = [float(tok) for tok in text.split(",") if tok.strip()]
        except ValueError:
            raise UnsupportedInputError(f"cannot parse lr grid {spec!r}")
    if not values or any(not (math.isfinite(v) and v > 0.0) for v in values):
        raise UnsupportedInputError(f"lr grid {spec!r} must yield positive finite rates")
    return values


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UnsupportedInputError(f"expected a comma-separated integer list, got {text!r}")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, args: argparse.Namespace, inputs, outputs, started: float, extra=None):
    """Record what ran and what it produced; hashing doubles as an existence
    check, so a missing declared output fails the run before it can report
    success."""
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = {
        "command": args.command,
        "params": params,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "elapsed_s": time.perf_counter() - started,
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    pairs = [(d, args.k) for d in _DIM_GRID if d >= args.k]
    pairs += [(args.d, k) for k in _DIM_GRID if k <= args.d]
    csv_path = out / "validate.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "k", "p", "ratio_hat", "exact"])
        for d, k in pairs:
            for run in range(args.runs):
                check = validate_theorem(
                    d,
                    k,
                    args.p,
                    n=args.n,
                    count=args.slices,
                    seed=derive_seed(args.seed, "validate", d, k, run),
                    coupled=True,
                )
                writer.writerow(
                    [check.d, check.k, _fmt(check.p), _fmt(check.ratio_hat), _fmt(check.ratio_exact)]
                )
    _write_manifest(out / "manifest.json", args, [], [csv_path], started)
    print(f"wrote {len(pairs) * args.runs} identity checks to {csv_path}")
    return 0


def cmd_essf(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    csv_path = out / "essf.csv"
    rows = 0
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "k", "p", "L", "runs", "exact", "mean", "std", "seed"])
        for d in sorted(set(args.d_list)):
            for k in sorted(set(k for k in args.k_list if k <= d)):
                pair_seed = derive_seed(args.seed, "essf", d, k)
                curve = essf_variance_curve(
                    d, k, args.p, counts=tuple(sorted(set(args.slice_grid))), runs=args.runs, seed=pair_seed
                )
                for row in curve:
                    writer.writerow(
                        [d, k, _fmt(args.p), row.count, args.runs, _fmt(row.exact),
                         _fmt(row.mean), _fmt(row.std), pair_seed]
                    )
                    rows += 1
    _write_manifest(out / "manifest.json", args, [], [csv_path], started)
    print(f"wrote {rows} estimator rows to {csv_path}")
    return 0


def _flow_pair(args) -> tuple[WeightedCloud, WeightedCloud, int, list]:
    """Source and target clouds for a flow command, plus the input files read.

    The target is a named 2D benchmark shape or a CSV cloud; the source is a
    CSV cloud or a seeded standard Gaussian of matching size.  When the
    ambient dimension exceeds the intrinsic one, both clouds are lifted with
    the same seeded rotation so they share a subspace.
    """
    inputs = []
    if args.dataset is not None:
        target = _DATASETS[args.dataset](args.n, seed=args.seed)
    else:
        target = load_cloud_csv(args.target_csv)
        inputs.append(args.target_csv)
    intrinsic = target.dim
    if getattr(args, "source_csv", None) is not None:
        source = load_cloud_csv(args.source_csv)
        inputs.append(args.source_csv)
        if source.dim != intrinsic:
            raise UnsupportedInputError(
                f"source cloud is {source.dim}-dimensional but the target is {intrinsic}-dimensional"
            )
    else:
        rng = stream(args.seed, "flow-source")
        source = WeightedCloud.uniform(rng.standard_normal((target.n, intrinsic)))
    if args.ambient_d > intrinsic:
        source = embed(source, args.ambient_d, seed=args.seed)
        target = embed(target, args.ambient_d, seed=args.seed)
    elif args.ambient_d < intrinsic:
        raise ContractError(
            f"ambient dimension {args.ambient_d} is below the data dimension {intrinsic}"
        )
    return source, target, intrinsic, inputs


def _make_scheme(args, intrinsic: int) -> WeightingScheme:
    name = args.variant
    if name == "classical":
        return WeightingScheme.classical()
    if name == "energy":
        return WeightingScheme.energy(ENERGY_EXP)
    if name == "energy-id":
        return WeightingScheme.energy(ENERGY_ID1)
    if name == "random-path":
        return WeightingScheme.random_path(kappa=args.kappa)
    if name == "reciprocal":
        return WeightingScheme.reciprocal_es(
            embedding_subspace(args.ambient_d, intrinsic, args.seed)
        )
    raise UnsupportedInputError(f"unknown variant {name!r}")


def _flow_config(args, scheme: WeightingScheme, lr: float) -> FlowConfig:
    return FlowConfig(
        p=args.p,
        n_slices=args.slices,
        lr=lr,
        iters=args.iters,
        seed=args.seed,
        eval_every=args.eval_every,
        variant=scheme,
        resample=not args.no_resample,
    )


def cmd_flow(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    source, target, intrinsic, inputs = _flow_pair(args)
    config = _flow_config(args, _make_scheme(args, intrinsic), args.lr)
    trace = run_flow(source, target, config)
    trace_path = out / "trace.csv"
    final_path = out / "final.csv"
    save_trace_csv(trace, trace_path)
    save_cloud_csv(trace.final, final_path)
    _write_manifest(out / "manifest.json", args, inputs, [trace_path, final_path], started)
    print(f"final W2 {trace.final_w2:.6g} after {args.iters} iterations -> {trace_path}")
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    grid = parse_lr_grid(args.lr_grid)
    source, target, intrinsic, inputs = _flow_pair(args)
    config = _flow_config(args, _make_scheme(args, intrinsic), grid[0])
    rows = lr_sweep(source, target, grid, config, threads=args.threads)
    sweep_path = out / "sweep.csv"
    save_sweep_csv(rows, sweep_path)
    survivors = [row for row in rows if not row.diverged]
    best = min(survivors, key=lambda row: row.final_w2) if survivors else None
    extra = {
        "best_lr": None if best is None else best.lr,
        "best_w2": None if best is None else best.final_w2,
        "diverged_rates": [row.lr for row in rows if row.diverged],
    }
    _write_manifest(out / "manifest.json", args, inputs, [sweep_path], started, extra=extra)
    if best is None:
        print(f"all {len(rows)} rates diverged -> {sweep_path}")
    else:
        print(f"best lr {best.lr:g} with final W2 {best.final_w2:.6g} -> {sweep_path}")
    return 0


def cmd_color(args) -> int:
    started = time.perf_counter()
    source = read_image(args.source)
    target = read_image(args.target)
    config = FlowConfig(
        p=args.p,
        n_slices=args.slices,
        lr=args.lr,
        iters=args.iters,
        seed=args.seed,
        eval_every=args.eval_every,
    )
    recolored, report = transfer_colors(source, target, args.clusters, config)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_image(out_path, recolored)
    outputs = [out_path]
    if args.report is not None:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(Path(args.report))
    manifest_path = out_path.with_name(out_path.stem + ".manifest.json")
    _write_manifest(manifest_path, args, [args.source, args.target], outputs, started)
    print(f"palette W2 after transfer {report['w2_after']:.6g} -> {out_path}")
    return 0


def cmd_bench(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    k = min(2, args.d)
    pair = gaussian_pair_subspace(args.d, k, n=args.n, seed=args.seed)
    a, b = pair.ambient_source, pair.ambient_target

    def classical(seed):
        return sw_mc(a, b, args.p, sample_uniform_sphere(args.d, args.slices, seed)).value_p

    def reciprocal(seed):
        bank = sample_uniform_sphere(args.d, args.slices, seed)
        return rescaled_sw(a, b, args.p, bank, WeightingScheme.reciprocal_es(pair.subspace)).value_p

    def energy(seed):
        return ebsw(a, b, args.p, sample_uniform_sphere(args.d, args.slices, seed)).value_p

    def random_path(seed):
        return rpsw(a, b, args.p, args.slices, math.inf, seed).value_p

    def best_single_slice(seed):
        return max_sw(a, b, args.p, seed=seed)[0]

    runners = {
        "classical": classical,
        "reciprocal": reciprocal,
        "energy": energy,
        "random-path": random_path,
        "max-sw": best_single_slice,
    }
    unknown = [name for name in args.variants if name not in runners]
    if unknown:
        raise UnsupportedInputError(f"unknown bench variants {unknown!r}")
    if args.reps < 1:
        raise ContractError(f"need reps >= 1, got {args.reps}")
    results = {}
    for name in args.variants:
        times = np.empty(args.reps)
        value = math.nan
        for rep in range(args.reps):
            rep_seed = derive_seed(args.seed, "bench", name, rep)
            tick = time.perf_counter()
            value = runners[name](rep_seed)
            times[rep] = time.perf_counter() - tick
        results[name] = {
            "mean_s": float(times.mean()),
            "std_s": float(times.std(ddof=1)) if args.reps > 1 else 0.0,
            "last_value_p": float(value),
        }
    bench_path = out / "bench.json"
    payload = {
        "d": args.d,
        "n": args.n,
        "L": args.slices,
        "p": args.p,
        "reps": args.reps,
        "seed": args.seed,
        "results": results,
    }
    with open(bench_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out / "manifest.json", args, [], [bench_path], started)
    print(f"benchmarked {len(results)} variants -> {bench_path}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base seed for every stream")
    parser.add_argument(
        "--config",
        default=None,
        help="key=value file of flag defaults; explicit flags win",
    )


def _add_flow_flags(parser: argparse.ArgumentParser, iters_default: int) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--dataset", choices=sorted(_DATASETS), help="named 2D target shape")
    group.add_argument("--target-csv", help="CSV cloud to use as the target")
    parser.add_argument("--source-csv", default=None, help="CSV cloud to flow (default: seeded Gaussian)")
    parser.add_argument("--n", type=int, default=300, help="particles per generated cloud")
    parser.add_argument("--ambient-d", type=int, default=2, help="dimension to embed both clouds into")
    parser.add_argument(
        "--variant",
        choices=["classical", "reciprocal", "energy", "energy-id", "random-path"],
        default="classical",
        help="slice weighting scheme",
    )
    parser.add_argument("--kappa", type=float, default=math.inf, help="random-path concentration")
    parser.add_argument("--p", type=float, default=2.0, help="transport order")
    parser.add_argument("--slices", type=int, default=50, help="slices per iteration")
    parser.add_argument("--iters", type=int, default=iters_default, help="descent iterations")
    parser.add_argument("--eval-every", type=int, default=500, help="checkpoint spacing")
    parser.add_argument(
        "--no-resample",
        action="store_true",
        help="reuse one slice bank instead of redrawing each iteration",
    )
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swkit",
        description="Sliced transport experiments: identity checks, estimator curves, flows, color transfer.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="scale-factor identity sweep over dimensions")
    p_validate.add_argument("--k", type=int, default=2, help="fixed subspace dimension for the d sweep")
    p_validate.add_argument("--d", type=int, default=1000, help="fixed ambient dimension for the k sweep")
    p_validate.add_argument("--p", type=float, default=2.0, help="transport order")
    p_validate.add_argument("--n", type=int, default=500, help="samples per Gaussian cloud")
    p_validate.add_argument("--slices", type=int, default=1000, help="slices per estimate")
    p_validate.add_argument("--runs", type=int, default=3, help="repeats per grid point")
    p_validate.add_argument("--out", required=True, help="output directory")
    _add_common(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_essf = sub.add_parser("essf", help="estimator mean/std across slice-bank sizes")
    p_essf.add_argument("--d-list", type=_int_list, default=[100, 500, 1000], help="ambient dimensions")
    p_essf.add_argument("--k-list", type=_int_list, default=[2, 10, 50], help="subspace dimensions")
    p_essf.add_argument("--p", type=float, default=2.0, help="transport order")
    p_essf.add_argument(
        "--slice-grid",
        type=_int_list,
        default=[10, 50, 100, 500, 1000, 5000, 10000],
        help="slice-bank sizes",
    )
    p_essf.add_argument("--runs", type=int, default=1000, help="independent estimates per size")
    p_essf.add_argument("--out", required=True, help="output directory")
    _add_common(p_essf)
    p_essf.set_defaults(func=cmd_essf)

    p_flow = sub.add_parser("flow", help="flow a cloud onto a target, tracking exact W2")
    _add_flow_flags(p_flow, iters_default=10000)
    p_flow.add_argument("--lr", type=float, required=True, help="descent step size")
    _add_common(p_flow)
    p_flow.set_defaults(func=cmd_flow)

    p_sweep = sub.add_parser("sweep", help="repeat a flow across a learning-rate grid")
    _add_flow_flags(p_sweep, iters_default=10000)
    p_sweep.add_argument(
        "--lr-grid",
        default="{1,3,5,8}e{-6..2}",
        help='grid spec "{m,...}e{lo..hi}" or a comma-separated list',
    )
    p_sweep.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_color = sub.add_parser("color", help="transfer one image's palette onto another")
    p_color.add_argument("--source", required=True, help="image to recolor")
    p_color.add_argument("--target", required=True, help="image providing the palette")
    p_color.add_argument("--out", required=True, help="output image path (.png or .ppm)")
    p_color.add_argument("--clusters", type=int, default=3000, help="palette size")
    p_color.add_argument("--lr", type=float, required=True, help="descent step size")
    p_color.add_argument("--iters", type=int, default=50000, help="descent iterations")
    p_color.add_argument("--slices", type=int, default=50, help="slices per iteration")
    p_color.add_argument("--p", type=float, default=2.0, help="transport order")
    p_color.add_argument("--eval-every", type=int, default=500, help="checkpoint spacing")
    p_color.add_argument("--report", default=None, help="where to write the JSON report")
    _add_common(p_color)
    p_color.set_defaults(func=cmd_color)

    p_bench = sub.add_parser("bench", help="time the estimator variants on one instance")
    p_bench.add_argument(
        "--variants",
        type=lambda text: [tok.strip() for tok in text.split(",") if tok.strip()],
        default=["classical", "reciprocal", "energy", "random-path", "max-sw"],
        help="comma-separated variant names",
    )
    p_bench.add_argument("--d", type=int, default=30, help="ambient dimension")
    p_bench.add_argument("--n", type=int, default=200, help="samples per cloud")
    p_bench.add_argument("--slices", type=int, default=200, help="slices per estimate")
    p_bench.add_argument("--p", type=float, default=2.0, help="transport order")
    p_bench.add_argument("--reps", type=int, default=5, help="timed repetitions")
    p_bench.add_argument("--out", required=True, help="output directory")
    _add_common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def _read_config(path) -> list[tuple[str, str]]:
    entries = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UnsupportedInputError(f"cannot read config file {path}: {exc}")
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UnsupportedInputError(f"config line {line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        entries.append((key.strip(), value.strip()))
    return entries


def _inject_config(argv: list[str]) -> list[str]:
    """Append config-file entries as flags, explicit flags taking priority."""
    if "--config" not in argv:
        return argv
    value_at = argv.index("--config") + 1
    if value_at >= len(argv):
        return argv
    path = argv[value_at]
    extra: list[str] = []
    for key, value in _read_config(path):
        flag = "--" + key.lstrip("-").replace("_", "-")
        if flag in argv:
            continue
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                extra.append(flag)
        else:
            extra.extend([flag, value])
    return argv + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _inject_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        target = exc.filename if exc.filename else ""
        print(f"error: {target}: {exc.strerror or exc}".replace(": :", ":"), file=sys.stderr)
        return 1


def color_transfer_main(argv: list[str] | None = None) -> int:
    """Entry point exposing the color pipeline as its own executable."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    return main(["color", *argv])


if __name__ == "__main__":
    sys.exit(main())
