"""Command line entry point: ``cosmicp <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 numerical
degeneracy.  Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import EulerPose, Method, RegistrationConfig, RigidTransform, apply, euler_to_transform
from .harness import InputUnreadable, aggregate, export, load_plan, plan_from_mapping, run_plan
from .pcd import PcdError, parse_pcd, read_pcd, save_pcd
from .preprocess import OutlierSpec, TransformSampler, inject_outliers, voxel_grid_filter
from .registration import register

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt17(x) -> str:
    return format(float(x), ".17g")


def _matrix_lines(t: RigidTransform) -> str:
    return "\n".join(" ".join(_fmt17(v) for v in row) for row in t.as_matrix())


def _load(path):
    try:
        return read_pcd(path)
    except OSError as exc:
        raise InputUnreadable(f"cannot read {path}: {exc.strerror or exc}") from exc


def _pose_from_args(args) -> EulerPose:
    if args.pose is not None:
        return EulerPose(*args.pose)
    if args.seed is None:
        raise UsageError("either --pose or --seed is required")
    sampler = TransformSampler(args.mode, args.seed, args.angle_scale, args.trans_scale)
    return sampler.substream(args.index).sample()


def cmd_downsample(args):
    if not args.leaf > 0:
        raise UsageError("--leaf must be positive")
    cloud = _load(args.input)
    out = voxel_grid_filter(cloud, args.leaf)
    save_pcd(args.output, out)
    print(f"{len(cloud)} -> {len(out)}")


def cmd_gen_transform(args):
    pose = _pose_from_args(args)
    print("pose " + " ".join(_fmt17(v) for v in pose.as_tuple()))
    print(_matrix_lines(euler_to_transform(pose)))


def cmd_transform(args):
    cloud = _load(args.input)
    pose = _pose_from_args(args)
    save_pcd(args.output, apply(euler_to_transform(pose), cloud))
    print("pose " + " ".join(_fmt17(v) for v in pose.as_tuple()))


def cmd_inject(args):
    if not 0.0 <= args.fraction <= 1.0:
        raise UsageError("--fraction must lie in [0, 1]")
    if args.offset_std is not None and args.offset_std < 0:
        raise UsageError("--offset-std must be nonnegative")
    cloud = _load(args.input)
    out, idx = inject_outliers(cloud, OutlierSpec(args.fraction, args.offset_std, args.seed))
    save_pcd(args.output, out)
    print(f"{len(idx)} of {len(cloud)} points perturbed")


def cmd_register(args):
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if args.iters < 1:
        raise UsageError("--iters must be >= 1")
    if args.rmse_tol < 0 or args.rel_tol < 0:
        raise UsageError("tolerances must be nonnegative")
    source, target = _load(args.source), _load(args.target)
    cfg = RegistrationConfig(sigma=args.sigma, max_iterations=args.iters, method=args.method,
                             rmse_abs_tol=args.rmse_tol, rmse_rel_tol=args.rel_tol)
    rep = register(source, target, cfg)
    print(_matrix_lines(rep.final_transform))
    print(f"rmse {_fmt17(rep.final_rmse)}")
    if args.json:
        doc = {
            "method": cfg.method.value, "sigma": cfg.sigma, "iterations": rep.iterations,
            "converged": rep.converged, "final_rmse": rep.final_rmse,
            "matrix": rep.final_transform.as_matrix().tolist(),
            "rmse_trace": rep.rmse_trace, "rank_trace": rep.rank_trace,
            "degenerate_iterations": rep.degenerate_iterations,
        }
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=1)
    if len(rep.degenerate_iterations) == rep.iterations:
        print("error: cross-covariance degenerate at every iteration", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_bench(args):
    inline = {
        "input_path": args.input, "methods": args.methods, "runs": args.runs,
        "sampler_mode": args.mode, "angle_scale": args.angle_scale,
        "trans_scale": args.trans_scale, "outlier_fractions": args.outliers,
        "outlier_offset_std": args.offset_std, "sigmas": args.sigmas,
        "iterations": args.iters, "master_seed": args.seed, "voxel_leaf": args.leaf,
    }
    try:
        if args.plan:
            plan = load_plan(args.plan, **inline)
        else:
            plan = plan_from_mapping({k: v for k, v in inline.items() if v is not None})
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if plan.input_path is None:
        raise UsageError("bench needs --input or a plan with input_path")
    records = run_plan(plan, workers=args.workers)
    summary = aggregate(records)
    data = export(records, summary, args.format, timing=not args.no_timing)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    stream = sys.stderr if not args.out else sys.stdout
    print(f"{'method':<6} {'outliers':>8} {'sigma':>10} {'mean':>12} {'median':>12} "
          f"{'p25':>12} {'p75':>12}", file=stream)
    for (method, frac, sigma), g in sorted(summary.stats.items()):
        print(f"{method:<6} {frac:>8.3g} {sigma:>10.4g} {g.mean:>12.4e} {g.median:>12.4e} "
              f"{g.p25:>12.4e} {g.p75:>12.4e}", file=stream)
    for (method, frac, sigma), w in sorted(summary.cosm_win_rate.items()):
        print(f"cosm beats {method} at outliers={frac:g} sigma={sigma:g}: {w:.0%}", file=stream)


def cmd_info(args):
    try:
        with open(args.input, "rb") as fh:
            header, cloud = parse_pcd(fh.read())
    except OSError as exc:
        raise InputUnreadable(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    lo, hi = cloud.min(axis=0), cloud.max(axis=0)
    print(f"points {len(cloud)}")
    print(f"fields {' '.join(header.fields)}")
    print(f"width {header.width} height {header.height}")
    print("min " + " ".join(_fmt17(v) for v in lo))
    print("max " + " ".join(_fmt17(v) for v in hi))
    print("centroid " + " ".join(_fmt17(v) for v in cloud.mean(axis=0)))
    print(f"diagonal {_fmt17(np.linalg.norm(hi - lo))}")


def _add_pose_args(p):
    p.add_argument("--pose", type=float, nargs=6, metavar=("ROLL", "PITCH", "YAW", "X", "Y", "Z"))
    p.add_argument("--seed", type=int)
    p.add_argument("--index", type=int, default=0, help="run index within the seeded stream")
    p.add_argument("--mode", choices=["uniform", "gaussian"], default="gaussian")
    p.add_argument("--angle-scale", type=float)
    p.add_argument("--trans-scale", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cosmicp", description="Correntropy similarity matrix ICP toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("downsample", help="voxel-grid filter a PCD file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--leaf", type=float, required=True)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("gen-transform", help="print a pose and its 4x4 matrix")
    _add_pose_args(p)
    p.set_defaults(func=cmd_gen_transform)

    p = sub.add_parser("transform", help="apply a pose to a PCD file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    _add_pose_args(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("inject", help="add shot-noise outliers to a PCD file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--offset-std", type=float)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("register", help="align a source PCD onto a target PCD")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default="cosm")
    p.add_argument("--sigma", type=float, default=100.0)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--rmse-tol", type=float, default=0.0)
    p.add_argument("--rel-tol", type=float, default=0.0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("bench", help="run a seeded multi-run benchmark")
    p.add_argument("--plan")
    p.add_argument("--input")
    p.add_argument("--methods", type=lambda s: s.split(","))
    p.add_argument("--runs", type=int)
    p.add_argument("--mode", choices=["uniform", "gaussian"])
    p.add_argument("--angle-scale", type=float)
    p.add_argument("--trans-scale", type=float)
    p.add_argument("--outliers", type=lambda s: [float(v) for v in s.split(",")])
    p.add_argument("--offset-std", type=float)
    p.add_argument("--sigmas", type=lambda s: [float(v) for v in s.split(",")])
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--leaf", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", help="describe a PCD file")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cosmicp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputUnreadable, PcdError) as exc:
        print(f"cosmicp: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
