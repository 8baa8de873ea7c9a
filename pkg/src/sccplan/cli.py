"""Command-line interface.

Subcommands:

* ``plan``       — plan a path for a scene file, schedule velocities, and
                   write path/profile/trajectory files.
* ``benchmark``  — run a sweep campaign from a spec file to CSV.
* ``validate``   — Monte-Carlo check of a previously planned trajectory.
* ``metrics``    — calibration metrics for prediction rasters vs. a truth
                   raster (per member and for the ensemble mean).

Exit codes: 0 success, 1 bad input/other error, 2 unsafe start or goal,
3 no path found, 4 validation threshold exceeded.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import benchmark as bench
from . import metrics as met
from . import scenefile as sf
from .occupancy import PredictionStack, RasterFormatError, ensemble_fuse, load_raster
from .planner import UnsafeEndpointError, interpolate_path, plan
from .velocity import StallError, schedule, time_parameterize

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSAFE_ENDPOINT = 2
EXIT_NO_PATH = 3
EXIT_THRESHOLD = 4


def _add_plan_parser(sub):
    p = sub.add_parser("plan", help="plan a path and schedule velocities")
    p.add_argument("--scene", required=True, help="scene file or packaged scene name")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--checker",
        default="scenario",
        choices=sf.METHODS,
        help="segment validity test (default: scenario)",
    )
    p.add_argument("--k", type=int, default=50, help="poses in the resampled path")
    p.add_argument("--l", type=int, default=200, help="velocity profile intervals")
    p.add_argument("--continuous-cover", action="store_true")
    p.add_argument("--shared-scenarios", action="store_true")
    return p


def cmd_plan(args) -> int:
    scene_path = sf.resolve_scene_ref(args.scene)
    scene, cfg = sf.load_scene(scene_path)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.continuous_cover:
        cfg = replace(cfg, continuous_cover=True)
    if args.shared_scenarios:
        cfg = replace(cfg, shared_scenarios=True)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = plan(scene, cfg, checker=args.checker)
    except UnsafeEndpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSAFE_ENDPOINT
    if not result.success:
        print("error: no path found within the iteration budget", file=sys.stderr)
        return EXIT_NO_PATH

    path = interpolate_path(result, args.k)
    field_ = scene.analytic_field()
    profile = schedule(
        field_,
        path,
        scene.robot,
        cfg.gamma_tilde,
        cfg.delta,
        cfg.v_min,
        cfg.v_max,
        l=args.l,
    )
    try:
        traj = time_parameterize(path, profile)
    except StallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    shutil.copyfile(scene_path, out / "scene.yaml")
    sf.write_path(path, out / "path.txt")
    sf.write_profile(profile, out / "profile.txt")
    sf.write_trajectory(traj, out / "trajectory.txt")
    info = {
        "schema": 1,
        "checker": args.checker,
        "seed": cfg.seed,
        "tree_cost": result.cost,
        "resampled_cost": met.path_cost(path, cfg.r),
        "k": args.k,
        "l": args.l,
        "duration": float(traj.duration),
        "iterations": result.iterations,
        "nodes": result.n_nodes,
        "profile_warnings": list(profile.warnings),
    }
    (out / "plan_info.yaml").write_text(
        yaml.safe_dump(info, sort_keys=True), encoding="utf-8"
    )
    print(
        f"planned {len(path)} poses, cost {info['resampled_cost']:.6g}, "
        f"duration {traj.duration:.3f} s -> {out}"
    )
    for w in profile.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _add_benchmark_parser(sub):
    p = sub.add_parser("benchmark", help="run a sweep campaign from a spec file")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    return p


def cmd_benchmark(args) -> int:
    spec = sf.load_benchmark_spec(args.spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        if not args.quiet:
            print(
                f"{row['method']} sweep={row['sweep_value']} run={row['run']}: "
                f"{row['status']} cost={row['cost']:.6g} time={row['plan_time']:.2f}s"
            )

    rows, summary = bench.run_benchmark(
        spec, master_seed=args.seed, threads=args.threads, progress=progress
    )
    bench.write_csv(out / "results.csv", rows, bench.RAW_FIELDS)
    bench.write_csv(out / "summary.csv", summary, bench.SUMMARY_FIELDS)
    for row in summary:
        print(
            f"{row['method']:>18} @ {row['sweep_value']}: "
            f"norm cost {row['normalized_mean_cost']:.4f} "
            f"({row['n_success']}/{row['n_runs']} ok, "
            f"plan {row['mean_plan_time']:.2f}s)"
        )
    print(f"wrote {out / 'results.csv'} and {out / 'summary.csv'}")
    return EXIT_OK


def _add_validate_parser(sub):
    p = sub.add_parser("validate", help="Monte-Carlo check of a planned trajectory")
    p.add_argument("--plan-dir", required=True, type=Path)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-per-pose", type=int, default=8)
    p.add_argument(
        "--gamma-scale",
        type=float,
        default=1.0,
        help="scale the tracking-error bound at validation time",
    )
    return p


def cmd_validate(args) -> int:
    plan_dir = Path(args.plan_dir)
    scene_file = plan_dir / "scene.yaml"
    traj_file = plan_dir / "trajectory.txt"
    for f in (scene_file, traj_file):
        if not f.is_file():
            print(f"error: missing plan output {f}", file=sys.stderr)
            return EXIT_ERROR
    scene, cfg = sf.load_scene(scene_file)
    traj = sf.read_trajectory(traj_file)
    gamma = cfg.gamma_tilde
    if args.gamma_scale != 1.0:
        gamma = replace(gamma, errors=gamma.errors * args.gamma_scale)
    report = met.monte_carlo_validate(
        scene.analytic_field(),
        traj,
        scene.robot,
        gamma,
        cfg.delta,
        n_trials=args.trials,
        rng=np.random.default_rng(args.seed),
        samples_per_pose=args.samples_per_pose,
    )
    print(
        f"violations: {report.n_violations}/{report.n_samples} "
        f"({report.fraction:.4%}), threshold {args.threshold:.4%}"
    )
    return EXIT_OK if report.fraction <= args.threshold else EXIT_THRESHOLD


def _add_metrics_parser(sub):
    p = sub.add_parser("metrics", help="calibration metrics for prediction rasters")
    p.add_argument("--truth", required=True, type=Path, help="binary truth raster")
    p.add_argument("--pred", required=True, type=Path, nargs="+",
                   help="one raster per ensemble member")
    p.add_argument("--out-dir", required=True, type=Path)
    return p


def cmd_metrics(args) -> int:
    truth = load_raster(args.truth)
    members = [load_raster(p) for p in args.pred]
    stack = PredictionStack.from_fields(members)
    fused = ensemble_fuse(stack)
    if fused.dims != truth.dims:
        print(
            f"error: prediction dims {fused.dims} do not match truth {truth.dims}",
            file=sys.stderr,
        )
        return EXIT_ERROR
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    rel_rows = []
    entries = [(f"member_{i}", m.values) for i, m in enumerate(members)]
    entries.append(("ensemble", fused.values))
    for label, values in entries:
        lr = met.LabeledRaster(prediction=values, truth=truth.values)
        rows.append(
            {
                "schema": 1,
                "label": label,
                "pixel_accuracy": met.pixel_accuracy(lr),
                "mean_iou": met.mean_iou(lr),
                "brier_score": met.brier_score(lr),
                "nll": met.nll(lr),
            }
        )
        rel = met.reliability(lr)
        for b in range(len(rel.count)):
            rel_rows.append(
                {
                    "schema": 1,
                    "label": label,
                    "bin_lo": rel.edges[b],
                    "bin_hi": rel.edges[b + 1],
                    "mean_confidence": rel.mean_confidence[b],
                    "accuracy": rel.accuracy[b],
                    "count": int(rel.count[b]),
                }
            )
    bench.write_csv(
        out / "metrics.csv",
        rows,
        ("schema", "label", "pixel_accuracy", "mean_iou", "brier_score", "nll"),
    )
    bench.write_csv(
        out / "reliability.csv",
        rel_rows,
        ("schema", "label", "bin_lo", "bin_hi", "mean_confidence", "accuracy", "count"),
    )
    for row in rows:
        print(
            f"{row['label']:>12}: PA {row['pixel_accuracy']:.4f} "
            f"mIoU {row['mean_iou']:.4f} BS {row['brier_score']:.6f} "
            f"NLL {row['nll']:.6f}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sccplan",
        description="Scenario chance-constrained planning over probabilistic "
        "occupancy fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_plan_parser(sub)
    _add_benchmark_parser(sub)
    _add_validate_parser(sub)
    _add_metrics_parser(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "plan": cmd_plan,
        "benchmark": cmd_benchmark,
        "validate": cmd_validate,
        "metrics": cmd_metrics,
    }
    try:
        return handlers[args.command](args)
    except (sf.SceneFileError, RasterFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
