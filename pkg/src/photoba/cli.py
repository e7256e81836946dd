"""Command-line front door: refine, evaluate, synth, selfalign, graph-dump.

Exit codes: 0 success, 2 bad configuration or arguments, 3 dataset
errors, 4 under-constrained problems (including graphs that cannot be
built), 5 evaluation errors, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cues import PyramidConfigError
from .dataset_io import (
    DatasetError,
    load_dataset,
    load_trajectory,
    save_trajectory,
)
from .evaluation import (
    DegenerateAlignmentError,
    NoAssociationError,
    Trajectory,
    evaluate_ate,
)
from .geometry import Pose, boxplus, relative, rotation_angle
from .graph import (
    FrameNode,
    GraphConfigError,
    MatchCriteria,
    build_graph,
    dump_edges,
    Edge,
    MatchGraph,
)
from .sensors import PINHOLE
from .solver import (
    BAProblem,
    FusionConfigError,
    SolverConfig,
    UnderConstrainedError,
    solve_fusion,
    solve_hierarchical,
)
from .synthetic import (
    SceneConfigError,
    generate_synthetic,
    load_scene_spec,
    perturb_trajectory,
)

THREADS_ENV = "PHOTOBA_THREADS"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_UNDER_CONSTRAINED = 4
EXIT_EVALUATION = 5

# Self-alignment convergence gate: both errors must drop below this.
SELFALIGN_CONVERGED_T = 1e-3  # meters
SELFALIGN_CONVERGED_R = 1e-3  # radians
SELFALIGN_MODES = ("pinhole", "spherical", "coupled", "consecutive")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _solver_config(args, overrides: dict | None = None) -> SolverConfig:
    cfg = SolverConfig(threads=args.threads)
    for key, value in (overrides or {}).items():
        if key == "max_iterations_per_level":
            value = tuple(int(v) for v in value)
        if key == "omega_normal":
            value = tuple(float(v) for v in value)
        cfg = replace(cfg, **{key: value})
    if args.stride is not None:
        cfg = replace(cfg, pixel_stride=args.stride)
    return cfg


def _criteria(args) -> MatchCriteria:
    return MatchCriteria(
        max_angle=math.radians(args.max_angle_deg),
        max_translation=args.max_translation,
        min_overlap_ratio=args.min_overlap,
    )


def _schedule(n_levels: int, use_levels: int | None) -> list[int] | None:
    if use_levels is None:
        return None
    if not 1 <= use_levels <= n_levels:
        raise PyramidConfigError(f"--levels must be in [1, {n_levels}]")
    return list(range(n_levels - use_levels, n_levels))


# ---------------------------------------------------------------------------
# refine
# ---------------------------------------------------------------------------


def _poses_to_trajectory(timestamps, poses) -> Trajectory:
    return Trajectory(np.asarray(timestamps, dtype=float), list(poses))


def cmd_refine(args) -> int:
    dataset = Path(args.dataset)
    manifest, guess, frames_by_sensor = load_dataset(dataset)
    cfg = _solver_config(args, manifest.solver_overrides)
    criteria = _criteria(args)

    problems = []
    edge_count = 0
    for sensor in manifest.sensors:
        nodes = frames_by_sensor[sensor.sensor_id]
        graph = build_graph(
            nodes,
            criteria,
            sequential=not args.no_sequential,
            extrinsics=sensor.extrinsics,
            threads=args.threads,
        )
        edge_count += len(graph.edges)
        problems.append(
            BAProblem(graph, {sensor.sensor_id: sensor.extrinsics}, gauge_index=args.gauge)
        )

    n_levels = len(problems[0].graph.nodes[0].pyramid)
    schedule = _schedule(n_levels, args.levels)

    t_start = time.perf_counter()
    if len(problems) == 1:
        result = solve_hierarchical(problems[0], cfg, levels=schedule)
    elif len(problems) == 2:
        if args.fusion == "consecutive":
            # Wide-basin sensor first: prefer the spherical problem as seed.
            order = sorted(
                range(2),
                key=lambda k: manifest.sensors[k].intrinsics.model == PINHOLE,
            )
            result = solve_fusion(
                problems[order[0]], problems[order[1]], "consecutive", cfg, levels=schedule
            )
        else:
            result = solve_fusion(problems[0], problems[1], "coupled", cfg, levels=schedule)
    else:
        raise FusionConfigError(f"refine supports 1 or 2 sensors, got {len(problems)}")
    wall = time.perf_counter() - t_start

    refined = _poses_to_trajectory(guess.timestamps, result.poses)
    out_dir = Path(args.out) if args.out else dataset
    out_dir.mkdir(parents=True, exist_ok=True)
    save_trajectory(refined, out_dir / "trajectory_refined.txt")

    ref_path = args.ref
    if ref_path is None and (dataset / "trajectory_gt.txt").exists():
        ref_path = dataset / "trajectory_gt.txt"
    initial_ate = final_ate = None
    if ref_path is not None:
        reference = load_trajectory(ref_path)
        initial_ate = evaluate_ate(guess, reference).rmse
        final_ate = evaluate_ate(refined, reference).rmse

    per_level = {}
    for rec in result.records:
        stats = per_level.setdefault(
            rec.level, {"iterations": 0, "first_error": rec.error, "last_error": rec.error}
        )
        stats["iterations"] += 1
        stats["last_error"] = rec.error
    for level, seconds in result.level_times:
        entry = per_level.setdefault(
            level, {"iterations": 0, "first_error": None, "last_error": None}
        )
        entry["wall_clock_s"] = entry.get("wall_clock_s", 0.0) + seconds

    report = {
        "edge_count": edge_count,
        "levels": result.level_indices,
        "initial_ate": initial_ate,
        "final_ate": final_ate,
        "wall_clock_s": wall,
        "per_level": {str(k): v for k, v in per_level.items()},
        "config": {
            "pixel_stride": cfg.pixel_stride,
            "threads": cfg.threads,
            "max_iterations_per_level": list(cfg.max_iterations_per_level),
            "termination_rel_decrease": cfg.termination_rel_decrease,
            "omega": list(cfg.omega_diagonal()),
            "huber": [
                cfg.huber_delta_intensity,
                cfg.huber_delta_depth,
                cfg.huber_delta_normal,
            ],
            "max_angle_deg": args.max_angle_deg,
            "max_translation": args.max_translation,
            "min_overlap": args.min_overlap,
        },
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    lines = [rec.format_line() + "\n" for rec in result.records]
    (out_dir / "report.txt").write_text("".join(lines))

    print(f"edges: {edge_count}")
    if initial_ate is not None:
        print(f"ATE: {initial_ate:.6f} -> {final_ate:.6f} m")
    print(f"wrote {out_dir / 'trajectory_refined.txt'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    est = load_trajectory(args.estimate)
    ref = load_trajectory(args.reference)
    report = evaluate_ate(est, ref, max_dt=args.max_dt)
    print(f"matches: {report.matches}")
    print(f"ate_rmse_m: {report.rmse:.9f}")
    print(f"rotation_rmse_rad: {report.rotation_rmse:.9f}")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "matches": report.matches,
                    "ate_rmse_m": report.rmse,
                    "rotation_rmse_rad": report.rotation_rmse,
                },
                indent=2,
            )
            + "\n"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = load_scene_spec(args.scene)
    trajectory = spec["trajectory"]
    guess = None
    perturbation = spec.get("perturbation")
    if perturbation:
        guess = perturb_trajectory(
            trajectory,
            sigma_t=float(perturbation.get("sigma_t", 0.0)),
            sigma_r=math.radians(float(perturbation.get("sigma_r_deg", 0.0))),
            seed=int(perturbation.get("seed", args.seed)),
        )
    out = generate_synthetic(
        spec["scene"],
        trajectory,
        spec["sensors"],
        Path(args.out),
        pyramid_scales=spec["pyramid_scales"],
        guess_trajectory=guess,
    )
    print(f"wrote dataset {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selfalign
# ---------------------------------------------------------------------------


def run_selfalign_sweep(
    frames_by_sensor: dict[str, list],
    extrinsics_by_sensor: dict,
    modes: tuple[str, ...],
    t_axis: np.ndarray,
    r_axis: np.ndarray,
    seed: int,
    cfg: SolverConfig,
    frame_index: int = 0,
):
    """Per-mode grids of (translation, rotation) errors after alignment.

    One seeded perturbation direction per cell, shared across modes so
    the comparison is paired. Returns {mode: (R, T, 2) array}.
    """
    pinhole_frames = spherical_frames = None
    pinhole_ext = spherical_ext = None
    for sensor_id, nodes in frames_by_sensor.items():
        model = nodes[frame_index].pyramid.levels[0].intrinsics.model
        if model == PINHOLE:
            pinhole_frames, pinhole_ext = nodes, extrinsics_by_sensor[sensor_id]
        else:
            spherical_frames, spherical_ext = nodes, extrinsics_by_sensor[sensor_id]

    needs_pinhole = any(m in ("pinhole", "coupled", "consecutive") for m in modes)
    needs_spherical = any(m in ("spherical", "coupled", "consecutive") for m in modes)
    if needs_pinhole and pinhole_frames is None:
        raise GraphConfigError("selfalign modes need a pinhole sensor in the dataset")
    if needs_spherical and spherical_frames is None:
        raise GraphConfigError("selfalign modes need a spherical sensor in the dataset")

    rng = np.random.default_rng(seed)
    grids = {mode: np.zeros((len(r_axis), len(t_axis), 2)) for mode in modes}

    def problem_for(nodes, ext, gt_pose, bad_pose):
        frame = nodes[frame_index]
        pair = [
            FrameNode(0, gt_pose, frame.pyramid, 0.0, frame.sensor_id),
            FrameNode(1, bad_pose, frame.pyramid, 1.0, frame.sensor_id),
        ]
        graph = MatchGraph(pair, [Edge(0, 1, "covisibility")])
        return BAProblem(graph, {frame.sensor_id: ext})

    for a, r_mag in enumerate(r_axis):
        for b, t_mag in enumerate(t_axis):
            t_dir = rng.normal(size=3)
            t_dir /= np.linalg.norm(t_dir)
            r_dir = rng.normal(size=3)
            r_dir /= np.linalg.norm(r_dir)
            from .geometry import PerturbationVector

            delta = PerturbationVector(t_mag * t_dir, math.sin(r_mag / 2.0) * r_dir)
            base = (pinhole_frames or spherical_frames)[frame_index].pose_guess
            bad = boxplus(base, delta)
            prob_p = (
                problem_for(pinhole_frames, pinhole_ext, base, bad) if pinhole_frames else None
            )
            prob_s = (
                problem_for(spherical_frames, spherical_ext, base, bad)
                if spherical_frames
                else None
            )
            for mode in modes:
                if mode == "pinhole":
                    result = solve_hierarchical(prob_p, cfg)
                elif mode == "spherical":
                    result = solve_hierarchical(prob_s, cfg)
                elif mode == "coupled":
                    result = solve_fusion(prob_p, prob_s, "coupled", cfg)
                elif mode == "consecutive":
                    result = solve_fusion(prob_s, prob_p, "consecutive", cfg)
                else:
                    raise GraphConfigError(f"unknown selfalign mode {mode!r}")
                err = relative(result.poses[1], base)
                grids[mode][a, b, 0] = np.linalg.norm(err.translation)
                grids[mode][a, b, 1] = rotation_angle(err.rotation)
    return grids


def selfalign_cell_value(err_t: float, err_r: float) -> float:
    """Mean of the two log10 errors: the heatmap cell value."""
    eps = 1e-12
    return 0.5 * (math.log10(err_t + eps) + math.log10(err_r + eps))


def format_basin_grid(t_axis, r_axis, grids: dict) -> str:
    lines = ["# selfalign basin grid: log10-mean errors per mode\n"]
    lines.append("translations " + " ".join(f"{v:.6g}" for v in t_axis) + "\n")
    lines.append("rotations " + " ".join(f"{v:.6g}" for v in r_axis) + "\n")
    for mode, grid in grids.items():
        lines.append(f"mode {mode}\n")
        for a in range(grid.shape[0]):
            row = [selfalign_cell_value(grid[a, b, 0], grid[a, b, 1]) for b in range(grid.shape[1])]
            lines.append(" ".join(f"{v:.6f}" for v in row) + "\n")
    return "".join(lines)


def cmd_selfalign(args) -> int:
    dataset = Path(args.dataset)
    manifest, _, frames_by_sensor = load_dataset(dataset)
    ext = {s.sensor_id: s.extrinsics for s in manifest.sensors}
    cfg = _solver_config(args, manifest.solver_overrides)
    modes = tuple(args.modes.split(","))
    t_axis = np.linspace(0.0, args.t_max, args.t_steps)
    r_axis = np.linspace(0.0, args.r_max, args.r_steps)
    grids = run_selfalign_sweep(
        frames_by_sensor, ext, modes, t_axis, r_axis, args.seed, cfg, args.frame
    )
    out = Path(args.out) if args.out else dataset / "basin.txt"
    out.write_text(format_basin_grid(t_axis, r_axis, grids))
    converged = {
        mode: int(
            (
                (grid[..., 0] <= SELFALIGN_CONVERGED_T)
                & (grid[..., 1] <= SELFALIGN_CONVERGED_R)
            ).sum()
        )
        for mode, grid in grids.items()
    }
    for mode, n in converged.items():
        print(f"{mode}: {n}/{t_axis.size * r_axis.size} cells converged")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# graph-dump
# ---------------------------------------------------------------------------


def cmd_graph_dump(args) -> int:
    dataset = Path(args.dataset)
    manifest, _, frames_by_sensor = load_dataset(dataset)
    criteria = _criteria(args)
    chunks = []
    for sensor in manifest.sensors:
        graph = build_graph(
            frames_by_sensor[sensor.sensor_id],
            criteria,
            sequential=not args.no_sequential,
            extrinsics=sensor.extrinsics,
            threads=args.threads,
        )
        chunks.append(f"# sensor {sensor.sensor_id}\n" + dump_edges(graph))
    text = "".join(chunks)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def _add_common_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=_default_threads(), help="worker pool size")
    p.add_argument("--stride", type=int, default=None, help="pixel stride for residuals")


def _add_graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-angle-deg", type=float, default=30.0)
    p.add_argument("--max-translation", type=float, default=1.0)
    p.add_argument("--min-overlap", type=float, default=1.0 / 3.0)
    p.add_argument("--no-sequential", action="store_true", help="skip consecutive-frame edges")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photoba",
        description="Photometric trajectory refinement for RGB-D and LiDAR range images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine a dataset's trajectory")
    p.add_argument("dataset")
    p.add_argument("--out", default=None, help="output directory (default: dataset dir)")
    p.add_argument("--ref", default=None, help="reference trajectory for ATE reporting")
    p.add_argument("--levels", type=int, default=None, help="use only the k finest levels")
    p.add_argument("--gauge", type=int, default=0, help="index of the fixed pose")
    p.add_argument(
        "--fusion", choices=["coupled", "consecutive"], default="coupled",
        help="two-sensor mode",
    )
    _add_graph_flags(p)
    _add_common_solver_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="ATE RMSE between two trajectory files")
    p.add_argument("estimate")
    p.add_argument("reference")
    p.add_argument("--max-dt", type=float, default=0.02)
    p.add_argument("--out", default=None, help="write a JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="render a synthetic dataset from a scene spec")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("selfalign", help="convergence-basin sweep on one frame")
    p.add_argument("dataset")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--modes", default=",".join(SELFALIGN_MODES))
    p.add_argument("--t-max", type=float, default=0.3)
    p.add_argument("--r-max", type=float, default=0.3)
    p.add_argument("--t-steps", type=int, default=5)
    p.add_argument("--r-steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_common_solver_flags(p)
    p.set_defaults(func=cmd_selfalign)

    p = sub.add_parser("graph-dump", help="export match-graph edges as text")
    p.add_argument("dataset")
    p.add_argument("--out", default=None)
    _add_graph_flags(p)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_graph_dump)

    return parser


_ERROR_EXIT_CODES = (
    (UnderConstrainedError, EXIT_UNDER_CONSTRAINED),
    (GraphConfigError, EXIT_UNDER_CONSTRAINED),
    (FusionConfigError, EXIT_CONFIG),
    (SceneConfigError, EXIT_CONFIG),
    (PyramidConfigError, EXIT_CONFIG),
    (DatasetError, EXIT_DATASET),
    (NoAssociationError, EXIT_EVALUATION),
    (DegenerateAlignmentError, EXIT_EVALUATION),
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tuple(err for err, _ in _ERROR_EXIT_CODES) as exc:
        for err_type, code in _ERROR_EXIT_CODES:
            if isinstance(exc, err_type):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise
    except Exception as exc:  # pragma: no cover - unexpected failures
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
