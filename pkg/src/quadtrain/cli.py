"""quadtrain command line: train / eval / verify-grf / dump.

Exit codes: 0 success, 2 configuration or argument error, 3 training
aborted on divergence, 4 unreadable policy files, 5 GRF verification
outside tolerance.  Identical arguments, config and seed produce byte-
identical primary outputs, independent of --jobs.
"""

from __future__ import annotations

import argparse
import csv
import glob
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import replace

from .ars import (
    TRACE_COLUMNS,
    SimEvaluator,
    TerrainSpec,
    TrainingDiverged,
    run_episode,
    train,
)
from .config import ConfigError, load_config, write_effective_config
from .harness import (
    format_grf_report,
    format_survival_table,
    load_policy_set,
    ordering_holds,
    reference_comparison,
    run_disturbance,
    run_height_generalization,
    run_slope,
    run_survival,
    verify_grf,
    write_episode_csv,
    write_grf_csv,
    write_survival_csv,
    write_timeseries_csv,
)
from .policy import ObservationVariant, PolicyFileError, load_policy, zero_policy
from .sim import FlatTerrain, QuadrupedWorld, RoughTerrain, SlopeCourse

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_POLICY_IO = 4
EXIT_TOLERANCE = 5

VARIANT_TAGS = tuple(v.tag for v in ObservationVariant)


def _add_common(parser):
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config and env)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1, help="max concurrent worlds")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadtrain",
        description="Quadruped locomotion workbench: emulated contact/GRF sensing, "
        "Bezier trot gait, linear policies trained with augmented random search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy with ARS")
    p_train.add_argument("--variant", required=True, choices=VARIANT_TAGS)
    p_train.add_argument("--epochs", required=True, type=int)
    p_train.add_argument(
        "--terrain", choices=("flat", "rough"), default="rough",
        help="training terrain (rough resamples a heightfield every episode)",
    )
    p_train.add_argument("--resume", action="store_true", help="continue from last checkpoint")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="run an evaluation scenario on saved policies")
    p_eval.add_argument(
        "--scenario", required=True, choices=("survival", "heights", "disturbance", "slope")
    )
    p_eval.add_argument("--policies", required=True, help="glob of policy files")
    p_eval.add_argument("--terrain-height", type=float, help="rough terrain max height (m)")
    p_eval.add_argument("--episodes", type=int, help="episodes per policy")
    p_eval.add_argument("--max-steps", type=int, help="step cap per episode")
    p_eval.add_argument("--angle", type=float, default=8.0, help="slope angle (deg)")
    p_eval.add_argument("--direction", choices=("up", "down"), default="up")
    p_eval.add_argument("--ball-time", type=float, help="disturbance impact time (s)")
    p_eval.add_argument("--no-ball", action="store_true", help="undisturbed control run")
    p_eval.add_argument(
        "--compare-reference", action="store_true",
        help="append the informational measured-vs-reference report",
    )
    _add_common(p_eval)

    p_grf = sub.add_parser("verify-grf", help="static ground-reaction-force verification")
    p_grf.add_argument("--incline", type=float, default=0.0, help="plane incline (deg)")
    _add_common(p_grf)

    p_dump = sub.add_parser("dump", help="dump a per-step trajectory CSV")
    p_dump.add_argument("--policy", help="policy file (default: zero policy)")
    p_dump.add_argument("--variant", choices=VARIANT_TAGS, default="imu",
                        help="variant for the zero policy when --policy is absent")
    p_dump.add_argument("--steps", type=int, default=1000)
    p_dump.add_argument(
        "--terrain", choices=("flat", "rough", "slope_up", "slope_down"), default="flat"
    )
    p_dump.add_argument("--terrain-height", type=float)
    p_dump.add_argument("--angle", type=float, default=8.0, help="slope angle (deg)")
    _add_common(p_dump)
    return parser


def _resolve_config(args, parser):
    env_seed = os.environ.get("QUADTRAIN_SEED")
    default_seed = None
    if env_seed is not None:
        try:
            default_seed = int(env_seed)
        except ValueError:
            parser.error(f"QUADTRAIN_SEED must be an integer, got '{env_seed}'")
    cfg = load_config(args.config, default_seed=default_seed)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _prepare_out(args, cfg, default_name):
    out = args.out or os.path.join("out", default_name)
    os.makedirs(out, exist_ok=True)
    write_effective_config(cfg, os.path.join(out, "effective_config.ini"))
    return out


def _pool(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else nullcontext()


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args, parser) -> int:
    cfg = _resolve_config(args, parser)
    variant = ObservationVariant.from_tag(args.variant)
    out = _prepare_out(args, cfg, f"train_{variant.tag}")
    ars_cfg = replace(cfg.ars, seed=cfg.seed)
    if args.terrain == "flat":
        terrain = TerrainSpec(kind="flat")
    else:
        terrain = TerrainSpec(
            kind="rough",
            max_height=cfg.harness.train_terrain_height,
            cell=cfg.harness.terrain_cell,
        )
    evaluator = SimEvaluator(
        variant=variant,
        world_config=cfg.world,
        gait=cfg.gait,
        terrain=terrain,
        episode_steps=ars_cfg.episode_steps,
        action_limits=cfg.action_limits,
    )
    with _pool(args.jobs) as pool:
        map_fn = pool.map if args.jobs > 1 else map
        try:
            policy, records = train(
                variant, ars_cfg, args.epochs, evaluator, out,
                map_fn=map_fn, resume=args.resume,
            )
        except TrainingDiverged as exc:
            print(f"training aborted: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
    if records and not args.no_plots:
        from . import plots

        plots.save_training_curve(records, os.path.join(out, "curve.png"))
    print(f"trained {variant.tag} for {len(records)} epochs -> {out}")
    if records:
        print(
            f"final mean reward/step {records[-1].mean_reward_per_step:.4f} "
            f"(epoch 1: {records[0].mean_reward_per_step:.4f})"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _load_policies(pattern):
    paths = sorted(glob.glob(pattern))
    if not paths:
        return [], [f"{pattern}: no files match"]
    return load_policy_set(paths)


def cmd_eval(args, parser) -> int:
    cfg = _resolve_config(args, parser)
    if abs(args.angle) >= 45.0:
        parser.error(f"slope angle must satisfy |angle| < 45 deg, got {args.angle}")
    loaded, missing = _load_policies(args.policies)
    for item in missing:
        print(f"skipping unreadable policy: {item}", file=sys.stderr)
    if not loaded:
        print("no readable policies; nothing to do", file=sys.stderr)
        return EXIT_POLICY_IO
    out = _prepare_out(args, cfg, f"eval_{args.scenario}")
    h = cfg.harness
    episodes = args.episodes or h.episodes_per_policy

    with _pool(args.jobs) as pool:
        map_fn = pool.map if args.jobs > 1 else map
        if args.scenario == "survival":
            result = run_survival(
                loaded, cfg.world, cfg.gait,
                args.terrain_height if args.terrain_height is not None else h.train_terrain_height,
                episodes=episodes, terrain_cell=h.terrain_cell, goal=h.survival_goal_m,
                max_steps=args.max_steps or h.survival_max_steps,
                master_seed=cfg.seed, action_limits=cfg.action_limits, map_fn=map_fn,
            )
            _emit_survival(result, out, args, "survival")
        elif args.scenario == "heights":
            results = run_height_generalization(
                loaded, cfg.world, cfg.gait,
                trained_height=h.train_terrain_height,
                deployed_heights=(h.train_terrain_height, h.generalization_height),
                episodes=episodes, terrain_cell=h.terrain_cell, goal=h.survival_goal_m,
                max_steps=args.max_steps or h.survival_max_steps,
                master_seed=cfg.seed, action_limits=cfg.action_limits, map_fn=map_fn,
            )
            _emit_heights(results, h.train_terrain_height, out, args)
        elif args.scenario == "slope":
            result = run_slope(
                loaded, cfg.world, cfg.gait,
                angle=math.radians(args.angle), direction=args.direction,
                episodes=args.episodes or h.slope_episodes, goal=h.slope_goal_m,
                max_steps=args.max_steps or h.slope_max_steps,
                master_seed=cfg.seed, action_limits=cfg.action_limits, map_fn=map_fn,
            )
            _emit_survival(result, out, args, "slope")
        else:  # disturbance
            name, policy = loaded[0]
            if len(loaded) > 1:
                print(f"disturbance uses one policy; taking {name}", file=sys.stderr)
            ball_time = None if args.no_ball else (
                args.ball_time if args.ball_time is not None else h.ball_time_s
            )
            report = run_disturbance(
                policy, cfg.world, cfg.gait,
                ball_time=ball_time, duration=h.disturbance_duration_s,
                ball_mass=h.ball_mass_kg, ball_speed=h.ball_speed_mps,
                recovery_band=h.recovery_band_rad, recovery_hold=h.recovery_hold_s,
                master_seed=cfg.seed, action_limits=cfg.action_limits,
            )
            _emit_disturbance(report, out, args)

    return EXIT_POLICY_IO if missing else EXIT_OK


def _emit_survival(result, out, args, which) -> None:
    write_episode_csv(os.path.join(out, "episodes.csv"), result.records)
    write_survival_csv(os.path.join(out, "survival_table.csv"), result.tables)
    for tag, table in result.tables.items():
        print(format_survival_table(tag, table))
    verdict = ordering_holds(result.tables)
    if verdict is not None:
        print(f"alive-at-goal ordering contacts >= force >= imu: {'holds' if verdict else 'violated'}")
    if args.compare_reference:
        text = reference_comparison(result.tables, "survival" if which == "survival" else "slope")
        with open(os.path.join(out, "comparison.txt"), "w") as f:
            f.write(text + "\n")
        print(text)
    if not args.no_plots:
        from . import plots

        plots.save_survival_distances(result.records, os.path.join(out, "distances.png"))


def _emit_heights(results, trained_height, out, args) -> None:
    tables_by_height = {}
    for height, result in results.items():
        tag = f"{height:g}".replace(".", "p")
        write_episode_csv(
            os.path.join(out, f"episodes_h{tag}.csv"),
            result.records,
            extra_columns={"trained_height": trained_height, "deployed_height": height},
        )
        write_survival_csv(os.path.join(out, f"survival_table_h{tag}.csv"), result.tables)
        tables_by_height[height] = result.tables
        print(f"deployed height {height:g} m:")
        for vtag, table in result.tables.items():
            print(format_survival_table(vtag, table))
    heights = sorted(tables_by_height)
    if len(heights) == 2:
        lo, hi = heights
        for vtag in tables_by_height[lo]:
            if vtag in tables_by_height[hi]:
                delta = (
                    sum(tables_by_height[hi][vtag].alive)
                    - sum(tables_by_height[lo][vtag].alive)
                )
                print(f"{vtag}: alive-count delta at {hi:g} m vs {lo:g} m: {delta:+d}")
    if not args.no_plots:
        from . import plots

        for height, result in results.items():
            tag = f"{height:g}".replace(".", "p")
            plots.save_survival_distances(
                result.records, os.path.join(out, f"distances_h{tag}.png")
            )


def _emit_disturbance(report, out, args) -> None:
    write_timeseries_csv(os.path.join(out, "timeseries.csv"), report.trace)
    lines = [
        f"ball_time_s: {report.ball_time}",
        f"peak_roll_rad: {report.peak_roll!r}",
        f"peak_pitch_rad: {report.peak_pitch!r}",
        f"recovery_time_s: {report.recovery_time!r}",
        f"outcome: {report.outcome}",
    ]
    with open(os.path.join(out, "peaks.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    if not args.no_plots:
        from . import plots

        plots.save_disturbance_timeseries(
            report.trace, report.ball_time, os.path.join(out, "disturbance.png")
        )


# ---------------------------------------------------------------------------
# verify-grf
# ---------------------------------------------------------------------------

def cmd_verify_grf(args, parser) -> int:
    cfg = _resolve_config(args, parser)
    if abs(args.incline) >= 45.0:
        parser.error(f"incline must satisfy |angle| < 45 deg, got {args.incline}")
    out = _prepare_out(args, cfg, "verify_grf")
    report = verify_grf(
        cfg.world,
        math.radians(args.incline),
        settle_steps=cfg.harness.settle_steps,
        sample_window=cfg.harness.sample_window,
        master_seed=cfg.seed,
    )
    print(format_grf_report(report))
    write_grf_csv(os.path.join(out, "grf_report.csv"), report)
    if not args.no_plots:
        from . import plots

        plots.save_grf_bars(report, os.path.join(out, "grf.png"))
    return EXIT_OK if report.status == "pass" else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# dump
# ---------------------------------------------------------------------------

def cmd_dump(args, parser) -> int:
    cfg = _resolve_config(args, parser)
    if args.policy:
        try:
            policy = load_policy(args.policy)
        except (OSError, PolicyFileError) as exc:
            print(f"cannot load policy: {exc}", file=sys.stderr)
            return EXIT_POLICY_IO
    else:
        policy = zero_policy(ObservationVariant.from_tag(args.variant))
    height = (
        args.terrain_height
        if args.terrain_height is not None
        else cfg.harness.train_terrain_height
    )
    if args.terrain == "flat":
        terrain = FlatTerrain()
    elif args.terrain == "rough":
        terrain = RoughTerrain(height, cfg.harness.terrain_cell, seed=0)
    else:
        terrain = SlopeCourse(math.radians(args.angle), args.terrain.split("_")[1])
    out = _prepare_out(args, cfg, "dump")
    world = QuadrupedWorld(cfg.world, terrain=terrain)
    world.randomize_episode((cfg.seed, 0, 0))
    result = run_episode(
        world, policy, cfg.gait,
        max_steps=args.steps, action_limits=cfg.action_limits, record_trace=True,
    )
    path = os.path.join(out, "trajectory.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for row in result.trace:
            writer.writerow([repr(float(v)) for v in row])
    print(
        f"dumped {result.steps} steps ({result.outcome}, {result.distance:.3f} m) -> {path}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args, parser)
        if args.command == "eval":
            return cmd_eval(args, parser)
        if args.command == "verify-grf":
            return cmd_verify_grf(args, parser)
        if args.command == "dump":
            return cmd_dump(args, parser)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
