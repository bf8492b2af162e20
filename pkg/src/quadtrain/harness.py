"""Scenario battery: survival on rough terrain, height generalization,
ball-disturbance recovery, slope traversal, and static GRF verification.

Every scenario emits per-episode CSV rows and aggregates survival tables
whose buckets partition distance; an episode is alive unless the robot
fell.  All outputs are a pure function of (policies, config, master seed):
episode seeds derive from (master seed, policy index, episode index) and
results are reduced in submission order, so parallel execution cannot
change any output byte.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .ars import run_episode
from .gait import GaitParams
from .kinematics import rot_y
from .policy import ActionLimits, ObservationVariant, PolicyMatrix, load_policy
from .sim import (
    FlatTerrain,
    InclinedPlane,
    QuadrupedWorld,
    RoughTerrain,
    SlopeCourse,
    WorldConfig,
)

OUTCOMES = ("fell", "reached_goal", "timed_out")

SURVIVAL_BUCKETS = ((0.0, 5.0), (5.0, 90.0), (90.0, math.inf))
SLOPE_BUCKETS = ((0.0, 1.0), (1.0, 2.0), (2.0, math.inf))

# Published survival counts for the same protocol (dead, alive) per bucket,
# rough terrain at 0.104 m and the 8 degree slope course.  Informational
# baselines only: this workbench runs a different physics substrate.
REFERENCE_SURVIVAL = {
    "imu": ((352, 15), (276, 9), (0, 348)),
    "imu_force": ((194, 66), (207, 123), (0, 410)),
    "imu_contacts": ((281, 18), (199, 12), (0, 490)),
}
REFERENCE_SLOPE = {
    "imu": ((9, 4), (13, 0), (0, 24)),
    "imu_force": ((11, 0), (9, 0), (0, 30)),
    "imu_contacts": ((0, 0), (0, 0), (0, 50)),
}


def classify_alive(outcome: str) -> bool:
    """An episode ends alive unless the robot fell over."""
    if outcome not in OUTCOMES:
        raise ValueError(f"unknown outcome '{outcome}'")
    return outcome != "fell"


@dataclass(frozen=True)
class EpisodeRecord:
    policy: str
    scenario: str
    seed: int
    distance: float
    steps: int
    outcome: str
    alive: bool


@dataclass
class SurvivalTable:
    label: str
    buckets: tuple
    dead: list
    alive: list

    @property
    def total(self) -> int:
        return sum(self.dead) + sum(self.alive)

    @property
    def alive_at_goal(self) -> int:
        return self.alive[-1]


def tabulate(records, buckets) -> SurvivalTable:
    dead = [0] * len(buckets)
    alive = [0] * len(buckets)
    for rec in records:
        for k, (lo, hi) in enumerate(buckets):
            if lo <= rec.distance < hi:
                (alive if rec.alive else dead)[k] += 1
                break
    label = records[0].scenario if records else ""
    return SurvivalTable(label=label, buckets=tuple(buckets), dead=dead, alive=alive)


def load_policy_set(paths):
    """Load policy files; returns (list of (name, PolicyMatrix), missing paths)."""
    loaded, missing = [], []
    for path in paths:
        try:
            loaded.append((str(path), load_policy(path)))
        except (OSError, ValueError) as exc:
            missing.append(f"{path}: {exc}")
    return loaded, missing


def _episode_seed_id(master_seed: int, policy_idx: int, episode_idx: int) -> int:
    return int(
        np.random.SeedSequence((master_seed, policy_idx, episode_idx)).generate_state(1)[0]
    )


# ---------------------------------------------------------------------------
# Episode tasks (picklable for process pools)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeTask:
    policy_name: str
    weights: np.ndarray
    variant_tag: str
    scenario: str
    world_config: WorldConfig
    gait: GaitParams
    action_limits: ActionLimits
    terrain_kind: str  # flat | rough | slope_up | slope_down
    terrain_height: float
    terrain_cell: float
    slope_angle: float
    goal: float
    max_steps: int
    seed_tuple: tuple
    seed_id: int


def _build_terrain(task: EpisodeTask):
    if task.terrain_kind == "flat":
        return FlatTerrain()
    if task.terrain_kind == "rough":
        return RoughTerrain(task.terrain_height, task.terrain_cell, seed=0)
    if task.terrain_kind in ("slope_up", "slope_down"):
        return SlopeCourse(task.slope_angle, task.terrain_kind.split("_")[1])
    raise ValueError(f"unknown terrain kind '{task.terrain_kind}'")


def _run_episode_task(task: EpisodeTask) -> EpisodeRecord:
    world = QuadrupedWorld(task.world_config, terrain=_build_terrain(task))
    world.randomize_episode(task.seed_tuple)
    policy = PolicyMatrix(task.weights, ObservationVariant.from_tag(task.variant_tag))
    result = run_episode(
        world,
        policy,
        task.gait,
        max_steps=task.max_steps,
        goal_distance=task.goal,
        action_limits=task.action_limits,
    )
    return EpisodeRecord(
        policy=task.policy_name,
        scenario=task.scenario,
        seed=task.seed_id,
        distance=max(0.0, result.distance),  # progress toward the goal
        steps=result.steps,
        outcome=result.outcome,
        alive=classify_alive(result.outcome),
    )


@dataclass
class ScenarioResult:
    records: list
    tables: dict  # variant tag -> SurvivalTable


def _run_scenario(policies, scenario, world_config, gait, terrain_kind, *,
                  terrain_height=0.104, terrain_cell=0.15, slope_angle=0.0,
                  goal=100.0, max_steps=50000, episodes=50, master_seed=0,
                  action_limits=ActionLimits(), buckets=SURVIVAL_BUCKETS,
                  map_fn=map) -> ScenarioResult:
    tasks = []
    for p_idx, (name, policy) in enumerate(policies):
        for e_idx in range(episodes):
            tasks.append(
                EpisodeTask(
                    policy_name=name,
                    weights=policy.weights,
                    variant_tag=policy.variant.tag,
                    scenario=scenario,
                    world_config=world_config,
                    gait=gait,
                    action_limits=action_limits,
                    terrain_kind=terrain_kind,
                    terrain_height=terrain_height,
                    terrain_cell=terrain_cell,
                    slope_angle=slope_angle,
                    goal=goal,
                    max_steps=max_steps,
                    seed_tuple=(master_seed, p_idx, e_idx),
                    seed_id=_episode_seed_id(master_seed, p_idx, e_idx),
                )
            )
    records = list(map_fn(_run_episode_task, tasks))
    by_variant = {}
    for task, rec in zip(tasks, records):
        by_variant.setdefault(task.variant_tag, []).append(rec)
    tables = {tag: tabulate(recs, buckets) for tag, recs in sorted(by_variant.items())}
    return ScenarioResult(records=records, tables=tables)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def run_survival(policies, world_config, gait, terrain_height, *, episodes=50,
                 terrain_cell=0.15, goal=100.0, max_steps=50000, master_seed=0,
                 action_limits=ActionLimits(), map_fn=map) -> ScenarioResult:
    """Rough-terrain survival: fresh heightfield per episode, 100 m goal."""
    return _run_scenario(
        policies, "survival", world_config, gait, "rough",
        terrain_height=terrain_height, terrain_cell=terrain_cell, goal=goal,
        max_steps=max_steps, episodes=episodes, master_seed=master_seed,
        action_limits=action_limits, buckets=SURVIVAL_BUCKETS, map_fn=map_fn,
    )


def run_height_generalization(policies, world_config, gait, *, trained_height=0.104,
                              deployed_heights=(0.104, 0.128), episodes=50,
                              terrain_cell=0.15, goal=100.0, max_steps=50000,
                              master_seed=0, action_limits=ActionLimits(),
                              map_fn=map) -> dict:
    """Deploy the same policies over several terrain heights; one result per height."""
    out = {}
    for height in deployed_heights:
        out[height] = run_survival(
            policies, world_config, gait, height, episodes=episodes,
            terrain_cell=terrain_cell, goal=goal, max_steps=max_steps,
            master_seed=master_seed, action_limits=action_limits, map_fn=map_fn,
        )
    return out


def run_slope(policies, world_config, gait, *, angle=math.radians(8.0), direction="up",
              episodes=50, goal=3.0, max_steps=50000, master_seed=0,
              action_limits=ActionLimits(), map_fn=map) -> ScenarioResult:
    """Slope traversal with a 3 m goal, bucketed 0-1 / 1-2 / >2 m."""
    return _run_scenario(
        policies, f"slope_{direction}", world_config, gait, f"slope_{direction}",
        slope_angle=angle, goal=goal, max_steps=max_steps, episodes=episodes,
        master_seed=master_seed, action_limits=action_limits,
        buckets=SLOPE_BUCKETS, map_fn=map_fn,
    )


@dataclass
class DisturbanceReport:
    trace: list  # rows [t, roll, pitch, x, y]
    ball_time: float | None
    peak_roll: float
    peak_pitch: float
    recovery_time: float | None
    outcome: str


def run_disturbance(policy, world_config, gait, *, ball_time=5.0, duration=20.0,
                    ball_mass=0.5, ball_speed=3.5, recovery_band=0.05,
                    recovery_hold=1.0, master_seed=0,
                    action_limits=ActionLimits()) -> DisturbanceReport:
    """Walk on flat ground, optionally take a lateral ball hit, log roll/pitch.

    Peaks are measured after the hit; recovery is the first time roll and
    pitch stay inside the pre-hit band (+/- recovery_band) for recovery_hold
    seconds.  ball_time=None runs the undisturbed control condition.
    """
    world = QuadrupedWorld(world_config, terrain=FlatTerrain())
    world.randomize_episode((master_seed, 0, 0))
    dt = world_config.dt
    max_steps = int(round(duration / dt))
    ball_step = None if ball_time is None else int(round(ball_time / dt))
    result = run_episode(
        world, policy, gait,
        max_steps=max_steps,
        action_limits=action_limits,
        record_trace=True,
        ball_at_step=ball_step,
        ball_mass=ball_mass,
        ball_speed=ball_speed,
    )
    rows = [[r[0], r[4], r[5], r[1], r[2]] for r in result.trace]  # t, roll, pitch, x, y

    if ball_step is None or ball_step >= len(rows):
        peak_roll = max((abs(r[1]) for r in rows), default=0.0)
        peak_pitch = max((abs(r[2]) for r in rows), default=0.0)
        return DisturbanceReport(rows, None, peak_roll, peak_pitch, None, result.outcome)

    pre = rows[max(0, ball_step - int(1.0 / dt)):ball_step]
    roll_ref = float(np.mean([r[1] for r in pre])) if pre else 0.0
    pitch_ref = float(np.mean([r[2] for r in pre])) if pre else 0.0
    post = rows[ball_step:]
    peak_roll = max(abs(r[1]) for r in post)
    peak_pitch = max(abs(r[2]) for r in post)
    hold = int(round(recovery_hold / dt))
    recovery_time = None
    run_start = None
    for k, row in enumerate(post):
        inside = (
            abs(row[1] - roll_ref) <= recovery_band
            and abs(row[2] - pitch_ref) <= recovery_band
        )
        if inside:
            if run_start is None:
                run_start = k
            if k - run_start + 1 >= hold:
                recovery_time = post[run_start][0] - rows[ball_step][0]
                break
        else:
            run_start = None
    return DisturbanceReport(rows, ball_time, peak_roll, peak_pitch, recovery_time, result.outcome)


# ---------------------------------------------------------------------------
# Static GRF verification
# ---------------------------------------------------------------------------

@dataclass
class GrfReport:
    incline_deg: float
    per_foot: np.ndarray  # (4,3) base-frame forces at the sampled step
    totals: np.ndarray  # (3,)
    resultant: float
    tilt_deg: float
    weight_ref: float
    base_speed: float
    sampled_step: int
    status: str  # pass | fail | inconclusive
    magnitude_tol_frac: float = 0.05
    tilt_tol_deg: float = 0.5


def verify_grf(world_config, incline: float = 0.0, *, settle_steps=500,
               sample_window=100, master_seed=0) -> GrfReport:
    """Stand the robot on a flat or inclined plane, settle, sample GRFs.

    Passes when the resultant magnitude is within 5% of the robot weight
    and the resultant tilt atan(Fx/Fz) matches the incline within 0.5 deg.
    A residual base speed above 1e-3 m/s marks the report inconclusive.
    """
    if abs(incline) >= math.pi / 4:
        raise ValueError("incline must satisfy |angle| < pi/4")
    cfg = replace(world_config, domain_randomization=False)
    terrain = InclinedPlane(incline) if incline else FlatTerrain()
    world = QuadrupedWorld(cfg, terrain=terrain)
    weight = cfg.robot.weight
    # start parallel to the surface, feet resting on it; let gravity settle it
    normal = np.array([-math.sin(incline), 0.0, math.cos(incline)])
    world.reset(
        base_position=normal * cfg.stand_height,
        base_rotation=rot_y(-incline),
    )
    commands = world.neutral_joint_angles()
    for _ in range(settle_steps):
        readings = world.step(commands)
    speed = float(np.linalg.norm(world.base.linear_velocity))
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, 0xF0C)))
    extra = int(rng.integers(0, sample_window))
    for _ in range(extra):
        readings = world.step(commands)

    totals = readings.base_frame_forces.sum(axis=0)
    resultant = float(np.linalg.norm(totals))
    tilt = math.degrees(math.atan2(totals[0], totals[2]))
    report = GrfReport(
        incline_deg=math.degrees(incline),
        per_foot=readings.base_frame_forces.copy(),
        totals=totals,
        resultant=resultant,
        tilt_deg=tilt,
        weight_ref=weight,
        base_speed=speed,
        sampled_step=settle_steps + extra,
        status="pending",
    )
    if speed > 1e-3:
        report.status = "inconclusive"
    elif (
        abs(resultant - weight) <= report.magnitude_tol_frac * weight
        and abs(tilt - report.incline_deg) <= report.tilt_tol_deg
    ):
        report.status = "pass"
    else:
        report.status = "fail"
    return report


# ---------------------------------------------------------------------------
# Reference comparison (informational)
# ---------------------------------------------------------------------------

def ordering_holds(tables: dict) -> bool | None:
    """Whether alive-at-goal counts satisfy contacts >= force >= imu."""
    try:
        c = tables["imu_contacts"].alive_at_goal
        f = tables["imu_force"].alive_at_goal
        i = tables["imu"].alive_at_goal
    except KeyError:
        return None
    return c >= f >= i


def reference_comparison(tables: dict, which: str = "survival") -> str:
    """Side-by-side text report of measured vs published survival counts."""
    reference = REFERENCE_SURVIVAL if which == "survival" else REFERENCE_SLOPE
    buckets = SURVIVAL_BUCKETS if which == "survival" else SLOPE_BUCKETS
    lines = [
        f"measured vs reference ({which}); reference counts are informational only",
        f"{'variant':<14}{'bucket (m)':<12}{'measured d/a':>14}{'reference d/a':>16}",
    ]
    for tag in ("imu", "imu_force", "imu_contacts"):
        table = tables.get(tag)
        for k, (lo, hi) in enumerate(buckets):
            hi_txt = "inf" if math.isinf(hi) else f"{hi:g}"
            bucket = f"{lo:g}-{hi_txt}"
            measured = f"{table.dead[k]}/{table.alive[k]}" if table else "-"
            ref = reference[tag][k]
            lines.append(
                f"{tag:<14}{bucket:<12}{measured:>14}{f'{ref[0]}/{ref[1]}':>16}"
            )
        if table:
            lines.append(
                f"{tag:<14} total episodes measured {table.total}, reference "
                f"{sum(d + a for d, a in reference[tag])}"
            )
    verdict = ordering_holds(tables)
    ref_order = "holds"
    if verdict is None:
        lines.append("ordering contacts >= force >= imu: not evaluable (missing variants)")
    else:
        lines.append(
            f"ordering contacts >= force >= imu: measured {'holds' if verdict else 'VIOLATED'}, "
            f"reference {ref_order}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

EPISODE_HEADER = ["policy", "scenario", "seed", "distance_m", "steps", "outcome", "alive"]
TIMESERIES_HEADER = ["t", "roll", "pitch", "x", "y"]


def write_episode_csv(path, records, extra_columns=None) -> None:
    extra = extra_columns or {}
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(EPISODE_HEADER + list(extra))
        for rec in records:
            writer.writerow(
                [rec.policy, rec.scenario, rec.seed, repr(rec.distance), rec.steps,
                 rec.outcome, int(rec.alive)] + [extra[k] for k in extra]
            )


def write_timeseries_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TIMESERIES_HEADER)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def write_survival_csv(path, tables) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variant", "bucket_lo_m", "bucket_hi_m", "dead", "alive"])
        for tag, table in tables.items():
            for k, (lo, hi) in enumerate(table.buckets):
                writer.writerow([tag, repr(lo), "inf" if math.isinf(hi) else repr(hi),
                                 table.dead[k], table.alive[k]])


def write_grf_csv(path, report: GrfReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["foot", "fx", "fy", "fz"])
        for name, row in zip(("FL", "FR", "BL", "BR"), report.per_foot):
            writer.writerow([name] + [repr(float(v)) for v in row])
        writer.writerow(["total"] + [repr(float(v)) for v in report.totals])
        writer.writerow(["resultant_n", repr(report.resultant), "", ""])
        writer.writerow(["tilt_deg", repr(report.tilt_deg), "", ""])
        writer.writerow(["weight_ref_n", repr(report.weight_ref), "", ""])
        writer.writerow(["status", report.status, "", ""])


def format_grf_report(report: GrfReport) -> str:
    lines = [
        f"static GRF verification, incline {report.incline_deg:.1f} deg",
        f"{'foot':<6}{'fx':>10}{'fy':>10}{'fz':>10}",
    ]
    for name, row in zip(("FL", "FR", "BL", "BR"), report.per_foot):
        lines.append(f"{name:<6}{row[0]:>10.3f}{row[1]:>10.3f}{row[2]:>10.3f}")
    t = report.totals
    lines.append(f"{'total':<6}{t[0]:>10.3f}{t[1]:>10.3f}{t[2]:>10.3f}")
    lines.append(
        f"resultant {report.resultant:.3f} N (weight {report.weight_ref:.3f} N), "
        f"tilt {report.tilt_deg:.3f} deg"
    )
    lines.append(f"base speed {report.base_speed:.2e} m/s at step {report.sampled_step}")
    lines.append(f"status: {report.status}")
    return "\n".join(lines)


def format_survival_table(tag: str, table: SurvivalTable) -> str:
    lines = [f"{tag}: {table.total} episodes"]
    for k, (lo, hi) in enumerate(table.buckets):
        hi_txt = "inf" if math.isinf(hi) else f"{hi:g}"
        lines.append(f"  {lo:g}-{hi_txt} m: dead {table.dead[k]}, alive {table.alive[k]}")
    return "\n".join(lines)
