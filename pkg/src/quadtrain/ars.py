"""Augmented Random Search over the linear gait policy.

Each epoch draws mirrored Gaussian perturbations of the policy matrix,
scores them with full simulation rollouts, and applies the reward-
difference update normalized by the standard deviation of the rewards
used.  Rollout seeds derive deterministically from (master seed, epoch,
rollout index), so results are identical whether rollouts run serially
or on a process pool.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .gait import GaitParams, GaitPhase, advance_phase, foot_trajectory
from .kinematics import LEG_ORDER, neutral_foot_position, solve_leg_ik

_SIDES = (1.0, -1.0, 1.0, -1.0)  # FL FR BL BR
from .policy import (
    ActionLimits,
    ObservationVariant,
    PolicyMatrix,
    act,
    build_observation,
    save_policy,
    zero_policy,
)
from .sim import (
    FlatTerrain,
    QuadrupedWorld,
    SimulationDiverged,
    TerminationLimits,
    WorldConfig,
    check_termination,
    generate_rough_terrain,
)


class TrainingDiverged(RuntimeError):
    """The policy update produced non-finite weights."""


@dataclass(frozen=True)
class ArsConfig:
    n_rollouts: int = 16
    learning_rate: float = 0.03
    exploration_noise: float = 0.05
    episode_steps: int = 5000
    top_b: int = 8
    seed: int = 0
    mirrored: bool = True
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.mirrored and self.n_rollouts % 2:
            raise ValueError("mirrored sampling needs an even rollout count")
        pairs = self.n_rollouts // 2 if self.mirrored else self.n_rollouts
        if self.top_b > pairs:
            raise ValueError(f"top_b {self.top_b} exceeds direction count {pairs}")


def step_reward(dx: float, roll: float, pitch: float, omega) -> float:
    """Per-step reward: forward progress minus orientation and spin penalties."""
    return dx - 10.0 * (abs(roll) + abs(pitch)) - 0.03 * float(np.sum(np.abs(omega)))


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------

@dataclass
class EpisodeResult:
    reward_per_step: float
    steps: int
    distance: float
    outcome: str
    trace: list | None = None


TRACE_COLUMNS = (
    ["t", "x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "wx", "wy", "wz"]
    + [f"{leg.value.lower()}_f{ax}" for leg in LEG_ORDER for ax in "xyz"]
    + [f"contact_{leg.value.lower()}" for leg in LEG_ORDER]
    + [f"{leg.value.lower()}_{joint}" for leg in LEG_ORDER for joint in ("hip", "shoulder", "knee")]
)


def run_episode(
    world: QuadrupedWorld,
    policy: PolicyMatrix,
    gait: GaitParams,
    *,
    max_steps: int,
    goal_distance: float = math.inf,
    action_limits: ActionLimits = ActionLimits(),
    record_trace: bool = False,
    ball_at_step: int | None = None,
    ball_mass: float = 0.5,
    ball_speed: float = 3.5,
) -> EpisodeResult:
    """Run one closed-loop episode and return its normalized reward.

    The controller commands, per step: Bezier gait targets with the
    policy's clearance/penetration, plus per-foot deltas, solved through
    leg IK.  The episode ends on a fall, on reaching goal_distance, or
    after max_steps; the reward sum is divided by the steps actually run.
    """
    cfg = world.config
    geom = cfg.geometry
    variant = policy.variant
    weight = cfg.robot.weight
    limits = TerminationLimits(goal_distance=goal_distance, max_steps=max_steps)
    neutral = np.array(
        [neutral_foot_position(leg, geom, cfg.stand_height) for leg in LEG_ORDER]
    )
    phase = GaitPhase(base=0.0, cycle_period=gait.cycle_period)
    sensors = world.initial_sensors()
    total_reward = 0.0
    steps = 0
    outcome = "timed_out"
    trace = [] if record_trace else None
    x_prev = float(world.base.position[0])

    for t in range(max_steps):
        if ball_at_step is not None and t == ball_at_step:
            world.apply_ball_disturbance(ball_mass, ball_speed)
        obs = build_observation(variant, sensors, phase, weight)
        action = act(policy, obs, action_limits)
        params = replace(
            gait,
            clearance_height=action.clearance,
            penetration_depth=action.penetration,
        )
        legs = phase.legs
        deltas = action.deltas
        commands = np.empty((4, 3))
        for i in range(4):
            traj = foot_trajectory(legs[i], params)
            hip, shoulder, knee, _ = solve_leg_ik(
                _SIDES[i],
                neutral[i, 0] + traj[0] + deltas[i, 0],
                neutral[i, 1] + traj[1] + deltas[i, 1],
                neutral[i, 2] + traj[2] + deltas[i, 2],
                geom,
            )
            commands[i, 0] = hip
            commands[i, 1] = shoulder
            commands[i, 2] = knee

        sensors = world.step(commands)
        phase = advance_phase(phase, cfg.dt)
        x_now = float(world.base.position[0])
        total_reward += step_reward(
            x_now - x_prev, sensors.roll, sensors.pitch, sensors.angular_velocity
        )
        x_prev = x_now
        steps = t + 1

        if record_trace:
            base = world.base
            r, p, y = base.roll_pitch_yaw()
            trace.append(
                [steps * cfg.dt, *base.position, r, p, y, *base.linear_velocity,
                 *base.angular_velocity, *sensors.base_frame_forces.reshape(12),
                 *sensors.contacts, *world.joint_angles.reshape(12)]
            )
        status = check_termination(world, steps, limits)
        if status != "running":
            outcome = status
            break

    return EpisodeResult(
        reward_per_step=total_reward / max(steps, 1),
        steps=steps,
        distance=world.distance,
        outcome=outcome,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Rollout evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TerrainSpec:
    kind: str = "flat"  # flat | rough
    max_height: float = 0.104
    cell: float = 0.15

    def build(self):
        if self.kind == "flat":
            return FlatTerrain()
        if self.kind == "rough":
            return generate_rough_terrain(self.max_height, self.cell, seed=0)
        raise ValueError(f"unknown terrain kind '{self.kind}'")


@dataclass(frozen=True)
class SimEvaluator:
    """Picklable rollout evaluator: fresh randomized world per call."""

    variant: ObservationVariant
    world_config: WorldConfig
    gait: GaitParams
    terrain: TerrainSpec = TerrainSpec()
    episode_steps: int = 5000
    action_limits: ActionLimits = ActionLimits()

    def __call__(self, weights: np.ndarray, seed) -> tuple:
        world = QuadrupedWorld(self.world_config, terrain=self.terrain.build())
        world.randomize_episode(seed)
        policy = PolicyMatrix(weights, self.variant)
        try:
            result = run_episode(
                world,
                policy,
                self.gait,
                max_steps=self.episode_steps,
                action_limits=self.action_limits,
            )
        except SimulationDiverged:
            return (math.nan, 0, 0.0)
        return (result.reward_per_step, result.steps, result.distance)


def _call_evaluator(task):
    evaluate, weights, seed = task
    return evaluate(weights, seed)


def _as_result(value) -> tuple:
    if isinstance(value, tuple):
        return value
    return (float(value), 0, 0.0)


# ---------------------------------------------------------------------------
# Epoch update
# ---------------------------------------------------------------------------

@dataclass
class TrainRecord:
    epoch: int
    mean_reward_per_step: float
    best: float
    worst: float
    distance_mean: float
    checkpoint_path: str | None = None


def train_epoch(
    weights: np.ndarray,
    config: ArsConfig,
    evaluate,
    epoch: int,
    map_fn=map,
) -> tuple:
    """One ARS iteration; returns (updated weights, TrainRecord)."""
    noise = config.exploration_noise
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, epoch, 0xA25)))
    if config.mirrored:
        n_pairs = config.n_rollouts // 2
        deltas = rng.standard_normal((n_pairs, *weights.shape))
        tasks = []
        for i in range(n_pairs):
            tasks.append((evaluate, weights + noise * deltas[i], (config.seed, epoch, 2 * i)))
            tasks.append((evaluate, weights - noise * deltas[i], (config.seed, epoch, 2 * i + 1)))
        results = [_as_result(r) for r in map_fn(_call_evaluator, tasks)]
        rewards = _patch_divergent(np.array([r[0] for r in results]))
        r_plus, r_minus = rewards[0::2], rewards[1::2]
        order = np.argsort(np.maximum(r_plus, r_minus))[::-1]
        chosen = order[: config.top_b]
        used = np.concatenate([r_plus[chosen], r_minus[chosen]])
        sigma = max(float(np.std(used)), 1e-8)
        step = (r_plus[chosen] - r_minus[chosen])[:, None, None] * deltas[chosen]
        update = config.learning_rate / (config.top_b * sigma) * step.sum(axis=0)
    else:
        deltas = rng.standard_normal((config.n_rollouts, *weights.shape))
        tasks = [
            (evaluate, weights + noise * deltas[i], (config.seed, epoch, i))
            for i in range(config.n_rollouts)
        ]
        tasks.append((evaluate, weights.copy(), (config.seed, epoch, config.n_rollouts)))
        results = [_as_result(r) for r in map_fn(_call_evaluator, tasks)]
        rewards = _patch_divergent(np.array([r[0] for r in results]))
        base = rewards[-1]
        rewards = rewards[:-1]
        chosen = np.argsort(rewards)[::-1][: config.top_b]
        sigma = max(float(np.std(rewards[chosen])), 1e-8)
        step = (rewards[chosen] - base)[:, None, None] * deltas[chosen]
        update = config.learning_rate / (config.top_b * sigma) * step.sum(axis=0)

    new_weights = weights + update
    if not np.isfinite(new_weights).all():
        raise TrainingDiverged(f"non-finite policy after epoch {epoch}")
    record = TrainRecord(
        epoch=epoch,
        mean_reward_per_step=float(np.mean(rewards)),
        best=float(np.max(rewards)),
        worst=float(np.min(rewards)),
        distance_mean=float(np.mean([r[2] for r in results])),
    )
    return new_weights, record


def _patch_divergent(rewards: np.ndarray) -> np.ndarray:
    """Replace diverged (NaN) rollout scores with the epoch's worst return."""
    bad = ~np.isfinite(rewards)
    if bad.any():
        finite = rewards[~bad]
        rewards = rewards.copy()
        rewards[bad] = finite.min() if finite.size else 0.0
    return rewards


# ---------------------------------------------------------------------------
# Training loop with checkpoints and curve CSV
# ---------------------------------------------------------------------------

CURVE_HEADER = ["epoch", "mean_reward_per_step", "best", "worst", "distance_mean"]


def write_curve(path, records) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_HEADER)
        for r in records:
            writer.writerow(
                [r.epoch, repr(r.mean_reward_per_step), repr(r.best), repr(r.worst),
                 repr(r.distance_mean)]
            )


def _read_curve(path) -> list:
    records = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            records.append(
                TrainRecord(
                    epoch=int(row["epoch"]),
                    mean_reward_per_step=float(row["mean_reward_per_step"]),
                    best=float(row["best"]),
                    worst=float(row["worst"]),
                    distance_mean=float(row["distance_mean"]),
                )
            )
    return records


def _checkpoint(out_dir, epoch, policy, config) -> str:
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    path = os.path.join(ckpt_dir, f"epoch_{epoch:05d}.policy")
    save_policy(policy, path)
    sidecar = {
        "epoch": epoch,
        "seed": config.seed,
        "variant": policy.variant.tag,
        "n_rollouts": config.n_rollouts,
    }
    with open(path + ".json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _latest_checkpoint(out_dir):
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    if not os.path.isdir(ckpt_dir):
        return None
    epochs = []
    for name in os.listdir(ckpt_dir):
        if name.endswith(".policy.json"):
            with open(os.path.join(ckpt_dir, name)) as f:
                epochs.append((json.load(f)["epoch"], name[: -len(".json")]))
    if not epochs:
        return None
    epoch, fname = max(epochs)
    return epoch, os.path.join(ckpt_dir, fname)


def train(
    variant: ObservationVariant,
    config: ArsConfig,
    epochs: int,
    evaluate,
    out_dir,
    map_fn=map,
    resume: bool = False,
) -> tuple:
    """Run ARS from a zero policy (or the latest checkpoint) for ``epochs``.

    Emits curve.csv, periodic checkpoints and policy_final.policy in
    out_dir; returns (final PolicyMatrix, records).  A resumed run
    produces the same outputs as an uninterrupted one because all
    per-epoch randomness derives from (seed, epoch).
    """
    os.makedirs(out_dir, exist_ok=True)
    curve_path = os.path.join(out_dir, "curve.csv")
    weights = zero_policy(variant).weights
    records = []
    start_epoch = 1
    if resume:
        latest = _latest_checkpoint(out_dir)
        if latest is not None:
            ckpt_epoch, ckpt_path = latest
            from .policy import load_policy

            loaded = load_policy(ckpt_path)
            if loaded.variant is not variant:
                raise ValueError(
                    f"checkpoint variant {loaded.variant.tag} != requested {variant.tag}"
                )
            weights = loaded.weights
            start_epoch = ckpt_epoch + 1
            if os.path.exists(curve_path):
                records = [r for r in _read_curve(curve_path) if r.epoch <= ckpt_epoch]

    for epoch in range(start_epoch, epochs + 1):
        weights, record = train_epoch(weights, config, evaluate, epoch, map_fn=map_fn)
        if config.checkpoint_every and epoch % config.checkpoint_every == 0:
            record.checkpoint_path = _checkpoint(
                out_dir, epoch, PolicyMatrix(weights, variant), config
            )
        records.append(record)
        write_curve(curve_path, records)

    policy = PolicyMatrix(weights, variant)
    final_path = os.path.join(out_dir, "policy_final.policy")
    save_policy(policy, final_path)
    if records and records[-1].checkpoint_path is None:
        records[-1].checkpoint_path = _checkpoint(out_dir, records[-1].epoch, policy, config)
    write_curve(curve_path, records)
    return policy, records
