"""Observation building, the linear gait-modulating policy, and persistence.

Observation layouts (fixed index map, FL FR BL BR leg order):

    imu           [roll, pitch, wx, wy, wz, ax, ay, az, s_fl, s_fr, s_bl, s_br]   dim 12
    imu_contacts  imu + [c_fl, c_fr, c_bl, c_br]                                  dim 16
    imu_force     imu + per-leg base-frame force / robot weight (12 entries)      dim 24

The policy is a dense obs_dim x 14 matrix.  Raw outputs are squashed with
tanh and scaled into the action ranges, so a zero policy commands the
nominal mid-range gait (clearance 0.03 m, penetration 0.01 m, no deltas).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

ACTION_DIM = 14


class PolicyFileError(ValueError):
    """A policy file failed validation; the message names the line."""


class ObservationVariant(Enum):
    IMU = ("imu", 12)
    IMU_CONTACTS = ("imu_contacts", 16)
    IMU_FORCE = ("imu_force", 24)

    def __init__(self, tag: str, dim: int):
        self.tag = tag
        self.dim = dim

    @classmethod
    def from_tag(cls, tag: str) -> "ObservationVariant":
        for variant in cls:
            if variant.tag == tag:
                return variant
        valid = ", ".join(v.tag for v in cls)
        raise ValueError(f"unknown observation variant '{tag}' (valid: {valid})")


@dataclass(frozen=True)
class ActionLimits:
    clearance_max: float = 0.06  # m
    penetration_max: float = 0.02  # m
    delta_max: float = 0.03  # m, per-foot displacement


@dataclass(frozen=True)
class ActionVector:
    clearance: float
    penetration: float
    deltas: np.ndarray  # (4,3) per-leg x,y,z displacements


@dataclass(frozen=True)
class PolicyMatrix:
    weights: np.ndarray  # (obs_dim, ACTION_DIM)
    variant: ObservationVariant

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.variant.dim, ACTION_DIM):
            raise ValueError(
                f"policy shape {w.shape} does not match variant "
                f"{self.variant.tag} ({self.variant.dim} x {ACTION_DIM})"
            )
        if not np.isfinite(w).all():
            raise ValueError("policy weights must be finite")
        object.__setattr__(self, "weights", w)


def zero_policy(variant: ObservationVariant) -> PolicyMatrix:
    return PolicyMatrix(np.zeros((variant.dim, ACTION_DIM)), variant)


def build_observation(variant, sensors, phase, weight: float) -> np.ndarray:
    """Assemble the observation vector for the given variant.

    ``sensors`` provides roll, pitch, angular_velocity, angular_acceleration
    and, for the augmented variants, contacts / base_frame_forces; ``phase``
    provides per-leg gait phases; forces are normalized by ``weight``.
    """
    obs = np.empty(variant.dim)
    obs[0] = sensors.roll
    obs[1] = sensors.pitch
    obs[2:5] = sensors.angular_velocity
    obs[5:8] = sensors.angular_acceleration
    obs[8:12] = phase.legs
    if variant is ObservationVariant.IMU_CONTACTS:
        obs[12:16] = sensors.contacts
    elif variant is ObservationVariant.IMU_FORCE:
        obs[12:24] = np.asarray(sensors.base_frame_forces).reshape(12) / weight
    return obs


def linear_output(policy: PolicyMatrix, obs: np.ndarray) -> np.ndarray:
    """Raw (pre-squash) action values obs^T W."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (policy.weights.shape[0],):
        raise ValueError(
            f"observation dim {obs.shape} does not match policy rows "
            f"{policy.weights.shape[0]}"
        )
    return obs @ policy.weights


def act(policy: PolicyMatrix, obs: np.ndarray, limits: ActionLimits = ActionLimits()) -> ActionVector:
    raw = np.tanh(linear_output(policy, obs))
    return ActionVector(
        clearance=0.5 * limits.clearance_max * (1.0 + raw[0]),
        penetration=0.5 * limits.penetration_max * (1.0 + raw[1]),
        deltas=limits.delta_max * raw[2:].reshape(4, 3),
    )


def clip_action(action: ActionVector, limits: ActionLimits = ActionLimits()) -> ActionVector:
    return ActionVector(
        clearance=float(np.clip(action.clearance, 0.0, limits.clearance_max)),
        penetration=float(np.clip(action.penetration, 0.0, limits.penetration_max)),
        deltas=np.clip(action.deltas, -limits.delta_max, limits.delta_max),
    )


# ---------------------------------------------------------------------------
# Persistence: header line "obs_dim act_dim variant_tag", then one line of
# 14 full-precision decimal floats per observation row.
# ---------------------------------------------------------------------------

def save_policy(policy: PolicyMatrix, path) -> None:
    lines = [f"{policy.variant.dim} {ACTION_DIM} {policy.variant.tag}"]
    for row in policy.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_policy(path) -> PolicyMatrix:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise PolicyFileError(f"{path}: empty policy file")
    header = lines[0].split()
    if len(header) != 3:
        raise PolicyFileError(f"{path}:1: header must be 'obs_dim act_dim variant'")
    try:
        obs_dim, act_dim = int(header[0]), int(header[1])
    except ValueError as exc:
        raise PolicyFileError(f"{path}:1: non-integer dimensions in header") from exc
    try:
        variant = ObservationVariant.from_tag(header[2])
    except ValueError as exc:
        raise PolicyFileError(f"{path}:1: {exc}") from exc
    if act_dim != ACTION_DIM:
        raise PolicyFileError(f"{path}:1: action dim {act_dim} != {ACTION_DIM}")
    if obs_dim != variant.dim:
        raise PolicyFileError(
            f"{path}:1: variant {variant.tag} expects {variant.dim} rows, header says {obs_dim}"
        )
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != obs_dim:
        raise PolicyFileError(
            f"{path}:{len(lines)}: expected {obs_dim} weight rows, found {len(rows)}"
        )
    weights = np.empty((obs_dim, ACTION_DIM))
    for r, line in enumerate(rows):
        cells = line.split()
        lineno = r + 2
        if len(cells) != ACTION_DIM:
            raise PolicyFileError(f"{path}:{lineno}: expected {ACTION_DIM} columns, found {len(cells)}")
        try:
            weights[r] = [float(c) for c in cells]
        except ValueError as exc:
            raise PolicyFileError(f"{path}:{lineno}: unparsable weight") from exc
        if not np.isfinite(weights[r]).all():
            raise PolicyFileError(f"{path}:{lineno}: non-finite weight")
    return PolicyMatrix(weights, variant)
