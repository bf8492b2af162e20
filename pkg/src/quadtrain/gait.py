"""Open-loop Bezier foot trajectories with per-leg phase.

Each leg tracks a phase s in [0,1).  The stance segment (s < duty_factor)
drags the foot backward through the stroke while a half-sine presses it
into the ground by penetration_depth; the swing segment follows a planar
degree-11 Bezier curve that lifts the foot to clearance_height and
returns it to the stance entry point.  Trajectories are displacements
from the neutral stance position in the hip frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Trot: diagonal pairs in phase, half a cycle apart (FL FR BL BR order).
TROT_OFFSETS = (0.0, 0.5, 0.5, 0.0)

# Swing control polygon, symmetric about mid-swing.  x in units of half the
# step length (stance exit -1 to stance entry +1, with overshoot), z in units
# of clearance height, scaled below so the curve apex lands exactly on 1.
_SWING_X_RATIOS = np.array(
    [-1.0, -1.35, -1.5, -1.5, -1.5, 0.0, 0.0, 1.5, 1.5, 1.5, 1.35, 1.0]
)
_SWING_Z_RAW = np.array([0.0, 0.0, 0.6, 0.9, 1.1, 1.2, 1.2, 1.1, 0.9, 0.6, 0.0, 0.0])
_BINOM_11 = tuple(float(math.comb(11, i)) for i in range(12))
_SWING_Z_RATIOS = _SWING_Z_RAW / float(np.sum(np.multiply(_BINOM_11, _SWING_Z_RAW)) / 2.0**11)
_X_RATIOS = tuple(float(v) for v in _SWING_X_RATIOS)
_Z_RATIOS = tuple(float(v) for v in _SWING_Z_RATIOS)


@dataclass(frozen=True)
class GaitParams:
    cycle_period: float = 0.4
    duty_factor: float = 0.5
    step_length: float = 0.04
    clearance_height: float = 0.03
    penetration_depth: float = 0.005
    step_velocity_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.duty_factor < 1.0:
            raise ValueError("duty_factor must be in (0, 1)")
        if self.clearance_height < 0.0 or self.penetration_depth < 0.0:
            raise ValueError("clearance and penetration must be non-negative")


@dataclass(frozen=True)
class GaitPhase:
    """Per-leg gait phase, derived from one master phase plus fixed offsets."""

    base: float = 0.0
    cycle_period: float = 0.4
    offsets: tuple = TROT_OFFSETS

    @property
    def legs(self) -> np.ndarray:
        """Phases s in [0,1) in FL FR BL BR order."""
        s = np.asarray(self.offsets, dtype=float) + self.base
        return s - np.floor(s)


def advance_phase(phase: GaitPhase, dt: float) -> GaitPhase:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    base = phase.base + dt / phase.cycle_period
    return replace(phase, base=base - math.floor(base))


def swing_control_points(params: GaitParams) -> np.ndarray:
    """Control polygon of the swing curve, (12, 2) columns (x, z) in meters."""
    half_step = 0.5 * params.step_length * params.step_velocity_scale
    return np.column_stack(
        (_SWING_X_RATIOS * half_step, _SWING_Z_RATIOS * params.clearance_height)
    )


def _bernstein_weights(u: float) -> list:
    v = 1.0 - u
    up = [1.0] * 12
    vp = [1.0] * 12
    for i in range(1, 12):
        up[i] = up[i - 1] * u
        vp[i] = vp[i - 1] * v
    return [_BINOM_11[i] * up[i] * vp[11 - i] for i in range(12)]


def foot_trajectory(s: float, params: GaitParams) -> np.ndarray:
    """Hip-frame foot displacement from neutral stance at phase s."""
    s = s - math.floor(s)
    half_step = 0.5 * params.step_length * params.step_velocity_scale
    duty = params.duty_factor
    if s < duty:
        u = s / duty
        x = half_step * (1.0 - 2.0 * u)
        z = -params.penetration_depth * math.sin(math.pi * u)
        return np.array([x, 0.0, z])
    u = (s - duty) / (1.0 - duty)
    w = _bernstein_weights(u)
    x = sum(w[i] * _X_RATIOS[i] for i in range(12)) * half_step
    z = sum(w[i] * _Z_RATIOS[i] for i in range(12)) * params.clearance_height
    return np.array([x, 0.0, z])


def mix_actions(bezier_targets: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Final foot targets: vector sum of generator output and policy deltas.

    Both arguments are (4, 3) hip-frame positions in FL FR BL BR order;
    deltas are expected pre-clipped to the action bounds.
    """
    return np.asarray(bezier_targets, dtype=float) + np.asarray(deltas, dtype=float)


def sanity_check_targets(targets: np.ndarray, max_reach: float) -> None:
    """Reject wildly out-of-range targets before IK clamping hides them."""
    norms = np.linalg.norm(np.asarray(targets, dtype=float), axis=-1)
    if np.any(norms > 1.5 * max_reach):
        raise ValueError(f"foot target beyond 1.5x leg reach: {norms.max():.3f} m")
