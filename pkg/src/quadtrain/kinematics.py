"""Leg kinematics and foot-force sensor emulation.

Coordinate conventions (right-handed, z-up):
  - base frame: x forward, y left, z up, origin at the body center of mass
  - hip joint: revolute about the base x axis (abduction/roll)
  - shoulder and knee joints: revolute about the y axis (pitch)
  - at zero joint angles a leg hangs straight down; the foot sits at
    hip mount + (0, side * abduction_link, -(upper_leg + lower_leg))

The foot is attached to the lower leg by a fixed joint.  The simulator
reports reaction forces in that joint's frame; flipping their sign gives
the ground reaction force in the joint frame, and rotating it through the
hip->shoulder->knee chain expresses it in the base frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class JointLimitError(ValueError):
    """A commanded joint angle is outside the configured limits."""


class LegId(Enum):
    FL = "FL"
    FR = "FR"
    BL = "BL"
    BR = "BR"

    @property
    def side(self) -> float:
        """+1 for left legs, -1 for right legs (mirror factor on y)."""
        return 1.0 if self in (LegId.FL, LegId.BL) else -1.0

    @property
    def front(self) -> float:
        return 1.0 if self in (LegId.FL, LegId.FR) else -1.0


LEG_ORDER = (LegId.FL, LegId.FR, LegId.BL, LegId.BR)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation between two named frames.

    ``rotation`` maps vectors of the child frame into the parent frame,
    ``translation`` is the child origin expressed in the parent frame.
    """

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ point + self.translation

    def rotate(self, vector: np.ndarray) -> np.ndarray:
        """Map a free vector (no translation applied)."""
        return self.rotation @ vector


@dataclass(frozen=True)
class LegJointAngles:
    hip: float
    shoulder: float
    knee: float

    def as_array(self) -> np.ndarray:
        return np.array([self.hip, self.shoulder, self.knee])


@dataclass(frozen=True)
class IKResult:
    angles: LegJointAngles
    clamped: bool


@dataclass(frozen=True)
class LegGeometry:
    """Link lengths and hip mounting points.

    Hips sit at the corners of a body_length x body_width rectangle in the
    base xy plane.  Defaults put the straight leg at 0.205 m reach and the
    nominal standing height near 0.19 m (slightly bent knees).
    """

    body_length: float = 0.25
    body_width: float = 0.14
    abduction_link: float = 0.035
    upper_leg: float = 0.10
    lower_leg: float = 0.10
    joint_limit: float = 2.0

    def __post_init__(self):
        for name in ("abduction_link", "upper_leg", "lower_leg"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    def hip_offset(self, leg: LegId) -> np.ndarray:
        """Hip joint position in the base frame."""
        return np.array(
            [leg.front * self.body_length / 2.0, leg.side * self.body_width / 2.0, 0.0]
        )

    @property
    def leg_plane_reach(self) -> float:
        """Maximum planar shoulder+knee extension."""
        return self.upper_leg + self.lower_leg

    @property
    def max_reach(self) -> float:
        """Radius of the reachable sphere around the hip joint."""
        return math.hypot(self.abduction_link, self.leg_plane_reach)


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def check_joint_limits(angles: LegJointAngles, geom: LegGeometry) -> None:
    limit = geom.joint_limit
    for name, value in (("hip", angles.hip), ("shoulder", angles.shoulder), ("knee", angles.knee)):
        if abs(value) > limit:
            raise JointLimitError(
                f"{name} angle {value:.3f} rad exceeds limit +/-{limit:.3f} rad"
            )


def leg_chain_transform(
    leg: LegId,
    angles: LegJointAngles,
    geom: LegGeometry,
    check_limits: bool = True,
) -> RigidTransform:
    """Transform from the fixed foot joint frame to the base frame.

    Composition of base->hip mount, hip roll, shoulder pitch and knee
    pitch; the translation is the foot-joint position in the base frame.
    """
    if check_limits:
        check_joint_limits(angles, geom)
    side = leg.side
    r_hip = rot_x(angles.hip)
    r_shoulder = r_hip @ rot_y(angles.shoulder)
    r_knee = r_shoulder @ rot_y(angles.knee)
    translation = (
        geom.hip_offset(leg)
        + r_hip @ np.array([0.0, side * geom.abduction_link, 0.0])
        + r_shoulder @ np.array([0.0, 0.0, -geom.upper_leg])
        + r_knee @ np.array([0.0, 0.0, -geom.lower_leg])
    )
    return RigidTransform(r_knee, translation)


def grf_to_base_frame(leg: LegId, f_joint: np.ndarray, chain: RigidTransform) -> np.ndarray:
    """Express a joint-frame ground reaction force in the base frame.

    Forces are free vectors, so only the chain rotation is applied; the
    joint-frame force is expected with the reaction sign already flipped.
    """
    del leg  # identifies whose chain this is; the math is per-chain
    return chain.rotate(np.asarray(f_joint, dtype=float))


def contact_from_force(force: np.ndarray, threshold: float) -> int:
    """Threshold the force magnitude into a binary contact flag.

    Returns 1 strictly above ``threshold``, 0 at or below it.
    """
    if threshold <= 0.0:
        raise ValueError(f"contact threshold must be positive, got {threshold}")
    f = np.asarray(force, dtype=float)
    return 1 if float(np.linalg.norm(f)) > threshold else 0


def neutral_foot_position(leg: LegId, geom: LegGeometry, stand_height: float) -> np.ndarray:
    """Nominal stance foot target in the hip frame (below the shoulder)."""
    return np.array([0.0, leg.side * geom.abduction_link, -stand_height])


def solve_leg_ik(
    side: float, x: float, y: float, z: float, geom: LegGeometry
) -> tuple:
    """Scalar IK core; returns (hip, shoulder, knee, clamped).

    Hip abduction comes from the y-z projection, then the shoulder/knee
    pair is solved in the leg plane with the knee-backward branch fixed.
    Unreachable targets are clamped onto the workspace boundary.
    """
    ab = geom.abduction_link
    d = side * ab
    reach = geom.leg_plane_reach
    clamped = False

    # Radial clamp onto the max-reach sphere around the hip joint.
    r = math.sqrt(x * x + y * y + z * z)
    r_max = geom.max_reach
    if r > r_max:
        scale = r_max / r
        x, y, z = x * scale, y * scale, z * scale
        clamped = True

    # The y-z projection must clear the abduction offset.
    rho = math.hypot(y, z)
    if rho < ab:
        if rho > 1e-9:
            y, z = y * ab / rho, z * ab / rho
        else:
            y, z = d, 0.0
        rho = ab
        clamped = True

    # Leg-plane coordinates: x along base x, z along the rotated leg plane.
    pz = -math.sqrt(max(rho * rho - ab * ab, 0.0))
    r_pl = math.hypot(x, pz)
    if r_pl > reach:
        scale = reach / r_pl
        x, pz = x * scale, pz * scale
        clamped = True
    min_pl = abs(geom.upper_leg - geom.lower_leg)
    if r_pl < min_pl:
        if r_pl > 1e-9:
            scale = min_pl / r_pl
            x, pz = x * scale, pz * scale
        else:
            x, pz = 0.0, -min_pl
        clamped = True

    hip = math.atan2(z, y) - math.atan2(pz, d)
    hip = math.atan2(math.sin(hip), math.cos(hip))

    u, l = geom.upper_leg, geom.lower_leg
    c_knee = (x * x + pz * pz - u * u - l * l) / (2.0 * u * l)
    knee = -math.acos(min(1.0, max(-1.0, c_knee)))
    shoulder = math.atan2(-x, -pz) - math.atan2(l * math.sin(knee), u + l * math.cos(knee))
    shoulder = math.atan2(math.sin(shoulder), math.cos(shoulder))
    return hip, shoulder, knee, clamped


def leg_inverse_kinematics(
    leg: LegId, foot_target: np.ndarray, geom: LegGeometry
) -> IKResult:
    """Closed-form 3-DOF inverse kinematics for a hip-frame foot target."""
    x, y, z = (float(v) for v in np.asarray(foot_target, dtype=float))
    hip, shoulder, knee, clamped = solve_leg_ik(leg.side, x, y, z, geom)
    return IKResult(LegJointAngles(hip, shoulder, knee), clamped)
