"""Simplified quadruped dynamics world.

A rigid 6-DOF base carries four massless kinematic legs.  Ground contact
is a penalty model: a spring-damper along the terrain normal plus a
Coulomb-capped anchored spring in the tangent plane.  The same contact
forces that support the robot are what the emulated foot sensors report,
expressed in the joint frame (sign-flipped reaction) and mapped through
the leg chain into the base frame.

Integration is semi-implicit Euler at a fixed 100 Hz; orientation is
integrated with the exponential map and re-orthonormalized every step.
All randomness flows from explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import (
    LEG_ORDER,
    LegGeometry,
    leg_inverse_kinematics,
    neutral_foot_position,
)

GRAVITY = 9.81

_MASK64 = (1 << 64) - 1


class SimulationDiverged(RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, step: int):
        super().__init__(f"simulation diverged at step {step}")
        self.step = step


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _default_inertia() -> np.ndarray:
    # body box inertia with the (massless) leg mass folded into the base
    return np.diag([0.015, 0.025, 0.030])


@dataclass(frozen=True)
class RobotParams:
    mass: float = 2.915  # kg, 28.6 N weight
    inertia: np.ndarray = field(default_factory=_default_inertia)

    @property
    def weight(self) -> float:
        return self.mass * GRAVITY


@dataclass(frozen=True)
class ContactModel:
    """Penalty contact coefficients.

    Normal: max(0, k*depth + c*depth_rate) along the surface normal, never
    attractive.  Tangential: damped spring to a per-foot anchor, capped at
    friction * normal force; the anchor slides when the cap engages.
    Defaults keep every contact mode of the standing robot inside the
    stability region of the 100 Hz integrator (static penetration ~2.4 mm).
    """

    normal_stiffness: float = 3000.0  # N/m
    normal_damping: float = 15.0  # N*s/m
    friction: float = 0.8
    tangential_stiffness: float = 1200.0  # N/m
    tangential_damping: float = 5.0  # N*s/m


# ---------------------------------------------------------------------------
# Terrain
# ---------------------------------------------------------------------------

def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


_UP = np.array([0.0, 0.0, 1.0])
_UP.setflags(write=False)


class FlatTerrain:
    kind = "flat"

    def height(self, x: float, y: float) -> float:
        return 0.0

    def normal(self, x: float, y: float) -> np.ndarray:
        return _UP


class InclinedPlane:
    """Infinite plane rising along +x, used for static force verification."""

    kind = "incline"

    def __init__(self, angle: float):
        if abs(angle) >= math.pi / 4:
            raise ValueError("incline angle must satisfy |angle| < pi/4")
        self.angle = angle
        self._slope = math.tan(angle)

    def height(self, x: float, y: float) -> float:
        return x * self._slope

    def normal(self, x: float, y: float) -> np.ndarray:
        n = np.array([-self._slope, 0.0, 1.0])
        return n / np.linalg.norm(n)


class RoughTerrain:
    """Procedural heightfield: i.i.d. uniform node heights, bilinear patches.

    Node heights are hashed from (seed, i, j), so the field is unbounded,
    deterministic and needs no storage beyond a small cache.
    """

    kind = "rough"

    def __init__(self, max_height: float, cell: float = 0.15, seed: int = 0):
        if max_height < 0.0:
            raise ValueError("max_height must be non-negative")
        self.max_height = max_height
        self.cell = cell
        self.seed = int(seed)
        self._cache: dict = {}

    def node_height(self, i: int, j: int) -> float:
        key = (i, j)
        h = self._cache.get(key)
        if h is None:
            v = _splitmix64(self.seed ^ _splitmix64((i * 0x9E3779B97F4A7C15) & _MASK64))
            v = _splitmix64(v ^ ((j * 0xBF58476D1CE4E5B9) & _MASK64))
            h = (v / 2.0**64) * self.max_height
            self._cache[key] = h
        return h

    def _patch(self, x: float, y: float):
        i = math.floor(x / self.cell)
        j = math.floor(y / self.cell)
        fx = x / self.cell - i
        fy = y / self.cell - j
        h00 = self.node_height(i, j)
        h10 = self.node_height(i + 1, j)
        h01 = self.node_height(i, j + 1)
        h11 = self.node_height(i + 1, j + 1)
        return h00, h10, h01, h11, fx, fy

    def height(self, x: float, y: float) -> float:
        h00, h10, h01, h11, fx, fy = self._patch(x, y)
        return (
            h00 * (1 - fx) * (1 - fy)
            + h10 * fx * (1 - fy)
            + h01 * (1 - fx) * fy
            + h11 * fx * fy
        )

    def normal(self, x: float, y: float) -> np.ndarray:
        h00, h10, h01, h11, fx, fy = self._patch(x, y)
        dhdx = ((h10 - h00) * (1 - fy) + (h11 - h01) * fy) / self.cell
        dhdy = ((h01 - h00) * (1 - fx) + (h11 - h10) * fx) / self.cell
        n = np.array([-dhdx, -dhdy, 1.0])
        return n / np.linalg.norm(n)


class SlopeCourse:
    """Flat approach into an incline (up) or a short decline back to flat (down)."""

    kind = "slope"

    def __init__(self, angle: float, direction: str):
        if abs(angle) >= math.pi / 4:
            raise ValueError("slope angle must satisfy |angle| < pi/4")
        if direction not in ("up", "down"):
            raise ValueError("direction must be 'up' or 'down'")
        self.angle = angle
        self.direction = direction
        self._slope = math.tan(angle)

    def height(self, x: float, y: float) -> float:
        s = self._slope
        if self.direction == "up":
            return 0.0 if x < 1.0 else (x - 1.0) * s
        if x < 1.5:
            return 0.0
        if x < 2.0:
            return -(x - 1.5) * s
        return -0.5 * s

    def _grade(self, x: float) -> float:
        if self.direction == "up":
            return self._slope if x >= 1.0 else 0.0
        return -self._slope if 1.5 <= x < 2.0 else 0.0

    def normal(self, x: float, y: float) -> np.ndarray:
        n = np.array([-self._grade(x), 0.0, 1.0])
        return n / np.linalg.norm(n)


def generate_rough_terrain(max_height: float, cell: float = 0.15, seed: int = 0) -> RoughTerrain:
    return RoughTerrain(max_height, cell, seed)


def make_slope_course(angle: float, direction: str) -> SlopeCourse:
    return SlopeCourse(angle, direction)


# ---------------------------------------------------------------------------
# State and sensors
# ---------------------------------------------------------------------------

@dataclass
class BaseState:
    position: np.ndarray  # world, m
    rotation: np.ndarray  # world <- base, 3x3
    linear_velocity: np.ndarray  # world, m/s
    angular_velocity: np.ndarray  # base frame, rad/s
    angular_acceleration: np.ndarray  # base frame, rad/s^2, backward difference

    def roll_pitch_yaw(self) -> tuple:
        """Z-Y-X Euler angles of the base orientation."""
        r = self.rotation
        roll = math.atan2(r[2, 1], r[2, 2])
        pitch = -math.asin(min(1.0, max(-1.0, r[2, 0])))
        yaw = math.atan2(r[1, 0], r[0, 0])
        return roll, pitch, yaw


@dataclass(frozen=True)
class SensorReadings:
    joint_frame_forces: np.ndarray  # (4,3) N, reaction sign already flipped
    base_frame_forces: np.ndarray  # (4,3) N
    contacts: np.ndarray  # (4,) {0,1}
    roll: float
    pitch: float
    angular_velocity: np.ndarray  # (3,) rad/s
    angular_acceleration: np.ndarray  # (3,) rad/s^2


@dataclass(frozen=True)
class WorldConfig:
    robot: RobotParams = field(default_factory=RobotParams)
    geometry: LegGeometry = field(default_factory=LegGeometry)
    contact: ContactModel = field(default_factory=ContactModel)
    servo_time_constant: float = 0.03  # s
    servo_rate_limit: float = 8.0  # rad/s
    dt: float = 0.01  # s
    contact_threshold: float = 0.5  # N on the base-frame force magnitude
    stand_height: float = 0.19  # m
    domain_randomization: bool = True
    mass_variation: float = 0.10
    friction_min: float = 0.6
    friction_max: float = 1.0
    servo_variation: float = 0.20


def _skew(w: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def _exp_so3(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    if theta < 1e-12:
        return np.eye(3) + _skew(w)
    k = _skew(w / theta)
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def _orthonormalize(r: np.ndarray) -> np.ndarray:
    u0 = r[:, 0] / np.linalg.norm(r[:, 0])
    u2 = np.cross(u0, r[:, 1])
    u2 /= np.linalg.norm(u2)
    u1 = np.cross(u2, u0)
    return np.column_stack((u0, u1, u2))


def _integrate_rotation(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """R @ exp(skew(w)) followed by re-orthonormalization, scalar math."""
    wx, wy, wz = w
    theta = math.sqrt(wx * wx + wy * wy + wz * wz)
    if theta < 1e-12:
        a, b = 1.0, 0.5
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    # E = I + a*K + b*K^2 with K = skew(w)
    e00 = 1.0 + b * (-wy * wy - wz * wz)
    e01 = -a * wz + b * wx * wy
    e02 = a * wy + b * wx * wz
    e10 = a * wz + b * wx * wy
    e11 = 1.0 + b * (-wx * wx - wz * wz)
    e12 = -a * wx + b * wy * wz
    e20 = -a * wy + b * wx * wz
    e21 = a * wx + b * wy * wz
    e22 = 1.0 + b * (-wx * wx - wy * wy)
    r00, r01, r02 = r[0]
    r10, r11, r12 = r[1]
    r20, r21, r22 = r[2]
    m00 = r00 * e00 + r01 * e10 + r02 * e20
    m10 = r10 * e00 + r11 * e10 + r12 * e20
    m20 = r20 * e00 + r21 * e10 + r22 * e20
    m01 = r00 * e01 + r01 * e11 + r02 * e21
    m11 = r10 * e01 + r11 * e11 + r12 * e21
    m21 = r20 * e01 + r21 * e11 + r22 * e21
    # orthonormalize: renorm col0, col2 = col0 x col1, col1 = col2 x col0
    inv = 1.0 / math.sqrt(m00 * m00 + m10 * m10 + m20 * m20)
    m00, m10, m20 = m00 * inv, m10 * inv, m20 * inv
    c2x = m10 * m21 - m20 * m11
    c2y = m20 * m01 - m00 * m21
    c2z = m00 * m11 - m10 * m01
    inv = 1.0 / math.sqrt(c2x * c2x + c2y * c2y + c2z * c2z)
    c2x, c2y, c2z = c2x * inv, c2y * inv, c2z * inv
    c1x = c2y * m20 - c2z * m10
    c1y = c2z * m00 - c2x * m20
    c1z = c2x * m10 - c2y * m00
    return np.array([[m00, c1x, c2x], [m10, c1y, c2y], [m20, c1z, c2z]])


_LEG_SIDES = np.array([1.0, -1.0, 1.0, -1.0])  # FL FR BL BR


def _batched_chains(angles: np.ndarray, geom: LegGeometry, hips: np.ndarray):
    """Foot-joint rotations and base-frame positions for all four legs.

    Vectorized closed form of leg_chain_transform; the two are pinned to
    each other by tests.
    """
    hip = angles[:, 0]
    sk = angles[:, 1] + angles[:, 2]
    ch, sh = np.cos(hip), np.sin(hip)
    cs, ss = np.cos(angles[:, 1]), np.sin(angles[:, 1])
    csk, ssk = np.cos(sk), np.sin(sk)
    u, l = geom.upper_leg, geom.lower_leg
    a = _LEG_SIDES * geom.abduction_link

    rot = np.empty((4, 3, 3))
    rot[:, 0, 0] = csk
    rot[:, 0, 1] = 0.0
    rot[:, 0, 2] = ssk
    rot[:, 1, 0] = sh * ssk
    rot[:, 1, 1] = ch
    rot[:, 1, 2] = -sh * csk
    rot[:, 2, 0] = -ch * ssk
    rot[:, 2, 1] = sh
    rot[:, 2, 2] = ch * csk

    plane = u * cs + l * csk  # leg-plane vertical extension
    feet = np.empty((4, 3))
    feet[:, 0] = hips[:, 0] - u * ss - l * ssk
    feet[:, 1] = hips[:, 1] + a * ch + sh * plane
    feet[:, 2] = hips[:, 2] + a * sh - ch * plane
    return rot, feet


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class QuadrupedWorld:
    """Mutable stepping state.  One instance per thread; reseedable."""

    def __init__(self, config: WorldConfig = WorldConfig(), terrain=None):
        self.config = config
        self.terrain = terrain if terrain is not None else FlatTerrain()
        self._nominal_terrain = self.terrain
        self.params = config.robot
        self.contact = config.contact
        self.servo_time_constant = config.servo_time_constant
        self._hips = np.array([config.geometry.hip_offset(leg) for leg in LEG_ORDER])
        self._inertia_inv = np.linalg.inv(config.robot.inertia)
        self.reset()

    # -- setup ------------------------------------------------------------

    def neutral_joint_angles(self) -> np.ndarray:
        geom = self.config.geometry
        angles = np.empty((4, 3))
        for i, leg in enumerate(LEG_ORDER):
            target = neutral_foot_position(leg, geom, self.config.stand_height)
            angles[i] = leg_inverse_kinematics(leg, target, geom).angles.as_array()
        return angles

    def reset(self, base_position=None, base_rotation=None, joint_angles=None):
        rot = np.eye(3) if base_rotation is None else np.asarray(base_rotation, dtype=float)
        angles = self.neutral_joint_angles() if joint_angles is None else np.asarray(
            joint_angles, dtype=float
        ).reshape(4, 3)
        if base_position is None:
            # rest the lowest foot on the terrain under the spawn point
            feet = self._feet_base(angles)
            clearance = -np.inf
            for i in range(4):
                p = rot @ feet[i]
                clearance = max(clearance, self.terrain.height(p[0], p[1]) - p[2])
            base_position = np.array([0.0, 0.0, clearance])
        self.base = BaseState(
            position=np.asarray(base_position, dtype=float).copy(),
            rotation=rot.copy(),
            linear_velocity=np.zeros(3),
            angular_velocity=np.zeros(3),
            angular_acceleration=np.zeros(3),
        )
        self.joint_angles = angles
        self.step_count = 0
        self.start_x = float(self.base.position[0])
        self.foot_positions_world = self._feet_world(angles)
        self._prev_feet = self.foot_positions_world.copy()
        self._anchors = [None, None, None, None]
        self.last_contact_forces_world = np.zeros((4, 3))
        return self

    def _feet_base(self, angles: np.ndarray) -> np.ndarray:
        _, feet = _batched_chains(angles, self.config.geometry, self._hips)
        return feet

    def _feet_world(self, angles: np.ndarray) -> np.ndarray:
        feet = self._feet_base(angles)
        return self.base.position + feet @ self.base.rotation.T

    # -- per-episode variation ---------------------------------------------

    def randomize_episode(self, seed) -> "QuadrupedWorld":
        """Resample dynamics and terrain for a new episode, then reset.

        Draw order is fixed (mass, friction, servo, terrain) so results are
        a pure function of the seed.
        """
        cfg = self.config
        if cfg.domain_randomization:
            rng = np.random.default_rng(np.random.SeedSequence(seed))
            mass_scale = rng.uniform(1.0 - cfg.mass_variation, 1.0 + cfg.mass_variation)
            friction = rng.uniform(cfg.friction_min, cfg.friction_max)
            servo_scale = rng.uniform(1.0 - cfg.servo_variation, 1.0 + cfg.servo_variation)
            terrain_seed = int(rng.integers(0, 2**63))
            self.params = replace(
                cfg.robot,
                mass=cfg.robot.mass * mass_scale,
                inertia=cfg.robot.inertia * mass_scale,
            )
            self.contact = replace(cfg.contact, friction=friction)
            self.servo_time_constant = cfg.servo_time_constant * servo_scale
            self._inertia_inv = np.linalg.inv(self.params.inertia)
            if isinstance(self._nominal_terrain, RoughTerrain):
                self.terrain = RoughTerrain(
                    self._nominal_terrain.max_height,
                    self._nominal_terrain.cell,
                    seed=terrain_seed,
                )
        else:
            self.params = cfg.robot
            self.contact = cfg.contact
            self.servo_time_constant = cfg.servo_time_constant
            self.terrain = self._nominal_terrain
            self._inertia_inv = np.linalg.inv(self.params.inertia)
        return self.reset()

    def apply_ball_disturbance(self, ball_mass: float = 0.5, ball_speed: float = 3.5):
        """Lateral hit modeled as a perfectly inelastic impulse on the base."""
        impulse = ball_mass * ball_speed
        self.base.linear_velocity[1] += impulse / self.params.mass
        return impulse

    # -- stepping -----------------------------------------------------------

    def initial_sensors(self) -> SensorReadings:
        roll, pitch, _ = self.base.roll_pitch_yaw()
        return SensorReadings(
            joint_frame_forces=np.zeros((4, 3)),
            base_frame_forces=np.zeros((4, 3)),
            contacts=np.zeros(4, dtype=int),
            roll=roll,
            pitch=pitch,
            angular_velocity=self.base.angular_velocity.copy(),
            angular_acceleration=self.base.angular_acceleration.copy(),
        )

    def step(self, joint_commands: np.ndarray, dt: float = None) -> SensorReadings:
        cfg = self.config
        dt = cfg.dt if dt is None else dt
        limit = cfg.geometry.joint_limit
        commands = np.clip(np.asarray(joint_commands, dtype=float).reshape(4, 3), -limit, limit)

        # servo: first-order lag with a slew-rate cap
        alpha = 1.0 - math.exp(-dt / self.servo_time_constant)
        rate = cfg.servo_rate_limit * dt
        dtheta = np.clip((commands - self.joint_angles) * alpha, -rate, rate)
        self.joint_angles = self.joint_angles + dtheta

        base = self.base
        rot_wb = base.rotation
        chains, feet_base = _batched_chains(self.joint_angles, cfg.geometry, self._hips)
        feet_world = base.position + feet_base @ rot_wb.T
        foot_vel = (feet_world - self._prev_feet) / dt

        con = self.contact
        c_t = con.tangential_damping
        bx, by, bz = base.position
        fx = fy = 0.0
        fz = -self.params.mass * GRAVITY
        tx = ty = tz = 0.0
        contact_world = np.zeros((4, 3))
        terrain = self.terrain
        for i in range(4):
            px, py, pz = feet_world[i]
            h = terrain.height(px, py)
            if pz - h >= 0.0:
                self._anchors[i] = None
                continue
            nx, ny, nz = terrain.normal(px, py)
            depth = (h - pz) * nz
            vx, vy, vz = foot_vel[i]
            depth_rate = -(vx * nx + vy * ny + vz * nz)
            fn = con.normal_stiffness * depth + con.normal_damping * depth_rate
            if fn < 0.0:
                fn = 0.0
            anchor = self._anchors[i]
            if anchor is None:
                anchor = (px, py, pz)
            dx, dy, dz = px - anchor[0], py - anchor[1], pz - anchor[2]
            dn = dx * nx + dy * ny + dz * nz
            vn = vx * nx + vy * ny + vz * nz
            ftx = -con.tangential_stiffness * (dx - dn * nx) - c_t * (vx - vn * nx)
            fty = -con.tangential_stiffness * (dy - dn * ny) - c_t * (vy - vn * ny)
            ftz = -con.tangential_stiffness * (dz - dn * nz) - c_t * (vz - vn * nz)
            cap = con.friction * fn
            ft_mag = math.sqrt(ftx * ftx + fty * fty + ftz * ftz)
            if ft_mag > cap:
                scale = cap / ft_mag
                ftx, fty, ftz = ftx * scale, fty * scale, ftz * scale
                # let the anchor slide so the spring stays at the cone surface
                k = con.tangential_stiffness
                anchor = (px + ftx / k, py + fty / k, pz + ftz / k)
            self._anchors[i] = anchor
            cfx = fn * nx + ftx
            cfy = fn * ny + fty
            cfz = fn * nz + ftz
            contact_world[i, 0] = cfx
            contact_world[i, 1] = cfy
            contact_world[i, 2] = cfz
            fx += cfx
            fy += cfy
            fz += cfz
            rx, ry, rz = px - bx, py - by, pz - bz
            tx += ry * cfz - rz * cfy
            ty += rz * cfx - rx * cfz
            tz += rx * cfy - ry * cfx

        # semi-implicit Euler; angular dynamics in the base frame
        inertia = self.params.inertia
        omega = base.angular_velocity
        torque_base = rot_wb.T @ np.array([tx, ty, tz])
        i_omega = inertia @ omega
        gyro = np.array(
            [
                omega[1] * i_omega[2] - omega[2] * i_omega[1],
                omega[2] * i_omega[0] - omega[0] * i_omega[2],
                omega[0] * i_omega[1] - omega[1] * i_omega[0],
            ]
        )
        new_omega = omega + (self._inertia_inv @ (torque_base - gyro)) * dt
        base.linear_velocity = base.linear_velocity + np.array([fx, fy, fz]) * (
            dt / self.params.mass
        )
        base.position = base.position + base.linear_velocity * dt
        base.rotation = _integrate_rotation(rot_wb, new_omega * dt)
        base.angular_acceleration = (new_omega - omega) / dt
        base.angular_velocity = new_omega

        self._prev_feet = feet_world
        self.foot_positions_world = feet_world
        self.last_contact_forces_world = contact_world
        self.step_count += 1

        probe = (
            float(np.sum(base.rotation))
            + float(np.sum(base.position))
            + float(np.sum(base.linear_velocity))
            + float(np.sum(new_omega))
            + float(np.sum(self.joint_angles))
        )
        if not math.isfinite(probe):
            raise SimulationDiverged(self.step_count - 1)

        # emulated sensors: flipped joint reaction, mapped through the chain
        base_forces = contact_world @ base.rotation
        joint_forces = np.einsum("lji,lj->li", chains, base_forces)
        base_forces = np.einsum("lij,lj->li", chains, joint_forces)
        contacts = (
            np.sqrt(np.einsum("lj,lj->l", base_forces, base_forces)) > cfg.contact_threshold
        ).astype(int)
        roll, pitch, _ = base.roll_pitch_yaw()
        return SensorReadings(
            joint_frame_forces=joint_forces,
            base_frame_forces=base_forces,
            contacts=contacts,
            roll=roll,
            pitch=pitch,
            angular_velocity=base.angular_velocity.copy(),
            angular_acceleration=base.angular_acceleration.copy(),
        )

    @property
    def distance(self) -> float:
        return float(self.base.position[0] - self.start_x)

    @property
    def height_above_terrain(self) -> float:
        x, y, z = self.base.position
        return float(z - self.terrain.height(x, y))


# ---------------------------------------------------------------------------
# Termination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TerminationLimits:
    goal_distance: float = math.inf  # m
    max_steps: int = 5000
    max_tilt: float = 0.9  # rad, roll or pitch beyond this counts as fallen
    min_height_fraction: float = 0.4  # of standing height


def check_termination(world: QuadrupedWorld, elapsed_steps: int, limits: TerminationLimits) -> str:
    roll, pitch, _ = world.base.roll_pitch_yaw()
    if (
        abs(roll) > limits.max_tilt
        or abs(pitch) > limits.max_tilt
        or world.height_above_terrain < limits.min_height_fraction * world.config.stand_height
    ):
        return "fell"
    if world.distance >= limits.goal_distance:
        return "reached_goal"
    if elapsed_steps >= limits.max_steps:
        return "timed_out"
    return "running"
