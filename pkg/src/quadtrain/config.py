"""Declarative run configuration.

One INI file with sections [run], [sim], [gait], [policy], [ars] and
[harness] configures every tunable in the workbench.  Unknown sections or
keys are rejected, and every command echoes the effective merged
configuration into its output directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .ars import ArsConfig
from .gait import GaitParams
from .kinematics import LegGeometry
from .policy import ActionLimits
from .sim import RobotParams, WorldConfig


class ConfigError(ValueError):
    """Invalid configuration file or value."""


@dataclass(frozen=True)
class HarnessConfig:
    train_terrain_height: float = 0.104  # m
    generalization_height: float = 0.128  # m
    terrain_cell: float = 0.15  # m
    survival_goal_m: float = 100.0
    survival_max_steps: int = 50000
    episodes_per_policy: int = 50
    slope_angle_deg: float = 8.0
    slope_goal_m: float = 3.0
    slope_max_steps: int = 50000
    slope_episodes: int = 50
    settle_steps: int = 500
    sample_window: int = 100
    ball_mass_kg: float = 0.5
    ball_speed_mps: float = 3.5
    ball_time_s: float = 5.0
    disturbance_duration_s: float = 20.0
    recovery_band_rad: float = 0.05
    recovery_hold_s: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    world: WorldConfig = field(default_factory=WorldConfig)
    gait: GaitParams = field(default_factory=GaitParams)
    action_limits: ActionLimits = field(default_factory=ActionLimits)
    ars: ArsConfig = field(default_factory=ArsConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)


def default_config() -> RunConfig:
    return RunConfig()


# ---------------------------------------------------------------------------
# INI schema: section -> key -> (type tag, extractor); the same table drives
# parsing, validation and the effective-config echo.
# ---------------------------------------------------------------------------

def _sim_items(cfg: RunConfig):
    w = cfg.world
    return {
        "mass": ("float", w.robot.mass),
        "inertia_xx": ("float", float(w.robot.inertia[0, 0])),
        "inertia_yy": ("float", float(w.robot.inertia[1, 1])),
        "inertia_zz": ("float", float(w.robot.inertia[2, 2])),
        "contact_stiffness": ("float", w.contact.normal_stiffness),
        "contact_damping": ("float", w.contact.normal_damping),
        "friction": ("float", w.contact.friction),
        "tangential_stiffness": ("float", w.contact.tangential_stiffness),
        "tangential_damping": ("float", w.contact.tangential_damping),
        "servo_time_constant": ("float", w.servo_time_constant),
        "servo_rate_limit": ("float", w.servo_rate_limit),
        "dt": ("float", w.dt),
        "contact_threshold": ("float", w.contact_threshold),
        "stand_height": ("float", w.stand_height),
        "body_length": ("float", w.geometry.body_length),
        "body_width": ("float", w.geometry.body_width),
        "abduction_link": ("float", w.geometry.abduction_link),
        "upper_leg": ("float", w.geometry.upper_leg),
        "lower_leg": ("float", w.geometry.lower_leg),
        "joint_limit": ("float", w.geometry.joint_limit),
        "domain_randomization": ("bool", w.domain_randomization),
        "mass_variation": ("float", w.mass_variation),
        "friction_min": ("float", w.friction_min),
        "friction_max": ("float", w.friction_max),
        "servo_variation": ("float", w.servo_variation),
    }


def _dataclass_items(obj):
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, bool):
            out[f.name] = ("bool", value)
        elif isinstance(value, int):
            out[f.name] = ("int", value)
        else:
            out[f.name] = ("float", value)
    return out


def _schema(cfg: RunConfig) -> dict:
    ars_items = _dataclass_items(cfg.ars)
    ars_items.pop("seed")  # master seed lives in [run]
    return {
        "run": {"seed": ("int", cfg.seed)},
        "sim": _sim_items(cfg),
        "gait": _dataclass_items(cfg.gait),
        "policy": _dataclass_items(cfg.action_limits),
        "ars": ars_items,
        "harness": _dataclass_items(cfg.harness),
    }


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse(kind: str, raw: str, where: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            key = raw.strip().lower()
            if key not in _BOOL_VALUES:
                raise ValueError(raw)
            return _BOOL_VALUES[key]
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {kind} from '{raw}'") from exc
    raise ConfigError(f"{where}: unknown type {kind}")


def load_config(path=None, default_seed=None) -> RunConfig:
    """Read an INI file over the defaults; None returns the defaults.

    ``default_seed`` replaces the built-in seed default before the file is
    applied (used for the low-precedence environment override).
    """
    cfg = default_config()
    if default_seed is not None:
        cfg = replace(cfg, seed=int(default_seed))
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc

    schema = _schema(cfg)
    values = {section: {} for section in schema}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(
                f"{path}: unknown section [{section}] (valid: {', '.join(schema)})"
            )
        for key, raw in parser.items(section):
            if key not in schema[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
            kind, _ = schema[section][key]
            values[section][key] = _parse(kind, raw, f"{path} [{section}] {key}")
    return _apply(cfg, values)


def _apply(cfg: RunConfig, values: dict) -> RunConfig:
    sim = values.get("sim", {})
    geometry_keys = {"body_length", "body_width", "abduction_link", "upper_leg",
                     "lower_leg", "joint_limit"}
    contact_keys = {
        "contact_stiffness": "normal_stiffness",
        "contact_damping": "normal_damping",
        "friction": "friction",
        "tangential_stiffness": "tangential_stiffness",
        "tangential_damping": "tangential_damping",
    }
    world_keys = {"servo_time_constant", "servo_rate_limit", "dt", "contact_threshold",
                  "stand_height", "domain_randomization", "mass_variation",
                  "friction_min", "friction_max", "servo_variation"}

    world = cfg.world
    robot = world.robot
    inertia = robot.inertia.copy()
    for axis, key in enumerate(("inertia_xx", "inertia_yy", "inertia_zz")):
        if key in sim:
            inertia[axis, axis] = sim[key]
    robot = RobotParams(mass=sim.get("mass", robot.mass), inertia=inertia)
    try:
        geometry = LegGeometry(
            **{k: sim.get(k, getattr(world.geometry, k)) for k in sorted(geometry_keys)}
        )
        contact = replace(
            world.contact, **{v: sim[k] for k, v in contact_keys.items() if k in sim}
        )
        world = replace(
            world,
            robot=robot,
            geometry=geometry,
            contact=contact,
            **{k: sim[k] for k in world_keys if k in sim},
        )
        gait = replace(cfg.gait, **values.get("gait", {}))
        limits = replace(cfg.action_limits, **values.get("policy", {}))
        ars = replace(cfg.ars, **values.get("ars", {}))
        harness = replace(cfg.harness, **values.get("harness", {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        seed=values.get("run", {}).get("seed", cfg.seed),
        world=world,
        gait=gait,
        action_limits=limits,
        ars=ars,
        harness=harness,
    )


def write_effective_config(cfg: RunConfig, path) -> None:
    """Echo every effective key (merged defaults + overrides) as INI."""
    parser = configparser.ConfigParser()
    for section, items in _schema(cfg).items():
        parser[section] = {}
        for key, (kind, value) in items.items():
            if kind == "float":
                parser[section][key] = repr(float(value))
            else:
                parser[section][key] = str(value)
    with open(path, "w") as f:
        parser.write(f)
