"""Quadruped locomotion workbench.

Emulated per-foot contact and ground-reaction-force sensors over a
self-contained rigid-body trot simulator, linear gait-modulating
policies in three observation variants, an augmented-random-search
trainer, and a scripted evaluation battery.
"""

from .ars import ArsConfig, run_episode, step_reward, train
from .config import RunConfig, load_config
from .gait import GaitParams, GaitPhase, advance_phase, foot_trajectory, mix_actions
from .kinematics import (
    LEG_ORDER,
    LegGeometry,
    LegId,
    LegJointAngles,
    RigidTransform,
    contact_from_force,
    grf_to_base_frame,
    leg_chain_transform,
    leg_inverse_kinematics,
)
from .policy import (
    ActionLimits,
    ObservationVariant,
    PolicyMatrix,
    act,
    build_observation,
    load_policy,
    save_policy,
)
from .sim import (
    ContactModel,
    QuadrupedWorld,
    RobotParams,
    WorldConfig,
    check_termination,
    generate_rough_terrain,
    make_slope_course,
)

__version__ = "0.1.0"
