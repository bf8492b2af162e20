import numpy as np
import pytest

from quadtrain.config import ConfigError, default_config, load_config, write_effective_config


def write(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg.seed == 0
    assert cfg.world.robot.mass == pytest.approx(2.915)
    assert cfg.world.robot.weight == pytest.approx(28.6, abs=0.01)
    assert cfg.gait.cycle_period == 0.4
    assert cfg.ars.n_rollouts == 16
    assert cfg.ars.learning_rate == 0.03
    assert cfg.ars.exploration_noise == 0.05
    assert cfg.ars.episode_steps == 5000
    assert cfg.harness.survival_max_steps == 50000


def test_file_overrides_reach_every_section(tmp_path):
    path = write(
        tmp_path,
        """
[run]
seed = 42

[sim]
mass = 3.1
inertia_yy = 0.04
upper_leg = 0.11
friction = 0.7
domain_randomization = false

[gait]
step_length = 0.05

[policy]
clearance_max = 0.08

[ars]
n_rollouts = 8
top_b = 4

[harness]
episodes_per_policy = 7
""",
    )
    cfg = load_config(path)
    assert cfg.seed == 42
    assert cfg.world.robot.mass == 3.1
    assert cfg.world.robot.inertia[1, 1] == 0.04
    assert cfg.world.geometry.upper_leg == 0.11
    assert cfg.world.contact.friction == 0.7
    assert cfg.world.domain_randomization is False
    assert cfg.gait.step_length == 0.05
    assert cfg.action_limits.clearance_max == 0.08
    assert cfg.ars.n_rollouts == 8 and cfg.ars.top_b == 4
    assert cfg.harness.episodes_per_policy == 7
    # untouched keys keep defaults
    assert cfg.world.geometry.lower_leg == 0.10
    assert cfg.gait.cycle_period == 0.4


def test_unknown_section_rejected(tmp_path):
    path = write(tmp_path, "[rocket]\nthrust = 9000\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)


def test_unknown_key_rejected(tmp_path):
    path = write(tmp_path, "[gait]\nstride_hz = 2\n")
    with pytest.raises(ConfigError, match="unknown key 'stride_hz'"):
        load_config(path)


def test_bad_value_rejected(tmp_path):
    path = write(tmp_path, "[sim]\nmass = heavy\n")
    with pytest.raises(ConfigError, match="cannot parse float"):
        load_config(path)
    path = write(tmp_path, "[sim]\ndomain_randomization = maybe\n")
    with pytest.raises(ConfigError, match="cannot parse bool"):
        load_config(path)


def test_constraint_violations_become_config_errors(tmp_path):
    path = write(tmp_path, "[gait]\nduty_factor = 1.5\n")
    with pytest.raises(ConfigError, match="duty_factor"):
        load_config(path)
    path = write(tmp_path, "[ars]\nn_rollouts = 15\n")
    with pytest.raises(ConfigError, match="even rollout count"):
        load_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_default_seed_parameter(tmp_path):
    assert load_config(None, default_seed=7).seed == 7
    path = write(tmp_path, "[run]\nseed = 3\n")
    assert load_config(path, default_seed=7).seed == 3  # file outranks env default


def test_effective_config_round_trip(tmp_path):
    src = write(
        tmp_path,
        "[run]\nseed = 5\n\n[sim]\nmass = 3.0\n\n[gait]\nclearance_height = 0.04\n",
    )
    cfg = load_config(src)
    echo1 = tmp_path / "effective1.ini"
    write_effective_config(cfg, echo1)
    cfg2 = load_config(echo1)
    echo2 = tmp_path / "effective2.ini"
    write_effective_config(cfg2, echo2)
    assert echo1.read_bytes() == echo2.read_bytes()
    assert cfg2.seed == 5
    assert cfg2.world.robot.mass == 3.0
    assert cfg2.gait.clearance_height == 0.04
    assert np.array_equal(cfg2.world.robot.inertia, cfg.world.robot.inertia)


def test_effective_config_lists_every_key(tmp_path):
    cfg = default_config()
    echo = tmp_path / "effective.ini"
    write_effective_config(cfg, echo)
    text = echo.read_text()
    for key in ("mass", "contact_stiffness", "step_length", "delta_max",
                "n_rollouts", "episodes_per_policy", "seed", "stand_height"):
        assert key in text
