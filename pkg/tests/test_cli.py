import os

import pytest

from quadtrain.cli import main
from quadtrain.policy import ObservationVariant, save_policy, zero_policy

DESK_INI = """
[ars]
episode_steps = 120
checkpoint_every = 5

[harness]
disturbance_duration_s = 1.5
ball_time_s = 0.5
settle_steps = 400
"""


@pytest.fixture
def desk_config(tmp_path):
    path = tmp_path / "desk.ini"
    path.write_text(DESK_INI)
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def policy_file(tmp_path, variant=ObservationVariant.IMU, name="p.policy"):
    path = tmp_path / name
    save_policy(zero_policy(variant), path)
    return str(path)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_policy_with_variant_header(tmp_path, desk_config):
    out = tmp_path / "run"
    code = run_cli(
        "train", "--variant", "imu", "--epochs", "1", "--terrain", "flat",
        "--config", desk_config, "--seed", "1", "--out", str(out), "--no-plots",
    )
    assert code == 0
    header = (out / "policy_final.policy").read_text().splitlines()[0]
    assert header == "12 14 imu"
    assert (out / "curve.csv").exists()
    assert (out / "effective_config.ini").exists()


def test_train_imu_force_header(tmp_path, desk_config):
    out = tmp_path / "run"
    code = run_cli(
        "train", "--variant", "imu_force", "--epochs", "1", "--terrain", "flat",
        "--config", desk_config, "--seed", "1", "--out", str(out), "--no-plots",
    )
    assert code == 0
    header = (out / "policy_final.policy").read_text().splitlines()[0]
    assert header == "24 14 imu_force"


def test_unknown_variant_exits_2_listing_tags(capsys):
    with pytest.raises(SystemExit) as info:
        run_cli("train", "--variant", "gps", "--epochs", "1")
    assert info.value.code == 2
    err = capsys.readouterr().err
    for tag in ("imu", "imu_contacts", "imu_force"):
        assert tag in err


def test_train_determinism_byte_identical(tmp_path, desk_config):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run_cli(
            "train", "--variant", "imu", "--epochs", "2", "--terrain", "flat",
            "--config", desk_config, "--seed", "11", "--out", str(out), "--no-plots",
        )
        outs.append(out)
    assert (outs[0] / "policy_final.policy").read_bytes() == (outs[1] / "policy_final.policy").read_bytes()
    assert (outs[0] / "curve.csv").read_bytes() == (outs[1] / "curve.csv").read_bytes()


def test_train_jobs_do_not_change_outputs(tmp_path, desk_config):
    outs = []
    for name, jobs in (("j1", "1"), ("j2", "2")):
        out = tmp_path / name
        run_cli(
            "train", "--variant", "imu", "--epochs", "1", "--terrain", "flat",
            "--config", desk_config, "--seed", "4", "--out", str(out),
            "--jobs", jobs, "--no-plots",
        )
        outs.append(out)
    assert (outs[0] / "policy_final.policy").read_bytes() == (outs[1] / "policy_final.policy").read_bytes()
    assert (outs[0] / "curve.csv").read_bytes() == (outs[1] / "curve.csv").read_bytes()


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_empty_glob_exits_4_without_output(tmp_path, capsys):
    out = tmp_path / "never"
    code = run_cli(
        "eval", "--scenario", "survival", "--policies", str(tmp_path / "nope*.policy"),
        "--out", str(out), "--no-plots",
    )
    assert code == 4
    assert not out.exists()


def test_eval_survival_writes_tables(tmp_path, desk_config):
    pol = policy_file(tmp_path)
    out = tmp_path / "ev"
    code = run_cli(
        "eval", "--scenario", "survival", "--policies", pol,
        "--terrain-height", "0.05", "--episodes", "2", "--max-steps", "150",
        "--config", desk_config, "--seed", "5", "--out", str(out), "--no-plots",
    )
    assert code == 0
    lines = (out / "episodes.csv").read_text().splitlines()
    assert lines[0] == "policy,scenario,seed,distance_m,steps,outcome,alive"
    assert len(lines) == 1 + 2
    assert (out / "survival_table.csv").exists()


def test_eval_unreadable_policy_exits_4(tmp_path, desk_config):
    good = policy_file(tmp_path, name="good.policy")
    bad = tmp_path / "bad.policy"
    bad.write_text("not a policy\n")
    out = tmp_path / "ev"
    code = run_cli(
        "eval", "--scenario", "survival", "--policies", str(tmp_path / "*.policy"),
        "--terrain-height", "0.0", "--episodes", "1", "--max-steps", "100",
        "--config", desk_config, "--out", str(out), "--no-plots",
    )
    assert code == 4
    # the readable policy still ran (listed and skipped semantics)
    assert (out / "episodes.csv").exists()
    assert good in (out / "episodes.csv").read_text()


def test_eval_disturbance_outputs(tmp_path, desk_config):
    pol = policy_file(tmp_path)
    out = tmp_path / "dist"
    code = run_cli(
        "eval", "--scenario", "disturbance", "--policies", pol,
        "--ball-time", "0.5", "--config", desk_config, "--seed", "2",
        "--out", str(out), "--no-plots",
    )
    assert code == 0
    assert (out / "timeseries.csv").read_text().splitlines()[0] == "t,roll,pitch,x,y"
    assert "peak_roll_rad" in (out / "peaks.txt").read_text()


def test_eval_slope_table_and_reference(tmp_path, desk_config):
    pol = policy_file(tmp_path)
    out = tmp_path / "slope"
    code = run_cli(
        "eval", "--scenario", "slope", "--policies", pol,
        "--angle", "8", "--direction", "up", "--episodes", "1",
        "--max-steps", "100", "--config", desk_config, "--out", str(out),
        "--no-plots", "--compare-reference",
    )
    assert code == 0
    text = (out / "comparison.txt").read_text()
    assert "reference" in text and "0-1" in text


def test_eval_heights_writes_both_tables(tmp_path, desk_config):
    pol = policy_file(tmp_path)
    out = tmp_path / "heights"
    code = run_cli(
        "eval", "--scenario", "heights", "--policies", pol,
        "--episodes", "1", "--max-steps", "100",
        "--config", desk_config, "--out", str(out), "--no-plots",
    )
    assert code == 0
    names = sorted(os.listdir(out))
    assert any(n.startswith("episodes_h0p104") for n in names)
    assert any(n.startswith("episodes_h0p128") for n in names)
    header = (out / "episodes_h0p128.csv").read_text().splitlines()[0]
    assert header.endswith("trained_height,deployed_height")


def test_eval_rejects_extreme_angle(tmp_path, desk_config):
    pol = policy_file(tmp_path)
    with pytest.raises(SystemExit) as info:
        run_cli(
            "eval", "--scenario", "slope", "--policies", pol, "--angle", "60",
            "--config", desk_config, "--out", str(tmp_path / "x"), "--no-plots",
        )
    assert info.value.code == 2


# ---------------------------------------------------------------------------
# verify-grf
# ---------------------------------------------------------------------------

def test_verify_grf_flat_passes(tmp_path, desk_config, capsys):
    out = tmp_path / "grf"
    code = run_cli(
        "verify-grf", "--incline", "0", "--config", desk_config,
        "--out", str(out), "--no-plots",
    )
    assert code == 0
    assert "status: pass" in capsys.readouterr().out
    assert (out / "grf_report.csv").exists()


def test_verify_grf_incline_5(tmp_path, desk_config, capsys):
    code = run_cli(
        "verify-grf", "--incline", "5", "--config", desk_config,
        "--out", str(tmp_path / "grf"), "--no-plots",
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "tilt 5." in out


def test_verify_grf_rejects_95_degrees(tmp_path):
    with pytest.raises(SystemExit) as info:
        run_cli("verify-grf", "--incline", "95", "--out", str(tmp_path / "x"))
    assert info.value.code == 2


# ---------------------------------------------------------------------------
# dump, config errors, env seed
# ---------------------------------------------------------------------------

def test_dump_writes_trajectory(tmp_path, desk_config):
    out = tmp_path / "dump"
    code = run_cli(
        "dump", "--steps", "60", "--terrain", "flat", "--config", desk_config,
        "--out", str(out), "--no-plots",
    )
    assert code == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("t,x,y,z,roll,pitch,yaw,")
    assert len(lines) == 1 + 60


def test_dump_unreadable_policy_exits_4(tmp_path):
    code = run_cli(
        "dump", "--policy", str(tmp_path / "absent.policy"),
        "--out", str(tmp_path / "x"), "--no-plots",
    )
    assert code == 4


def test_unknown_config_key_exits_2(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sim]\nwarp_drive = 1\n")
    code = run_cli(
        "verify-grf", "--incline", "0", "--config", str(bad),
        "--out", str(tmp_path / "x"), "--no-plots",
    )
    assert code == 2


def test_env_seed_is_lowest_precedence(tmp_path, desk_config, monkeypatch):
    monkeypatch.setenv("QUADTRAIN_SEED", "77")
    out_env = tmp_path / "env"
    run_cli("dump", "--steps", "5", "--config", desk_config, "--out", str(out_env), "--no-plots")
    assert "seed = 77" in (out_env / "effective_config.ini").read_text()
    out_flag = tmp_path / "flag"
    run_cli(
        "dump", "--steps", "5", "--config", desk_config, "--seed", "9",
        "--out", str(out_flag), "--no-plots",
    )
    assert "seed = 9" in (out_flag / "effective_config.ini").read_text()


def test_invalid_env_seed_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("QUADTRAIN_SEED", "banana")
    with pytest.raises(SystemExit) as info:
        run_cli("dump", "--steps", "5", "--out", str(tmp_path / "x"), "--no-plots")
    assert info.value.code == 2


def test_help_lists_flags(capsys):
    for argv, expected in [
        (["train", "--help"], ("--variant", "--epochs", "--jobs", "--resume", "--terrain")),
        (["eval", "--help"], ("--scenario", "--policies", "--terrain-height", "--compare-reference")),
        (["verify-grf", "--help"], ("--incline",)),
        (["dump", "--help"], ("--steps", "--policy")),
    ]:
        with pytest.raises(SystemExit) as info:
            run_cli(*argv)
        assert info.value.code == 0
        out = capsys.readouterr().out
        for flag in expected:
            assert flag in out
