import math

from quadtrain.ars import TrainRecord
from quadtrain.gait import GaitParams
from quadtrain.harness import EpisodeRecord, run_disturbance, verify_grf
from quadtrain.plots import (
    save_disturbance_timeseries,
    save_grf_bars,
    save_survival_distances,
    save_training_curve,
)
from quadtrain.policy import ObservationVariant, zero_policy
from quadtrain.sim import WorldConfig


def test_training_curve_png(tmp_path):
    records = [
        TrainRecord(1, -2.0, -1.0, -3.0, 0.1),
        TrainRecord(2, -1.5, -0.8, -2.5, 0.2),
        TrainRecord(3, -1.2, -0.6, -2.0, 0.3),
    ]
    a = tmp_path / "curve_a.png"
    b = tmp_path / "curve_b.png"
    save_training_curve(records, a)
    save_training_curve(records, b)
    assert a.stat().st_size > 1000
    assert a.read_bytes() == b.read_bytes()  # deterministic rendering


def test_survival_distances_png(tmp_path):
    records = [
        EpisodeRecord("p1", "survival", i, float(i), 100, "timed_out", True)
        for i in range(5)
    ] + [
        EpisodeRecord("p2", "survival", i, 5.0 - i, 100, "fell", False)
        for i in range(5)
    ]
    path = tmp_path / "distances.png"
    save_survival_distances(records, path)
    assert path.stat().st_size > 1000


def test_disturbance_png(tmp_path):
    report = run_disturbance(
        zero_policy(ObservationVariant.IMU), WorldConfig(), GaitParams(),
        ball_time=0.5, duration=1.2, master_seed=1,
    )
    path = tmp_path / "disturbance.png"
    save_disturbance_timeseries(report.trace, report.ball_time, path)
    assert path.stat().st_size > 1000


def test_grf_bars_png(tmp_path):
    report = verify_grf(WorldConfig(), math.radians(5.0))
    path = tmp_path / "grf.png"
    save_grf_bars(report, path)
    assert path.stat().st_size > 1000
