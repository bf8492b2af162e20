"""Figure rendering for training curves and scenario reports.

Every eval/train command drops PNG figures next to its CSV output.  The
Agg backend keeps this headless, and PNG metadata is stripped so repeated
runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = dict(dpi=120, metadata={"Software": None})

VARIANT_COLORS = {"imu": "tab:blue", "imu_contacts": "tab:orange", "imu_force": "tab:green"}


def save_training_curve(records, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    epochs = [r.epoch for r in records]
    ax.plot(epochs, [r.mean_reward_per_step for r in records], label="mean", lw=1.5)
    ax.plot(epochs, [r.best for r in records], label="best", lw=0.8, alpha=0.7)
    ax.plot(epochs, [r.worst for r in records], label="worst", lw=0.8, alpha=0.7)
    ax.set_xlabel("epoch")
    ax.set_ylabel("reward per time step")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_survival_distances(records, path) -> None:
    """Sorted per-episode distances, one line per variant tag in the policy name."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    by_scenario = {}
    for rec in records:
        by_scenario.setdefault(rec.policy, []).append(rec.distance)
    for name, distances in sorted(by_scenario.items()):
        ax.plot(sorted(distances), marker=".", ms=3, lw=1.0, label=name)
    ax.set_xlabel("episode (sorted)")
    ax.set_ylabel("distance (m)")
    if len(by_scenario) <= 8:
        ax.legend(frameon=False, fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_disturbance_timeseries(rows, ball_time, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    t = [r[0] for r in rows]
    ax.plot(t, [r[1] for r in rows], label="roll", lw=1.0)
    ax.plot(t, [r[2] for r in rows], label="pitch", lw=1.0)
    if ball_time is not None:
        ax.axvline(ball_time, color="k", ls="--", lw=0.8, label="impact")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("angle (rad)")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_grf_bars(report, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    feet = ("FL", "FR", "BL", "BR")
    x = range(4)
    width = 0.25
    for k, (axis, label) in enumerate(zip(range(3), ("fx", "fy", "fz"))):
        ax.bar([i + (k - 1) * width for i in x], report.per_foot[:, axis], width, label=label)
    ax.set_xticks(list(x), feet)
    ax.set_ylabel("base-frame force (N)")
    ax.set_title(
        f"incline {report.incline_deg:.1f} deg: resultant {report.resultant:.2f} N, "
        f"tilt {report.tilt_deg:.2f} deg"
    )
    ax.legend(frameon=False)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
