"""Figure rendering for CLI reports. Everything writes straight to a file."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}
# no timestamps or version strings, so reruns give identical files
_METADATA = {"Software": None}


def figsize(scale: float = 1.0, rows: int = 1):
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    width = 6.0 * scale
    return width, width * golden * (0.55 + 0.45 * rows)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)


def plot_scenario(result, path, title: str | None = None):
    """Positions (uncoupled, coupled, actual) over the commanded acceleration,
    with the perturbation interval shaded."""
    with plt.rc_context(STYLE):
        fig, (ax_y, ax_a) = plt.subplots(2, 1, sharex=True, figsize=figsize(rows=2))
        t = result.t
        for ch in range(result.n_channels):
            sfx = f" ch{ch}" if result.n_channels > 1 else ""
            ax_y.plot(t, result.y_u[:, ch], "k--", label="$y_u$" + sfx)
            ax_y.plot(t, result.y_c[:, ch], "b", label="$y_c$" + sfx)
            ax_y.plot(t, result.y_a[:, ch], "r", alpha=0.8, label="$y_a$" + sfx)
            ax_a.plot(t, result.acc[:, ch], "g", label=r"$\ddot y_r$" + sfx)
        p = result.perturbation
        if p.kind.value != "none":
            for ax in (ax_y, ax_a):
                ax.axvspan(p.t_start, p.t_end, color="0.85", zorder=0)
        ax_y.set_ylabel("position [m]")
        ax_a.set_ylabel("acceleration [m/s$^2$]")
        ax_a.set_xlabel("time [s]")
        ax_y.legend(loc="lower right", ncol=3)
        if title:
            ax_y.set_title(title)
        _save(fig, path)


def plot_merge(deficient, corrective, merged, path):
    """First channel (or the first two as a path) of the three trajectories."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        two_d = merged.n_channels >= 2
        for traj, style, label in ((deficient, "r:", "deficient"), (corrective, "b--", "corrective"), (merged, "k", "merged")):
            s = traj.samples
            if two_d:
                ax.plot(s[:, 0], s[:, 1], style, label=label)
            else:
                ax.plot(traj.times, s[:, 0], style, label=label)
        ax.set_xlabel("ch0" if two_d else "time [s]")
        ax.set_ylabel("ch1" if two_d else "ch0")
        ax.legend()
        _save(fig, path)


def plot_trajectory(traj, path, reference=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        if reference is not None:
            ax.plot(reference.times, reference.samples, "k--", alpha=0.6)
        ax.plot(traj.times, traj.samples)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("position")
        _save(fig, path)


def plot_sweep(rows, path):
    """Test F1 for every window pair tried during the search."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        labels = [f"({r.n_pre},{r.n_post})" + ("*" if r.final else "") for r in rows]
        f1 = [r.metrics.f1 for r in rows]
        ax.bar(np.arange(len(rows)), f1, color=["tab:red" if r.final else "tab:blue" for r in rows])
        ax.set_xticks(np.arange(len(rows)), labels, rotation=45)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("$F_1$ (test)")
        ax.set_xlabel("$(n_{pre}, n_{post})$")
        _save(fig, path)


def plot_detection(stream, prob, hits, path, threshold: float = 0.5):
    with plt.rc_context(STYLE):
        fig, (ax_t, ax_p) = plt.subplots(2, 1, sharex=True, figsize=figsize(rows=2))
        t = stream.times
        ax_t.plot(t, stream.samples, linewidth=0.7)
        ax_t.set_ylabel("torque")
        ax_p.plot(t, prob, "k")
        ax_p.axhline(threshold, color="0.5", linestyle="--", label="decision boundary")
        for h in hits:
            ax_t.axvline(h, color="r", linestyle=":")
            ax_p.axvline(h, color="r", linestyle=":")
        ax_p.set_ylim(-0.05, 1.05)
        ax_p.set_ylabel(r"$\hat y_1$")
        ax_p.set_xlabel("time [s]")
        _save(fig, path)
