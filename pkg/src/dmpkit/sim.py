"""Fixed-rate simulation of a coupled DMP driving a double-integrator plant.

Each control period the controller reads a delayed, noisy position
measurement, estimates velocity by differencing and low-pass filtering, and
issues an acceleration command that the plant integrates. Scripted
perturbations either freeze the plant or push it along an offset profile.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import control, dmp as dmp_mod
from .errors import ConfigError
from .trajectory import Trajectory

DEFAULT_DT = 0.004
DEFAULT_DURATION = 10.0
DEFAULT_DELAY = 0.012
RECOVERY_BAND = 0.005  # m
RECOVERY_HOLD = 0.2  # s
PHASE_DONE = 0.01
DIVERGENCE_FACTOR = 10.0
# runs are cut short once the tracking error passes this many ranges
ABORT_FACTOR = 100.0


@dataclass(frozen=True)
class NoiseConfig:
    pos_meas_std: float = 0.001
    vel_proc_std: float = 0.001
    kinematic_bias_std: float = 0.001
    kinematic_bias_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("pos_meas_std", "vel_proc_std", "kinematic_bias_std"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.kinematic_bias_rate >= 0:
            raise ValueError("kinematic_bias_rate must be non-negative")

    @classmethod
    def off(cls, seed: int = 0) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.1, seed)


class Kind(str, Enum):
    NONE = "none"
    STOP = "stop"
    MOVE = "move"


@dataclass(frozen=True)
class Perturbation:
    """A scripted disturbance active on ``[t_start, t_end)``.

    For ``move`` the plant follows ``anchor + offset(t)`` where the anchor is
    its position at ``t_start``. The offset is ``profile`` (sampled from the
    perturbation start) when given, otherwise a half sine of ``amplitude`` in
    ``channel``.
    """

    kind: Kind = Kind.NONE
    t_start: float = 2.0
    t_end: float = 3.0
    amplitude: float = 0.05
    channel: int = 0
    profile: Trajectory | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is not Kind.NONE and not self.t_start < self.t_end:
            raise ValueError("perturbation must start before it ends")

    def active(self, t: float) -> bool:
        return self.kind is not Kind.NONE and self.t_start <= t < self.t_end

    def offset(self, t: float, n_channels: int):
        """Position and velocity offset relative to the anchor at time ``t``."""
        pos = np.zeros(n_channels)
        vel = np.zeros(n_channels)
        s = t - self.t_start
        if self.profile is not None:
            p = self.profile
            k = min(int(round(s / p.dt)), p.n_samples - 1)
            pos[:] = p.samples[k] - p.samples[0]
            if p.n_samples > 1:
                vel[:] = np.gradient(p.samples, p.dt, axis=0)[k]
            return pos, vel
        span = self.t_end - self.t_start
        pos[self.channel] = self.amplitude * math.sin(math.pi * s / span)
        vel[self.channel] = self.amplitude * math.pi / span * math.cos(math.pi * s / span)
        return pos, vel


class NoiseSource:
    """Measurement noise, process noise and a Gauss-Markov kinematic bias.

    Draws happen in a fixed order every step so that a seed fully determines
    the sequence regardless of which components are zero.
    """

    def __init__(self, cfg: NoiseConfig, n_channels: int, dt: float):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.phi = math.exp(-cfg.kinematic_bias_rate * dt)
        self.bias = cfg.kinematic_bias_std * self.rng.standard_normal(n_channels)
        self.n = n_channels

    def step(self):
        """Return (measurement noise, velocity process noise, current bias)."""
        cfg = self.cfg
        draws = self.rng.standard_normal((3, self.n))
        meas = cfg.pos_meas_std * draws[0]
        proc = cfg.vel_proc_std * draws[1]
        bias = self.bias
        self.bias = self.phi * bias + math.sqrt(1.0 - self.phi**2) * cfg.kinematic_bias_std * draws[2]
        return meas, proc, bias


@dataclass
class ScenarioResult:
    t: np.ndarray
    y_u: np.ndarray
    y_c: np.ndarray
    y_a: np.ndarray
    acc: np.ndarray
    tau_a: np.ndarray
    e: np.ndarray
    x: np.ndarray
    y_c_dot: np.ndarray
    y_c_ddot: np.ndarray
    measured: np.ndarray
    dt: float
    perturbation: Perturbation
    diverged: bool = False
    aborted: bool = False
    metrics: dict = field(default_factory=dict)

    @property
    def n_channels(self) -> int:
        return self.y_c.shape[1]

    def log_header(self) -> list[str]:
        d = self.n_channels
        names = ["y_u", "y_c", "y_a", "acc", "tau_a", "e"]
        cols = ["t"]
        for name in names:
            if name == "tau_a" or d == 1:
                cols.append(name)
            else:
                cols.extend(f"{name}{i}" for i in range(d))
        return cols

    def log_rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.y_u, self.y_c, self.y_a, self.acc, self.tau_a, self.e])


def delay_steps(delay: float, dt: float) -> int:
    ratio = delay / dt
    k = int(round(ratio))
    if delay < 0 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"delay {delay} s is not an integer multiple of dt {dt} s")
    return k


def run_scenario(
    dmp: dmp_mod.Dmp,
    gains: control.Gains,
    noise: NoiseConfig,
    pert: Perturbation,
    delay: float = DEFAULT_DELAY,
    dt: float = DEFAULT_DT,
    duration: float = DEFAULT_DURATION,
    velocity_cutoff: float | str | None = "auto",
) -> ScenarioResult:
    """Simulate one execution.

    ``velocity_cutoff`` is the low-pass cutoff (rad/s) applied to the
    differenced position measurement; ``None`` uses the raw difference and
    ``"auto"`` filters only when the configuration has measurement noise.
    """
    if velocity_cutoff == "auto":
        noisy = noise.pos_meas_std > 0 or noise.kinematic_bias_std > 0
        velocity_cutoff = control.DEFAULT_VELOCITY_CUTOFF if noisy else None
    if not dt > 0:
        raise ConfigError("dt must be positive")
    k_delay = delay_steps(delay, dt)
    n = int(round(duration / dt)) + 1
    d = dmp.n_channels
    src = NoiseSource(noise, d, dt)

    y_u = dmp_mod.rollout(dmp, (n - 1) * dt, dt).samples
    span = float(np.max(np.ptp(y_u, axis=0)))
    span = span if span > 0 else float(np.linalg.norm(dmp.goal - dmp.start)) or 1.0

    logs = {k: np.full((n, d), np.nan) for k in ("y_c", "y_a", "acc", "e", "y_c_dot", "y_c_ddot", "meas")}
    tau_log = np.full(n, np.nan)
    x_log = np.full(n, np.nan)

    st = control.initial_coupled_state(dmp)
    pos = dmp.start.copy()
    vel = np.zeros(d)
    anchor = None
    v_filt = np.zeros(d)
    prev_read = None
    diverged = aborted = False
    last = n - 1

    for i in range(n):
        t = i * dt
        if pert.active(t):
            if anchor is None:
                anchor = pos.copy()
            if pert.kind is Kind.STOP:
                pos, vel = anchor.copy(), np.zeros(d)
            else:
                off_p, off_v = pert.offset(t, d)
                pos, vel = anchor + off_p, off_v
        meas_noise, proc_noise, bias = src.step()
        logs["meas"][i] = pos + meas_noise + bias
        read = logs["meas"][max(i - k_delay, 0)]
        raw_vel = np.zeros(d) if prev_read is None else (read - prev_read) / dt
        prev_read = read
        if velocity_cutoff is None:
            v_filt = raw_vel
        else:
            v_filt = control.velocity_filter(v_filt, raw_vel, velocity_cutoff, dt)

        logs["y_c"][i] = st.y_c
        x_log[i] = st.x
        st, out = control.coupled_step(dmp, st, read, v_filt, gains, dt)
        logs["y_a"][i] = pos
        logs["acc"][i] = out.y_r_ddot
        logs["e"][i] = st.e
        logs["y_c_dot"][i] = out.y_c_dot
        logs["y_c_ddot"][i] = out.y_c_ddot
        tau_log[i] = st.tau_a

        err = float(np.linalg.norm(pos - logs["y_c"][i]))
        if not math.isfinite(err) or err > DIVERGENCE_FACTOR * span:
            diverged = True
        if not math.isfinite(err) or err > ABORT_FACTOR * span:
            aborted = True
            last = i
            break

        pos = pos + dt * vel
        vel = vel + dt * out.y_r_ddot + proc_noise

    sl = slice(0, last + 1)
    res = ScenarioResult(
        t=np.arange(last + 1) * dt,
        y_u=y_u[sl],
        y_c=logs["y_c"][sl],
        y_a=logs["y_a"][sl],
        acc=logs["acc"][sl],
        tau_a=tau_log[sl],
        e=logs["e"][sl],
        x=x_log[sl],
        y_c_dot=logs["y_c_dot"][sl],
        y_c_ddot=logs["y_c_ddot"][sl],
        measured=logs["meas"][sl],
        dt=dt,
        perturbation=pert,
        diverged=diverged,
        aborted=aborted,
    )
    res.metrics = metrics(res, y_u, dmp.goal, dmp)
    return res


def _phase_done_time(x: np.ndarray, dt: float) -> float:
    idx = np.flatnonzero(x < PHASE_DONE)
    return float(idx[0] * dt) if idx.size else math.nan


def metrics(result: ScenarioResult, y_u, g, dmp: dmp_mod.Dmp | None = None) -> dict:
    """Summary numbers for one run.

    ``recovery_time`` is measured from the end of the perturbation and is NaN
    without one (or when tracking never settles). ``slowdown_ratio`` compares
    the time for the phase to fall below 0.01 with the uncoupled clock and is
    NaN if the run ends first.
    """
    if result.t.size == 0:
        raise ValueError("empty log")
    g = np.atleast_1d(np.asarray(g, dtype=float))
    dt = result.dt
    out = {
        "max_accel": float(np.max(np.abs(result.acc))),
        "final_goal_error": float(np.linalg.norm(result.y_a[-1] - g)),
        "max_tracking_error": float(np.max(np.linalg.norm(result.y_a - result.y_c, axis=1))),
        "diverged": bool(result.diverged),
    }

    rec = math.nan
    p = result.perturbation
    if p.kind is not Kind.NONE:
        err = np.linalg.norm(result.y_a - result.y_c, axis=1)
        inside = err < RECOVERY_BAND
        hold = int(round(RECOVERY_HOLD / dt))
        start = int(math.ceil(p.t_end / dt - 1e-9))
        for i in range(start, len(inside) - hold + 1):
            if inside[i : i + hold + 1].all():
                rec = i * dt - p.t_end
                break
    out["recovery_time"] = float(rec)

    ratio = math.nan
    if dmp is not None:
        coupled = _phase_done_time(result.x, dt)
        n_u = math.ceil(math.log(PHASE_DONE) / math.log(1.0 - dmp.alpha_x * dt / dmp.tau))
        uncoupled = n_u * dt
        ratio = coupled / uncoupled
    out["slowdown_ratio"] = float(ratio)
    return out


def run_batch(jobs, max_workers: int | None = None) -> list[ScenarioResult]:
    """Run independent scenarios concurrently; results keep the input order.

    Each job is a mapping of keyword arguments for :func:`run_scenario`.
    """
    jobs = list(jobs)
    if max_workers == 1 or len(jobs) <= 1:
        return [run_scenario(**j) for j in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda j: run_scenario(**j), jobs))


def min_jerk(y0, g, duration: float, dt: float) -> Trajectory:
    """Rest-to-rest fifth-order polynomial from ``y0`` to ``g``."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    n = int(round(duration / dt)) + 1
    s = np.linspace(0.0, 1.0, n)[:, None]
    shape = 10 * s**3 - 15 * s**4 + 6 * s**5
    return Trajectory(y0 + (g - y0) * shape, dt)


def default_dmp(dt: float = DEFAULT_DT) -> dmp_mod.Dmp:
    """The primitive used by the built-in scenarios: 0.8 m in 3 s."""
    demo = min_jerk([0.0], [0.8], 3.0, dt)
    return dmp_mod.fit(demo, tau=3.0)
