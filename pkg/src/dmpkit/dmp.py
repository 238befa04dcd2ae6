"""Dynamical movement primitives: a critically damped spring toward a goal,
shaped by a phase-gated mixture of Gaussian basis functions.

The transformation system is integrated in first-order form,

    tau * dy/dt = z
    tau * dz/dt = alpha_z * (beta_z * (g - y) - z) + f(x)
    tau * dx/dt = -alpha_x * x

with explicit Euler steps, which is also how the phase is sampled when
weights are fitted so that fitting and rollout see the same clock.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .trajectory import Trajectory

DEFAULT_ALPHA_Z = 25.0
DEFAULT_ALPHA_X = 1.0
DEFAULT_N_BASIS = 30
# below this the normalised basis mixture is treated as zero
BASIS_UNDERFLOW = 1e-12
# width of each basis relative to the gap to its neighbour
WIDTH_FACTOR = 0.75


def basis_layout(n_basis: int, alpha_x: float = DEFAULT_ALPHA_X):
    """Centers evenly spaced in time over one time constant, and their widths."""
    if n_basis < 1:
        raise ValueError("n_basis must be at least 1")
    if n_basis == 1:
        return np.array([np.exp(-alpha_x / 2)]), np.array([0.5])
    centers = np.exp(-alpha_x * np.arange(n_basis) / (n_basis - 1))
    widths = np.empty(n_basis)
    widths[:-1] = np.abs(np.diff(centers)) * WIDTH_FACTOR
    widths[-1] = widths[-2]
    return centers, widths


@dataclass(frozen=True)
class Dmp:
    weights: np.ndarray  # (n_basis, n_channels)
    centers: np.ndarray
    widths: np.ndarray
    goal: np.ndarray
    start: np.ndarray
    tau: float
    alpha_z: float = DEFAULT_ALPHA_Z
    beta_z: float = field(default=None)
    alpha_x: float = DEFAULT_ALPHA_X

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        s = np.atleast_1d(np.asarray(self.widths, dtype=float))
        g = np.atleast_1d(np.asarray(self.goal, dtype=float))
        y0 = np.atleast_1d(np.asarray(self.start, dtype=float))
        beta_z = self.alpha_z / 4.0 if self.beta_z is None else float(self.beta_z)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("need at least one basis function")
        if s.shape != c.shape or np.any(s <= 0):
            raise ValueError("widths must be positive, one per center")
        if c.size > 1 and np.any(np.diff(c) >= 0):
            raise ValueError("centers must be strictly decreasing in phase")
        if g.shape != y0.shape or g.ndim != 1:
            raise ValueError("goal and start must be vectors of equal length")
        if w.shape != (c.size, g.size):
            raise ValueError(f"weights must have shape {(c.size, g.size)}, got {w.shape}")
        if not (self.tau > 0 and self.alpha_z > 0 and self.alpha_x > 0):
            raise ValueError("tau, alpha_z and alpha_x must be positive")
        if not np.isclose(beta_z, self.alpha_z / 4.0, rtol=1e-12, atol=0):
            raise ValueError("beta_z must equal alpha_z / 4 (critical damping)")
        for arr in (w, c, s, g, y0):
            if not np.all(np.isfinite(arr)):
                raise ValueError("DMP parameters must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", s)
        object.__setattr__(self, "goal", g)
        object.__setattr__(self, "start", y0)
        object.__setattr__(self, "beta_z", beta_z)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "alpha_z", float(self.alpha_z))
        object.__setattr__(self, "alpha_x", float(self.alpha_x))

    @property
    def n_basis(self) -> int:
        return self.centers.size

    @property
    def n_channels(self) -> int:
        return self.goal.size

    def with_goal(self, goal) -> "Dmp":
        return replace(self, goal=np.atleast_1d(np.asarray(goal, dtype=float)))

    def with_start(self, start) -> "Dmp":
        return replace(self, start=np.atleast_1d(np.asarray(start, dtype=float)))

    def with_tau(self, tau: float) -> "Dmp":
        return replace(self, tau=tau)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "goal": self.goal.tolist(),
            "start": self.start.tolist(),
            "tau": self.tau,
            "alpha_z": self.alpha_z,
            "beta_z": self.beta_z,
            "alpha_x": self.alpha_x,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dmp":
        keys = {"weights", "centers", "widths", "goal", "start", "tau", "alpha_z", "beta_z", "alpha_x"}
        missing = keys - d.keys()
        if missing:
            raise KeyError(f"missing DMP fields: {sorted(missing)}")
        return cls(**{k: d[k] for k in keys})

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Dmp":
        return cls.from_dict(json.loads(text))


def canonical_json(obj) -> str:
    """Sorted keys and shortest round-trip floats, so dumps are byte-stable."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


@dataclass(frozen=True)
class DmpState:
    x: float
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if not (self.x > 0):
            raise ValueError(f"phase must be positive, got {self.x}")


def initial_state(dmp: Dmp) -> DmpState:
    return DmpState(1.0, dmp.start.copy(), np.zeros(dmp.n_channels))


def basis_activations(dmp: Dmp, x: float) -> np.ndarray:
    """Gaussian activations of every basis function at phase ``x``."""
    if not x > 0:
        raise ValueError(f"phase must be positive, got {x}")
    return np.exp(-((x - dmp.centers) ** 2) / (2.0 * dmp.widths**2))


def forcing(dmp: Dmp, x: float, return_underflow: bool = False):
    """Forcing term per channel.

    Far outside the basis support the activation sum underflows; the forcing
    is then zero, and ``return_underflow=True`` reports that case.
    """
    psi = basis_activations(dmp, x)
    total = psi.sum()
    if total < BASIS_UNDERFLOW:
        f = np.zeros(dmp.n_channels)
        return (f, True) if return_underflow else f
    f = (psi @ dmp.weights) / total * x * (dmp.goal - dmp.start)
    return (f, False) if return_underflow else f


def phase_samples(n: int, dt: float, tau: float, alpha_x: float) -> np.ndarray:
    """Phase at the first ``n`` integration steps of size ``dt``."""
    decay = 1.0 - alpha_x * dt / tau
    if decay <= 0:
        raise ValueError("dt too large for the phase integrator (need dt < tau / alpha_x)")
    return decay ** np.arange(n)


def demo_derivatives(demo: Trajectory):
    """Velocity and acceleration of a demonstration by finite differences."""
    yd = np.gradient(demo.samples, demo.dt, axis=0)
    ydd = np.gradient(yd, demo.dt, axis=0)
    return yd, ydd


def forcing_target(demo: Trajectory, tau: float, alpha_z: float = DEFAULT_ALPHA_Z, beta_z: float | None = None) -> np.ndarray:
    """Forcing that would make the spring reproduce ``demo`` exactly."""
    beta_z = alpha_z / 4.0 if beta_z is None else beta_z
    y = demo.samples
    g = y[-1]
    yd, ydd = demo_derivatives(demo)
    return tau**2 * ydd - alpha_z * (beta_z * (g - y) - tau * yd)


def fit(
    demo: Trajectory,
    tau: float | None = None,
    n_basis: int = DEFAULT_N_BASIS,
    alpha_z: float = DEFAULT_ALPHA_Z,
    alpha_x: float = DEFAULT_ALPHA_X,
) -> Dmp:
    """Learn a DMP from a demonstration by locally weighted regression.

    ``tau`` defaults to the demonstration's duration. A channel whose start
    and goal coincide carries no forcing and gets zero weights.
    """
    if demo.n_samples < 3:
        raise ValueError("fitting needs at least 3 demonstration samples")
    if tau is None:
        tau = demo.duration
    if not tau > 0:
        raise ValueError("tau must be positive")
    centers, widths = basis_layout(n_basis, alpha_x)
    y = demo.samples
    y0, g = y[0], y[-1]
    f_target = forcing_target(demo, tau, alpha_z)

    x = phase_samples(demo.n_samples, demo.dt, tau, alpha_x)
    psi = np.exp(-((x[:, None] - centers[None, :]) ** 2) / (2.0 * widths[None, :] ** 2))

    weights = np.zeros((n_basis, demo.n_channels))
    for ch in range(demo.n_channels):
        span = g[ch] - y0[ch]
        if span == 0.0:
            warnings.warn(f"channel {ch}: start equals goal, forcing weights set to zero", RuntimeWarning, stacklevel=2)
            continue
        s = x * span
        num = psi.T @ (s * f_target[:, ch])
        den = psi.T @ (s * s)
        weights[:, ch] = np.divide(num, den, out=np.zeros(n_basis), where=den > 0)
    return Dmp(weights, centers, widths, g, y0, tau, alpha_z, alpha_z / 4.0, alpha_x)


def derivatives(dmp: Dmp, state: DmpState):
    """Time derivatives (dx, dy, dz) of the uncoupled system."""
    f = forcing(dmp, state.x)
    dz = (dmp.alpha_z * (dmp.beta_z * (dmp.goal - state.y) - state.z) + f) / dmp.tau
    dy = state.z / dmp.tau
    dx = -dmp.alpha_x * state.x / dmp.tau
    return dx, dy, dz


def step(dmp: Dmp, state: DmpState, dt: float) -> DmpState:
    """One explicit Euler step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dx, dy, dz = derivatives(dmp, state)
    return DmpState(state.x + dt * dx, state.y + dt * dy, state.z + dt * dz)


def rollout(dmp: Dmp, duration: float, dt: float, return_phase: bool = False):
    """Integrate from rest at the start position for ``duration`` seconds."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    n = int(round(duration / dt))
    ys = np.empty((n + 1, dmp.n_channels))
    xs = np.empty(n + 1)
    state = initial_state(dmp)
    ys[0], xs[0] = state.y, state.x
    for k in range(1, n + 1):
        state = step(dmp, state, dt)
        ys[k], xs[k] = state.y, state.x
    traj = Trajectory(ys, dt)
    return (traj, xs) if return_phase else traj
