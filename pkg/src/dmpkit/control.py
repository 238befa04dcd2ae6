"""Temporally coupled DMP execution with two-degree-of-freedom tracking.

The DMP acts as a reference generator whose clock slows down while the
measured position lags behind (adaptive time constant). A PD loop with
feedforward of the reference acceleration closes the loop around a plant
that accepts acceleration commands. Turning feedforward off and raising the
gains gives the classic high-gain PD scheme used for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dmp import Dmp, forcing

DEFAULT_VELOCITY_CUTOFF = 20.0  # rad/s


@dataclass(frozen=True)
class Gains:
    k_p: float = 25.0
    k_v: float = 10.0
    k_c: float = 1000.0
    alpha_e: float = 50.0
    feedforward_enabled: bool = True
    k_t: float = 0.0
    a_max: float = 10.0  # math.inf disables saturation

    def __post_init__(self):
        if not (self.k_p > 0 and self.k_v > 0 and self.alpha_e > 0):
            raise ValueError("k_p, k_v and alpha_e must be positive")
        if not self.k_c >= 0:
            raise ValueError("k_c must be non-negative")
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")

    @classmethod
    def proposed(cls, **overrides) -> "Gains":
        return replace(cls(), **overrides)

    @classmethod
    def legacy(cls, **overrides) -> "Gains":
        """High-gain PD without feedforward or saturation."""
        base = cls(k_p=1000.0, k_v=125.0, feedforward_enabled=False, k_t=0.0, a_max=math.inf)
        return replace(base, **overrides)

    @classmethod
    def legacy_low_gain(cls, **overrides) -> "Gains":
        """Feedback-only PD at the moderate gains of the proposed controller."""
        base = cls(k_p=25.0, k_v=10.0, feedforward_enabled=False, k_t=0.0, a_max=math.inf)
        return replace(base, **overrides)


@dataclass(frozen=True)
class CoupledState:
    x: float
    z: np.ndarray
    y_c: np.ndarray
    e: np.ndarray
    tau_a: float


@dataclass(frozen=True)
class ControlOutput:
    y_r_ddot: np.ndarray
    y_c_dot: np.ndarray
    y_c_ddot: np.ndarray
    saturated: bool


def initial_coupled_state(dmp: Dmp) -> CoupledState:
    d = dmp.n_channels
    return CoupledState(1.0, np.zeros(d), dmp.start.copy(), np.zeros(d), dmp.tau)


def adaptive_tau(tau: float, k_c: float, e) -> float:
    """tau * (1 + k_c * |e|^2)."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    return tau * (1.0 + k_c * float(e @ e))


def coupled_step(dmp: Dmp, st: CoupledState, y_a, y_a_dot_filtered, gains: Gains, dt: float):
    """Advance the coupled reference one control period.

    ``y_a`` is the measured position and ``y_a_dot_filtered`` the low-pass
    velocity estimate. Returns the new state and this period's command.
    """
    y_a = np.asarray(y_a, dtype=float)
    y_a_dot = np.asarray(y_a_dot_filtered, dtype=float)

    e_dot = gains.alpha_e * (y_a - st.y_c - st.e)
    e = st.e + dt * e_dot
    tau = dmp.tau
    tau_a = adaptive_tau(tau, gains.k_c, e)

    f = forcing(dmp, st.x)
    coupling = gains.k_t * e
    z_dot = (dmp.alpha_z * (dmp.beta_z * (dmp.goal - st.y_c) - st.z) + f + coupling) / tau_a
    y_c_dot = st.z / tau_a
    y_c_ddot = (z_dot * tau_a - 2.0 * tau * gains.k_c * st.z * float(e @ e_dot)) / tau_a**2

    acc = gains.k_p * (st.y_c - y_a) + gains.k_v * (y_c_dot - y_a_dot)
    if gains.feedforward_enabled:
        acc = acc + y_c_ddot
    clipped = np.clip(acc, -gains.a_max, gains.a_max)
    saturated = bool(np.any(clipped != acc))

    x_next = st.x - dt * dmp.alpha_x * st.x / tau_a
    new = CoupledState(x_next, st.z + dt * z_dot, st.y_c + dt * y_c_dot, e, tau_a)
    return new, ControlOutput(clipped, y_c_dot, y_c_ddot, saturated)


def closed_loop_poles(k_p: float, k_v: float) -> tuple[complex, complex]:
    """Roots of s^2 + k_v s + k_p, the double integrator under PD feedback."""
    disc = k_v * k_v - 4.0 * k_p
    if disc >= 0:
        r = math.sqrt(disc)
        return complex((-k_v - r) / 2.0), complex((-k_v + r) / 2.0)
    r = math.sqrt(-disc)
    return complex(-k_v / 2.0, -r / 2.0), complex(-k_v / 2.0, r / 2.0)


def crossover_frequency(k_p: float, k_v: float) -> float:
    """Gain crossover of L(s) = (k_v s + k_p) / s^2."""
    return math.sqrt((k_v**2 + math.sqrt(k_v**4 + 4.0 * k_p**2)) / 2.0)


def delay_margin(gains_or_kp, k_v: float | None = None) -> float:
    """Largest loop delay (seconds) the PD-controlled double integrator tolerates.

    Accepts either a :class:`Gains` or the two gains as numbers.
    """
    if isinstance(gains_or_kp, Gains):
        k_p, k_v = gains_or_kp.k_p, gains_or_kp.k_v
    else:
        k_p = float(gains_or_kp)
    if not (k_p > 0 and k_v is not None and k_v > 0):
        raise ValueError("k_p and k_v must be positive")
    w_c = crossover_frequency(k_p, k_v)
    phase_margin = math.atan(k_v * w_c / k_p)
    return phase_margin / w_c


def velocity_filter(prev, y_a_dot_raw, cutoff: float = DEFAULT_VELOCITY_CUTOFF, dt: float = 0.004):
    """First-order low-pass step with exact discretisation of the pole."""
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    prev = np.asarray(prev, dtype=float)
    raw = np.asarray(y_a_dot_raw, dtype=float)
    return prev + (1.0 - math.exp(-cutoff * dt)) * (raw - prev)
