"""Repairing a DMP from a corrective demonstration.

The deficient trajectory is cut at the sample closest to where the retained
correction begins; that prefix is smoothed so it lands on the correction with
matching direction, the correction is appended, and a new DMP is fitted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import dmp as dmp_mod
from .errors import NumericError
from .trajectory import Trajectory

DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class CorrectionInput:
    deficient: Trajectory
    corrective_retained: Trajectory
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        yd, ycr = self.deficient, self.corrective_retained
        if yd.n_channels != ycr.n_channels:
            raise ValueError("deficient and corrective trajectories differ in channel count")
        if not np.isclose(yd.dt, ycr.dt, rtol=1e-9, atol=0):
            raise ValueError("deficient and corrective trajectories differ in sample period")
        if ycr.n_samples < 2:
            raise ValueError("the retained correction needs at least two samples")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")


@dataclass(frozen=True)
class MergeResult:
    merged: Trajectory
    split_index: int  # length of the retained deficient prefix
    modified_prefix: Trajectory


def find_split(y_d: Trajectory, y_cr_first) -> int:
    """Length ``M`` of the deficient prefix to keep.

    The prefix ends at the deficient sample nearest (Euclidean) to the first
    retained corrective sample; the earliest such sample wins a tie.
    """
    target = np.atleast_1d(np.asarray(y_cr_first, dtype=float))
    dist = np.linalg.norm(y_d.samples - target[None, :], axis=1)
    return int(np.argmin(dist)) + 1  # argmin returns the first minimum


def second_difference(m: int) -> np.ndarray:
    """The (m-2) x m interior second-difference operator."""
    if m < 3:
        raise ValueError("second difference needs at least 3 samples")
    d2 = np.zeros((m - 2, m))
    idx = np.arange(m - 2)
    d2[idx, idx] = 1.0
    d2[idx, idx + 1] = -2.0
    d2[idx, idx + 2] = 1.0
    return d2


def smoothing_objective(y_dr: np.ndarray, y_m: np.ndarray, lam: float) -> float:
    """Squared fidelity plus lambda times squared curvature, summed over channels."""
    y_dr = np.asarray(y_dr, dtype=float).reshape(len(y_dr), -1)
    y_m = np.asarray(y_m, dtype=float).reshape(len(y_m), -1)
    d2 = np.diff(y_m, n=2, axis=0)
    return float(np.sum((y_dr - y_m) ** 2) + lam * np.sum(d2**2))


def smooth_prefix(y_dr: Trajectory, y_cr: Trajectory, lam: float = DEFAULT_LAMBDA) -> Trajectory:
    """Bend the retained prefix so it ends on the correction's first sample
    with the correction's initial step.

    Minimises ``|y_dr - y_m|^2 + lam * |D2 y_m|^2`` subject to the two
    terminal equalities, by solving the KKT system once for all channels.
    """
    m = y_dr.n_samples
    if m < 3:
        raise ValueError(f"retained prefix has {m} samples; smoothing needs at least 3")
    if not lam >= 0:
        raise ValueError("lambda must be non-negative")
    a = y_cr.samples[0]
    d = y_cr.samples[1] - y_cr.samples[0]

    d2 = second_difference(m)
    h = 2.0 * (np.eye(m) + lam * d2.T @ d2)
    c = np.zeros((2, m))
    c[0, m - 1] = 1.0
    c[1, m - 1], c[1, m - 2] = 1.0, -1.0
    kkt = np.block([[h, c.T], [c, np.zeros((2, 2))]])
    rhs = np.vstack([2.0 * y_dr.samples, a[None, :], d[None, :]])
    try:
        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"KKT system could not be solved: {exc}") from exc
    y_m = sol[:m]
    if not np.all(np.isfinite(y_m)):
        raise NumericError("KKT solution is not finite")
    # strip solver round-off on the two pinned samples
    y_m[m - 1] = a
    y_m[m - 2] = a - d
    return Trajectory(y_m, y_dr.dt)


def merge(inp: CorrectionInput) -> MergeResult:
    y_d, y_cr = inp.deficient, inp.corrective_retained
    m = find_split(y_d, y_cr.samples[0])
    y_dr = Trajectory(y_d.samples[:m], y_d.dt)
    y_m = smooth_prefix(y_dr, y_cr, inp.lam)
    # y_m already ends on the first corrective sample
    merged = np.vstack([y_m.samples, y_cr.samples[1:]])
    return MergeResult(Trajectory(merged, y_d.dt), m, y_m)


def merge_and_refit(
    inp: CorrectionInput,
    tau: float | None = None,
    n_basis: int = dmp_mod.DEFAULT_N_BASIS,
    alpha_z: float = dmp_mod.DEFAULT_ALPHA_Z,
    alpha_x: float = dmp_mod.DEFAULT_ALPHA_X,
):
    """Merge and fit one DMP to the result; ``tau`` defaults to its duration."""
    result = merge(inp)
    new = dmp_mod.fit(result.merged, tau, n_basis, alpha_z, alpha_x)
    return result, new
