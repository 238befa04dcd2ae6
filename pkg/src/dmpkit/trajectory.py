"""Uniformly sampled multi-channel signals and their CSV representation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputFileError

# relative tolerance when checking that a CSV time column is uniform
_DT_RTOL = 1e-6


@dataclass(frozen=True)
class Trajectory:
    """A signal sampled every ``dt`` seconds.

    ``samples`` has shape ``(n_samples, n_channels)``; one-dimensional input
    is promoted to a single channel.
    """

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"samples must be a non-empty 2-D array, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("trajectory samples must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def __len__(self):
        return self.n_samples

    def __getitem__(self, idx):
        return self.samples[idx]


def write_csv(traj: Trajectory, path, header: list[str] | None = None) -> None:
    """Write ``t,ch0,...`` rows. ``header`` overrides the channel names."""
    names = header if header is not None else [f"ch{i}" for i in range(traj.n_channels)]
    if len(names) != traj.n_channels:
        raise ValueError("header length does not match channel count")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        for t, row in zip(traj.times, traj.samples):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def read_csv(path) -> tuple[Trajectory, list[str]]:
    """Read a trajectory CSV; returns the trajectory and its channel names.

    The time column must be uniformly spaced. A single-row file has no
    recoverable sample period and is rejected.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise InputFileError(f"{path}: need a header and at least two rows")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or len(header) < 2:
        raise InputFileError(f"{path}: header must start with 't' followed by channels")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InputFileError(f"{path}: non-numeric value ({exc})") from exc
    if data.shape[1] != len(header):
        raise InputFileError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise InputFileError(f"{path}: non-finite value")
    steps = np.diff(data[:, 0])
    dt = float((data[-1, 0] - data[0, 0]) / (len(data) - 1))
    if dt <= 0 or np.max(np.abs(steps - dt)) > _DT_RTOL * max(dt, 1.0):
        raise InputFileError(f"{path}: time column is not uniformly increasing")
    return Trajectory(data[:, 1:], dt), header[1:]
