"""Synthetic torque transients, window extraction, window-length search and
streaming detection with a trained :class:`~dmpkit.rnn.RnnModel`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rnn
from .errors import InputFileError
from .trajectory import Trajectory, read_csv, write_csv

DEFAULT_DT = 0.004
REFRACTORY = 0.5  # s
MAX_WINDOW = 30
SWEEP_R = 20
FINAL_R = 100
NOISE_AR = 0.5  # lag-one correlation of the coloured baseline noise


@dataclass
class Recording:
    torque: Trajectory
    peaks: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SynthConfig:
    n_recordings: int = 50
    dt: float = DEFAULT_DT
    duration: float = 6.0
    noise_std: float = 1.0
    transient_amp: float = 10.0
    transient_len: int = 12  # samples spanned by the two damped cycles
    n_ch: int = rnn.DEFAULT_N_CH
    seed: int = 0
    with_transient: bool = True
    # seed of the per-channel transient signature; defaults to ``seed``
    signature_seed: int | None = None


def transient_shape(length: int) -> np.ndarray:
    """Damped cosine, two cycles over ``length`` samples, peaking at sample 0."""
    k = np.arange(length)
    return np.exp(-3.0 * k / length) * np.cos(2.0 * np.pi * 2.0 * k / length)


def _coloured_noise(rng, n: int, n_ch: int, std: float) -> np.ndarray:
    innov = rng.standard_normal((n, n_ch)) * std * math.sqrt(1.0 - NOISE_AR**2)
    out = np.empty((n, n_ch))
    out[0] = rng.standard_normal(n_ch) * std
    for i in range(1, n):
        out[i] = NOISE_AR * out[i - 1] + innov[i]
    return out


def synth_transients(config: SynthConfig = SynthConfig()) -> list[Recording]:
    """Slow-ramp baselines with coloured noise and one transient each.

    The transient has a fixed per-channel signature across the data set,
    jittered by +-20 % per recording.
    The transient peak lands in the last quarter of the recording, leaving
    the earlier part as transient-free material for negative windows.
    """
    if config.transient_amp < 0 or config.noise_std < 0:
        raise ValueError("amplitudes must be non-negative")
    if config.transient_len < 1:
        raise ValueError("transient_len must be at least 1")
    rng = np.random.default_rng(config.seed)
    sig_seed = config.seed if config.signature_seed is None else config.signature_seed
    sig_rng = np.random.default_rng([sig_seed, 1])
    n = int(round(config.duration / config.dt)) + 1
    shape = transient_shape(config.transient_len)
    # one joint-torque signature per data set, as for a fixed robot pose
    signature = sig_rng.uniform(0.5, 1.0, config.n_ch) * sig_rng.choice([-1.0, 1.0], config.n_ch)
    out = []
    for _ in range(config.n_recordings):
        offset = rng.uniform(-1.0, 1.0, config.n_ch) * config.noise_std
        slope = rng.uniform(-1.0, 1.0, config.n_ch) * config.noise_std
        ramp = offset + np.linspace(0.0, 1.0, n)[:, None] * slope
        x = ramp + _coloured_noise(rng, n, config.n_ch, config.noise_std)
        gains = signature * rng.uniform(0.8, 1.2, config.n_ch)
        peak = int(rng.integers(int(0.75 * n), n - config.transient_len - MAX_WINDOW))
        peaks = []
        if config.with_transient:
            seg = slice(peak, peak + config.transient_len)
            x[seg] += config.transient_amp * shape[:, None] * gains[None, :]
            peaks = [peak]
        out.append(Recording(Trajectory(x, config.dt), peaks))
    return out


def positive_window(torque: np.ndarray, peak: int, n_pre: int, n_post: int):
    lo, hi = peak - n_pre, peak + n_post + 1
    if lo < 0 or hi > len(torque):
        return None
    return torque[lo:hi]


def negative_windows(torque: np.ndarray, peak: int, n_pre: int, n_post: int, count: int) -> list[np.ndarray]:
    """Up to ``count`` non-overlapping windows tiled backwards from the
    start of the positive window, nearest first."""
    T = n_pre + 1 + n_post
    end = peak - n_pre
    wins = []
    while len(wins) < count and end - T >= 0:
        wins.append(torque[end - T : end])
        end -= T
    return wins


def build_dataset(recordings, n_pre: int, n_post: int, r: float = SWEEP_R) -> rnn.LabeledDataset:
    """All positives plus ``r`` negatives per positive (fewer if a recording
    is too short); the dataset's ``r`` is the ratio actually achieved."""
    T = n_pre + 1 + n_post
    per = int(round(r))
    xs, ys = [], []
    for rec in recordings:
        s = rec.torque.samples
        for p in rec.peaks:
            pos = positive_window(s, p, n_pre, n_post)
            if pos is None:
                continue
            xs.append(pos)
            ys.append(rnn.POSITIVE)
            for neg in negative_windows(s, p, n_pre, n_post, per):
                xs.append(neg)
                ys.append(rnn.NEGATIVE)
    n_ch = recordings[0].torque.n_channels if recordings else rnn.DEFAULT_N_CH
    X = np.array(xs).reshape(-1, T, n_ch)
    Y = np.array(ys).reshape(-1, 2)
    n_pos = int(Y[:, 0].sum()) if len(Y) else 0
    ratio = (len(Y) - n_pos) / n_pos if n_pos and len(Y) > n_pos else 1.0
    return rnn.LabeledDataset(X, Y, ratio)


def split_half(recordings):
    """Alternate recordings between training and test, so that windows from
    one recording never straddle the split."""
    return list(recordings[0::2]), list(recordings[1::2])


@dataclass
class SweepRow:
    n_pre: int
    n_post: int
    r: float
    metrics: rnn.DetectorMetrics
    final: bool = False

    def as_dict(self) -> dict:
        return {"n_pre": self.n_pre, "n_post": self.n_post, "r": self.r, **self.metrics.as_dict(), "final": self.final}


@dataclass
class SweepResult:
    n_pre: int
    n_post: int
    model: rnn.RnnModel
    rows: list[SweepRow]
    perfect: bool


def train_and_score(train_recs, test_recs, n_pre, n_post, r, config: rnn.TrainConfig):
    train_set = build_dataset(train_recs, n_pre, n_post, r)
    test_set = build_dataset(test_recs, n_pre, n_post, r)
    result = rnn.train(train_set, config, n_pre, n_post)
    return result.model, rnn.evaluate(result.model, test_set), train_set.r


def sweep_window(
    recordings,
    r: float = SWEEP_R,
    final_r: float = FINAL_R,
    max_window: int = MAX_WINDOW,
    config: rnn.TrainConfig = rnn.TrainConfig(),
    log=None,
) -> SweepResult:
    """Search for the shortest windows that classify the test half perfectly.

    Both lengths grow together from 1 until the test F1 reaches 1 (or the
    cap), then ``n_post`` shrinks one step at a time until performance
    drops and the last perfect value is kept. The chosen pair is retrained
    with ``final_r`` negatives per positive. ``perfect`` is False when F1 = 1
    was never reached; the best pair seen is used instead.
    """
    train_recs, test_recs = split_half(recordings)
    if not train_recs or not test_recs:
        raise ValueError("need at least two recordings")
    rows: list[SweepRow] = []

    def score(n_pre, n_post):
        model, m, ratio = train_and_score(train_recs, test_recs, n_pre, n_post, r, config)
        rows.append(SweepRow(n_pre, n_post, ratio, m))
        if log:
            log(rows[-1])
        return model, m

    best = None
    chosen = None
    for k in range(1, max_window + 1):
        model, m = score(k, k)
        if best is None or m.f1 > best[2].f1:
            best = (k, k, m, model)
        if m.f1 == 1.0:
            chosen = (k, k)
            break

    perfect = chosen is not None
    if perfect:
        n_pre, n_post = chosen
        for cand in range(n_post - 1, -1, -1):
            _, m = score(n_pre, cand)
            if m.f1 < 1.0:
                break
            n_post = cand
    else:
        n_pre, n_post = best[0], best[1]

    final_model, m, ratio = train_and_score(train_recs, test_recs, n_pre, n_post, final_r, config)
    rows.append(SweepRow(n_pre, n_post, ratio, m, final=True))
    if log:
        log(rows[-1])
    return SweepResult(n_pre, n_post, final_model, rows, perfect)


def window_probabilities(model: rnn.RnnModel, stream: np.ndarray) -> np.ndarray:
    """Positive-class probability for the window ending at every sample;
    NaN where no full window exists yet."""
    s = np.asarray(stream, dtype=float)
    T = model.T
    out = np.full(len(s), np.nan)
    if len(s) < T:
        return out
    wins = np.lib.stride_tricks.sliding_window_view(s, T, axis=0)  # (n-T+1, n_ch, T)
    out[T - 1 :] = rnn.predict_proba(model, np.swapaxes(wins, 1, 2))[:, 0]
    return out


def detect_indices(model: rnn.RnnModel, stream: Trajectory, refractory: float = REFRACTORY, threshold: float = 0.5) -> list[int]:
    prob = window_probabilities(model, stream.samples)
    hold = int(round(refractory / stream.dt))
    hits, last = [], None
    for i in np.flatnonzero(prob > threshold):
        if last is None or i - last > hold:
            hits.append(int(i))
            last = i
    return hits


def detect_stream(model: rnn.RnnModel, stream: Trajectory, refractory: float = REFRACTORY, threshold: float = 0.5) -> list[float]:
    """Times (s, from the first sample) at which a transient is reported.

    The window ending at each sample is classified using only samples up to
    it; a report suppresses further ones for ``refractory`` seconds.
    """
    return [i * stream.dt for i in detect_indices(model, stream, refractory, threshold)]


def write_recordings(recordings, out_dir) -> list[Path]:
    """One ``rec_NNN.csv`` (``t,tau1..``) plus ``rec_NNN.json`` peak list each."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, rec in enumerate(recordings):
        path = out_dir / f"rec_{i:03d}.csv"
        names = [f"tau{k + 1}" for k in range(rec.torque.n_channels)]
        write_csv(rec.torque, path, names)
        path.with_suffix(".json").write_text(json.dumps({"peaks": rec.peaks}) + "\n")
        paths.append(path)
    return paths


def read_recording(path) -> Recording:
    path = Path(path)
    torque, _ = read_csv(path)
    side = path.with_suffix(".json")
    peaks = []
    if side.exists():
        try:
            peaks = [int(p) for p in json.loads(side.read_text())["peaks"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise InputFileError(f"{side}: bad peak list ({exc})") from exc
    return Recording(torque, peaks)


def read_recordings(data_dir) -> list[Recording]:
    paths = sorted(Path(data_dir).glob("*.csv"))
    if not paths:
        raise InputFileError(f"no recordings in {data_dir}")
    return [read_recording(p) for p in paths]
