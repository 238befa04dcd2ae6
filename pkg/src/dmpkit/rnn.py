"""Single-hidden-layer tanh RNN that labels a torque window as transient or not.

The hidden layer is as wide as the input (one unit per torque channel) and
only the final hidden state feeds the two-way softmax. Class 0 is
"transient present", class 1 is "no transient".
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dmp import canonical_json

LOG_CLAMP = 1e-12
INIT_SCALE = 0.1
DEFAULT_N_CH = 7
POSITIVE = np.array([1.0, 0.0])
NEGATIVE = np.array([0.0, 1.0])


@dataclass(frozen=True)
class RnnModel:
    U: np.ndarray
    W: np.ndarray
    V: np.ndarray
    b: np.ndarray
    c: np.ndarray
    n_pre: int
    n_post: int
    # per-channel input standardisation, applied before U
    mean: np.ndarray = None
    std: np.ndarray = None

    def __post_init__(self):
        n = np.asarray(self.U).shape[0]
        conv = {k: np.array(getattr(self, k), dtype=float) for k in ("U", "W", "V", "b", "c")}
        conv["mean"] = np.zeros(n) if self.mean is None else np.array(self.mean, dtype=float)
        conv["std"] = np.ones(n) if self.std is None else np.array(self.std, dtype=float)
        shapes = {"U": (n, n), "W": (n, n), "V": (2, n), "b": (n,), "c": (2,), "mean": (n,), "std": (n,)}
        for k, shape in shapes.items():
            if conv[k].shape != shape:
                raise ValueError(f"{k} must have shape {shape}, got {conv[k].shape}")
            if not np.all(np.isfinite(conv[k])):
                raise ValueError(f"{k} must be finite")
        if np.any(conv["std"] <= 0):
            raise ValueError("std must be positive")
        if self.n_pre < 0 or self.n_post < 0:
            raise ValueError("window lengths must be non-negative")
        for k, v in conv.items():
            object.__setattr__(self, k, v)
        object.__setattr__(self, "n_pre", int(self.n_pre))
        object.__setattr__(self, "n_post", int(self.n_post))

    @property
    def n_ch(self) -> int:
        return self.U.shape[0]

    @property
    def T(self) -> int:
        return self.n_pre + 1 + self.n_post

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_params(self, params: dict) -> "RnnModel":
        return replace(self, **params)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k).tolist() for k in (*PARAM_NAMES, "mean", "std")}
        d.update(n_pre=self.n_pre, n_post=self.n_post, n_ch=self.n_ch)
        return d

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RnnModel":
        required = {"U", "W", "V", "b", "c", "n_pre", "n_post", "n_ch"}
        missing = required - d.keys()
        if missing:
            raise KeyError(f"missing model fields: {sorted(missing)}")
        model = cls(d["U"], d["W"], d["V"], d["b"], d["c"], d["n_pre"], d["n_post"], d.get("mean"), d.get("std"))
        if model.n_ch != d["n_ch"]:
            raise ValueError("n_ch does not match the weight shapes")
        return model

    @classmethod
    def from_json(cls, text: str) -> "RnnModel":
        return cls.from_dict(json.loads(text))


PARAM_NAMES = ("U", "W", "V", "b", "c")


def init_model(n_pre: int, n_post: int, n_ch: int = DEFAULT_N_CH, rng=None, mean=None, std=None) -> RnnModel:
    """Parameters drawn uniformly from (-0.1, 0.1)."""
    rng = np.random.default_rng(rng)
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, shape)  # noqa: E731
    return RnnModel(u(n_ch, n_ch), u(n_ch, n_ch), u(2, n_ch), u(n_ch), u(2), n_pre, n_post, mean, std)


def softmax(o: np.ndarray) -> np.ndarray:
    z = o - o.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def _standardise(model: RnnModel, X: np.ndarray) -> np.ndarray:
    return (X - model.mean) / model.std


def _run(model: RnnModel, X: np.ndarray):
    """Batched forward pass; X is (batch, T, n_ch). Returns probabilities and hidden states."""
    X = _standardise(model, X)
    bsz, T, _ = X.shape
    H = np.empty((T, bsz, model.n_ch))
    h = np.tanh(model.b + X[:, 0] @ model.U.T)
    H[0] = h
    for t in range(1, T):
        h = np.tanh(model.b + h @ model.W.T + X[:, t] @ model.U.T)
        H[t] = h
    o = model.c + h @ model.V.T
    return softmax(o), H, X


def _check_shape(model: RnnModel, X: np.ndarray):
    if X.ndim != 3 or X.shape[1:] != (model.T, model.n_ch):
        raise ValueError(f"expected windows of shape (*, {model.T}, {model.n_ch}), got {X.shape}")


def forward(model: RnnModel, seq):
    """Probabilities and final hidden state for one (T, n_ch) window."""
    seq = np.asarray(seq, dtype=float)
    if seq.shape != (model.T, model.n_ch):
        raise ValueError(f"expected a ({model.T}, {model.n_ch}) window, got {seq.shape}")
    y_hat, H, _ = _run(model, seq[None])
    return y_hat[0], H[-1, 0]


def predict_proba(model: RnnModel, X, chunk: int = 4096) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    _check_shape(model, X)
    out = [_run(model, X[i : i + chunk])[0] for i in range(0, len(X), chunk)]
    return np.concatenate(out) if out else np.empty((0, 2))


@dataclass
class LabeledDataset:
    """Windows (batch, T, n_ch) with one-hot labels; ``r`` weights positives."""

    X: np.ndarray
    Y: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 3 or len(self.X) != len(self.Y):
            raise ValueError("X must be (batch, T, n_ch) with one label per window")
        if len(self.Y) and not np.all((self.Y == POSITIVE).all(axis=1) | (self.Y == NEGATIVE).all(axis=1)):
            raise ValueError("labels must be [1, 0] or [0, 1]")
        if not self.r > 0:
            raise ValueError("r must be positive")

    def __len__(self):
        return len(self.X)

    @property
    def n_positive(self) -> int:
        return int(self.Y[:, 0].sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.Y[idx], self.r)


def _sample_weights(Y: np.ndarray, r: float) -> np.ndarray:
    return Y @ np.array([r, 1.0])


def loss(model: RnnModel, batch: LabeledDataset) -> float:
    """Class-weighted cross-entropy averaged over the batch."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    _check_shape(model, batch.X)
    y_hat = predict_proba(model, batch.X)
    logp = np.log(np.maximum(y_hat, LOG_CLAMP))
    per = -(batch.Y * logp).sum(axis=1) * _sample_weights(batch.Y, batch.r)
    return float(per.mean())


def loss_and_gradients(model: RnnModel, batch: LabeledDataset):
    """Loss and its exact gradient with respect to U, W, V, b and c."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    _check_shape(model, batch.X)
    y_hat, H, X = _run(model, batch.X)
    Y = batch.Y
    bsz, T = X.shape[0], X.shape[1]
    w = _sample_weights(Y, batch.r)
    logp = np.log(np.maximum(y_hat, LOG_CLAMP))
    value = float((-(Y * logp).sum(axis=1) * w).mean())

    # a clamped log is flat, so those samples contribute no gradient
    live = (y_hat * Y).sum(axis=1) >= LOG_CLAMP
    g_o = (w * live / bsz)[:, None] * (y_hat - Y)
    h_T = H[-1]
    grads = {
        "V": g_o.T @ h_T,
        "c": g_o.sum(axis=0),
        "U": np.zeros_like(model.U),
        "W": np.zeros_like(model.W),
        "b": np.zeros_like(model.b),
    }
    dh = g_o @ model.V
    for t in range(T - 1, -1, -1):
        da = dh * (1.0 - H[t] ** 2)
        grads["U"] += da.T @ X[:, t]
        grads["b"] += da.sum(axis=0)
        if t > 0:
            grads["W"] += da.T @ H[t - 1]
            dh = da @ model.W
    return value, grads


def gradients(model: RnnModel, batch: LabeledDataset) -> dict:
    return loss_and_gradients(model, batch)[1]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    steps: int = 2000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    model: RnnModel
    initial_loss: float
    final_loss: float
    history: list = field(default_factory=list)


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params: dict, grads: dict) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = {}
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            out[k] = p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def channel_stats(X: np.ndarray):
    """Per-channel mean and standard deviation over every sample of every window."""
    flat = X.reshape(-1, X.shape[-1])
    std = flat.std(axis=0)
    return flat.mean(axis=0), np.where(std > 0, std, 1.0)


def train(data: LabeledDataset, config: TrainConfig = TrainConfig(), n_pre: int | None = None, n_post: int | None = None) -> TrainResult:
    """Full-batch Adam on the weighted cross-entropy.

    Window lengths are taken from the arguments or inferred as a centred
    window when omitted. Inputs are standardised with statistics of ``data``.
    """
    if data.n_positive == 0 or data.n_negative == 0:
        raise ValueError("training data must contain both classes")
    T, n_ch = data.X.shape[1:]
    if n_pre is None and n_post is None:
        n_pre = (T - 1) // 2
    if n_pre is None:
        n_pre = T - 1 - n_post
    if n_post is None:
        n_post = T - 1 - n_pre
    if n_pre + 1 + n_post != T:
        raise ValueError("n_pre + 1 + n_post must equal the window length")
    rng = np.random.default_rng(config.seed)
    mean, std = channel_stats(data.X)
    model = init_model(n_pre, n_post, n_ch, rng, mean, std)
    opt = Adam(model.params(), config.lr, config.beta1, config.beta2, config.eps)
    initial, grads = loss_and_gradients(model, data)
    history = [initial]
    for _ in range(config.steps):
        model = model.with_params(opt.update(model.params(), grads))
        value, grads = loss_and_gradients(model, data)
        history.append(value)
    return TrainResult(model, initial, history[-1], history)


@dataclass(frozen=True)
class DetectorMetrics:
    TP: int
    TN: int
    FP: int
    FN: int

    @property
    def precision(self) -> float:
        d = self.TP + self.FP
        return self.TP / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.TP + self.FN
        return self.TP / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def as_dict(self) -> dict:
        return {"TP": self.TP, "TN": self.TN, "FP": self.FP, "FN": self.FN,
                "P": self.precision, "R": self.recall, "F1": self.f1}


def evaluate(model: RnnModel, data: LabeledDataset, threshold: float = 0.5) -> DetectorMetrics:
    pred_pos = predict_proba(model, data.X)[:, 0] > threshold
    true_pos = data.Y[:, 0] == 1.0
    return DetectorMetrics(
        TP=int(np.sum(pred_pos & true_pos)),
        TN=int(np.sum(~pred_pos & ~true_pos)),
        FP=int(np.sum(pred_pos & ~true_pos)),
        FN=int(np.sum(~pred_pos & true_pos)),
    )
