"""From-scratch feedforward binary classifier: ReLU hidden layers, inverted dropout,
sigmoid output, BCE loss, Adam, deterministic seeded training."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ShapeMismatch, StateMissing, WidthMismatch

BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class LayerSpec:
    units: int
    dropout: float = 0.0

    def __post_init__(self):
        if self.units < 1:
            raise ValueError("units must be >= 1")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout rate must be in [0, 1)")


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    hidden: tuple[LayerSpec, ...]

    @staticmethod
    def mlp(input_width: int) -> "NetworkSpec":
        return NetworkSpec(input_width, (LayerSpec(500, 0.1), LayerSpec(500, 0.2), LayerSpec(500, 0.3)))

    @staticmethod
    def nn(input_width: int) -> "NetworkSpec":
        return NetworkSpec(input_width, (LayerSpec(68, 0.0), LayerSpec(68, 0.0)))

    def layer_widths(self) -> list[tuple[int, int]]:
        widths = [self.input_width] + [l.units for l in self.hidden] + [1]
        return list(zip(widths[:-1], widths[1:]))

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "hidden": [[l.units, l.dropout] for l in self.hidden],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["input_width"], tuple(LayerSpec(u, r) for u, r in d["hidden"]))


@dataclass
class NetworkParams:
    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def total(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    wall_time_s: float = 0.0


def param_count(spec: NetworkSpec) -> int:
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in spec.layer_widths())


def init_network(spec: NetworkSpec, seed: int = 0) -> NetworkParams:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_widths():
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(spec, weights, biases)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(params: NetworkParams, X: np.ndarray, train: bool = False, rng=None) -> tuple[np.ndarray, dict]:
    """Probabilities for a batch plus the cache backward() needs."""
    if X.shape[1] != params.spec.input_width:
        raise WidthMismatch(f"expected width {params.spec.input_width}, got {X.shape[1]}")
    inputs, pres, masks = [], [], []
    a = X
    for i, layer in enumerate(params.spec.hidden):
        inputs.append(a)
        z = a @ params.weights[i] + params.biases[i]
        h = np.maximum(z, 0.0)
        mask = None
        if train and layer.dropout > 0.0:
            keep = 1.0 - layer.dropout
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        pres.append(z)
        masks.append(mask)
        a = h
    inputs.append(a)
    logits = a @ params.weights[-1] + params.biases[-1]
    probs = _sigmoid(logits[:, 0])
    cache = {"inputs": inputs, "pres": pres, "masks": masks, "probs": probs}
    return probs, cache


def forward(params: NetworkParams, x: np.ndarray, mode: str = "eval", rng=None) -> float:
    """Single-sample output probability."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    probs, _ = forward_batch(params, x, train=(mode == "train"), rng=rng)
    return float(probs[0])


def bce_loss(p: float, y: int) -> float:
    p = min(max(p, BCE_CLAMP), 1.0 - BCE_CLAMP)
    return float(-(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


def batch_bce(probs: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(probs, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1.0 - p)))


def backward(params: NetworkParams, cache: dict, y: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of mean batch BCE, honoring the dropout masks used in forward."""
    for key in ("inputs", "pres", "masks", "probs"):
        if key not in cache:
            raise StateMissing(f"forward cache missing {key!r}")
    n = len(y)
    n_hidden = len(params.spec.hidden)
    grads_w: list = [None] * (n_hidden + 1)
    grads_b: list = [None] * (n_hidden + 1)

    delta = ((cache["probs"] - y) / n)[:, None]  # dL/dlogits
    grads_w[-1] = cache["inputs"][-1].T @ delta
    grads_b[-1] = delta.sum(axis=0)
    da = delta @ params.weights[-1].T
    for i in reversed(range(n_hidden)):
        if cache["masks"][i] is not None:
            da = da * cache["masks"][i]
        dz = da * (cache["pres"][i] > 0)
        grads_w[i] = cache["inputs"][i].T @ dz
        grads_b[i] = dz.sum(axis=0)
        da = dz @ params.weights[i].T
    return grads_w, grads_b


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        return cls(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
            [np.zeros_like(b) for b in params.biases],
        )


def adam_step(
    params: NetworkParams,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
    state: AdamState,
    t: int,
    cfg: TrainConfig,
) -> tuple[NetworkParams, AdamState]:
    grads_w, grads_b = grads
    if len(grads_w) != len(params.weights) or any(
        g.shape != w.shape for g, w in zip(grads_w, params.weights)
    ):
        raise ShapeMismatch("gradient shapes do not match parameters")
    new = params.copy()
    new_state = AdamState(
        [m.copy() for m in state.m_w], [v.copy() for v in state.v_w],
        [m.copy() for m in state.m_b], [v.copy() for v in state.v_b],
    )
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for i in range(len(new.weights)):
        for value, grad, m_arr, v_arr in (
            (new.weights[i], grads_w[i], new_state.m_w[i], new_state.v_w[i]),
            (new.biases[i], grads_b[i], new_state.m_b[i], new_state.v_b[i]),
        ):
            m_arr *= cfg.beta1
            m_arr += (1.0 - cfg.beta1) * grad
            v_arr *= cfg.beta2
            v_arr += (1.0 - cfg.beta2) * grad * grad
            value -= cfg.learning_rate * (m_arr / bc1) / (np.sqrt(v_arr / bc2) + cfg.eps)
    return new, new_state


def _eval_stats(params, X, y):
    if len(y) == 0:
        return 0.0, 0.0
    probs = predict_proba(params, X)
    loss = batch_bce(probs, y)
    acc = float(np.mean((probs >= 0.5) == (y == 1))) if len(y) else 0.0
    return loss, acc


def train(
    spec: NetworkSpec,
    cfg: TrainConfig,
    train_X: np.ndarray,
    train_y: np.ndarray,
    val_X: np.ndarray | None = None,
    val_y: np.ndarray | None = None,
) -> tuple[NetworkParams, TrainHistory]:
    """Seeded mini-batch Adam training; fully deterministic for a fixed config."""
    import time

    if train_X.shape[1] != spec.input_width:
        raise WidthMismatch("training matrix width does not match spec")
    if val_X is None:
        val_X, val_y = train_X[:0], train_y[:0]
    train_y = np.asarray(train_y, dtype=float)
    val_y = np.asarray(val_y, dtype=float)

    started = time.perf_counter()
    params = init_network(spec, cfg.seed)
    state = AdamState.zeros_like(params)
    history = TrainHistory()
    t = 0
    best_val = np.inf
    since_best = 0
    n = len(train_X)
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            order = np.random.default_rng([cfg.seed, epoch, 1]).permutation(n)
        else:
            order = np.arange(n)
        dropout_rng = np.random.default_rng([cfg.seed, epoch, 2])
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            probs, cache = forward_batch(params, train_X[idx], train=True, rng=dropout_rng)
            grads = backward(params, cache, train_y[idx])
            t += 1
            params, state = adam_step(params, grads, state, t, cfg)
        tr_loss, tr_acc = _eval_stats(params, train_X, train_y)
        vl_loss, vl_acc = _eval_stats(params, val_X, val_y)
        history.epochs.append(EpochStats(tr_loss, tr_acc, vl_loss, vl_acc))
        if cfg.patience is not None and len(val_y):
            if vl_loss < best_val - 1e-12:
                best_val = vl_loss
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    history.wall_time_s = time.perf_counter() - started
    return params, history


def predict_proba(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(0)
    probs, _ = forward_batch(params, X)
    return probs
