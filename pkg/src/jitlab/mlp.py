"""Small feed-forward classifier: tanh(20) -> ReLU(10) -> linear(1).

Implemented directly on numpy so that gradients and optimizer steps can be
checked against finite differences. The linear output is a logit; the
sigmoid lives in the loss and in prediction.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import DimensionError, EmptyError, NonFiniteError, OutputError, SpecError

HIDDEN = (20, 10)
ACTIVATIONS = ("tanh", "relu", "identity")
PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")
DROPOUT_PLACEMENTS = ("both", "first", "second")


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    hidden: tuple[int, int] = HIDDEN
    activations: tuple[str, str, str] = ACTIVATIONS

    def __post_init__(self):
        if self.input_dim < 1:
            raise DimensionError(f"input_dim must be >= 1, got {self.input_dim}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, 1)


@dataclass(eq=False)
class MlpModel:
    spec: LayerSpec
    params: dict[str, np.ndarray]
    seed: int

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    def copy(self) -> "MlpModel":
        return MlpModel(self.spec, {k: v.copy() for k, v in self.params.items()}, self.seed)

    def to_dict(self) -> dict:
        return {
            "spec": {
                "input_dim": self.spec.input_dim,
                "sizes": list(self.spec.sizes),
                "activations": list(self.spec.activations),
            },
            "seed": self.seed,
            "params": {
                k: {"shape": list(v.shape), "values": v.ravel().tolist()}
                for k, v in self.params.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        spec = LayerSpec(int(d["spec"]["input_dim"]))
        params = {
            k: np.array(p["values"], dtype=np.float64).reshape(p["shape"])
            for k, p in d["params"].items()
        }
        model = cls(spec, params, int(d["seed"]))
        _check_shapes(model)
        return model

    def save(self, path: str | Path) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _check_shapes(m: MlpModel) -> None:
    sizes = m.spec.sizes
    for i in range(3):
        w, b = m.params[f"w{i + 1}"], m.params[f"b{i + 1}"]
        if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise DimensionError(f"layer {i + 1} has shapes {w.shape}, {b.shape}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    learning_rate: float = 0.001
    dropout_p: float = 0.2
    dropout_placement: str = "both"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout_p < 1:
            raise SpecError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.learning_rate <= 0:
            raise SpecError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise SpecError("epochs and batch_size must be >= 1")
        if self.dropout_placement not in DROPOUT_PLACEMENTS:
            raise SpecError(f"dropout_placement must be one of {DROPOUT_PLACEMENTS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def init_model(input_dim: int, seed: int) -> MlpModel:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    spec = LayerSpec(input_dim)
    rng = np.random.default_rng(seed)
    sizes = spec.sizes
    params = {}
    for i in range(3):
        limit = math.sqrt(6.0 / (sizes[i] + sizes[i + 1]))
        params[f"w{i + 1}"] = rng.uniform(-limit, limit, size=(sizes[i], sizes[i + 1]))
        params[f"b{i + 1}"] = np.zeros(sizes[i + 1])
    return MlpModel(spec, params, seed)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def bce_with_logits(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy of sigmoid(z) against 0/1 targets."""
    return float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _as_matrix(m: MlpModel, rows) -> np.ndarray:
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != m.input_dim:
        raise DimensionError(f"expected rows of width {m.input_dim}, got shape {x.shape}")
    return x


def _dropout_masks(shape1, shape2, p: float, placement: str, rng) -> tuple:
    keep = 1.0 - p
    m1 = m2 = None
    if p > 0 and placement in ("both", "first"):
        m1 = (rng.random(shape1) < keep) / keep
    if p > 0 and placement in ("both", "second"):
        m2 = (rng.random(shape2) < keep) / keep
    return m1, m2


def _forward(params, x, masks=(None, None)):
    z1 = x @ params["w1"] + params["b1"]
    h1 = np.tanh(z1)
    a1 = h1 if masks[0] is None else h1 * masks[0]
    z2 = a1 @ params["w2"] + params["b2"]
    h2 = np.maximum(z2, 0.0)
    a2 = h2 if masks[1] is None else h2 * masks[1]
    logit = (a2 @ params["w3"] + params["b3"])[:, 0]
    return logit, (x, h1, a1, z2, a2)


def _backward(params, cache, logit, y, masks=(None, None)) -> dict[str, np.ndarray]:
    x, h1, a1, z2, a2 = cache
    n = len(y)
    g_logit = ((sigmoid(logit) - y) / n)[:, None]
    grads = {"w3": a2.T @ g_logit, "b3": g_logit.sum(axis=0)}
    g_a2 = g_logit @ params["w3"].T
    g_h2 = g_a2 if masks[1] is None else g_a2 * masks[1]
    g_z2 = g_h2 * (z2 > 0)
    grads["w2"] = a1.T @ g_z2
    grads["b2"] = g_z2.sum(axis=0)
    g_a1 = g_z2 @ params["w2"].T
    g_h1 = g_a1 if masks[0] is None else g_a1 * masks[0]
    g_z1 = g_h1 * (1.0 - h1**2)
    grads["w1"] = x.T @ g_z1
    grads["b1"] = g_z1.sum(axis=0)
    return grads


def forward(
    m: MlpModel,
    rows,
    train_mode: bool = False,
    dropout_seed: int = 0,
    dropout_p: float = 0.2,
    dropout_placement: str = "both",
) -> np.ndarray:
    """Defect probabilities for each row.

    In train mode hidden activations are zeroed with probability
    ``dropout_p`` and survivors scaled by ``1 / (1 - dropout_p)``.
    """
    x = _as_matrix(m, rows)
    masks = (None, None)
    if train_mode:
        rng = np.random.default_rng(dropout_seed)
        masks = _dropout_masks((len(x), m.spec.hidden[0]), (len(x), m.spec.hidden[1]),
                               dropout_p, dropout_placement, rng)
    logit, _ = _forward(m.params, x, masks)
    return sigmoid(logit)


def loss_and_grads(m: MlpModel, x: np.ndarray, y: np.ndarray, masks=(None, None)):
    logit, cache = _forward(m.params, x, masks)
    return bce_with_logits(logit, y), _backward(m.params, cache, logit, y, masks)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for k, g in grads.items():
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = state.m[k] / c1
        v_hat = state.v[k] / c2
        params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train(m: MlpModel, x, y, cfg: TrainConfig) -> tuple[MlpModel, list[float]]:
    """Fit on ``(x, y)``; returns a new model and the per-epoch mean loss.

    ``x`` may be a :class:`Dataset`, in which case its labels are used.
    """
    if isinstance(x, Dataset):
        x, y = x.values, x.labels
    x = _as_matrix(m, x) if len(x) else np.empty((0, m.input_dim))
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise EmptyError("empty training set")
    if len(y) != len(x):
        raise DimensionError(f"{len(x)} rows but {len(y)} labels")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("training features contain NaN or infinity")
    model = m.copy()
    state = AdamState.zeros_like(model.params)
    rng = np.random.default_rng(cfg.seed)
    h1, h2 = model.spec.hidden
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            masks = _dropout_masks((len(idx), h1), (len(idx), h2),
                                   cfg.dropout_p, cfg.dropout_placement, rng)
            loss, grads = loss_and_grads(model, xb, yb, masks)
            if not math.isfinite(loss):
                raise NonFiniteError(f"loss became {loss} in epoch {epoch}")
            total += loss * len(idx)
            adam_step(model.params, grads, state, cfg)
        if not all(np.all(np.isfinite(p)) for p in model.params.values()):
            raise NonFiniteError(f"non-finite parameters after epoch {epoch}")
        trace.append(total / len(x))
    return model, trace


def predict_labels(m: MlpModel, d, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Hard labels (score >= threshold) and the underlying scores."""
    rows = d.values if isinstance(d, Dataset) else d
    scores = forward(m, rows)
    return (scores >= threshold).astype(np.int8), scores


def gradient_check(m: MlpModel, sample: tuple[Sequence[float], int], step: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients."""
    x = _as_matrix(m, sample[0])
    y = np.atleast_1d(np.asarray(sample[1], dtype=np.float64))
    _, grads = loss_and_grads(m, x, y)
    probe = m.copy()
    worst = 0.0
    for name in PARAM_NAMES:
        p = probe.params[name]
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = loss_and_grads(probe, x, y)
            flat[i] = orig - step
            down, _ = loss_and_grads(probe, x, y)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            denom = max(abs(numeric), abs(g[i]), 1e-6)
            worst = max(worst, abs(numeric - g[i]) / denom)
    return worst


def load_model(path: str | Path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read model {path}: {exc.strerror or exc}") from exc
    return MlpModel.from_dict(doc.get("model", doc))


__all__ = [
    "AdamState", "LayerSpec", "MlpModel", "TrainConfig", "adam_step", "bce_with_logits",
    "forward", "gradient_check", "init_model", "load_model", "loss_and_grads",
    "predict_labels", "sigmoid", "train",
]
