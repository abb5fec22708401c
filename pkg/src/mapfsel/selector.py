"""Reference solver selector: softmax regression over pooled channel statistics.

The model maps a feature tensor to a probability per candidate solver.  Three
training losses are provided:

* ``CE``  cross-entropy against the label,
* ``BCE`` binary cross-entropy against the one-hot label (summed over solvers),
* ``REG`` Huber loss between the expected score under the predicted
  distribution and the score of the per-instance best solver.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .features import NUM_CHANNELS, augment

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
NUM_FEATURES = NUM_CHANNELS * 3 + 2
PROB_EPS = 1e-12
LOSS_KINDS = ("CE", "BCE", "REG")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LossSpec:
    kind: str
    huber_delta: float = 1.0

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be > 0")
        object.__setattr__(self, "kind", kind)


def pool_features(x: np.ndarray, agent_count: int) -> np.ndarray:
    """Per-channel mean / max / fraction-nonzero, then agents/100 and log area."""
    flat = x.reshape(x.shape[0], -1)
    phi = np.empty(NUM_FEATURES, dtype=np.float64)
    phi[0:21:3] = flat.mean(axis=1)
    phi[1:21:3] = flat.max(axis=1)
    phi[2:21:3] = (flat != 0).mean(axis=1)
    phi[21] = agent_count / 100.0
    phi[22] = math.log(flat.shape[1])
    return phi


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SelectorModel:
    solver_ids: tuple[str, ...]
    weights: np.ndarray  # (K, NUM_FEATURES)
    bias: np.ndarray  # (K,)
    # inputs are standardised with these before the linear layer
    feat_mean: np.ndarray = field(default_factory=lambda: np.zeros(NUM_FEATURES))
    feat_scale: np.ndarray = field(default_factory=lambda: np.ones(NUM_FEATURES))

    @classmethod
    def zeros(cls, solver_ids: Sequence[str]) -> "SelectorModel":
        k = len(solver_ids)
        return cls(tuple(solver_ids), np.zeros((k, NUM_FEATURES)), np.zeros(k))

    @property
    def num_solvers(self) -> int:
        return len(self.solver_ids)

    def standardize(self, phi: np.ndarray) -> np.ndarray:
        return (phi - self.feat_mean) / self.feat_scale

    def logits_from_features(self, phi: np.ndarray) -> np.ndarray:
        if phi.shape[-1] != NUM_FEATURES:
            raise ValueError(f"expected {NUM_FEATURES} pooled features, got {phi.shape[-1]}")
        return self.standardize(phi) @ self.weights.T + self.bias

    def copy(self) -> "SelectorModel":
        return SelectorModel(self.solver_ids, self.weights.copy(), self.bias.copy(),
                             self.feat_mean.copy(), self.feat_scale.copy())

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "pooled_features": "mean,max,nonzero x 7 channels; agents/100; log(area)",
            "solver_ids": list(self.solver_ids),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "feat_mean": self.feat_mean.tolist(),
            "feat_scale": self.feat_scale.tolist(),
        }

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: Path, solver_ids: Sequence[str] | None = None) -> "SelectorModel":
        d = json.loads(Path(path).read_text())
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported model schema {d.get('schema')!r}")
        ids = tuple(d["solver_ids"])
        if solver_ids is not None and tuple(solver_ids) != ids:
            raise ValueError(f"{path}: model portfolio {list(ids)} != {list(solver_ids)}")
        return cls(ids, np.array(d["weights"], dtype=np.float64), np.array(d["bias"], dtype=np.float64),
                   np.array(d["feat_mean"], dtype=np.float64), np.array(d["feat_scale"], dtype=np.float64))


def forward(model: SelectorModel, x: np.ndarray, agent_count: int) -> np.ndarray:
    if x.ndim != 3 or x.shape[0] != NUM_CHANNELS:
        raise ValueError(f"expected a ({NUM_CHANNELS}, H, W) tensor, got shape {x.shape}")
    return softmax(model.logits_from_features(pool_features(x, agent_count)))


def predict_proba(model: SelectorModel, phi: np.ndarray) -> np.ndarray:
    return softmax(model.logits_from_features(phi))


def argmax_first(p: np.ndarray) -> int:
    return int(np.argmax(p))  # numpy returns the first maximal index


def predict(model: SelectorModel, x: np.ndarray, agent_count: int) -> int:
    return argmax_first(forward(model, x, agent_count))


# ---------------------------------------------------------------------------
# losses


def huber(r: float, delta: float) -> float:
    a = abs(r)
    return 0.5 * r * r if a <= delta else delta * (a - 0.5 * delta)


def loss(p: np.ndarray, label: int, spec: LossSpec, scores: Sequence[float] | None = None) -> float:
    if spec.kind == "CE":
        return -math.log(max(p[label], PROB_EPS))
    if spec.kind == "BCE":
        y = np.zeros_like(p)
        y[label] = 1.0
        pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
        return float(-(y * np.log(pc) + (1 - y) * np.log(1 - pc)).sum())
    if scores is None:
        raise ValueError("REG loss needs per-solver scores")
    s = np.asarray(scores, dtype=np.float64)
    return huber(float(p @ s) - float(s[label]), spec.huber_delta)


def loss_grad_logits(p: np.ndarray, label: int, spec: LossSpec,
                     scores: Sequence[float] | None = None) -> np.ndarray:
    """d loss / d logits for one instance."""
    if spec.kind == "CE":
        g = p.copy()
        g[label] -= 1.0
        return g
    if spec.kind == "BCE":
        pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
        y = np.zeros_like(p)
        y[label] = 1.0
        dp = -y / pc + (1 - y) / (1 - pc)
    else:
        s = np.asarray(scores, dtype=np.float64)
        r = float(p @ s) - float(s[label])
        d = spec.huber_delta
        dp = (r if abs(r) <= d else d * math.copysign(1.0, r)) * s
    # softmax Jacobian: dz_k = p_k (dp_k - sum_a dp_a p_a)
    return p * (dp - float(dp @ p))


def batch_loss_and_grad(model: SelectorModel, phi: np.ndarray, labels: np.ndarray,
                        scores: np.ndarray | None, spec: LossSpec) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean loss over a batch and its gradient w.r.t. (weights, bias)."""
    xs = model.standardize(phi)
    probs = softmax(xs @ model.weights.T + model.bias)
    total = 0.0
    gz = np.empty_like(probs)
    for i in range(len(labels)):
        s = None if scores is None else scores[i]
        total += loss(probs[i], int(labels[i]), spec, s)
        gz[i] = loss_grad_logits(probs[i], int(labels[i]), spec, s)
    n = len(labels)
    return total / n, gz.T @ xs / n, gz.sum(axis=0) / n


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainSample:
    tensor: np.ndarray | None
    agent_count: int
    label: int
    scores: np.ndarray
    phi: np.ndarray | None = None

    def features(self) -> np.ndarray:
        if self.phi is None:
            self.phi = pool_features(self.tensor, self.agent_count)
        return self.phi


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    augment: bool = False


@dataclass
class TrainResult:
    model: SelectorModel
    best_epoch: int
    train_loss: list[float]
    val_loss: list[float]


def _stack(samples: Sequence[TrainSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi = np.stack([s.features() for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    scores = np.stack([np.asarray(s.scores, dtype=np.float64) for s in samples])
    return phi, labels, scores


def evaluate_loss(model: SelectorModel, samples: Sequence[TrainSample], spec: LossSpec) -> float:
    phi, labels, scores = _stack(samples)
    value, _, _ = batch_loss_and_grad(model, phi, labels, scores, spec)
    return value


def train(samples: Sequence[TrainSample], solver_ids: Sequence[str], spec: LossSpec,
          config: TrainConfig = TrainConfig(), val_samples: Sequence[TrainSample] | None = None,
          on_epoch: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Mini-batch gradient descent; returns the epoch-best model by validation loss.

    Without a validation split the training loss selects the epoch.
    """
    if not samples:
        raise ValueError("cannot train on an empty split")
    rng = np.random.default_rng(config.seed)
    phi, labels, scores = _stack(samples)
    model = SelectorModel.zeros(solver_ids)
    model.feat_mean = phi.mean(axis=0)
    spread = phi.std(axis=0)
    model.feat_scale = np.where(spread > 1e-12, spread, 1.0)

    val = _stack(val_samples) if val_samples else None
    best, best_loss, best_epoch = model.copy(), math.inf, 0
    train_hist: list[float] = []
    val_hist: list[float] = []
    n = len(samples)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        if config.augment:
            aug_rng = np.random.default_rng([config.seed, epoch])
            phi_epoch = np.stack([pool_features(augment(samples[i].tensor, aug_rng), samples[i].agent_count)
                                  for i in range(n)])
        else:
            phi_epoch = phi
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            value, gw, gb = batch_loss_and_grad(model, phi_epoch[idx], labels[idx], scores[idx], spec)
            if not math.isfinite(value) or not np.all(np.isfinite(gw)):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} (lr={config.learning_rate}); lower the learning rate")
            model.weights -= config.learning_rate * gw
            model.bias -= config.learning_rate * gb
        tr, _, _ = batch_loss_and_grad(model, phi, labels, scores, spec)
        train_hist.append(tr)
        if val is not None:
            vl, _, _ = batch_loss_and_grad(model, *val, spec)
        else:
            vl = tr
        val_hist.append(vl)
        if not math.isfinite(tr):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
        if vl < best_loss:
            best, best_loss, best_epoch = model.copy(), vl, epoch
        if on_epoch is not None:
            on_epoch(epoch, tr, vl)
    return TrainResult(best, best_epoch, train_hist, val_hist)
