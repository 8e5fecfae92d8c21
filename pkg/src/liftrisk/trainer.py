"""Loss, Adam optimization, early stopping, and the training loop.

Training monitors the loss (cross-entropy plus the output layer's L2 term)
evaluated on the training set in inference mode after every epoch; there is
no validation split.  When the loss stops improving for ``patience`` epochs
the loop halts and the parameters snapshotted at the best-loss epoch are
restored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingDivergedError
from .nncore import Model

LOG_CLAMP = 1e-12
EVAL_BATCH = 128


@dataclass
class TrainConfig:
    l2_lambda: float = 1e-5
    learning_rate: float = 1e-3
    dropout_rate: float = 0.25
    batch_size: int = 32
    patience: int = 10
    min_delta: float = 0.0
    max_epochs: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 42

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)       # per epoch, 1-indexed
    accuracies: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    restored_from_epoch: int = 0


def loss(probs: np.ndarray, onehot: np.ndarray, model: Model | None, l2_lambda: float) -> float:
    """Mean categorical cross-entropy (probabilities clamped at 1e-12) plus
    l2_lambda * sum(w^2) over the final output layer's weight matrix."""
    p = np.clip(np.asarray(probs, dtype=np.float64), LOG_CLAMP, None)
    ce = float(-np.mean(np.sum(np.asarray(onehot) * np.log(p), axis=1)))
    if l2_lambda != 0.0:
        if model is None:
            raise ValueError("l2 term needs the model's output layer weights")
        ce += l2_lambda * float(np.sum(np.asarray(model.layers[-1].w, dtype=np.float64) ** 2))
    return ce


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, config: TrainConfig) -> AdamState:
    """One bias-corrected update, in place: m <- b1*m + (1-b1)*g,
    v <- b2*v + (1-b2)*g^2, theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps)."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.epsilon)
    return state


class EarlyStopper:
    """Halts after ``patience`` consecutive epochs without the loss improving
    by more than ``min_delta``; remembers the best epoch for restoring."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = np.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, loss_value: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if loss_value < self.best_loss - self.min_delta:
            self.best_loss = loss_value
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


def _canonical_order(images: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Sort key independent of presentation order (label, then pixel bytes),
    so the seeded shuffle, and hence training, does not depend on how the
    caller happened to order the dataset."""
    keys = [(int(labels[i]), images[i].tobytes()) for i in range(len(labels))]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def evaluate(model: Model, images: np.ndarray, onehot: np.ndarray,
             l2_lambda: float) -> tuple[float, float]:
    """(loss, accuracy) in inference mode, batched."""
    n = images.shape[0]
    probs = np.concatenate([model.forward(images[i: i + EVAL_BATCH], train=False)
                            for i in range(0, n, EVAL_BATCH)])
    acc = float(np.mean(probs.argmax(axis=1) == onehot.argmax(axis=1)))
    return loss(probs, onehot, model, l2_lambda), acc


def train(model: Model, images: np.ndarray, labels: np.ndarray,
          config: TrainConfig) -> TrainHistory:
    """Train a built model on images [N,H,W,3] with integer class labels.

    Deterministic given the config seed: one RNG stream drives the per-epoch
    shuffles and dropout masks in sequence.  Raises TrainingDivergedError if
    the monitored loss goes non-finite.
    """
    n = images.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if not model.built:
        raise RuntimeError("model must be built before training")
    images = np.ascontiguousarray(images, dtype=model.dtype)
    labels = np.asarray(labels, dtype=np.int64)
    classes = model.layers[-1].classes
    onehot = np.eye(classes, dtype=model.dtype)[labels]

    order = _canonical_order(images, labels)
    images = images[order]
    onehot = onehot[order]

    l2_lambda = model.layers[-1].l2_lambda
    rng = np.random.default_rng(config.seed)
    params = model.params()
    state = AdamState.for_params(params)
    stopper = EarlyStopper(config.patience, config.min_delta)
    history = TrainHistory()
    best_snapshot = model.snapshot()

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        starts = list(range(0, n, config.batch_size))
        # fold a trailing single sample into the previous batch: train-mode
        # batch normalization rejects batches of one
        if len(starts) > 1 and n - starts[-1] == 1:
            starts.pop()
        for si, start in enumerate(starts):
            stop = starts[si + 1] if si + 1 < len(starts) else n
            batch = perm[start:stop]
            model.forward(images[batch], train=True, rng=rng)
            grads = model.backward(onehot[batch])
            adam_step(params, grads, state, config)

        epoch_loss, epoch_acc = evaluate(model, images, onehot, l2_lambda)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        history.losses.append(epoch_loss)
        history.accuracies.append(epoch_acc)

        should_stop = stopper.update(epoch, epoch_loss)
        if stopper.best_epoch == epoch:
            best_snapshot = model.snapshot()
        if should_stop:
            history.stopped_epoch = epoch
            break
    else:
        history.stopped_epoch = config.max_epochs

    model.restore(best_snapshot)
    history.best_epoch = stopper.best_epoch
    history.restored_from_epoch = stopper.best_epoch
    return history


def predict(model: Model, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(class index, probability vector) per image; ties break to the lowest
    class index."""
    images = np.asarray(images, dtype=model.dtype)
    n = images.shape[0]
    probs = np.concatenate([model.forward(images[i: i + EVAL_BATCH], train=False)
                            for i in range(0, n, EVAL_BATCH)])
    return probs.argmax(axis=1), probs


def write_history_csv(path, history: TrainHistory, comments: list[str] | None = None) -> None:
    """History as CSV (epoch, loss, accuracy) with optional '#' header lines."""
    with open(path, "w", newline="") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        fh.write("epoch,loss,accuracy\n")
        for i, (lv, av) in enumerate(zip(history.losses, history.accuracies), start=1):
            fh.write(f"{i},{lv!r},{av!r}\n")
        fh.write(f"# best_epoch,{history.best_epoch}\n")
        fh.write(f"# stopped_epoch,{history.stopped_epoch}\n")
        fh.write(f"# restored_from_epoch,{history.restored_from_epoch}\n")
