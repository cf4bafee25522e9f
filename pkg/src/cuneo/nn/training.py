"""Training loop (Adam + early stopping) and gradient checking.

Training is fully deterministic for a fixed dataset and
:class:`TrainConfig`: shuffling draws from ``default_rng([shuffle_seed,
epoch])`` and all arithmetic is plain single-threaded numpy, so two runs
with the same seeds produce bit-identical parameters and logs (wall time
aside).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, TrainingError
from . import layers
from .model import (
    ModelConfig,
    ModelParams,
    copy_params,
    cross_entropy,
    forward,
    loss_and_grads,
)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    patience: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0
    min_delta: float = 1e-6

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs, patience, and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must be in [0, 1)")
        if self.epsilon <= 0 or self.min_delta < 0:
            raise ConfigError("epsilon must be positive and min_delta non-negative")


@dataclass(frozen=True)
class EpochStats:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    wall_time_s: float = 0.0

    def deterministic_fields(self):
        """Everything except wall time, for run-to-run identity checks."""
        return (tuple(self.epochs), self.best_epoch, self.stopped_early)


# ---------------------------------------------------------------------------
# Adam

class AdamState:
    """First/second moment accumulators mirroring a parameter list."""

    def __init__(self, params: ModelParams):
        self.t = 0
        self.m = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]
        self.v = [{k: np.zeros_like(v) for k, v in layer.items()} for layer in params]


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              config: TrainConfig) -> None:
    """One in-place Adam update; epsilon sits outside the square root."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for layer_p, layer_g, layer_m, layer_v in zip(params, grads, state.m, state.v):
        for key in layer_p:
            g = layer_g[key]
            m = layer_m[key]
            v = layer_v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            m_hat = m / bias1
            v_hat = v / bias2
            layer_p[key] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)


# ---------------------------------------------------------------------------
# training loop

def train(
    config: ModelConfig,
    params: ModelParams,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    train_config: TrainConfig | None = None,
    val_loss_override=None,
    progress=None,
) -> tuple[ModelParams, TrainLog]:
    """Train with minibatch Adam and early stopping on validation loss.

    Stops once the validation loss has failed to improve on the best seen
    (by more than ``min_delta``) for ``patience`` consecutive epochs, and
    returns a copy of the parameters from the best epoch.  The input
    ``params`` are not modified.

    ``val_loss_override`` substitutes a fixed per-epoch validation-loss
    sequence (skipping the real validation pass) so the stopping rule can
    be exercised on its own; it is a test hook, not a training feature.
    ``progress``, if given, is called with each :class:`EpochStats`.
    """
    if train_config is None:
        train_config = TrainConfig()
    x_train = np.asarray(x_train)
    y_train = np.asarray(y_train)
    if x_train.shape[0] == 0:
        raise TrainingError("training set is empty")
    if x_train.shape[0] != y_train.shape[0]:
        raise TrainingError("x_train and y_train lengths differ")
    if val_loss_override is not None and len(val_loss_override) == 0:
        raise ValueError("val_loss_override is empty")

    t0 = time.perf_counter()
    work = copy_params(params)
    state = AdamState(work)
    n = x_train.shape[0]
    log = TrainLog()
    best_loss = np.inf
    best_params = copy_params(work)
    best_epoch = 0
    bad_epochs = 0

    for epoch in range(1, train_config.max_epochs + 1):
        order = np.random.default_rng([train_config.shuffle_seed, epoch]).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, train_config.batch_size):
            idx = order[start : start + train_config.batch_size]
            loss, grads = loss_and_grads(config, work, x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            adam_step(work, grads, state, train_config)
            loss_sum += loss * len(idx)
        train_loss = loss_sum / n

        if val_loss_override is not None:
            if epoch - 1 >= len(val_loss_override):
                raise ValueError(
                    f"val_loss_override ran out at epoch {epoch}; supply enough "
                    "entries for the run or a sequence that triggers early stopping"
                )
            val_loss = float(val_loss_override[epoch - 1])
            val_acc = 0.0
        else:
            probs, _ = forward(config, work, x_val)
            val_loss = cross_entropy(probs, np.asarray(y_val))
            val_acc = float((probs.argmax(axis=1) == np.asarray(y_val)).mean())
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")

        stats = EpochStats(epoch=epoch, train_loss=float(train_loss),
                           val_loss=float(val_loss), val_accuracy=val_acc)
        log.epochs.append(stats)
        if progress is not None:
            progress(stats)

        if val_loss < best_loss - train_config.min_delta:
            best_loss = val_loss
            best_epoch = epoch
            best_params = copy_params(work)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= train_config.patience:
                log.stopped_early = True
                break

    log.best_epoch = best_epoch
    log.wall_time_s = time.perf_counter() - t0
    return best_params, log


# ---------------------------------------------------------------------------
# gradient checking

@dataclass(frozen=True)
class GradCheckEntry:
    kind: str
    instances: int
    max_rel_err: float


@dataclass(frozen=True)
class GradCheckReport:
    entries: tuple[GradCheckEntry, ...]
    threshold: float

    @property
    def passed(self) -> bool:
        return all(e.max_rel_err <= self.threshold for e in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max(e.max_rel_err for e in self.entries)


GRADCHECK_KINDS = ("conv", "pool", "relu", "flatten", "dense", "softmax", "softmax_xent")


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def _numeric_grad(f, arr: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def _separated_values(rng: np.random.Generator, shape, gap: float) -> np.ndarray:
    """Random array whose sorted values are at least ``gap`` apart (no
    max-pool ties within a finite-difference step)."""
    n = int(np.prod(shape))
    vals = np.cumsum(rng.uniform(gap, 3.0 * gap, size=n)) + rng.uniform(-1.0, 1.0)
    return rng.permutation(vals).reshape(shape).astype(np.float64)


def _check_instance(kind: str, rng: np.random.Generator, h: float, fault: str | None) -> float:
    """Max relative error between analytic and central-difference gradients
    for one randomly shaped instance of a layer kind."""
    worst = 0.0

    def compare(analytic: np.ndarray, scalar_fn, arr: np.ndarray) -> None:
        nonlocal worst
        if fault == kind:
            analytic = analytic + 0.05 * (1.0 + np.abs(analytic))
        numeric = _numeric_grad(scalar_fn, arr, h)
        worst = max(worst, _rel_err(analytic, numeric))

    if kind == "conv":
        n, c, f = rng.integers(1, 3), rng.integers(1, 3), rng.integers(1, 4)
        k = int(rng.integers(2, 4))
        hh, ww = int(rng.integers(k, k + 4)), int(rng.integers(k, k + 4))
        x = rng.standard_normal((n, c, hh, ww))
        w = rng.standard_normal((f, c, k, k))
        b = rng.standard_normal(f)
        r = rng.standard_normal((int(n), int(f), hh - k + 1, ww - k + 1))
        scalar = lambda: float(np.sum(layers.conv2d_forward(x, w, b)[0] * r))
        y, cache = layers.conv2d_forward(x, w, b)
        dx, dw, db = layers.conv2d_backward(r, cache)
        compare(dx, scalar, x)
        compare(dw, scalar, w)
        compare(db, scalar, b)
    elif kind == "pool":
        n, c = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        size = int(rng.integers(2, 4))
        stride = int(rng.integers(1, size + 1))
        hh = int(rng.integers(size, size + 5))
        ww = int(rng.integers(size, size + 5))
        x = _separated_values(rng, (n, c, hh, ww), gap=8.0 * h)
        y, cache = layers.maxpool_forward(x, size, stride)
        r = rng.standard_normal(y.shape)
        scalar = lambda: float(np.sum(layers.maxpool_forward(x, size, stride)[0] * r))
        compare(layers.maxpool_backward(r, cache), scalar, x)
    elif kind == "relu":
        shape = tuple(rng.integers(2, 5, size=2))
        signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        x = rng.uniform(0.2, 1.5, size=shape) * signs  # keep clear of the kink
        y, cache = layers.relu_forward(x)
        r = rng.standard_normal(y.shape)
        scalar = lambda: float(np.sum(layers.relu_forward(x)[0] * r))
        compare(layers.relu_backward(r, cache), scalar, x)
    elif kind == "flatten":
        shape = (int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                 int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        x = rng.standard_normal(shape)
        y, cache = layers.flatten_forward(x)
        r = rng.standard_normal(y.shape)
        scalar = lambda: float(np.sum(layers.flatten_forward(x)[0] * r))
        compare(layers.flatten_backward(r, cache), scalar, x)
    elif kind == "dense":
        n, d, u = (int(v) for v in rng.integers(1, 6, size=3))
        x = rng.standard_normal((n, d))
        w = rng.standard_normal((d, u))
        b = rng.standard_normal(u)
        r = rng.standard_normal((n, u))
        scalar = lambda: float(np.sum(layers.dense_forward(x, w, b)[0] * r))
        y, cache = layers.dense_forward(x, w, b)
        dx, dw, db = layers.dense_backward(r, cache)
        compare(dx, scalar, x)
        compare(dw, scalar, w)
        compare(db, scalar, b)
    elif kind == "softmax":
        n, d = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        z = rng.standard_normal((n, d))
        p, cache = layers.softmax_forward(z)
        r = rng.standard_normal(p.shape)
        scalar = lambda: float(np.sum(layers.softmax_forward(z)[0] * r))
        compare(layers.softmax_backward(r, cache), scalar, z)
    elif kind == "softmax_xent":
        n, d = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        z = rng.standard_normal((n, d))
        labels = rng.integers(0, d, size=n)

        def scalar():
            p, _ = layers.softmax_forward(z)
            return cross_entropy(p, labels)

        p, _ = layers.softmax_forward(z)
        delta = p.copy()
        delta[np.arange(n), labels] -= 1.0
        delta /= n
        compare(delta, scalar, z)
    else:
        raise ValueError(f"unknown gradient-check kind {kind!r}")
    return worst


def gradient_check(
    seed: int = 0,
    instances_per_kind: int = 20,
    h: float = 1e-3,
    threshold: float = 1e-4,
    fault: str | None = None,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients for every layer kind.

    Runs ``instances_per_kind`` randomly shaped float64 instances per kind
    and reports the worst relative error ``|ga-gn| / max(1, |ga|, |gn|)``.
    ``fault`` deliberately corrupts one kind's analytic gradient so the
    failure path can be exercised.
    """
    if instances_per_kind < 1:
        raise ValueError("instances_per_kind must be >= 1")
    if fault is not None and fault not in GRADCHECK_KINDS:
        raise ValueError(f"unknown fault kind {fault!r}; choose from {GRADCHECK_KINDS}")
    entries = []
    for kind in GRADCHECK_KINDS:
        worst = 0.0
        for i in range(instances_per_kind):
            rng = np.random.default_rng([seed, GRADCHECK_KINDS.index(kind), i])
            worst = max(worst, _check_instance(kind, rng, h, fault))
        entries.append(GradCheckEntry(kind=kind, instances=instances_per_kind, max_rel_err=worst))
    return GradCheckReport(entries=tuple(entries), threshold=threshold)
