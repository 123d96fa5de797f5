"""Adversarial instance-weighting trainer (WANN).

Three networks are trained jointly on the combined source+target set:
the task hypothesis h, an adversary h' approximating the worst-case
risk gap between target and reweighted source, and a nonnegative
weighting network q producing per-instance loss weights. Per batch the
scalar objective is

    sum_i q(x_i) (h(x_i) - y_i)^2                      [task term]
    + mean over batch target rows of (h'(x) - y)^2      [target risk]
    - sum_i q(x_i) (h'(x_i) - y_i)^2                    [weighted risk]

with gradient descent on h and q and ascent on h', all from the same
parameter snapshot, followed by weight clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledSample, TrainingSet
from .nn import (AdamState, FitConfig, Mlp, TrainingDivergedError, _backward,
                 _forward_cache, adam_step, build_mlp, fit_regression,
                 forward)
from .results import RunResult


@dataclass
class WannConfig:
    """Training protocol for the adversarial weighting run."""

    epochs: int = 300
    batch_size: int = 128
    pretrain_epochs: int = 50
    lr: float = 0.001
    pretrain_lr: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    stratify_batches: bool = False

    def fit_config(self, epochs: int | None = None,
                   lr: float | None = None) -> FitConfig:
        return FitConfig(epochs=self.epochs if epochs is None else epochs,
                         batch_size=self.batch_size,
                         lr=self.lr if lr is None else lr,
                         beta1=self.beta1, beta2=self.beta2,
                         epsilon=self.epsilon, seed=self.seed)


@dataclass
class WannModel:
    """Task network h, adversary h' and weighting network q.

    h and h' share one architecture class and clipping constant; q
    carries a relu output so its weights are nonnegative.

    The weighting network emits relative weights; the instance weight
    is its output times ``weight_scale``. Pretraining sets the scale to
    1/(m+n) and fits the network toward 1, so the network itself works
    at unit scale, which Adam's step size can actually resolve, while
    the effective weights start at the uniform 1/(m+n).
    """

    task: Mlp
    adversary: Mlp
    weighter: Mlp
    opt_task: AdamState
    opt_adversary: AdamState
    opt_weighter: AdamState
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.weighter.output_activation != "relu":
            raise ValueError("weighter must have a relu output activation")
        if self.weight_scale <= 0.0:
            raise ValueError("weight_scale must be positive")

    def instance_weights(self, X: np.ndarray, train_mode: bool = False,
                         rng: np.random.Generator | None = None) -> np.ndarray:
        return self.weight_scale * forward(self.weighter, X, train_mode, rng)


def build_wann_model(n_inputs: int, hidden: tuple[int, ...] = (100, 100), *,
                     clip: float | None = 1.0,
                     clip_weighter: float | None = None,
                     dropout: float = 0.0, config: WannConfig | None = None,
                     seed: int | None = None) -> WannModel:
    """Create a fresh model: h, h' in the same class, q with relu output.

    The weighter clip defaults to the task clip. ``seed`` defaults to
    the config seed; h, h' and q are drawn sequentially from one
    generator stream.
    """
    config = config or WannConfig()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    task = build_mlp(n_inputs, hidden, clip=clip, dropout=dropout, rng=rng)
    # The adversary starts at the task's parameters: their loss
    # difference, which drives the weighter, is then exactly zero at
    # step one and grows out of the adversarial play itself. Distinct
    # random starts instead hand the weighter several full-size steps
    # of pure initialization luck, enough to saturate its relu output.
    # Dropout stays off for the adversary and the weighter.
    adversary = task.copy()
    for layer in adversary.layers:
        layer.dropout_rate = 0.0
    weighter = build_mlp(n_inputs, hidden,
                         clip=clip if clip_weighter is None else clip_weighter,
                         output_activation="relu", rng=rng)
    adam = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                epsilon=config.epsilon)
    return WannModel(task, adversary, weighter,
                     AdamState.for_net(task, **adam),
                     AdamState.for_net(adversary, **adam),
                     AdamState.for_net(weighter, **adam))


def pretrain_weighter(model: WannModel, train: TrainingSet,
                      config: WannConfig) -> WannModel:
    """Fit q toward the constant 1/(m+n) so all weights start uniform.

    Sets the model's weight scale to 1/(m+n) and fits the network
    toward the constant 1. The fit targets the pre-relu output (the
    relu is inactive at the positive constant anyway); fitting through
    the relu instead leaves rows that dip negative without a gradient.
    """
    k = len(train)
    model.weight_scale = 1.0 / k
    target = np.ones(k)
    uniform = np.full(k, 1.0 / k)
    lr = config.pretrain_lr if config.pretrain_lr is not None else config.lr
    activation = model.weighter.output_activation
    model.weighter.output_activation = "identity"
    try:
        fit_regression(model.weighter, train.X, target, uniform,
                       config.fit_config(epochs=config.pretrain_epochs, lr=lr))
    finally:
        model.weighter.output_activation = activation
    return model


@dataclass
class StepDiagnostics:
    """Batch losses reported by one adversarial step."""

    l_q_h: float
    l_tgt_hp: float
    l_q_hp: float

    @property
    def objective(self) -> float:
        return self.l_q_h + self.l_tgt_hp - self.l_q_hp


def wann_step(model: WannModel, X: np.ndarray, y: np.ndarray,
              is_target: np.ndarray, rng: np.random.Generator | None = None,
              epoch: int = 0, total_rows: int | None = None
              ) -> StepDiagnostics:
    """One gradient descent-ascent step on a batch.

    All three gradients are taken at the same parameter snapshot, then
    the updates are applied adversary -> task -> weighter, each
    followed by clipping. Batches without target rows contribute zero
    to the target-risk term.

    ``total_rows`` is the size of the full training set the batch was
    drawn from. The weighted sums over a batch understate the full-set
    sums by batch/total while the target-risk mean is already unbiased,
    so the update gradients rescale the weighted terms by total/batch.
    Left unset, the batch is treated as the whole set.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    is_target = np.asarray(is_target, dtype=bool)
    if not (len(X) == len(y) == len(is_target)):
        raise ValueError("X, y and is_target must have matching lengths")
    if is_target.all():
        raise ValueError("batch needs at least one source row")
    scale = 1.0 if total_rows is None else total_rows / len(X)

    g, cache_q = _forward_cache(model.weighter, X, True, rng)
    w = model.weight_scale * g
    out_h, cache_h = _forward_cache(model.task, X, True, rng)
    out_hp, cache_hp = _forward_cache(model.adversary, X, True, rng)
    err_h = out_h - y
    err_hp = out_hp - y
    sq_h = err_h * err_h
    sq_hp = err_hp * err_hp

    n_b = int(is_target.sum())
    l_q_h = float(np.dot(w, sq_h))
    l_q_hp = float(np.dot(w, sq_hp))
    l_tgt_hp = float(sq_hp[is_target].mean()) if n_b else 0.0
    if not (math.isfinite(l_q_h) and math.isfinite(l_q_hp)
            and math.isfinite(l_tgt_hp)):
        raise TrainingDivergedError(epoch)

    grads_h = _backward(model.task, cache_h, 2.0 * scale * w * err_h)
    v = -scale * w
    if n_b:
        v = v + is_target / n_b
    gap_grads = _backward(model.adversary, cache_hp, 2.0 * v * err_hp)
    factors = model.weight_scale * scale * (sq_h - sq_hp)
    grads_q = _backward(model.weighter, cache_q, factors)

    adam_step(model.adversary, gap_grads.scaled(-1.0), model.opt_adversary)
    adam_step(model.task, grads_h, model.opt_task)
    adam_step(model.weighter, grads_q, model.opt_weighter)
    return StepDiagnostics(l_q_h, l_tgt_hp, l_q_hp)


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _stratified_order(rng: np.random.Generator, is_target: np.ndarray,
                      batch_size: int) -> np.ndarray:
    """Shuffle so every batch holds at least one target row.

    One target row is reserved per batch; everything else is shuffled
    uniformly over the remaining slots.
    """
    tgt = rng.permutation(np.flatnonzero(is_target))
    n = len(is_target)
    n_batches = math.ceil(n / batch_size)
    if len(tgt) < n_batches:
        raise ValueError(
            f"stratified batching needs >= {n_batches} target rows, "
            f"got {len(tgt)}"
        )
    rest = rng.permutation(
        np.concatenate([tgt[n_batches:], np.flatnonzero(~is_target)]))
    chunks = []
    pos = 0
    for k in range(n_batches):
        size = min(batch_size, n - k * batch_size)
        chunks.append(tgt[k:k + 1])
        chunks.append(rest[pos:pos + size - 1])
        pos += size - 1
    return np.concatenate(chunks)


def fit_wann(model: WannModel, train: TrainingSet, config: WannConfig,
             validation: LabeledSample | None = None) -> RunResult:
    """Run the full adversarial schedule over seeded shuffled batches.

    The model must have been pretrained (see ``pretrain_weighter``).
    Records the validation MSE of h once per epoch when a validation
    sample is given. Deterministic per seed; mutates the model.
    """
    if train.n_source == 0 or train.n_target == 0:
        raise ValueError("training set needs both source and target rows")
    if config.batch_size < 1 or config.batch_size > len(train):
        raise ValueError("batch_size must lie in [1, m+n]")
    rng = np.random.default_rng(config.seed)
    curve: list[float] = []
    for epoch in range(config.epochs):
        if config.stratify_batches:
            order = _stratified_order(rng, train.is_target, config.batch_size)
        else:
            order = rng.permutation(len(train))
        for idx in _batches(order, config.batch_size):
            wann_step(model, train.X[idx], train.y[idx],
                      train.is_target[idx], rng=rng, epoch=epoch,
                      total_rows=len(train))
        if validation is not None:
            pred = forward(model.task, validation.X)
            curve.append(float(np.mean((pred - validation.y) ** 2)))
    result = RunResult(method="wann", seed=config.seed, curve=curve)
    if validation is not None:
        pred = forward(model.task, validation.X)
        err = pred - validation.y
        result.final_mse = float(np.mean(err * err))
        result.final_mae = float(np.mean(np.abs(err)))
    result.weights = model.instance_weights(train.X)
    return result


@dataclass
class TrainingWeights:
    """Raw weighter outputs plus a mean-one normalized copy."""

    raw: np.ndarray
    normalized: np.ndarray


def training_weights(model: WannModel, train: TrainingSet) -> TrainingWeights:
    """Evaluate q on every training row.

    The normalized copy is scaled so the mean weight is one (the
    histogram convention). Raises if every weight is zero.
    """
    raw = model.instance_weights(train.X)
    mean = raw.mean()
    if mean == 0.0:
        raise ValueError("all training weights are zero; cannot normalize")
    return TrainingWeights(raw, raw / mean)


def predict(model: WannModel, X: np.ndarray) -> np.ndarray:
    """Deterministic task-network predictions."""
    return forward(model.task, X)
