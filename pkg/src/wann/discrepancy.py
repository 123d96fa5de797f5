"""Empirical estimation of the worst-case target/weighted-source risk gap.

The quantity of interest is the maximum over a clipped hypothesis
class of |target risk - weighted source risk|. A fresh adversary is
trained by gradient ascent on the signed gap

    d(h') = mean_j (h'(x'_j) - y'_j)^2 - sum_i w_i (h'(x_i) - y_i)^2

and a second one on -d, recovering the absolute value dropped from
the differentiable objective. The reported figure is the running best
|d| over full-sample evaluations, a lower bound on the true maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledSample
from .nn import (AdamState, Mlp, TrainingDivergedError, adam_step, build_mlp,
                 forward, weighted_mse_grad)


@dataclass
class DiscrepancyEstimate:
    """Two-sided estimate; ``value`` is the larger of the two runs."""

    value: float
    positive_side: float
    negative_side: float


def _signed_gap(net: Mlp, src_x, src_y, src_w, tgt_x, tgt_y) -> float:
    src_err = forward(net, src_x) - src_y
    tgt_err = forward(net, tgt_x) - tgt_y
    return float(np.mean(tgt_err * tgt_err) - np.dot(src_w, src_err * src_err))


def _ascend(net: Mlp, sign: float, src_x, src_y, src_w, tgt_x, tgt_y,
            epochs: int, batch_size: int, lr: float,
            rng: np.random.Generator) -> float:
    """Gradient-ascend sign*d, returning the best |d| seen on full data."""
    X = np.concatenate([src_x, tgt_x])
    y = np.concatenate([src_y, tgt_y])
    flags = np.concatenate([np.zeros(len(src_x), dtype=bool),
                            np.ones(len(tgt_x), dtype=bool)])
    w_full = np.concatenate([src_w, np.zeros(len(tgt_x))])
    state = AdamState.for_net(net, lr=lr)
    best = abs(_signed_gap(net, src_x, src_y, src_w, tgt_x, tgt_y))
    for epoch in range(epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch_size):
            idx = order[start:start + batch_size]
            n_b = int(flags[idx].sum())
            u = -w_full[idx]
            if n_b:
                u = u + flags[idx] / n_b
            _, grads = weighted_mse_grad(net, X[idx], y[idx], sign * u)
            adam_step(net, grads.scaled(-1.0), state)
        d = _signed_gap(net, src_x, src_y, src_w, tgt_x, tgt_y)
        if not math.isfinite(d):
            raise TrainingDivergedError(epoch)
        best = max(best, abs(d))
    return best


def estimate_y_discrepancy(source_x: np.ndarray, source_y: np.ndarray,
                           source_w: np.ndarray, target: LabeledSample, *,
                           hidden: tuple[int, ...] = (100, 100),
                           clip: float = 1.0, epochs: int = 100,
                           batch_size: int = 128, lr: float = 0.001,
                           seed: int = 0,
                           init_net: Mlp | None = None) -> DiscrepancyEstimate:
    """Two-sided adversarial estimate of the maximal risk gap.

    ``source_w`` are fixed nonnegative instance weights (a weighted
    empirical source distribution). Both adversaries start from
    ``init_net`` when given, otherwise from fresh seeded
    initializations. The running best is evaluated before training and
    after every epoch, so a larger epoch budget never lowers the
    estimate.
    """
    source_x = np.asarray(source_x, dtype=np.float64)
    source_y = np.asarray(source_y, dtype=np.float64)
    source_w = np.asarray(source_w, dtype=np.float64)
    if not (len(source_x) == len(source_y) == len(source_w)):
        raise ValueError("source arrays must have matching lengths")
    if (source_w < 0).any():
        raise ValueError("source weights must be nonnegative")
    if source_x.shape[1] != target.X.shape[1]:
        raise ValueError("source and target have different feature counts")

    init_rng = np.random.default_rng(seed)
    if init_net is not None:
        net_pos, net_neg = init_net.copy(), init_net.copy()
    else:
        net_pos = build_mlp(source_x.shape[1], hidden, clip=clip, rng=init_rng)
        net_neg = build_mlp(source_x.shape[1], hidden, clip=clip, rng=init_rng)

    args = (source_x, source_y, source_w, target.X, target.y,
            epochs, batch_size, lr)
    pos = _ascend(net_pos, 1.0, *args, rng=np.random.default_rng([seed, 1]))
    neg = _ascend(net_neg, -1.0, *args, rng=np.random.default_rng([seed, 2]))
    return DiscrepancyEstimate(max(pos, neg), pos, neg)
