"""Minimal dense network engine for scalar regression.

Forward passes, exact reverse-mode gradients of per-example-weighted
losses, Adam updates and coordinate-wise weight clipping. Everything is
float64 and deterministic given a seed; no autodiff framework involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_ACTIVATIONS = ("relu", "identity")


def _act(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """Fully connected layer: out = act(x @ weights + biases).

    Dropout, when configured, is inverted dropout applied to the layer
    output in training mode only; evaluation mode is deterministic.
    """

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "identity"
    dropout_rate: float = 0.0

    def __post_init__(self):
        # own copies: layers are updated in place by the optimizer
        self.weights = np.array(self.weights, dtype=np.float64)
        self.biases = np.array(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("layer weights must be a 2-D matrix")
        if self.biases.shape != (self.weights.shape[1],):
            raise ValueError(
                f"bias shape {self.biases.shape} does not match "
                f"{self.weights.shape[1]} output units"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(),
                          self.activation, self.dropout_rate)


@dataclass
class Mlp:
    """Feed-forward network with scalar output.

    ``clip`` is the weight-clipping constant: after every optimizer step
    all weights and biases are projected onto [-clip, clip]. The
    optional relu ``output_activation`` clamps outputs to be
    nonnegative (used by weighting networks).
    """

    layers: list[DenseLayer]
    clip: float | None = None
    output_activation: str = "identity"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.layers[-1].n_outputs != 1:
            raise ValueError("only scalar-output networks are supported")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_outputs != nxt.n_inputs:
                raise ValueError(
                    f"layer dims incompatible: {prev.n_outputs} -> {nxt.n_inputs}"
                )
        if self.output_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.output_activation!r}")
        if self.clip is not None and self.clip <= 0:
            raise ValueError("clip constant must be positive")

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_inputs

    def copy(self) -> "Mlp":
        return Mlp([layer.copy() for layer in self.layers],
                   self.clip, self.output_activation)


@dataclass
class ArchSpec:
    """Architecture class: hidden widths, clip constant, dropout rate."""

    hidden: tuple[int, ...] = (100, 100)
    clip: float | None = 1.0
    dropout: float = 0.0

    def build(self, n_inputs: int, rng: np.random.Generator | None = None,
              output_activation: str = "identity") -> "Mlp":
        return build_mlp(n_inputs, self.hidden, clip=self.clip,
                         output_activation=output_activation,
                         dropout=self.dropout, rng=rng)


def build_mlp(n_inputs: int, hidden: tuple[int, ...] = (100, 100), *,
              clip: float | None = None, output_activation: str = "identity",
              dropout: float = 0.0,
              rng: np.random.Generator | None = None) -> Mlp:
    """Create an MLP with relu hidden layers and a scalar output.

    Weights are Glorot-uniform, biases zero. ``dropout`` applies to
    hidden layers only.
    """
    if rng is None:
        rng = np.random.default_rng()
    dims = [n_inputs, *hidden, 1]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        is_hidden = k < len(dims) - 2
        layers.append(DenseLayer(
            weights=weights,
            biases=np.zeros(fan_out),
            activation="relu" if is_hidden else "identity",
            dropout_rate=dropout if is_hidden else 0.0,
        ))
    net = Mlp(layers, clip=clip, output_activation=output_activation)
    if clip is not None:
        clip_weights(net)
    return net


def _forward_cache(net: Mlp, X: np.ndarray, train: bool,
                   rng: np.random.Generator | None):
    """Forward pass keeping per-layer caches for the backward pass.

    Returns (outputs [b], caches). Each cache holds the layer input,
    pre-activation and dropout scale mask (or None).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix [batch x features]")
    if X.shape[1] != net.n_inputs:
        raise ValueError(
            f"X has {X.shape[1]} columns, network expects {net.n_inputs}"
        )
    caches = []
    a = X
    for layer in net.layers:
        z = a @ layer.weights + layer.biases
        out = _act(z, layer.activation)
        mask = None
        if train and layer.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng")
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(out.shape) < keep) / keep
            out = out * mask
        caches.append((a, z, mask))
        a = out
    z_out = a[:, 0]
    y = _act(z_out, net.output_activation)
    caches.append(z_out)
    return y, caches


def _backward(net: Mlp, caches, d_out: np.ndarray) -> "GradBundle":
    """Reverse-mode parameter gradients from d(loss)/d(outputs)."""
    z_out = caches[-1]
    delta = (d_out * _act_grad(z_out, net.output_activation))[:, None]
    d_weights: list[np.ndarray] = [None] * len(net.layers)
    d_biases: list[np.ndarray] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        a_in, z, mask = caches[k]
        if mask is not None:
            delta = delta * mask
        delta = delta * _act_grad(z, layer.activation)
        d_weights[k] = a_in.T @ delta
        d_biases[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ layer.weights.T
    return GradBundle(d_weights, d_biases)


@dataclass
class GradBundle:
    """Per-parameter gradients, shape-congruent with an Mlp."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scaled(self, factor: float) -> "GradBundle":
        return GradBundle([factor * g for g in self.d_weights],
                          [factor * g for g in self.d_biases])

    @classmethod
    def zeros_like(cls, net: Mlp) -> "GradBundle":
        return cls([np.zeros_like(layer.weights) for layer in net.layers],
                   [np.zeros_like(layer.biases) for layer in net.layers])


def forward(net: Mlp, X: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Evaluate the network on a batch, returning one output per row.

    Evaluation mode (the default) is a deterministic function of
    (net, X); training mode draws dropout masks from ``rng``.
    """
    y, _ = _forward_cache(net, X, train, rng)
    return y


def weighted_mse_grad(net: Mlp, X: np.ndarray, y: np.ndarray, w: np.ndarray,
                      train: bool = False,
                      rng: np.random.Generator | None = None
                      ) -> tuple[float, GradBundle]:
    """Weighted sum of squared errors and its exact parameter gradient.

    loss = sum_i w_i * (net(x_i) - y_i)^2. Weights may be negative
    (signed per-example factors appear in adversarial updates). The
    loss and gradient share one forward pass, so training-mode dropout
    masks are common to both.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if not (len(X) == len(y) == len(w)):
        raise ValueError("X, y and w must have the same number of rows")
    if len(X) < 1:
        raise ValueError("need at least one example")
    out, caches = _forward_cache(net, X, train, rng)
    err = out - y
    loss = float(np.dot(w, err * err))
    grads = _backward(net, caches, 2.0 * w * err)
    return loss, grads


def weighted_output_grad(net: Mlp, X: np.ndarray, v: np.ndarray,
                         train: bool = False,
                         rng: np.random.Generator | None = None
                         ) -> tuple[float, GradBundle]:
    """Weighted sum of raw outputs, sum_i v_i * net(x_i), and its gradient.

    Used for weighting-network updates where the per-example factors
    v_i are signed loss differences.
    """
    v = np.asarray(v, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if len(X) != len(v):
        raise ValueError("X and v must have the same number of rows")
    out, caches = _forward_cache(net, X, train, rng)
    value = float(np.dot(v, out))
    grads = _backward(net, caches, v.copy())
    return value, grads


@dataclass
class AdamState:
    """Adam accumulators for one Mlp (first/second moments per parameter)."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 0.001, beta1: float = 0.9,
                beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(layer.weights) for layer in net.layers],
            v_weights=[np.zeros_like(layer.weights) for layer in net.layers],
            m_biases=[np.zeros_like(layer.biases) for layer in net.layers],
            v_biases=[np.zeros_like(layer.biases) for layer in net.layers],
            lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def _adam_update(param, grad, m, v, state: AdamState, corr1, corr2):
    m *= state.beta1
    m += (1.0 - state.beta1) * grad
    v *= state.beta2
    v += (1.0 - state.beta2) * grad * grad
    m_hat = m / corr1
    v_hat = v / corr2
    param -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def adam_step(net: Mlp, grads: GradBundle, state: AdamState) -> None:
    """One in-place Adam update with bias correction, then clipping."""
    if len(grads.d_weights) != len(net.layers):
        raise ValueError("gradient bundle does not match network depth")
    for layer, dw, db in zip(net.layers, grads.d_weights, grads.d_biases):
        if dw.shape != layer.weights.shape or db.shape != layer.biases.shape:
            raise ValueError("gradient shapes do not match network parameters")
    state.step_count += 1
    corr1 = 1.0 - state.beta1 ** state.step_count
    corr2 = 1.0 - state.beta2 ** state.step_count
    for k, layer in enumerate(net.layers):
        _adam_update(layer.weights, grads.d_weights[k],
                     state.m_weights[k], state.v_weights[k], state, corr1, corr2)
        _adam_update(layer.biases, grads.d_biases[k],
                     state.m_biases[k], state.v_biases[k], state, corr1, corr2)
    if net.clip is not None:
        clip_weights(net)


def clip_weights(net: Mlp) -> Mlp:
    """Project every weight and bias onto [-clip, clip], in place."""
    if net.clip is None:
        raise ValueError("network has no clip constant")
    c = net.clip
    for layer in net.layers:
        np.clip(layer.weights, -c, c, out=layer.weights)
        np.clip(layer.biases, -c, c, out=layer.biases)
    return net


@dataclass
class FitConfig:
    """Mini-batch training configuration for plain weighted regression."""

    epochs: int = 100
    batch_size: int = 32
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0


@dataclass
class FitTrace:
    """Per-epoch training loss, plus validation MSE when requested."""

    train_loss: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)


def fit_regression(net: Mlp, X: np.ndarray, y: np.ndarray, w: np.ndarray,
                   config: FitConfig,
                   validation: tuple[np.ndarray, np.ndarray] | None = None
                   ) -> FitTrace:
    """Mini-batch Adam on the weighted MSE, in place.

    Batches are drawn by seeded shuffling each epoch, so the run is
    deterministic given (inputs, config). Per-batch gradients are
    scaled by total/batch rows, the unbiased estimate of the full-set
    weighted loss (for uniform 1/k weights this is plain mean-MSE
    training). Records the full-data training loss after each epoch
    and, when ``validation`` is given, the unweighted validation MSE
    of the current network.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty training set")
    if not (len(X) == len(y) == len(w)):
        raise ValueError("X, y and w must have the same number of rows")
    if config.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_net(net, lr=config.lr, beta1=config.beta1,
                              beta2=config.beta2, epsilon=config.epsilon)
    trace = FitTrace()
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            scale = len(X) / len(idx)
            batch_loss, grads = weighted_mse_grad(net, X[idx], y[idx],
                                                  scale * w[idx],
                                                  train=True, rng=rng)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(len(trace.train_loss))
            adam_step(net, grads, state)
        err = forward(net, X) - y
        loss = float(np.dot(w, err * err))
        if not np.isfinite(loss):
            raise TrainingDivergedError(len(trace.train_loss))
        trace.train_loss.append(loss)
        if validation is not None:
            val_x, val_y = validation
            pred = forward(net, val_x)
            trace.val_mse.append(float(np.mean((pred - val_y) ** 2)))
    return trace


class TrainingDivergedError(RuntimeError):
    """A training loss became non-finite; carries the failing epoch."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch
