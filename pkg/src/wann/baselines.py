"""Instance-based competitor methods.

Uniform weighting and target-only fits, kernel mean matching (KMM),
KLIEP density-ratio weights and a reverse-boosting regression transfer
ensemble. The two kernel methods are solved with projected gradient
and analytic projections rather than an external QP solver; desk-scale
sample sizes keep first-order methods adequate and the test suite
validates them against grid-search oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import TrainingSet
from .nn import ArchSpec, FitConfig, FitTrace, Mlp, fit_regression, forward

EPS = np.finfo(float).eps


def uniform_fit(train: TrainingSet, arch: ArchSpec, config: FitConfig,
                validation: tuple[np.ndarray, np.ndarray] | None = None
                ) -> tuple[Mlp, FitTrace]:
    """Fit one network on all rows with weights 1/(m+n)."""
    k = len(train)
    net = arch.build(train.X.shape[1], rng=np.random.default_rng(config.seed))
    trace = fit_regression(net, train.X, train.y, np.full(k, 1.0 / k),
                           config, validation)
    return net, trace


def target_only_fit(train: TrainingSet, arch: ArchSpec, config: FitConfig,
                    validation: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> tuple[Mlp, FitTrace]:
    """Fit one network on the target rows only, uniformly weighted."""
    rows = train.target_rows()
    if len(rows) == 0:
        raise ValueError("target-only fit needs at least one target row")
    net = arch.build(train.X.shape[1], rng=np.random.default_rng(config.seed))
    trace = fit_regression(net, rows.X, rows.y,
                           np.full(len(rows), 1.0 / len(rows)),
                           config, validation)
    return net, trace


def median_pairwise_distance(X: np.ndarray, Y: np.ndarray | None = None
                             ) -> float:
    """Median pairwise Euclidean distance, the default kernel bandwidth."""
    Z = X if Y is None else np.concatenate([X, Y])
    sq = np.sum(Z * Z, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    iu = np.triu_indices(len(Z), k=1)
    dists = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(dists)) if len(dists) else 1.0
    return med if med > 0.0 else 1.0


def _gaussian_kernel(X: np.ndarray, Y: np.ndarray, sigma: float) -> np.ndarray:
    sq_x = np.sum(X * X, axis=1)[:, None]
    sq_y = np.sum(Y * Y, axis=1)[None, :]
    d2 = np.maximum(sq_x + sq_y - 2.0 * (X @ Y.T), 0.0)
    return np.exp(-d2 / (2.0 * sigma * sigma))


@dataclass
class KmmConfig:
    """Kernel mean matching parameters.

    ``kernel_bandwidth=None`` uses the median pairwise distance of the
    combined sample; ``eps=None`` uses (sqrt(m)-1)/sqrt(m).
    """

    kernel_bandwidth: float | None = None
    B: float = 1000.0
    eps: float | None = None
    max_iter: int = 2000
    tol: float = 1e-12

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("B must be positive")
        if self.eps is not None and not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")


def _project_box_band(v: np.ndarray, B: float, lo: float, hi: float
                      ) -> np.ndarray:
    """Euclidean projection onto {0 <= w <= B, lo <= sum(w) <= hi}.

    The projection is clip(v - lam, 0, B) where lam shifts the sum into
    the band; the sum is monotone in lam, so bisection solves it.
    """
    m = len(v)
    if m * B < lo:
        raise ValueError("infeasible constraints: m*B below the sum band")
    w = np.clip(v, 0.0, B)
    total = w.sum()
    if lo <= total <= hi:
        return w

    def shifted_sum(lam: float) -> float:
        return float(np.clip(v - lam, 0.0, B).sum())

    want = hi if total > hi else lo
    left, right = float(v.min() - B - 1.0), float(v.max() + 1.0)
    for _ in range(200):
        mid = 0.5 * (left + right)
        if shifted_sum(mid) > want:
            left = mid
        else:
            right = mid
    return np.clip(v - 0.5 * (left + right), 0.0, B)


def kmm_weights(source_X: np.ndarray, target_X: np.ndarray,
                config: KmmConfig | None = None) -> np.ndarray:
    """Source weights matching the weighted source mean embedding to the
    target mean embedding in a Gaussian RKHS.

    Minimizes ||(1/m) sum_i w_i phi(x_i) - (1/n) sum_j phi(x'_j)||^2
    subject to 0 <= w <= B and |sum(w) - m| <= m*eps, by projected
    gradient with a fixed 1/L step.
    """
    config = config or KmmConfig()
    source_X = np.asarray(source_X, dtype=np.float64)
    target_X = np.asarray(target_X, dtype=np.float64)
    m, n = len(source_X), len(target_X)
    if m < 1 or n < 1:
        raise ValueError("need at least one source and one target point")
    sigma = config.kernel_bandwidth
    if sigma is None:
        sigma = median_pairwise_distance(source_X, target_X)
    eps = config.eps
    if eps is None:
        eps = (math.sqrt(m) - 1.0) / math.sqrt(m)
        eps = max(eps, 1e-12)

    K = _gaussian_kernel(source_X, source_X, sigma)
    K = 0.5 * (K + K.T) + 1e-8 * np.eye(m)
    kappa = _gaussian_kernel(source_X, target_X, sigma).sum(axis=1)

    eigvals = np.linalg.eigvalsh(K)
    if eigvals[0] < -1e-6 * max(eigvals[-1], 1.0):
        raise ArithmeticError("kernel matrix not positive semidefinite "
                              "after jitter")
    step = (m * m) / (2.0 * max(eigvals[-1], 1e-12))

    lo, hi = m * (1.0 - eps), m * (1.0 + eps)

    def objective(w: np.ndarray) -> float:
        return float(w @ K @ w / (m * m) - 2.0 * (w @ kappa) / (m * n))

    w = _project_box_band(np.ones(m), config.B, lo, hi)
    obj = objective(w)
    for _ in range(config.max_iter):
        grad = 2.0 * (K @ w) / (m * m) - 2.0 * kappa / (m * n)
        w_new = _project_box_band(w - step * grad, config.B, lo, hi)
        obj_new = objective(w_new)
        w = w_new
        if obj - obj_new < config.tol:
            obj = obj_new
            break
        obj = obj_new
    w = np.clip(w, 0.0, config.B)
    if not np.isfinite(w).all():
        raise ArithmeticError("KMM produced non-finite weights")
    return w


@dataclass
class KliepConfig:
    """KLIEP parameters; centers are drawn from the target sample."""

    n_centers: int = 100
    kernel_bandwidth: float | None = None
    max_iter: int = 2000
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.n_centers < 1:
            raise ValueError("n_centers must be >= 1")


def kliep_weights(source_X: np.ndarray, target_X: np.ndarray,
                  config: KliepConfig | None = None,
                  objective_trace: list[float] | None = None) -> np.ndarray:
    """Density-ratio weights from KL-divergence minimization.

    Maximizes sum_j log(sum_l alpha_l k(x'_j, c_l)) over alpha >= 0
    under the normalization (1/m) sum_i sum_l alpha_l k(x_i, c_l) = 1,
    by projected gradient ascent with backtracking. Each trial step is
    followed by an orthogonal correction back onto the equality
    hyperplane, a clip to nonnegative and a rescale restoring the
    equality exactly (the correction keeps fixed points stationary on
    the constraint surface, which a rescale alone does not). The
    accepted objective sequence is non-decreasing. At most
    min(n_centers, n) target points are used as kernel centers.

    ``objective_trace``, when given a list, receives the objective
    value after every accepted iteration.
    """
    config = config or KliepConfig()
    source_X = np.asarray(source_X, dtype=np.float64)
    target_X = np.asarray(target_X, dtype=np.float64)
    m, n = len(source_X), len(target_X)
    if m < 1 or n < 1:
        raise ValueError("need at least one source and one target point")
    rng = np.random.default_rng(config.seed)
    n_centers = min(config.n_centers, n)
    centers = target_X[rng.choice(n, size=n_centers, replace=False)]
    sigma = config.kernel_bandwidth
    if sigma is None:
        sigma = median_pairwise_distance(source_X, target_X)

    k_tgt = _gaussian_kernel(target_X, centers, sigma)
    k_src = _gaussian_kernel(source_X, centers, sigma)
    b = k_src.mean(axis=0)

    b_norm_sq = float(b @ b)
    if b_norm_sq == 0.0:
        raise ValueError(
            "every source point has zero kernel mass under the centers; "
            "increase the kernel bandwidth"
        )

    def normalize(alpha: np.ndarray) -> np.ndarray | None:
        alpha = alpha + (1.0 - b @ alpha) / b_norm_sq * b
        alpha = np.maximum(alpha, 0.0)
        scale = float(b @ alpha)
        if scale <= 0.0 or not math.isfinite(scale):
            return None
        return alpha / scale

    def objective(alpha: np.ndarray) -> float:
        mass = k_tgt @ alpha
        if (mass <= 0.0).any():
            return -math.inf
        return float(np.log(mass).sum())

    alpha = normalize(np.ones(n_centers))
    if alpha is None or not math.isfinite(objective(alpha)):
        raise ValueError(
            "a target point has zero kernel mass under every center; "
            "increase the kernel bandwidth"
        )
    obj = objective(alpha)
    if objective_trace is not None:
        objective_trace.append(obj)
    rate = 1.0
    for _ in range(config.max_iter):
        grad = k_tgt.T @ (1.0 / (k_tgt @ alpha))
        accepted = False
        while rate > 1e-15:
            trial = normalize(alpha + rate * grad)
            if trial is not None:
                obj_trial = objective(trial)
                if obj_trial >= obj:
                    gain = obj_trial - obj
                    alpha, obj = trial, obj_trial
                    rate *= 1.2
                    accepted = True
                    break
            rate *= 0.5
        if not accepted:
            break
        if objective_trace is not None:
            objective_trace.append(obj)
        if gain < config.tol:
            break
    w = k_src @ alpha
    if not np.isfinite(w).all():
        raise ArithmeticError("KLIEP produced non-finite weights")
    return w


@dataclass
class TradaboostConfig:
    """Reverse-boosting configuration; the base learner is an MLP fit."""

    n_iterations: int = 10
    arch: ArchSpec = field(default_factory=ArchSpec)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")


@dataclass
class TradaboostEnsemble:
    """Per-iteration learners with weighted-median aggregation.

    Prediction uses the later half of the boosting iterations, each
    learner voting with log(1/beta_t).
    """

    learners: list[Mlp]
    log_inv_betas: list[float]
    final_weights: np.ndarray
    weight_history: list[np.ndarray]

    def predict(self, X: np.ndarray) -> np.ndarray:
        start = len(self.learners) // 2
        nets = self.learners[start:]
        votes = np.array(self.log_inv_betas[start:])
        preds = np.column_stack([forward(net, X) for net in nets])
        order = np.argsort(preds, axis=1)
        cdf = np.cumsum(votes[order], axis=1)
        median_col = np.argmax(cdf >= 0.5 * cdf[:, -1:], axis=1)
        idx = np.take_along_axis(order, median_col[:, None], axis=1)
        return np.take_along_axis(preds, idx, axis=1)[:, 0]


def tradaboost_r2_fit(train: TrainingSet, config: TradaboostConfig | None = None
                      ) -> TradaboostEnsemble:
    """Boosting for regression transfer over the combined training set.

    Source rows are reverse-boosted: their weights shrink by
    beta_s**e_i with beta_s = 1/(1 + sqrt(2 ln m / T)) and e_i the
    max-normalized absolute error. Target rows follow AdaBoost.R2
    updates (error-weighted increase), and the weight vector is
    renormalized to sum one after every iteration. A perfect fit stops
    boosting early.
    """
    config = config or TradaboostConfig()
    if train.n_source < 1 or train.n_target < 1:
        raise ValueError("boosting needs both source and target rows")
    m = train.n_source
    k = len(train)
    is_tgt = train.is_target
    beta_s = 1.0 / (1.0 + math.sqrt(2.0 * math.log(m) / config.n_iterations))

    weights = np.full(k, 1.0 / k)
    learners: list[Mlp] = []
    log_inv_betas: list[float] = []
    history: list[np.ndarray] = []
    for t in range(config.n_iterations):
        seed = config.fit.seed + t
        net = config.arch.build(train.X.shape[1],
                                rng=np.random.default_rng(seed))
        fit_cfg = FitConfig(epochs=config.fit.epochs,
                            batch_size=config.fit.batch_size,
                            lr=config.fit.lr, beta1=config.fit.beta1,
                            beta2=config.fit.beta2,
                            epsilon=config.fit.epsilon, seed=seed)
        fit_regression(net, train.X, train.y, weights, fit_cfg)
        learners.append(net)

        abs_err = np.abs(forward(net, train.X) - train.y)
        err_max = float(abs_err.max())
        if err_max == 0.0:
            log_inv_betas.append(-math.log(EPS))
            break
        e = abs_err / err_max
        eps_t = float(weights[is_tgt] @ e[is_tgt]) / float(weights[is_tgt].sum())
        eps_t = min(max(eps_t, EPS), 0.5)
        beta_t = eps_t / (1.0 - eps_t)
        log_inv_betas.append(max(math.log(1.0 / beta_t), EPS))

        weights = weights.copy()
        weights[~is_tgt] *= beta_s ** e[~is_tgt]
        weights[is_tgt] *= beta_t ** (-e[is_tgt])
        weights /= weights.sum()
        history.append(weights.copy())
    return TradaboostEnsemble(learners, log_inv_betas, weights, history)
