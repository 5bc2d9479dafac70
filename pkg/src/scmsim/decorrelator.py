"""Linear decorrelation of the enhancement features.

The enhancement vector u2 is split as u2 = W u1 + b + r, where (W, b) is
the affine LMMSE estimator of u2 from u1 and r is the residual carrying
only the refinement information. The residual of the exact LMMSE solution
is uncorrelated with u1 (orthogonality principle). The pipeline trains a
one-layer affine toward this solution by gradient descent; fit_lmmse is
the closed-form oracle kept for validation. This module also computes the
entropy upper bound n*ln(pi*e/n * E||r||^2) for the residual, along with
the full four-step inequality chain behind it (Gaussian maximum entropy,
Hadamard, AM-GM, variance <= second moment).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .tensor import Tensor

LN_2PIE = float(np.log(2.0 * np.pi * np.e))


@dataclass
class AffineEstimator:
    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ShapeError(f"W must be square, got {self.w.shape}")
        if self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"b shape {self.b.shape} incompatible with W {self.w.shape}")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.b))):
            raise ContractError("affine estimator entries must be finite")


@dataclass
class ResidualStats:
    mean_sq_norm: float
    cross_cov: np.ndarray
    sample_count: int

    def __post_init__(self):
        if self.mean_sq_norm < 0:
            raise ContractError("mean_sq_norm must be nonnegative")


def _as_samples(x, name: str) -> np.ndarray:
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError(f"{name} must be [N, D], got shape {data.shape}")
    return data


def fit_lmmse(u1_samples, u2_samples, ridge: float | None = None) -> AffineEstimator:
    """Closed-form LMMSE affine estimator of u2 from u1 (sample moments).

    W = Cov[u2, u1] (Var[u1] + ridge*I)^-1 and b = mean(u2) - W mean(u1),
    with unbiased (N-1) covariance estimates. ridge=None picks the default
    1e-8 * trace(Var[u1]) / D; pass ridge=0 for the bare solution.
    """
    x1 = _as_samples(u1_samples, "u1_samples")
    x2 = _as_samples(u2_samples, "u2_samples")
    if x1.shape != x2.shape:
        raise ShapeError(f"sample blocks disagree: {x1.shape} vs {x2.shape}")
    n_samp, d = x1.shape
    if n_samp <= d:
        raise ContractError(f"need more samples than dimensions: N={n_samp}, D={d}")
    mu1 = x1.mean(axis=0)
    mu2 = x2.mean(axis=0)
    x1c = x1 - mu1
    x2c = x2 - mu2
    v1 = x1c.T @ x1c / (n_samp - 1)
    c21 = x2c.T @ x1c / (n_samp - 1)
    if ridge is None:
        ridge = 1e-8 * float(np.trace(v1)) / d
    if ridge < 0:
        raise ContractError(f"ridge must be nonnegative, got {ridge}")
    a = v1 + ridge * np.eye(d)
    try:
        # a is symmetric, so solve(a, c21.T).T == c21 @ inv(a)
        w = np.linalg.solve(a, c21.T).T
    except np.linalg.LinAlgError as exc:
        raise ContractError(f"singular covariance in fit_lmmse: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise ContractError("singular covariance in fit_lmmse (non-finite solution)")
    b = mu2 - w @ mu1
    return AffineEstimator(w=w, b=b)


def residual_t(u1, u2, wt: Tensor, b: Tensor) -> Tensor:
    """Graph-mode residual r = u2 - u1 W^T - b with wt holding W transposed."""
    u1 = T.as_tensor(u1)
    u2 = T.as_tensor(u2)
    squeeze = u1.data.ndim == 1
    if squeeze:
        u1 = T.reshape(u1, (1, u1.shape[0]))
        u2 = T.reshape(u2, (1, u2.shape[0]))
    if u1.shape != u2.shape:
        raise ShapeError(f"u1 {u1.shape} vs u2 {u2.shape}")
    r = T.sub_bias(T.sub(u2, T.matmul(u1, wt)), b)
    if squeeze:
        r = T.reshape(r, (r.shape[1],))
    return r


def residual(u1, u2, est):
    """Residual u2 - W u1 - b under an estimator (oracle or trainable)."""
    if isinstance(est, TrainableDecorrelator):
        return residual_t(u1, u2, est.wt, est.b)
    if isinstance(u1, Tensor) or isinstance(u2, Tensor):
        return residual_t(u1, u2, Tensor(est.w.T.copy()), Tensor(est.b.copy()))
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != u2.shape or u1.shape[-1] != est.w.shape[0]:
        raise ShapeError(f"u1 {u1.shape}, u2 {u2.shape}, W {est.w.shape}")
    return u2 - u1 @ est.w.T - est.b


class TrainableDecorrelator:
    """One-layer affine u1 -> u2 trained by gradient descent.

    Stores the transposed weight so the forward pass is a plain right
    matmul; `w` exposes the conventional [D, D] orientation. Zero-initial
    weights make the initial residual equal u2 itself.
    """

    def __init__(self, d: int):
        self.d = d
        self.wt = Tensor(np.zeros((d, d)), track_grad=True)
        self.b = Tensor(np.zeros(d), track_grad=True)

    @property
    def w(self) -> np.ndarray:
        return self.wt.data.T

    def residual(self, u1, u2) -> Tensor:
        return residual_t(u1, u2, self.wt, self.b)

    def as_estimator(self) -> AffineEstimator:
        return AffineEstimator(w=self.w.copy(), b=self.b.data.copy())

    def load_estimator(self, est: AffineEstimator):
        if est.w.shape != (self.d, self.d):
            raise ShapeError(f"estimator is {est.w.shape}, decorrelator is {self.d}-dim")
        self.wt.data[...] = est.w.T
        self.b.data[...] = est.b

    def params(self):
        return [self.wt, self.b]

    def named_params(self, prefix: str) -> dict:
        return {f"{prefix}.wt": self.wt, f"{prefix}.b": self.b}


def cross_cov(u1_samples, r_samples) -> np.ndarray:
    """Unbiased sample cross-covariance Cov[u1, r], rows index u1 dims."""
    x1 = _as_samples(u1_samples, "u1_samples")
    r = _as_samples(r_samples, "r_samples")
    if x1.shape[0] != r.shape[0]:
        raise ShapeError(f"sample counts differ: {x1.shape[0]} vs {r.shape[0]}")
    n_samp = x1.shape[0]
    if n_samp < 2:
        raise ContractError(f"need at least 2 samples for a covariance, got {n_samp}")
    x1c = x1 - x1.mean(axis=0)
    rc = r - r.mean(axis=0)
    return x1c.T @ rc / (n_samp - 1)


def residual_stats(u1_samples, r_samples) -> ResidualStats:
    r = _as_samples(r_samples, "r_samples")
    return ResidualStats(
        mean_sq_norm=float(np.mean(np.sum(r * r, axis=1))),
        cross_cov=cross_cov(u1_samples, r_samples),
        sample_count=r.shape[0],
    )


def entropy_upper_bound(r_samples, n: int) -> float:
    """Upper bound n*ln(pi*e/n * E||r||^2) on h(r), in nats."""
    r = _as_samples(r_samples, "r_samples")
    if r.shape[1] != 2 * n:
        raise ShapeError(f"residuals are {r.shape[1]}-dim, expected 2n = {2 * n}")
    msq = float(np.mean(np.sum(r * r, axis=1)))
    if msq <= 0:
        raise ContractError("degenerate bound: residual second moment is zero")
    return n * float(np.log(np.pi * np.e / n * msq))


def bound_chain_check(r_samples) -> tuple[float, float, float, float]:
    """The four successive entropy bounds, from sample moments (nats).

    1. Gaussian maximum entropy with the full covariance.
    2. Hadamard: replace |C| with the product of its diagonal.
    3. AM-GM: replace the geometric mean of variances with the arithmetic.
    4. Variance <= second moment, giving n*ln(pi*e/n * E||r||^2).

    Population (divide-by-N) moments are used for every step so the chain
    is monotone for any finite sample; mixing unbiased variances with the
    biased second moment can break the last step for near-zero-mean data.
    """
    r = _as_samples(r_samples, "r_samples")
    n_samp, d = r.shape
    if n_samp < 2:
        raise ContractError(f"need at least 2 samples, got {n_samp}")
    rc = r - r.mean(axis=0)
    cov = rc.T @ rc / n_samp
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ContractError("singular sample covariance in bound_chain_check")
    variances = np.diag(cov)
    if np.any(variances <= 0):
        raise ContractError("zero-variance dimension in bound_chain_check")
    second_moments = np.mean(r * r, axis=0)
    base = 0.5 * d * LN_2PIE
    step1 = base + 0.5 * logdet
    step2 = base + 0.5 * float(np.sum(np.log(variances)))
    step3 = base + 0.5 * d * float(np.log(np.mean(variances)))
    step4 = base + 0.5 * d * float(np.log(np.mean(second_moments)))
    return (step1, step2, step3, step4)


def batch_standardize(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Per-dimension zero mean / unit variance over the batch, in-graph."""
    x = T.as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"expected [B, D] batch, got {x.shape}")
    mu = T.col_mean(x)
    xc = T.sub_bias(x, mu)
    var = T.col_mean(T.mul(xc, xc))
    inv_sd = T.pow_const(T.add(var, Tensor(np.full(x.shape[1], eps))), -0.5)
    return T.scale_cols(xc, inv_sd)
