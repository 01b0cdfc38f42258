"""Domain types and density computations for the heteroscedastic double elastic net.

The mean model is ``y_i ~ N(x_i' beta, exp(x_i' gamma))``.  Both coefficient
blocks carry a hierarchical elastic-net prior

    beta | tau, lam2   ~ N(0, (diag(1/tau) + lam2 I)^{-1})
    tau_j | lam1_sq    ~ Exp(rate = lam1_sq / 2)
    lam1_sq, lam2      ~ Gamma(shape, rate)

All functions here are pure.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

LOG_2PI = np.log(2.0 * np.pi)
# bound on x_i' gamma before exponentiating
LINPRED_CLAMP = 30.0


class ContractViolation(ValueError):
    """Raised when an input breaks a documented precondition."""


def clamp_linpred(eta):
    return np.clip(eta, -LINPRED_CLAMP, LINPRED_CLAMP)


def _as_index_set(idx) -> frozenset:
    return frozenset(int(j) for j in idx)


@dataclass(frozen=True)
class GroundTruth:
    beta0: np.ndarray
    gamma0: np.ndarray
    support_beta: frozenset = field(default=None)
    support_gamma: frozenset = field(default=None)

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=float)
        gamma0 = np.asarray(self.gamma0, dtype=float)
        if beta0.shape != gamma0.shape or beta0.ndim != 1:
            raise ContractViolation("beta0 and gamma0 must be vectors of equal length")
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "gamma0", gamma0)
        # supports are always derived from the coefficients
        object.__setattr__(self, "support_beta", _as_index_set(np.flatnonzero(beta0)))
        object.__setattr__(self, "support_gamma", _as_index_set(np.flatnonzero(gamma0)))

    @property
    def s_beta(self) -> int:
        return len(self.support_beta)

    @property
    def s_gamma(self) -> int:
        return len(self.support_gamma)


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n x d), responses ``y`` and optional ground truth."""

    x: np.ndarray
    y: np.ndarray
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise ContractViolation(f"x must be a matrix, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ContractViolation(
                f"y must be a vector of length {x.shape[0]}, got shape {y.shape}"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ContractViolation("need n >= 1 and d >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ContractViolation("x and y must be finite")
        if self.truth is not None and self.truth.beta0.shape[0] != x.shape[1]:
            raise ContractViolation("ground truth length does not match d")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Hyperparameters:
    """Gamma (shape, rate) pairs for the four penalty parameters."""

    a_beta1: float = 2.0
    b_beta1: float = 1.0
    a_gamma1: float = 2.0
    b_gamma1: float = 1.0
    a_beta2: float = 2.0
    b_beta2: float = 1.0
    a_gamma2: float = 2.0
    b_gamma2: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ContractViolation(f"{f.name} must be a positive real, got {v!r}")


BLOCKS = (
    "beta",
    "gamma",
    "tau_beta",
    "tau_gamma",
    "lambda1_beta_sq",
    "lambda1_gamma_sq",
    "lambda2_beta",
    "lambda2_gamma",
)


@dataclass
class ChainState:
    """Current value of every parameter block of one chain."""

    beta: np.ndarray
    gamma: np.ndarray
    tau_beta: np.ndarray
    tau_gamma: np.ndarray
    lambda1_beta_sq: float = 1.0
    lambda1_gamma_sq: float = 1.0
    lambda2_beta: float = 1.0
    lambda2_gamma: float = 1.0

    def __post_init__(self):
        for name in ("beta", "gamma", "tau_beta", "tau_gamma"):
            setattr(self, name, np.array(getattr(self, name), dtype=float, ndmin=1))

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    def validate(self) -> None:
        d = self.d
        for name in ("gamma", "tau_beta", "tau_gamma"):
            if getattr(self, name).shape != (d,):
                raise ContractViolation(f"{name} must have length {d}")
        for name in ("tau_beta", "tau_gamma"):
            t = getattr(self, name)
            if not np.all(t > 0) or not np.all(np.isfinite(1.0 / t)):
                raise ContractViolation(f"{name} entries must be strictly positive")
        for name in BLOCKS[4:]:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ContractViolation(f"{name} must be strictly positive, got {v!r}")
        for prec in (self.prior_precision_beta(), self.prior_precision_gamma()):
            if not np.all(np.isfinite(prec)):
                raise ContractViolation("prior precision is not finite")

    def prior_precision_beta(self) -> np.ndarray:
        """Diagonal of ``D_beta^{-1} + lambda2_beta I``."""
        return 1.0 / self.tau_beta + self.lambda2_beta

    def prior_precision_gamma(self) -> np.ndarray:
        return 1.0 / self.tau_gamma + self.lambda2_gamma

    def copy(self) -> "ChainState":
        return replace(
            self,
            beta=self.beta.copy(),
            gamma=self.gamma.copy(),
            tau_beta=self.tau_beta.copy(),
            tau_gamma=self.tau_gamma.copy(),
        )


def _check_vec(v, d: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (d,):
        raise ContractViolation(f"{name} must have length {d}, got shape {v.shape}")
    return v


def log_likelihood(beta, gamma, data: Dataset) -> float:
    """Heteroscedastic Gaussian log-likelihood with log-variance ``X gamma``."""
    beta = _check_vec(beta, data.d, "beta")
    gamma = _check_vec(gamma, data.d, "gamma")
    eta = clamp_linpred(data.x @ gamma)
    resid = data.y - data.x @ beta
    return float(np.sum(-0.5 * LOG_2PI - 0.5 * eta - 0.5 * resid**2 * np.exp(-eta)))


def _log_normal_diag_precision(coefs: np.ndarray, precision: np.ndarray) -> float:
    # N(0, diag(1/precision)); log|Sigma^{-1}| = sum log precision
    d = coefs.shape[0]
    return float(
        -0.5 * d * LOG_2PI + 0.5 * np.sum(np.log(precision)) - 0.5 * np.sum(precision * coefs**2)
    )


def _log_gamma_density(v: float, shape: float, rate: float) -> float:
    return float(stats.gamma.logpdf(v, a=shape, scale=1.0 / rate))


def log_prior(state: ChainState, hyp: Hyperparameters) -> float:
    """Sum of all prior log-densities (normalized) at ``state``."""
    state.validate()
    total = _log_normal_diag_precision(state.beta, state.prior_precision_beta())
    total += _log_normal_diag_precision(state.gamma, state.prior_precision_gamma())
    for tau, lam1_sq in (
        (state.tau_beta, state.lambda1_beta_sq),
        (state.tau_gamma, state.lambda1_gamma_sq),
    ):
        rate = lam1_sq / 2.0
        total += float(np.sum(np.log(rate) - rate * tau))
    total += _log_gamma_density(state.lambda1_beta_sq, hyp.a_beta1, hyp.b_beta1)
    total += _log_gamma_density(state.lambda1_gamma_sq, hyp.a_gamma1, hyp.b_gamma1)
    total += _log_gamma_density(state.lambda2_beta, hyp.a_beta2, hyp.b_beta2)
    total += _log_gamma_density(state.lambda2_gamma, hyp.a_gamma2, hyp.b_gamma2)
    return total


def log_posterior_unnorm(state: ChainState, data: Dataset, hyp: Hyperparameters) -> float:
    return log_likelihood(state.beta, state.gamma, data) + log_prior(state, hyp)


def gaussian_kl(beta0, gamma0, beta, gamma, data: Dataset) -> float:
    """Average over observations of KL(N(x'beta0, e^{x'gamma0}) || N(x'beta, e^{x'gamma}))."""
    d = data.d
    beta0 = _check_vec(beta0, d, "beta0")
    gamma0 = _check_vec(gamma0, d, "gamma0")
    beta = _check_vec(beta, d, "beta")
    gamma = _check_vec(gamma, d, "gamma")
    eta0 = clamp_linpred(data.x @ gamma0)
    eta = clamp_linpred(data.x @ gamma)
    mean_gap = data.x @ (beta - beta0)
    # exp(eta0 - eta) rather than exp(eta0)/exp(eta) keeps the ratio exact at equality
    per_obs = 0.5 * ((eta - eta0) + np.exp(eta0 - eta) + mean_gap**2 * np.exp(-eta) - 1.0)
    return float(max(np.mean(per_obs), 0.0))


def fisher_information_active(
    data: Dataset, support_beta: Sequence[int], support_gamma: Sequence[int]
) -> np.ndarray:
    """Block-diagonal ``[X_Sb'X_Sb / n, 0; 0, X_Sg'X_Sg / n]`` on the active columns.

    Indices are 0-based.  The blocks are the unweighted Gram matrices; no
    variance weighting is applied.
    """
    sb = sorted(_as_index_set(support_beta))
    sg = sorted(_as_index_set(support_gamma))
    for j in sb + sg:
        if not 0 <= j < data.d:
            raise ContractViolation(f"support index {j} out of range for d={data.d}")
    n = data.n
    xb = data.x[:, sb]
    xg = data.x[:, sg]
    kb, kg = len(sb), len(sg)
    out = np.zeros((kb + kg, kb + kg))
    out[:kb, :kb] = xb.T @ xb / n
    out[kb:, kb:] = xg.T @ xg / n
    return out
