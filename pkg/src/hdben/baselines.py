"""Homoscedastic comparison estimators: OLS, lasso / elastic net, Bayesian lasso and
Bayesian elastic net."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .model import BLOCKS, ContractViolation, Dataset, Hyperparameters
from .samplers import (
    ChainFailure,
    PosteriorDraws,
    SingularMatrixError,
    chain_rng,
    draw_weighted_regression,
    sample_gamma_variate,
    update_lambda1_sq,
    update_lambda2,
    update_tau_vector,
)


def fit_ols(data: Dataset) -> np.ndarray:
    """Minimum-norm least squares; singular values below 1e-10 * max are dropped."""
    beta, *_ = np.linalg.lstsq(data.x, data.y, rcond=1e-10)
    return beta


@dataclass(frozen=True)
class EnetConfig:
    l1_weight: float = 0.0
    l2_weight: float = 0.0
    max_iter: int = 10_000
    tol: float = 1e-9
    cv_folds: int = 5
    lambda_grid_size: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.l1_weight < 0 or self.l2_weight < 0:
            raise ContractViolation("penalty weights must be non-negative")
        if self.max_iter < 1:
            raise ContractViolation("max_iter must be positive")
        if not self.tol > 0:
            raise ContractViolation("tol must be positive")
        if self.cv_folds < 2:
            raise ContractViolation("cv_folds must be at least 2")
        if self.lambda_grid_size < 1:
            raise ContractViolation("lambda_grid_size must be positive")


@dataclass
class EnetFit:
    coef: np.ndarray
    converged: bool
    sweeps: int
    objective: np.ndarray = field(default_factory=lambda: np.zeros(0))


def enet_objective(x, y, beta, l1: float, l2: float) -> float:
    resid = y - x @ beta
    return float(0.5 * np.mean(resid**2) + l1 * np.sum(np.abs(beta)) + l2 * np.sum(beta**2))


@numba.njit(cache=True)
def _cd_pass(x, resid, beta, col_sq, l1, l2, coords):
    # one coordinate-descent pass over ``coords``; resid is updated in place
    n = x.shape[0]
    biggest = 0.0
    # rounding in z must not revive a coordinate sitting exactly at the threshold
    cut = l1 * (1.0 + 1e-12)
    for j in coords:
        if col_sq[j] == 0.0:
            continue
        old = beta[j]
        z = 0.0
        for i in range(n):
            z += x[i, j] * resid[i]
        z = z / n + col_sq[j] * old
        if z > cut:
            new = (z - l1) / (col_sq[j] + 2.0 * l2)
        elif z < -cut:
            new = (z + l1) / (col_sq[j] + 2.0 * l2)
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                resid[i] -= x[i, j] * delta
            beta[j] = new
            if abs(delta) > biggest:
                biggest = abs(delta)
    return biggest


@numba.njit(cache=True)
def _objective(resid, beta, l1, l2):
    return 0.5 * np.mean(resid**2) + l1 * np.sum(np.abs(beta)) + l2 * np.sum(beta**2)


@numba.njit(cache=True)
def _cd_solve(x, resid, beta, col_sq, l1, l2, tol, max_iter, history):
    # full passes alternate with passes restricted to the nonzero set
    all_coords = np.arange(x.shape[1])
    history[0] = _objective(resid, beta, l1, l2)
    sweeps = 0
    while sweeps < max_iter:
        change = _cd_pass(x, resid, beta, col_sq, l1, l2, all_coords)
        sweeps += 1
        history[sweeps] = _objective(resid, beta, l1, l2)
        if change < tol:
            return sweeps, True
        active = np.flatnonzero(beta)
        while sweeps < max_iter:
            change = _cd_pass(x, resid, beta, col_sq, l1, l2, active)
            sweeps += 1
            history[sweeps] = _objective(resid, beta, l1, l2)
            if change < tol:
                break
    return sweeps, False


def fit_enet(data: Dataset, cfg: EnetConfig, start: Optional[np.ndarray] = None) -> EnetFit:
    """Coordinate descent on ``(1/2n)||y - Xb||^2 + l1 ||b||_1 + l2 ||b||_2^2``.

    Converged once a full pass changes no coordinate by ``cfg.tol`` or more.
    ``converged`` is False if ``max_iter`` passes were used up; the last
    iterate is returned in that case.  ``objective`` holds the objective
    before the first pass and after every pass.
    """
    x = np.ascontiguousarray(data.x)
    beta = np.zeros(data.d) if start is None else np.array(start, dtype=float)
    resid = data.y - x @ beta
    col_sq = np.mean(x**2, axis=0)
    history = np.empty(cfg.max_iter + 1)
    sweeps, converged = _cd_solve(
        x, resid, beta, col_sq, float(cfg.l1_weight), float(cfg.l2_weight),
        float(cfg.tol), int(cfg.max_iter), history,
    )
    return EnetFit(beta, bool(converged), int(sweeps), history[: sweeps + 1])


CV_TOL = 1e-5
CV_MAX_PASSES = 1000


def lambda_max(data: Dataset) -> float:
    return float(np.max(np.abs(data.x.T @ data.y)) / data.n)


def cv_select_enet(data: Dataset, cfg: EnetConfig, penalty: str = "enet") -> EnetConfig:
    """Pick ``l1_weight`` by k-fold CV over a geometric grid on [1e-3, 1] * lambda_max.

    ``l2_weight`` is tied to ``l1_weight / 2`` for the elastic net and is zero
    for the lasso.
    """
    if penalty not in ("enet", "lasso"):
        raise ContractViolation(f"penalty must be 'enet' or 'lasso', got {penalty!r}")
    n = data.n
    if n < cfg.cv_folds:
        raise ContractViolation("need at least cv_folds observations")
    ratio = 0.5 if penalty == "enet" else 0.0
    lmax = lambda_max(data)
    if lmax == 0.0:
        return replace(cfg, l1_weight=0.0, l2_weight=0.0)
    grid = lmax * np.geomspace(1.0, 1e-3, cfg.lambda_grid_size)
    folds = np.random.default_rng(cfg.seed).permutation(n) % cfg.cv_folds
    cv_err = np.zeros(len(grid))
    # held-out error needs far less precision than the final fit
    path_cfg = replace(cfg, tol=max(cfg.tol, CV_TOL), max_iter=min(cfg.max_iter, CV_MAX_PASSES))
    for k in range(cfg.cv_folds):
        train, test = folds != k, folds == k
        part = Dataset(data.x[train], data.y[train])
        beta = None
        for g, lam in enumerate(grid):
            step = replace(path_cfg, l1_weight=lam, l2_weight=ratio * lam)
            beta = fit_enet(part, step, start=beta).coef
            cv_err[g] += np.sum((data.y[test] - data.x[test] @ beta) ** 2)
    best = float(grid[int(np.argmin(cv_err))])
    return replace(cfg, l1_weight=best, l2_weight=ratio * best)


# -- homoscedastic Bayesian shrinkage ----------------------------------------


@dataclass(frozen=True)
class HomoBayesConfig:
    iterations: int = 2500
    burn_in: int = 500
    chains: int = 2
    seed: int = 0
    thinning: int = 1
    sigma2_shape: float = 1.0
    sigma2_rate: float = 1.0
    tau_update_mode: str = "reciprocal"
    beta_floor: float = 1e-10
    lambda1_sq_init: float = 1.0
    lambda2_init: float = 1.0
    freeze: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "freeze", frozenset(self.freeze))
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ContractViolation("need iterations >= 1 and 0 <= burn_in < iterations")
        if self.thinning < 1 or (self.iterations - self.burn_in) % self.thinning:
            raise ContractViolation("iterations - burn_in must be divisible by thinning")
        if self.chains < 1:
            raise ContractViolation("chains must be positive")
        if not (self.sigma2_shape > 0 and self.sigma2_rate > 0):
            raise ContractViolation("sigma2 prior parameters must be positive")
        if not (self.lambda1_sq_init > 0 and self.lambda2_init > 0):
            raise ContractViolation("initial penalties must be positive")
        unknown = self.freeze - set(BLOCKS) - {"sigma2"}
        if unknown:
            raise ContractViolation(f"unknown blocks in freeze: {sorted(unknown)}")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


def _homo_chain(data, hyp, cfg, chain_index, ridge):
    rng = chain_rng(cfg.seed, chain_index)
    n, d = data.n, data.d
    x, y = data.x, data.y
    beta = fit_ols(data)
    tau = np.ones(d)
    lam1_sq = cfg.lambda1_sq_init
    # the lasso has no ridge term; a zero lambda2 keeps the precision 1/tau
    lam2 = cfg.lambda2_init if ridge else 0.0
    sigma2 = max(float(np.var(y - x @ beta)), 1e-2)
    frozen = cfg.freeze
    kept = cfg.kept
    out = np.empty((kept, d))
    scalars = {k: np.empty(kept) for k in ("sigma2", "lambda1_beta_sq", "lambda2_beta")}
    slot = 0
    for it in range(cfg.iterations):
        try:
            beta = draw_weighted_regression(x, np.full(n, 1.0 / sigma2), y, 1.0 / tau + lam2, rng)
        except SingularMatrixError as err:
            raise SingularMatrixError(
                err.pivot, err.index, f"chain {chain_index}, iteration {it}"
            ) from err
        if "sigma2" not in frozen:
            rss = float(np.sum((y - x @ beta) ** 2))
            sigma2 = 1.0 / float(
                sample_gamma_variate(cfg.sigma2_shape + 0.5 * n, cfg.sigma2_rate + 0.5 * rss, rng)
            )
        if "tau_beta" not in frozen:
            tau = update_tau_vector(beta, lam1_sq, cfg.tau_update_mode, cfg.beta_floor, rng)
        if "lambda1_beta_sq" not in frozen:
            lam1_sq = update_lambda1_sq(tau, hyp.a_beta1, hyp.b_beta1, rng)
        if ridge and "lambda2_beta" not in frozen:
            lam2 = update_lambda2(beta, hyp.a_beta2, hyp.b_beta2, rng)
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            out[slot] = beta
            scalars["sigma2"][slot] = sigma2
            scalars["lambda1_beta_sq"][slot] = lam1_sq
            scalars["lambda2_beta"][slot] = lam2
            slot += 1
    return PosteriorDraws(
        beta_draws=out[None],
        gamma_draws=None,
        scalar_draws={k: v[None] for k, v in scalars.items()},
        mh_accepted=np.zeros(1, dtype=int),
        mh_proposed=np.zeros(1, dtype=int),
        kept=kept,
        chains=1,
    )


def _fit_homo(data, hyp, cfg, ridge):
    hyp = hyp or Hyperparameters()
    cfg = cfg or HomoBayesConfig()
    parts, failed = [], {}
    for c in range(cfg.chains):
        try:
            parts.append(_homo_chain(data, hyp, cfg, c, ridge))
        except SingularMatrixError as err:
            failed[c] = err
    if failed:
        raise ChainFailure(failed)
    return PosteriorDraws.concat(parts)


def fit_blasso(
    data: Dataset, hyp: Optional[Hyperparameters] = None, cfg: Optional[HomoBayesConfig] = None
) -> PosteriorDraws:
    """Bayesian lasso: y ~ N(Xb, s2 I), b_j ~ N(0, tau_j), tau_j ~ Exp(lambda1_sq / 2)."""
    return _fit_homo(data, hyp, cfg, ridge=False)


def fit_ben(
    data: Dataset, hyp: Optional[Hyperparameters] = None, cfg: Optional[HomoBayesConfig] = None
) -> PosteriorDraws:
    """Bayesian elastic net: as :func:`fit_blasso` with prior precision 1/tau_j + lambda2."""
    return _fit_homo(data, hyp, cfg, ridge=True)
