"""Random-variate primitives and the Gibbs / Metropolis-Hastings sampler.

One sweep updates, in order: beta (conjugate Gaussian), gamma (Metropolis-
Hastings with a Hamiltonian, Langevin or random-walk proposal), tau_beta,
tau_gamma (inverse Gaussian), lambda1_beta_sq, lambda1_gamma_sq, lambda2_beta,
lambda2_gamma (Gamma).  The (beta, gamma) pair may be cycled several times per
sweep because the two blocks are strongly coupled through the weights.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .model import (
    BLOCKS,
    ChainState,
    ContractViolation,
    Dataset,
    Hyperparameters,
    LINPRED_CLAMP,
    clamp_linpred,
)

log = logging.getLogger(__name__)

TAU_MODES = ("direct", "reciprocal")
GAMMA_KERNELS = ("hmc", "langevin", "random_walk")
# kernel -> (initial step, acceptance target) when the config leaves them unset
KERNEL_DEFAULTS = {"random_walk": (0.02, 0.3), "langevin": (1.0, 0.57), "hmc": (0.5, 0.6)}


class SingularMatrixError(np.linalg.LinAlgError):
    """Cholesky factorization failed; ``pivot`` is the offending diagonal pivot."""

    def __init__(self, pivot: float, index: int, context: str = ""):
        self.pivot = float(pivot)
        self.index = int(index)
        msg = f"matrix not positive definite: pivot {self.pivot:.3g} at position {self.index}"
        if context:
            msg = f"{msg} ({context})"
        super().__init__(msg)


class ChainFailure(RuntimeError):
    """One or more chains aborted.  ``failed`` maps chain index to its exception."""

    def __init__(self, failed: dict):
        self.failed = dict(sorted(failed.items()))
        detail = "; ".join(f"chain {c}: {e}" for c, e in self.failed.items())
        super().__init__(f"chains {sorted(self.failed)} failed: {detail}")


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 2500
    burn_in: int = 500
    thinning: int = 1
    chains: int = 2
    seed: int = 0
    mh_step_init: Optional[float] = None
    adapt_enabled: bool = True
    adapt_window: int = 25
    adapt_target: Optional[float] = None
    gamma_kernel: str = "hmc"
    leapfrog_steps: int = 10
    # (beta, gamma) alternations per sweep
    block_cycles: int = 3
    tau_update_mode: str = "direct"
    beta_floor: float = 1e-10
    # blocks held at their initial value, e.g. {"tau_beta", "lambda2_beta"}
    freeze: frozenset = frozenset()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "freeze", frozenset(self.freeze))
        if self.gamma_kernel not in GAMMA_KERNELS:
            raise ContractViolation(f"gamma_kernel must be one of {GAMMA_KERNELS}")
        step, target = KERNEL_DEFAULTS[self.gamma_kernel]
        if self.mh_step_init is None:
            object.__setattr__(self, "mh_step_init", step)
        if self.adapt_target is None:
            object.__setattr__(self, "adapt_target", target)
        if self.iterations < 1:
            raise ContractViolation("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ContractViolation("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ContractViolation("thinning must be positive")
        if (self.iterations - self.burn_in) % self.thinning:
            raise ContractViolation("iterations - burn_in must be divisible by thinning")
        if self.chains < 1:
            raise ContractViolation("chains must be positive")
        if not 0 <= self.seed < 2**64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")
        if not self.mh_step_init > 0:
            raise ContractViolation("mh_step_init must be positive")
        if self.leapfrog_steps < 1:
            raise ContractViolation("leapfrog_steps must be positive")
        if self.block_cycles < 1:
            raise ContractViolation("block_cycles must be positive")
        if self.adapt_window < 1:
            raise ContractViolation("adapt_window must be positive")
        if not 0.1 <= self.adapt_target <= 0.6:
            raise ContractViolation("adapt_target must lie in [0.1, 0.6]")
        if self.tau_update_mode not in TAU_MODES:
            raise ContractViolation(f"tau_update_mode must be one of {TAU_MODES}")
        if not self.beta_floor > 0:
            raise ContractViolation("beta_floor must be positive")
        unknown = self.freeze - set(BLOCKS)
        if unknown:
            raise ContractViolation(f"unknown blocks in freeze: {sorted(unknown)}")

    @property
    def kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass
class MhStats:
    proposed: int = 0
    accepted: int = 0
    current_step: float = 0.02
    window_proposed: int = 0
    window_accepted: int = 0

    def __post_init__(self):
        if not self.current_step > 0:
            raise ContractViolation("current_step must be positive")


@dataclass
class PosteriorDraws:
    """Retained draws.  Arrays are indexed ``[chain, kept_iteration, coordinate]``."""

    beta_draws: np.ndarray
    gamma_draws: Optional[np.ndarray]
    scalar_draws: dict
    mh_accepted: np.ndarray
    mh_proposed: np.ndarray
    kept: int
    chains: int
    step_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def concat(cls, parts: list) -> "PosteriorDraws":
        kept = {p.kept for p in parts}
        if len(kept) != 1:
            raise ContractViolation("chains disagree on kept draw count")

        def stack(name):
            arrs = [getattr(p, name) for p in parts]
            return None if arrs[0] is None else np.concatenate(arrs, axis=0)

        return cls(
            beta_draws=stack("beta_draws"),
            gamma_draws=stack("gamma_draws"),
            scalar_draws={
                k: np.concatenate([p.scalar_draws[k] for p in parts], axis=0)
                for k in parts[0].scalar_draws
            },
            mh_accepted=stack("mh_accepted"),
            mh_proposed=stack("mh_proposed"),
            kept=kept.pop(),
            chains=sum(p.chains for p in parts),
            step_sizes=stack("step_sizes"),
        )

    def pooled(self, block: str = "beta") -> np.ndarray:
        arr = getattr(self, f"{block}_draws")
        return arr.reshape(-1, arr.shape[-1])

    def posterior_mean(self, block: str = "beta") -> np.ndarray:
        return self.pooled(block).mean(axis=0)


def chain_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


# -- distribution primitives -------------------------------------------------


def sample_gamma_variate(shape, rate, rng: np.random.Generator, size=None):
    """Gamma draw(s) in shape/rate form (mean ``shape / rate``)."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)):
        raise ContractViolation("gamma shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_inverse_gaussian(mu, lam, rng: np.random.Generator, size=None):
    """Inverse Gaussian draw(s) with mean ``mu`` and shape ``lam``.

    Transformation with a uniform correction: the squared normal ``y`` is
    mapped to the smaller root ``x1`` of the chi-square transformation, which
    is kept with probability ``mu / (mu + x1)`` and replaced by ``mu^2 / x1``
    otherwise.  The smaller root is written as ``mu / (1 + r + sqrt(r(r+2)))``
    with ``r = mu y / (2 lam)``, which does not cancel when ``mu >> lam``.
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(~(mu > 0)) or np.any(~(lam > 0)):
        raise ContractViolation("inverse Gaussian mu and lam must be positive")
    if size is None:
        size = np.broadcast(mu, lam).shape
    y = rng.standard_normal(size) ** 2
    r = mu * y / (2.0 * lam)
    denom = 1.0 + r + np.sqrt(r * (r + 2.0))
    x1 = mu / denom
    u = rng.uniform(size=size)
    # mu / (mu + x1) == denom / (denom + 1)
    out = np.where(u * (denom + 1.0) <= denom, x1, mu * denom)
    if out.ndim == 0:
        return float(out)
    return out


def _cholesky_lower(a: np.ndarray, context: str = "") -> np.ndarray:
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        k = info - 1
        pivot = a[k, k] - np.sum(c[k, :k] ** 2)
        raise SingularMatrixError(pivot, k, context)
    if info < 0:
        raise ContractViolation(f"dpotrf rejected argument {-info}")
    return c


def sample_mvn_spd(mean, matrix, rng: np.random.Generator, kind: str = "covariance", size=None):
    """Draw from N(mean, S) where ``matrix`` is S (``kind="covariance"``) or S^{-1}.

    With ``size`` the result has shape ``(size, d)``, otherwise ``(d,)``.
    """
    mean = np.asarray(mean, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    d = mean.shape[0]
    if matrix.shape != (d, d):
        raise ContractViolation(f"matrix must be {d}x{d}")
    if kind not in ("covariance", "precision"):
        raise ContractViolation(f"kind must be 'covariance' or 'precision', got {kind!r}")
    chol = _cholesky_lower(matrix)
    z = rng.standard_normal(d if size is None else (size, d)).T
    if kind == "covariance":
        return mean + (chol @ z).T
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T").T


def draw_weighted_regression(x, weights, y, prior_precision, rng: np.random.Generator):
    """Draw coefficients from N(A^{-1} X'Wy, A^{-1}), A = X'WX + diag(prior_precision).

    Factorizes the d x d matrix A when d <= 4n, otherwise draws through the
    n x n system of the data-augmentation identity
    ``u ~ N(0, D), v = Phi u + e, theta = u + D Phi' (Phi D Phi' + I)^{-1} (alpha - v)``
    with ``Phi = W^{1/2} X`` and ``D = diag(1/prior_precision)``.
    """
    n, d = x.shape
    if d <= 4 * n:
        xw = x * weights[:, None]
        prec = x.T @ xw
        prec[np.diag_indices(d)] += prior_precision
        chol = _cholesky_lower(prec, "beta posterior precision")
        mean = linalg.cho_solve((chol, True), xw.T @ y)
        z = rng.standard_normal(d)
        return mean + linalg.solve_triangular(chol, z, lower=True, trans="T")
    sw = np.sqrt(weights)
    phi = x * sw[:, None]
    prior_var = 1.0 / prior_precision
    u = rng.standard_normal(d) * np.sqrt(prior_var)
    v = phi @ u + rng.standard_normal(n)
    m = (phi * prior_var) @ phi.T
    m[np.diag_indices(n)] += 1.0
    chol = _cholesky_lower(m, "beta augmented system")
    w = linalg.cho_solve((chol, True), y * sw - v)
    return u + prior_var * (phi.T @ w)


# -- conditional updates -----------------------------------------------------


def update_beta(state: ChainState, data: Dataset, rng: np.random.Generator) -> np.ndarray:
    weights = np.exp(-clamp_linpred(data.x @ state.gamma))
    return draw_weighted_regression(data.x, weights, data.y, state.prior_precision_beta(), rng)


def gamma_log_target(gamma: np.ndarray, state: ChainState, data: Dataset, resid_sq=None) -> float:
    """Log-likelihood in gamma plus the gamma prior's quadratic form (beta, tau, lambda fixed)."""
    if resid_sq is None:
        resid_sq = (data.y - data.x @ state.beta) ** 2
    eta = clamp_linpred(data.x @ gamma)
    loglik = -0.5 * np.sum(eta + resid_sq * np.exp(-eta))
    return float(loglik - 0.5 * np.sum(state.prior_precision_gamma() * gamma**2))


def metropolis_accept(log_ratio: float, rng: np.random.Generator) -> bool:
    """Accept with probability ``min(1, exp(log_ratio))``."""
    if log_ratio >= 0:
        return True
    return bool(np.log(rng.uniform()) < log_ratio)


def update_gamma_mh(
    state: ChainState,
    data: Dataset,
    stats: MhStats,
    rng: np.random.Generator,
    adapt: Optional[tuple] = None,
) -> tuple:
    """One random-walk MH move for gamma.

    ``adapt`` is ``(window, target)`` while adapting and ``None`` once the
    kernel is frozen.  Every ``window`` proposals the step is multiplied by
    ``exp(rate - target)``.
    """
    resid_sq = (data.y - data.x @ state.beta) ** 2
    proposal = state.gamma + stats.current_step * rng.standard_normal(state.d)
    log_ratio = gamma_log_target(proposal, state, data, resid_sq) - gamma_log_target(
        state.gamma, state, data, resid_sq
    )
    accepted = metropolis_accept(log_ratio, rng)
    stats.proposed += 1
    stats.accepted += accepted
    _adapt_step(stats, accepted, adapt)
    return (proposal if accepted else state.gamma), accepted


def _adapt_step(stats: MhStats, accepted: bool, adapt: Optional[tuple]) -> None:
    if adapt is None:
        return
    window, target = adapt
    stats.window_proposed += 1
    stats.window_accepted += accepted
    if stats.window_proposed >= window:
        rate = stats.window_accepted / stats.window_proposed
        stats.current_step *= float(np.exp(rate - target))
        stats.window_proposed = stats.window_accepted = 0


def _gamma_target_and_grad(gamma, x, resid_sq, prior_prec):
    raw = x @ gamma
    eta = clamp_linpred(raw)
    scaled = resid_sq * np.exp(-eta)
    value = -0.5 * np.sum(eta + scaled) - 0.5 * np.sum(prior_prec * gamma**2)
    # clamped observations contribute no slope
    slope = np.where(np.abs(raw) < LINPRED_CLAMP, 1.0 - scaled, 0.0)
    grad = -0.5 * (x.T @ slope) - prior_prec * gamma
    return float(value), grad


def update_gamma_langevin(
    state: ChainState,
    data: Dataset,
    stats: MhStats,
    rng: np.random.Generator,
    adapt: Optional[tuple] = None,
    half_gram: Optional[np.ndarray] = None,
) -> tuple:
    """Preconditioned Langevin (MALA) move for gamma, same target as :func:`update_gamma_mh`.

    The metric is G = X'X / 2 + diag(prior precision), the expected
    information of the log-variance model plus the prior.  With step ``h``
    the proposal is ``gamma + (h/2) G^{-1} grad + sqrt(h) G^{-1/2} z``.
    """
    x = data.x
    if half_gram is None:
        half_gram = 0.5 * (x.T @ x)
    prior_prec = state.prior_precision_gamma()
    metric = half_gram.copy()
    metric[np.diag_indices(state.d)] += prior_prec
    chol = _cholesky_lower(metric, "gamma metric")
    h = stats.current_step
    resid_sq = (data.y - x @ state.beta) ** 2

    def drift(g, grad):
        return g + 0.5 * h * linalg.cho_solve((chol, True), grad)

    cur_val, cur_grad = _gamma_target_and_grad(state.gamma, x, resid_sq, prior_prec)
    fwd_mean = drift(state.gamma, cur_grad)
    noise = linalg.solve_triangular(chol, rng.standard_normal(state.d), lower=True, trans="T")
    proposal = fwd_mean + np.sqrt(h) * noise
    prop_val, prop_grad = _gamma_target_and_grad(proposal, x, resid_sq, prior_prec)
    back = state.gamma - drift(proposal, prop_grad)
    fwd = proposal - fwd_mean
    log_q_fwd = -0.5 / h * float(fwd @ metric @ fwd)
    log_q_back = -0.5 / h * float(back @ metric @ back)
    log_ratio = prop_val - cur_val + log_q_back - log_q_fwd
    accepted = bool(np.isfinite(log_ratio)) and metropolis_accept(log_ratio, rng)
    stats.proposed += 1
    stats.accepted += accepted
    _adapt_step(stats, accepted, adapt)
    return (proposal if accepted else state.gamma), accepted


def update_gamma_hmc(
    state: ChainState,
    data: Dataset,
    stats: MhStats,
    rng: np.random.Generator,
    adapt: Optional[tuple] = None,
    half_gram: Optional[np.ndarray] = None,
    n_leapfrog: int = 10,
) -> tuple:
    """Hamiltonian move for gamma, same target as :func:`update_gamma_mh`.

    The mass matrix is the Langevin metric G.  The step size is jittered
    uniformly in [0.8, 1.2] times ``stats.current_step`` to avoid periodic
    trajectories.
    """
    x = data.x
    if half_gram is None:
        half_gram = 0.5 * (x.T @ x)
    prior_prec = state.prior_precision_gamma()
    mass = half_gram.copy()
    mass[np.diag_indices(state.d)] += prior_prec
    chol = _cholesky_lower(mass, "gamma mass matrix")
    resid_sq = (data.y - x @ state.beta) ** 2
    eps = stats.current_step * rng.uniform(0.8, 1.2)

    def kinetic(p):
        return 0.5 * float(p @ linalg.cho_solve((chol, True), p))

    g = state.gamma.copy()
    cur_val, grad = _gamma_target_and_grad(g, x, resid_sq, prior_prec)
    p = chol @ rng.standard_normal(state.d)
    start_energy = cur_val - kinetic(p)
    val = cur_val
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_leapfrog):
            p = p + 0.5 * eps * grad
            g = g + eps * linalg.cho_solve((chol, True), p)
            val, grad = _gamma_target_and_grad(g, x, resid_sq, prior_prec)
            p = p + 0.5 * eps * grad
        log_ratio = val - kinetic(p) - start_energy
    accepted = bool(np.isfinite(log_ratio)) and metropolis_accept(log_ratio, rng)
    stats.proposed += 1
    stats.accepted += accepted
    _adapt_step(stats, accepted, adapt)
    return (g if accepted else state.gamma), accepted


def update_tau_vector(coefs, lambda1_sq: float, mode: str, floor: float, rng: np.random.Generator):
    """Latent scales given coefficients.

    ``mode="direct"`` draws tau_j ~ IG(sqrt(lambda1_sq) / |coef_j|, lambda1_sq);
    ``mode="reciprocal"`` draws 1/tau_j from that law instead.
    """
    if not lambda1_sq > 0:
        raise ContractViolation("lambda1_sq must be positive")
    coefs = np.asarray(coefs, dtype=float)
    mu = np.sqrt(lambda1_sq / np.maximum(coefs**2, floor**2))
    draw = sample_inverse_gaussian(mu, np.full_like(mu, lambda1_sq), rng)
    if mode == "direct":
        return draw
    if mode == "reciprocal":
        return 1.0 / draw
    raise ContractViolation(f"unknown tau update mode {mode!r}")


def update_lambda1_sq(tau, a: float, b: float, rng: np.random.Generator) -> float:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ContractViolation("tau entries must be positive")
    return float(sample_gamma_variate(a + tau.shape[0], b + 0.5 * np.sum(tau), rng))


def update_lambda2(coefs, a: float, b: float, rng: np.random.Generator) -> float:
    coefs = np.asarray(coefs, dtype=float)
    return float(sample_gamma_variate(a + 0.5 * coefs.shape[0], b + 0.5 * np.sum(coefs**2), rng))


# -- chain driver ------------------------------------------------------------


def initial_state(data: Dataset) -> ChainState:
    d = data.d
    beta, *_ = np.linalg.lstsq(data.x, data.y, rcond=1e-10)
    return ChainState(
        beta=beta,
        gamma=np.zeros(d),
        tau_beta=np.ones(d),
        tau_gamma=np.ones(d),
    )


def gibbs_sweep(
    state: ChainState,
    data: Dataset,
    hyp: Hyperparameters,
    cfg: SamplerConfig,
    stats: MhStats,
    rng: np.random.Generator,
    adapting: bool = False,
    half_gram: Optional[np.ndarray] = None,
) -> bool:
    """Apply one full sweep to ``state`` in place; returns the MH acceptance flag."""
    frozen = cfg.freeze
    accepted = False
    adapt = (cfg.adapt_window, cfg.adapt_target) if adapting and cfg.adapt_enabled else None
    for _ in range(cfg.block_cycles):
        if "beta" not in frozen:
            state.beta = update_beta(state, data, rng)
        if "gamma" in frozen:
            continue
        if cfg.gamma_kernel == "hmc":
            state.gamma, accepted = update_gamma_hmc(
                state, data, stats, rng, adapt, half_gram, cfg.leapfrog_steps
            )
        elif cfg.gamma_kernel == "langevin":
            state.gamma, accepted = update_gamma_langevin(state, data, stats, rng, adapt, half_gram)
        else:
            state.gamma, accepted = update_gamma_mh(state, data, stats, rng, adapt)
    mode, floor = cfg.tau_update_mode, cfg.beta_floor
    if "tau_beta" not in frozen:
        state.tau_beta = update_tau_vector(state.beta, state.lambda1_beta_sq, mode, floor, rng)
    if "tau_gamma" not in frozen:
        state.tau_gamma = update_tau_vector(state.gamma, state.lambda1_gamma_sq, mode, floor, rng)
    if "lambda1_beta_sq" not in frozen:
        state.lambda1_beta_sq = update_lambda1_sq(state.tau_beta, hyp.a_beta1, hyp.b_beta1, rng)
    if "lambda1_gamma_sq" not in frozen:
        state.lambda1_gamma_sq = update_lambda1_sq(
            state.tau_gamma, hyp.a_gamma1, hyp.b_gamma1, rng
        )
    if "lambda2_beta" not in frozen:
        state.lambda2_beta = update_lambda2(state.beta, hyp.a_beta2, hyp.b_beta2, rng)
    if "lambda2_gamma" not in frozen:
        state.lambda2_gamma = update_lambda2(state.gamma, hyp.a_gamma2, hyp.b_gamma2, rng)
    return accepted


SCALAR_BLOCKS = BLOCKS[4:]


def run_chain(
    data: Dataset,
    hyp: Hyperparameters,
    cfg: SamplerConfig,
    chain_index: int = 0,
    init: Optional[ChainState] = None,
) -> PosteriorDraws:
    """Run one chain; deterministic in ``(cfg.seed, chain_index)``."""
    rng = chain_rng(cfg.seed, chain_index)
    state = initial_state(data) if init is None else init.copy()
    state.validate()
    stats = MhStats(current_step=cfg.mh_step_init)
    kept, d = cfg.kept, data.d
    beta_out = np.empty((kept, d))
    gamma_out = np.empty((kept, d))
    scalars = {k: np.empty(kept) for k in SCALAR_BLOCKS}
    half_gram = 0.5 * (data.x.T @ data.x)
    slot = 0
    for it in range(cfg.iterations):
        try:
            gibbs_sweep(
                state, data, hyp, cfg, stats, rng, adapting=it < cfg.burn_in, half_gram=half_gram
            )
        except SingularMatrixError as err:
            raise SingularMatrixError(
                err.pivot, err.index, f"chain {chain_index}, iteration {it}"
            ) from err
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            beta_out[slot] = state.beta
            gamma_out[slot] = state.gamma
            for k in SCALAR_BLOCKS:
                scalars[k][slot] = getattr(state, k)
            slot += 1
    return PosteriorDraws(
        beta_draws=beta_out[None],
        gamma_draws=gamma_out[None],
        scalar_draws={k: v[None] for k, v in scalars.items()},
        mh_accepted=np.array([stats.accepted]),
        mh_proposed=np.array([stats.proposed]),
        kept=kept,
        chains=1,
        step_sizes=np.array([stats.current_step]),
    )


def _run_chain_safe(args):
    data, hyp, cfg, c, init = args
    try:
        return c, run_chain(data, hyp, cfg, c, init), None
    except (SingularMatrixError, FloatingPointError, ContractViolation) as err:
        return c, None, err


def fit_hdben(
    data: Dataset,
    hyp: Optional[Hyperparameters] = None,
    cfg: Optional[SamplerConfig] = None,
    init: Optional[ChainState] = None,
) -> PosteriorDraws:
    """Run ``cfg.chains`` independent chains and pool their draws."""
    hyp = hyp or Hyperparameters()
    cfg = cfg or SamplerConfig()
    jobs = [(data, hyp, cfg, c, init) for c in range(cfg.chains)]
    if cfg.workers > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_chain_safe, jobs))
    else:
        results = [_run_chain_safe(job) for job in jobs]
    failed = {c: err for c, _, err in results if err is not None}
    if failed:
        raise ChainFailure(failed)
    results.sort(key=lambda r: r[0])
    return PosteriorDraws.concat([r[1] for r in results])
