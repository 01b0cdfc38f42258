"""Convergence diagnostics, posterior summaries and evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import ContractViolation
from .samplers import PosteriorDraws


def _split_halves(chains: np.ndarray) -> np.ndarray:
    m, n = chains.shape[:2]
    half = n // 2
    # odd lengths drop the middle draw
    return np.concatenate([chains[:, :half], chains[:, n - half :]], axis=0)


def gelman_rubin(chains) -> Union[float, np.ndarray]:
    """Split-chain potential scale reduction factor.

    ``chains`` has shape ``(n_chains, n_draws)`` or ``(n_chains, n_draws, d)``;
    the latter returns one value per coordinate.  A coordinate whose draws are
    all identical gets 1.0; one whose halves are each constant but disagree
    gets ``inf``.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim not in (2, 3):
        raise ContractViolation("chains must be (n_chains, n_draws[, d])")
    if arr.shape[0] < 2 or arr.shape[1] < 4:
        raise ContractViolation("need at least 2 chains of at least 4 draws")
    halves = _split_halves(arr)
    m = halves.shape[1]
    within = halves.var(axis=1, ddof=1).mean(axis=0)
    between = m * halves.mean(axis=1).var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(((m - 1) / m * within + between / m) / within)
    r = np.where(within > 0, r, np.where(between > 0, np.inf, 1.0))
    return float(r) if r.ndim == 0 else r


def _autocovariance(x: np.ndarray) -> np.ndarray:
    # biased autocovariance along the last axis via FFT
    n = x.shape[-1]
    centered = x - x.mean(axis=-1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=-1)
    return np.fft.irfft(f * np.conj(f), n=size, axis=-1)[..., :n] / n


def effective_sample_size(draws) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation.

    ``draws`` is a single sequence or an ``(n_chains, n_draws)`` array.
    """
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    m, n = x.shape
    total = m * n
    if total < 10 or n < 2:
        raise ContractViolation("need at least 10 draws")
    acov = _autocovariance(x)
    chain_var = acov[:, 0] * n / (n - 1)
    within = chain_var.mean()
    var_plus = within * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(total)
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    negative = np.flatnonzero(pairs < 0)
    if negative.size:
        pairs = pairs[: negative[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    if tau <= 0:
        return float(total)
    return float(min(total / tau, total))


def _per_coordinate(fn, block: np.ndarray) -> np.ndarray:
    return np.array([fn(block[:, :, j]) for j in range(block.shape[2])])


@dataclass(frozen=True)
class SupportRule:
    kind: str = "credible_interval"
    level: float = 0.95
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("credible_interval", "magnitude"):
            raise ContractViolation(f"unknown support rule {self.kind!r}")
        if not 0.5 < self.level < 1:
            raise ContractViolation("level must lie in (0.5, 1)")
        if self.threshold < 0:
            raise ContractViolation("threshold must be non-negative")


@dataclass
class BlockSummary:
    mean: np.ndarray
    median: np.ndarray
    sd: np.ndarray
    q_low: np.ndarray
    q_high: np.ndarray
    rhat: np.ndarray
    ess: np.ndarray
    level: float = 0.95


@dataclass
class FitSummary:
    beta: BlockSummary
    gamma: Optional[BlockSummary]
    support_beta: frozenset
    support_gamma: frozenset
    mh_acceptance: float


def _tail(level: float) -> float:
    # 1 - 0.95 is not 0.05 in binary; round so boundary draws stay on the nominal order statistic
    return round((1.0 - level) / 2.0, 12)


def summarize_block(block: np.ndarray, level: float = 0.95) -> BlockSummary:
    """Pooled moments and quantiles plus per-coordinate R-hat and ESS."""
    chains, kept, d = block.shape
    pooled = block.reshape(-1, d)
    alpha = _tail(level)
    lo, med, hi = np.quantile(pooled, [alpha, 0.5, 1.0 - alpha], axis=0)
    rhat = gelman_rubin(block) if chains >= 2 else np.full(d, np.nan)
    ess = _per_coordinate(effective_sample_size, block)
    return BlockSummary(
        mean=pooled.mean(axis=0),
        median=med,
        sd=pooled.std(axis=0, ddof=1),
        q_low=lo,
        q_high=hi,
        rhat=np.atleast_1d(rhat),
        ess=ess,
        level=level,
    )


def summarize(draws: PosteriorDraws, rule: Optional[SupportRule] = None) -> FitSummary:
    if draws.kept < 4:
        raise ContractViolation("need at least 4 kept draws per chain")
    rule = rule or SupportRule()
    beta = summarize_block(draws.beta_draws, rule.level)
    gamma = None if draws.gamma_draws is None else summarize_block(draws.gamma_draws, rule.level)
    proposed = int(np.sum(draws.mh_proposed))
    return FitSummary(
        beta=beta,
        gamma=gamma,
        support_beta=select_support(beta, rule),
        support_gamma=frozenset() if gamma is None else select_support(gamma, rule),
        mh_acceptance=float(np.sum(draws.mh_accepted)) / proposed if proposed else 0.0,
    )


def select_support(source, rule: Optional[SupportRule] = None) -> frozenset:
    """Indices (0-based) judged nonzero.

    ``source`` is a :class:`BlockSummary` or an array of draws, either pooled
    ``(N, d)`` or per chain ``(chains, kept, d)``.  An interval that touches 0
    counts as containing it.
    """
    rule = rule or SupportRule()
    if isinstance(source, BlockSummary):
        if rule.kind == "credible_interval" and not np.isclose(source.level, rule.level):
            raise ContractViolation(
                f"summary holds {source.level} intervals, rule asks for {rule.level}"
            )
        lo, hi, med = source.q_low, source.q_high, source.median
    else:
        arr = np.asarray(source, dtype=float)
        pooled = arr.reshape(-1, arr.shape[-1])
        alpha = _tail(rule.level)
        lo, med, hi = np.quantile(pooled, [alpha, 0.5, 1.0 - alpha], axis=0)
    if rule.kind == "credible_interval":
        chosen = (lo > 0) | (hi < 0)
    else:
        chosen = np.abs(med) > rule.threshold
    return frozenset(int(j) for j in np.flatnonzero(chosen))


@dataclass(frozen=True)
class SupportMetrics:
    tpr: float
    fpr: float
    exact: bool


def support_metrics(selected, truth, d: int) -> SupportMetrics:
    selected, truth = frozenset(selected), frozenset(truth)
    if any(not 0 <= j < d for j in selected | truth):
        raise ContractViolation(f"indices must lie in [0, {d})")
    tpr = len(selected & truth) / len(truth) if truth else 1.0
    negatives = d - len(truth)
    fpr = len(selected - truth) / negatives if negatives else 0.0
    return SupportMetrics(tpr=tpr, fpr=fpr, exact=selected == truth)


def l2_error(estimate, truth) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ContractViolation(f"shape mismatch {estimate.shape} vs {truth.shape}")
    return float(np.linalg.norm(estimate - truth))


def contraction_ratio(err_sq: float, n: int, d: int, s_beta: int, s_gamma: int) -> float:
    """Squared error divided by the rate ``(s_beta + s_gamma) log(d) / n``."""
    if d < 2:
        raise ContractViolation("contraction rate needs d >= 2")
    if n < 1 or s_beta + s_gamma < 1:
        raise ContractViolation("need n >= 1 and s_beta + s_gamma >= 1")
    if err_sq < 0:
        raise ContractViolation("err_sq must be non-negative")
    return float(err_sq / ((s_beta + s_gamma) * np.log(d) / n))
