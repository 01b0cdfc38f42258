"""Data-generating process, scenario grid and replicate aggregation."""
from __future__ import annotations

import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import baselines
from .diagnostics import (
    SupportRule,
    gelman_rubin,
    l2_error,
    select_support,
    support_metrics,
)
from .model import ContractViolation, Dataset, GroundTruth, Hyperparameters, clamp_linpred
from .samplers import SamplerConfig, fit_hdben

log = logging.getLogger(__name__)

METHODS = ("ols", "lasso", "enet", "blasso", "ben", "hdben")

PROFILES = {
    "desk": dict(replicates=5, iterations=2500, burn_in=500, chains=2),
    "full": dict(replicates=20, iterations=5000, burn_in=1000, chains=3),
}


@dataclass(frozen=True)
class ScenarioSpec:
    n: int = 200
    d: int = 100
    s_beta: int = 10
    s_gamma: int = 10
    beta_range: tuple = (1.0, 2.0)
    gamma_range: tuple = (0.5, 1.5)
    replicates: int = 5
    methods: tuple = METHODS
    seed: int = 0
    # settings shared by the Bayesian methods
    iterations: int = 2500
    burn_in: int = 500
    chains: int = 2
    tau_update_mode: str = "direct"
    support_level: float = 0.95
    # extra SamplerConfig / Hyperparameters fields for the HDBEN fit
    sampler_options: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "beta_range", tuple(float(v) for v in self.beta_range))
        object.__setattr__(self, "gamma_range", tuple(float(v) for v in self.gamma_range))
        object.__setattr__(self, "methods", tuple(self.methods))
        if min(self.n, self.d) < 1 or min(self.s_beta, self.s_gamma) < 0:
            raise ContractViolation("n, d must be positive and sparsities non-negative")
        if self.s_beta > self.d or self.s_gamma > self.d:
            raise ContractViolation("sparsity cannot exceed d")
        for name in ("beta_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ContractViolation(f"{name} lower bound exceeds upper bound")
        if self.replicates < 1:
            raise ContractViolation("replicates must be positive")
        if not 0 <= self.seed < 2**64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "sampler_options", dict(self.sampler_options))
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))
        # fail at construction rather than inside a replicate
        self.sampler_config(0)
        self.hyper()

    def with_profile(self, profile: str) -> "ScenarioSpec":
        if profile not in PROFILES:
            raise ContractViolation(f"unknown profile {profile!r}")
        return replace(self, **PROFILES[profile])

    def sampler_config(self, seed: int) -> SamplerConfig:
        shared = ("iterations", "burn_in", "chains", "seed", "tau_update_mode")
        clash = set(self.sampler_options) & set(shared)
        if clash:
            raise ContractViolation(f"set {sorted(clash)} on the scenario, not in sampler_options")
        return SamplerConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            chains=self.chains,
            seed=seed,
            tau_update_mode=self.tau_update_mode,
            **self.sampler_options,
        )

    def hyper(self) -> Hyperparameters:
        return Hyperparameters(**self.hyperparameters)


def _seed_sequence(spec_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(spec_seed, spawn_key=keys)


def method_seed(spec: ScenarioSpec, replicate_index: int, method: str) -> int:
    """64-bit seed for one (replicate, method) cell, independent of method order."""
    ss = _seed_sequence(spec.seed, replicate_index, 1, zlib.crc32(method.encode()))
    return int(ss.generate_state(1, np.uint64)[0])


def generate_dataset(spec: ScenarioSpec, replicate_index: int) -> Dataset:
    """Standard-normal design, sparse uniform coefficients, log-linear noise variance.

    The supports of beta0 and gamma0 are drawn independently.
    """
    rng = np.random.default_rng(_seed_sequence(spec.seed, replicate_index, 0))
    n, d = spec.n, spec.d
    x = rng.standard_normal((n, d))
    beta0 = np.zeros(d)
    beta0[rng.choice(d, spec.s_beta, replace=False)] = rng.uniform(*spec.beta_range, spec.s_beta)
    gamma0 = np.zeros(d)
    gamma0[rng.choice(d, spec.s_gamma, replace=False)] = rng.uniform(
        *spec.gamma_range, spec.s_gamma
    )
    noise_sd = np.exp(0.5 * clamp_linpred(x @ gamma0))
    y = x @ beta0 + noise_sd * rng.standard_normal(n)
    return Dataset(x, y, GroundTruth(beta0, gamma0))


@dataclass
class MethodOutput:
    beta: np.ndarray
    gamma: Optional[np.ndarray] = None
    support_beta: frozenset = frozenset()
    support_gamma: Optional[frozenset] = None
    diagnostics: dict = field(default_factory=dict)


def _nonzero(beta) -> frozenset:
    return frozenset(int(j) for j in np.flatnonzero(beta))


def _bayes_output(draws, spec: ScenarioSpec) -> MethodOutput:
    rule = SupportRule(level=spec.support_level)
    beta_rhat = gelman_rubin(draws.beta_draws) if draws.chains > 1 else np.array([np.nan])
    out = MethodOutput(
        beta=draws.posterior_mean("beta"),
        support_beta=select_support(draws.beta_draws, rule),
        diagnostics={"max_rhat_beta": float(np.max(beta_rhat))},
    )
    if draws.gamma_draws is not None:
        out.gamma = draws.posterior_mean("gamma")
        out.support_gamma = select_support(draws.gamma_draws, rule)
        out.diagnostics["mh_acceptance"] = float(draws.mh_accepted.sum() / draws.mh_proposed.sum())
    return out


def _run_ols(data, spec, seed):
    beta = baselines.fit_ols(data)
    return MethodOutput(beta=beta, support_beta=_nonzero(beta))


def _run_penalized(penalty):
    def run(data, spec, seed):
        cfg = baselines.cv_select_enet(data, baselines.EnetConfig(seed=seed % 2**32), penalty)
        fit = baselines.fit_enet(data, cfg)
        return MethodOutput(
            beta=fit.coef,
            support_beta=_nonzero(fit.coef),
            diagnostics={"l1_weight": cfg.l1_weight, "converged": fit.converged},
        )

    run.__name__ = f"_run_{penalty}"
    return run


def _homo_config(spec, seed):
    return baselines.HomoBayesConfig(
        iterations=spec.iterations, burn_in=spec.burn_in, chains=spec.chains, seed=seed
    )


def _run_blasso(data, spec, seed):
    return _bayes_output(baselines.fit_blasso(data, spec.hyper(), _homo_config(spec, seed)), spec)


def _run_ben(data, spec, seed):
    return _bayes_output(baselines.fit_ben(data, spec.hyper(), _homo_config(spec, seed)), spec)


def _run_hdben(data, spec, seed):
    return _bayes_output(fit_hdben(data, spec.hyper(), spec.sampler_config(seed)), spec)


_run_lasso = _run_penalized("lasso")
_run_enet = _run_penalized("enet")

REGISTRY: dict = {
    "ols": _run_ols,
    "lasso": _run_lasso,
    "enet": _run_enet,
    "blasso": _run_blasso,
    "ben": _run_ben,
    "hdben": _run_hdben,
}


@dataclass
class ReplicateRecord:
    method: str
    replicate: int
    n: int
    d: int
    s_beta: int
    s_gamma: int
    l2_error: float = float("nan")
    tpr: float = float("nan")
    fpr: float = float("nan")
    exact: bool = False
    gamma_l2_error: float = float("nan")
    seconds: float = 0.0
    beta_hat: Optional[np.ndarray] = None
    gamma_hat: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_replicate(
    spec: ScenarioSpec,
    replicate_index: int,
    method: str,
    registry: Optional[dict] = None,
) -> ReplicateRecord:
    """Generate one dataset, fit one method and score it against the truth.

    A failing fit is recorded in ``error`` rather than raised.
    """
    registry = REGISTRY if registry is None else registry
    if method not in registry:
        raise ContractViolation(f"unknown method {method!r}; known: {sorted(registry)}")
    data = generate_dataset(spec, replicate_index)
    truth = data.truth
    rec = ReplicateRecord(method, replicate_index, spec.n, spec.d, spec.s_beta, spec.s_gamma)
    start = time.perf_counter()
    try:
        out = registry[method](data, spec, method_seed(spec, replicate_index, method))
    except Exception as err:  # recorded, the grid keeps going
        log.warning("%s replicate %d failed: %s", method, replicate_index, err)
        rec.error = f"{type(err).__name__}: {err}"
        rec.seconds = time.perf_counter() - start
        return rec
    rec.seconds = time.perf_counter() - start
    rec.beta_hat = np.asarray(out.beta, dtype=float)
    rec.l2_error = l2_error(rec.beta_hat, truth.beta0)
    m = support_metrics(out.support_beta, truth.support_beta, spec.d)
    rec.tpr, rec.fpr, rec.exact = m.tpr, m.fpr, m.exact
    if out.gamma is not None:
        rec.gamma_hat = np.asarray(out.gamma, dtype=float)
        rec.gamma_l2_error = l2_error(rec.gamma_hat, truth.gamma0)
    if out.support_gamma is not None:
        gm = support_metrics(out.support_gamma, truth.support_gamma, spec.d)
        rec.diagnostics.update(gamma_tpr=gm.tpr, gamma_fpr=gm.fpr, gamma_exact=gm.exact)
    rec.diagnostics.update(out.diagnostics)
    return rec


@dataclass
class MethodAggregate:
    mean_error: float
    sd_error: float
    mean_tpr: float
    mean_fpr: float
    exact_rate: float
    mean_seconds: float
    completed: int
    failures: int


def aggregate(records: list) -> MethodAggregate:
    ok = [r for r in records if r.ok]
    failures = len(records) - len(ok)
    if not ok:
        nan = float("nan")
        return MethodAggregate(nan, nan, nan, nan, nan, nan, 0, failures)
    err = np.array([r.l2_error for r in ok])
    return MethodAggregate(
        mean_error=float(err.mean()),
        sd_error=float(err.std(ddof=1)) if len(ok) > 1 else 0.0,
        mean_tpr=float(np.mean([r.tpr for r in ok])),
        mean_fpr=float(np.mean([r.fpr for r in ok])),
        exact_rate=float(np.mean([r.exact for r in ok])),
        mean_seconds=float(np.mean([r.seconds for r in ok])),
        completed=len(ok),
        failures=failures,
    )


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    methods: dict
    records: list

    def method_records(self, method: str) -> list:
        return [r for r in self.records if r.method == method]


def _cell(args):
    spec, rep, method, registry = args
    return run_replicate(spec, rep, method, registry)


def run_grid(
    specs: list, registry: Optional[dict] = None, workers: int = 1
) -> list:
    """Run every (spec, method, replicate) cell and aggregate per spec and method."""
    jobs = [
        (spec, rep, method, registry)
        for spec in specs
        for method in spec.methods
        for rep in range(spec.replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_cell, jobs))
    else:
        records = []
        for job in jobs:
            records.append(_cell(job))
            r = records[-1]
            log.info("n=%d d=%d %s rep %d: err %.4f (%.1fs)", r.n, r.d, r.method, r.replicate,
                     r.l2_error, r.seconds)
    results = []
    cursor = 0
    for spec in specs:
        count = len(spec.methods) * spec.replicates
        mine = sorted(records[cursor : cursor + count], key=lambda r: (r.method, r.replicate))
        cursor += count
        per_method = {
            m: aggregate([r for r in mine if r.method == m]) for m in spec.methods
        }
        results.append(ScenarioResult(spec=spec, methods=per_method, records=mine))
    return results


# -- table reproduction grids ------------------------------------------------


def table2_specs(profile: str = "desk", seed: int = 0, methods=METHODS) -> list:
    """Sparsity x dimension grid at n = 200."""
    if profile == "desk":
        grid = [(10, d) for d in (100, 250)]
    else:
        grid = [(s, d) for s in (10, 50, 100) for d in (250, 500, 750, 1000)]
    return [
        ScenarioSpec(n=200, d=d, s_beta=s, s_gamma=10, seed=seed, methods=tuple(methods))
        .with_profile(profile)
        for s, d in grid
    ]


def table3_specs(profile: str = "desk", seed: int = 0, methods=METHODS) -> list:
    """Dimension x sample-size grid at s_beta = s_gamma = 10."""
    dims = (100,) if profile == "desk" else (100, 500, 1000)
    return [
        ScenarioSpec(n=n, d=d, s_beta=10, s_gamma=10, seed=seed, methods=tuple(methods))
        .with_profile(profile)
        for d in dims
        for n in (50, 100, 150, 200)
    ]


def spec_to_dict(spec: ScenarioSpec) -> dict:
    out = asdict(spec)
    out["beta_range"] = list(spec.beta_range)
    out["gamma_range"] = list(spec.gamma_range)
    out["methods"] = list(spec.methods)
    out["sampler_options"] = {
        k: sorted(v) if isinstance(v, (set, frozenset)) else v
        for k, v in spec.sampler_options.items()
    }
    return out
