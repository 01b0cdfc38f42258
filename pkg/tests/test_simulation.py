from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdben.diagnostics import summarize
from hdben.model import ContractViolation, Dataset, GroundTruth, clamp_linpred
from hdben.samplers import SamplerConfig, fit_hdben
from hdben.simulation import (
    PROFILES,
    REGISTRY,
    MethodOutput,
    ScenarioSpec,
    aggregate,
    generate_dataset,
    method_seed,
    run_grid,
    run_replicate,
    spec_to_dict,
    table2_specs,
    table3_specs,
)

# -- scenario spec ------------------------------------------------------------------


def test_spec_rejects_invalid():
    with pytest.raises(ContractViolation):
        ScenarioSpec(d=5, s_beta=6)
    with pytest.raises(ContractViolation):
        ScenarioSpec(beta_range=(2.0, 1.0))
    with pytest.raises(ContractViolation):
        ScenarioSpec(replicates=0)
    with pytest.raises(ContractViolation):
        ScenarioSpec(seed=-1)
    with pytest.raises(ContractViolation):
        ScenarioSpec(sampler_options={"iterations": 10})
    with pytest.raises(ContractViolation):
        ScenarioSpec(sampler_options={"gamma_kernel": "nope"})
    with pytest.raises(TypeError):
        ScenarioSpec(hyperparameters={"bogus": 1.0})


def test_profiles():
    full = ScenarioSpec().with_profile("full")
    assert (full.replicates, full.iterations, full.burn_in, full.chains) == (20, 5000, 1000, 3)
    assert ScenarioSpec().with_profile("desk").replicates == PROFILES["desk"]["replicates"]
    with pytest.raises(ContractViolation):
        ScenarioSpec().with_profile("huge")


def test_table_grids():
    t2 = table2_specs("desk")
    assert [(s.n, s.d, s.s_beta, s.s_gamma) for s in t2] == [(200, 100, 10, 10), (200, 250, 10, 10)]
    assert len(table2_specs("full")) == 12
    t3 = table3_specs("desk")
    assert [(s.n, s.d) for s in t3] == [(50, 100), (100, 100), (150, 100), (200, 100)]
    assert len(table3_specs("full")) == 12
    assert all(s.replicates == 20 and s.chains == 3 for s in table3_specs("full"))


def test_spec_to_dict_round_trip():
    spec = ScenarioSpec(n=30, d=4, s_beta=2, s_gamma=1, sampler_options={"freeze": {"tau_beta"}})
    out = spec_to_dict(spec)
    assert out["sampler_options"] == {"freeze": ["tau_beta"]}
    out["sampler_options"]["freeze"] = frozenset(out["sampler_options"]["freeze"])
    assert ScenarioSpec(**out) == spec


# -- data-generating process ------------------------------------------------------------


def test_dataset_homoscedastic_when_no_gamma_support():
    spec = ScenarioSpec(n=20_000, d=3, s_beta=1, s_gamma=0)
    data = generate_dataset(spec, 0)
    assert np.all(data.truth.gamma0 == 0)
    resid = data.y - data.x @ data.truth.beta0
    assert np.var(resid) == pytest.approx(1.0, abs=0.04)


def test_dataset_full_beta_support():
    data = generate_dataset(ScenarioSpec(n=10, d=8, s_beta=8, s_gamma=2), 1)
    assert np.all((data.truth.beta0 >= 1) & (data.truth.beta0 <= 2))


@settings(max_examples=20)
@given(st.integers(1, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 100))
def test_dataset_support_sizes(d, sb, sg, rep):
    sb, sg = min(sb, d), min(sg, d)
    spec = ScenarioSpec(n=5, d=d, s_beta=sb, s_gamma=sg, gamma_range=(0.1, 0.2))
    truth = generate_dataset(spec, rep).truth
    assert len(truth.support_beta) == sb and len(truth.support_gamma) == sg
    nz = truth.gamma0[truth.gamma0 != 0]
    assert np.all((nz >= 0.1) & (nz <= 0.2))


def test_dataset_bucketed_variance():
    spec = ScenarioSpec(n=100_000, d=5, s_beta=2, s_gamma=2, gamma_range=(0.3, 0.6))
    data = generate_dataset(spec, 0)
    eta = clamp_linpred(data.x @ data.truth.gamma0)
    resid = data.y - data.x @ data.truth.beta0
    edges = np.quantile(eta, np.linspace(0, 1, 11))
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (eta >= lo) & (eta <= hi)
        assert np.var(resid[m]) == pytest.approx(np.mean(np.exp(eta[m])), rel=0.10)


def test_dataset_deterministic():
    spec = ScenarioSpec(n=15, d=6, s_beta=2, s_gamma=2, seed=5)
    a, b = generate_dataset(spec, 3), generate_dataset(spec, 3)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.y, generate_dataset(spec, 4).y)


def test_method_seed_order_independent():
    spec = ScenarioSpec(seed=7)
    seeds = {m: method_seed(spec, 2, m) for m in ("ols", "hdben", "enet")}
    assert seeds == {m: method_seed(spec, 2, m) for m in ("enet", "hdben", "ols")}
    assert len(set(seeds.values())) == 3


# -- replicates -------------------------------------------------------------------------


def test_ols_replicate_matches_direct_solve():
    spec = ScenarioSpec(n=30, d=30, s_beta=5, s_gamma=3, methods=("ols",))
    rec = run_replicate(spec, 0, "ols")
    data = generate_dataset(spec, 0)
    beta = np.linalg.solve(data.x, data.y)
    assert rec.l2_error == pytest.approx(np.linalg.norm(beta - data.truth.beta0), rel=1e-8)
    assert rec.ok and rec.seconds >= 0


def test_replicate_deterministic():
    spec = ScenarioSpec(n=40, d=6, s_beta=2, s_gamma=2, iterations=200, burn_in=50)
    for method in ("lasso", "hdben"):
        a, b = run_replicate(spec, 1, method), run_replicate(spec, 1, method)
        np.testing.assert_array_equal(a.beta_hat, b.beta_hat)
        assert (a.l2_error, a.tpr, a.fpr, a.exact) == (b.l2_error, b.tpr, b.fpr, b.exact)


def test_replicate_records_failure():
    def broken(data, spec, seed):
        raise FloatingPointError("boom")

    rec = run_replicate(ScenarioSpec(n=5, d=2, s_beta=1, s_gamma=1), 0, "x", {"x": broken})
    assert not rec.ok and "boom" in rec.error and np.isnan(rec.l2_error)
    with pytest.raises(ContractViolation):
        run_replicate(ScenarioSpec(), 0, "unknown")


def test_illustrative_three_dimensional_case():
    rng = np.random.default_rng(2024)
    beta0, gamma0 = np.array([2.0, 1.0, 0.5]), np.array([1.5, 0.5, 0.0])
    x = rng.standard_normal((200, 3))
    y = x @ beta0 + np.exp(0.5 * x @ gamma0) * rng.standard_normal(200)
    data = Dataset(x, y, GroundTruth(beta0, gamma0))
    s = summarize(fit_hdben(data, None, SamplerConfig(iterations=2500, burn_in=500, seed=1)))
    assert np.all((s.beta.q_low <= beta0) & (beta0 <= s.beta.q_high))
    assert s.support_beta == {0, 1, 2}


# -- grids ------------------------------------------------------------------------------


def _planted(data, spec, seed):
    # error 3 on replicate 0 and 4 on replicate 1
    rep = 0 if data.y[0] == generate_dataset(spec, 0).y[0] else 1
    beta = data.truth.beta0.copy()
    beta[0] += 3.0 + rep
    return MethodOutput(beta=beta, support_beta=data.truth.support_beta)


def test_grid_two_point_statistics():
    spec = ScenarioSpec(n=10, d=3, s_beta=1, s_gamma=1, replicates=2, methods=("stub",))
    (res,) = run_grid([spec], {"stub": _planted})
    agg = res.methods["stub"]
    assert agg.mean_error == pytest.approx(3.5, abs=1e-12)
    assert agg.sd_error == pytest.approx(np.sqrt(0.5), abs=1e-12)
    assert (agg.completed, agg.failures, agg.mean_tpr, agg.exact_rate) == (2, 0, 1.0, 1.0)


def test_grid_empty_methods():
    (res,) = run_grid([ScenarioSpec(methods=())])
    assert res.methods == {} and res.records == []


def test_grid_order_independent_and_self_consistent():
    base = dict(n=30, d=8, s_beta=2, s_gamma=2, replicates=3)
    a = run_grid([ScenarioSpec(**base, methods=("ols", "lasso"))])[0]
    b = run_grid([ScenarioSpec(**base, methods=("lasso", "ols"))])[0]
    for m in ("ols", "lasso"):
        # everything but wall-clock time must agree
        assert replace(a.methods[m], mean_seconds=0) == replace(b.methods[m], mean_seconds=0)
        errors = [r.l2_error for r in a.method_records(m)]
        assert a.methods[m].mean_error == pytest.approx(np.mean(errors), abs=1e-12)
        assert a.methods[m].sd_error == pytest.approx(np.std(errors, ddof=1), abs=1e-12)
        assert aggregate(a.method_records(m)) == a.methods[m]
        assert a.methods[m].mean_seconds == pytest.approx(
            np.mean([r.seconds for r in a.method_records(m)]), abs=1e-12
        )


def test_grid_parallel_matches_serial():
    spec = ScenarioSpec(n=25, d=5, s_beta=2, s_gamma=1, replicates=2, methods=("ols", "enet"))
    serial = run_grid([spec])[0]
    parallel = run_grid([spec], workers=2)[0]
    assert serial.methods.keys() == parallel.methods.keys()
    for m in serial.methods:
        assert [r.l2_error for r in serial.method_records(m)] == [
            r.l2_error for r in parallel.method_records(m)
        ]


def test_grid_counts_failures():
    def flaky(data, spec, seed):
        if data.y[0] == generate_dataset(spec, 1).y[0]:
            raise RuntimeError("singular")
        return REGISTRY["ols"](data, spec, seed)

    spec = ScenarioSpec(n=10, d=3, s_beta=1, s_gamma=1, replicates=3, methods=("flaky",))
    agg = run_grid([spec], {"flaky": flaky})[0].methods["flaky"]
    assert (agg.completed, agg.failures) == (2, 1)
    all_fail = aggregate([run_replicate(spec, 1, "flaky", {"flaky": flaky})])
    assert all_fail.completed == 0 and np.isnan(all_fail.mean_error)

