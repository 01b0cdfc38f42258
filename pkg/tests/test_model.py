import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from hdben.model import (
    LOG_2PI,
    ChainState,
    ContractViolation,
    Dataset,
    GroundTruth,
    Hyperparameters,
    clamp_linpred,
    fisher_information_active,
    gaussian_kl,
    log_likelihood,
    log_posterior_unnorm,
    log_prior,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def _state(d=1, **kw):
    base = dict(beta=np.zeros(d), gamma=np.zeros(d), tau_beta=np.ones(d), tau_gamma=np.ones(d))
    base.update(kw)
    return ChainState(**base)


# -- types ---------------------------------------------------------------------


def test_dataset_validates_shapes():
    with pytest.raises(ContractViolation):
        Dataset(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ContractViolation):
        Dataset(np.ones(3), np.ones(3))
    with pytest.raises(ContractViolation):
        Dataset(np.array([[np.nan]]), np.ones(1))
    data = Dataset(np.ones((3, 2)), np.ones(3))
    assert (data.n, data.d) == (3, 2)


def test_ground_truth_derives_supports():
    t = GroundTruth([0.0, 1.5, 0.0], [2.0, 0.0, 0.0])
    assert t.support_beta == {1} and t.support_gamma == {0}
    assert (t.s_beta, t.s_gamma) == (1, 1)


def test_hyperparameters_positive_and_default_profile():
    hyp = Hyperparameters()
    assert hyp.a_beta1 > 1 and hyp.a_gamma1 > 1
    with pytest.raises(ContractViolation):
        Hyperparameters(b_gamma2=0.0)


def test_chain_state_validation():
    _state(2).validate()
    with pytest.raises(ContractViolation):
        _state(1, tau_beta=np.array([0.0])).validate()
    with pytest.raises(ContractViolation):
        _state(1, lambda2_gamma=-1.0).validate()


# -- log_likelihood --------------------------------------------------------------


def test_loglik_zero_predictor():
    data = Dataset(np.zeros((1, 3)), np.zeros(1))
    assert log_likelihood(np.array([1.0, 2, 3]), np.array([4.0, 5, 6]), data) == pytest.approx(
        -0.5 * LOG_2PI
    )


def test_loglik_zero_residual_unit_variance():
    data = Dataset(np.array([[1.0]]), np.array([1.0]))
    assert log_likelihood([1.0], [0.0], data) == pytest.approx(-0.5 * LOG_2PI)


def test_loglik_matches_term_by_term_oracle():
    x = np.array([[1.0], [2.0]])
    y = np.array([1.0, 0.0])
    beta, gamma = 0.5, 0.1
    expected = 0.0
    for xi, yi in zip(x[:, 0], y):
        var = np.exp(xi * gamma)
        expected += stats.norm.logpdf(yi, loc=xi * beta, scale=np.sqrt(var))
    assert log_likelihood([beta], [gamma], Dataset(x, y)) == pytest.approx(expected, rel=1e-12)


def test_loglik_dimension_mismatch():
    data = Dataset(np.ones((2, 2)), np.ones(2))
    with pytest.raises(ContractViolation):
        log_likelihood(np.ones(3), np.ones(2), data)


def test_loglik_clamps_linear_predictor():
    data = Dataset(np.array([[1.0]]), np.array([1.0]))
    val = log_likelihood([0.0], [1000.0], data)
    assert np.isfinite(val)
    assert val == pytest.approx(-0.5 * LOG_2PI - 15.0 - 0.5 * np.exp(-30.0))
    assert clamp_linpred(np.array([-50.0, 0.0, 50.0])).tolist() == [-30.0, 0.0, 30.0]


@given(hnp.arrays(float, (6, 2), elements=finite), hnp.arrays(float, 6, elements=finite),
       hnp.arrays(float, 2, elements=finite), hnp.arrays(float, 2, elements=finite))
def test_loglik_row_permutation_invariance(x, y, beta, gamma):
    data = Dataset(x, y)
    perm = np.arange(6)[::-1]
    flipped = Dataset(x[perm], y[perm])
    assert log_likelihood(beta, gamma, data) == pytest.approx(
        log_likelihood(beta, gamma, flipped), rel=1e-10, abs=1e-10
    )


# -- log_prior -------------------------------------------------------------------


def test_log_prior_hand_sum():
    hyp = Hyperparameters(*([1.0] * 8))
    state = _state(1, lambda1_beta_sq=1.0, lambda1_gamma_sq=1.0, lambda2_beta=1e-300,
                   lambda2_gamma=1e-300)
    expected = (
        2 * stats.norm.logpdf(0.0)
        + 2 * stats.expon.logpdf(1.0, scale=2.0)
        + 2 * stats.gamma.logpdf(1.0, a=1.0)
        + 2 * stats.gamma.logpdf(1e-300, a=1.0)
    )
    assert log_prior(state, hyp) == pytest.approx(expected, rel=1e-12)


def test_log_prior_hand_sum_unit_penalties():
    # with lambda2 = 1 the four Gamma(1,1) terms are all at 1
    hyp = Hyperparameters(*([1.0] * 8))
    state = _state(1, lambda2_beta=1.0, lambda2_gamma=1.0)
    expected = (
        2 * stats.norm.logpdf(0.0, scale=np.sqrt(0.5))
        + 2 * stats.expon.logpdf(1.0, scale=2.0)
        + 4 * stats.gamma.logpdf(1.0, a=1.0)
    )
    assert log_prior(state, hyp) == pytest.approx(expected, rel=1e-12)


def test_log_prior_decreases_away_from_zero():
    hyp = Hyperparameters()
    vals = [log_prior(_state(2, beta=np.array([s, -s])), hyp) for s in (0.0, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_log_prior_doubling_tau_closed_form():
    hyp = Hyperparameters()
    lam1 = 1.7
    tau = 0.8
    a = _state(1, tau_beta=np.array([tau]), lambda1_beta_sq=lam1, lambda2_beta=1e-300)
    b = _state(1, tau_beta=np.array([2 * tau]), lambda1_beta_sq=lam1, lambda2_beta=1e-300)
    diff = log_prior(b, hyp) - log_prior(a, hyp)
    assert diff == pytest.approx(-0.5 * np.log(2) - lam1 / 2 * tau, rel=1e-9)


def test_log_prior_rejects_bad_state():
    with pytest.raises(ContractViolation):
        log_prior(_state(1, tau_gamma=np.array([-1.0])), Hyperparameters())


@given(st.integers(1, 5), st.data())
def test_log_prior_logdet_matches_dense(d, data):
    tau = data.draw(hnp.arrays(float, d, elements=st.floats(0.05, 20)))
    lam2 = data.draw(st.floats(0.01, 5))
    beta = data.draw(hnp.arrays(float, d, elements=finite))
    state = _state(d, beta=beta, tau_beta=tau, lambda2_beta=lam2)
    prec = np.diag(1 / tau) + lam2 * np.eye(d)
    dense = stats.multivariate_normal.logpdf(beta, mean=np.zeros(d), cov=np.linalg.inv(prec))
    other = state.copy()
    other.beta = np.zeros(d)
    ref = stats.multivariate_normal.logpdf(np.zeros(d), mean=np.zeros(d), cov=np.linalg.inv(prec))
    # only the beta block differs between the two states
    assert log_prior(state, Hyperparameters()) - log_prior(other, Hyperparameters()) == (
        pytest.approx(dense - ref, abs=1e-9)
    )
    assert np.sum(np.log(state.prior_precision_beta())) == pytest.approx(
        np.linalg.slogdet(prec)[1], abs=1e-9
    )


# -- log_posterior_unnorm ----------------------------------------------------------


def test_log_posterior_is_sum():
    rng = np.random.default_rng(1)
    data = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5))
    state = _state(2, beta=rng.standard_normal(2), gamma=rng.standard_normal(2))
    hyp = Hyperparameters()
    assert log_posterior_unnorm(state, data, hyp) == (
        log_likelihood(state.beta, state.gamma, data) + log_prior(state, hyp)
    )


def test_log_posterior_y_only_enters_likelihood():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 2))
    d1, d2 = Dataset(x, rng.standard_normal(4)), Dataset(x, rng.standard_normal(4))
    state = _state(2, beta=np.array([0.3, -0.2]), gamma=np.array([0.1, 0.4]))
    hyp = Hyperparameters()
    lhs = log_posterior_unnorm(state, d1, hyp) - log_posterior_unnorm(state, d2, hyp)
    rhs = log_likelihood(state.beta, state.gamma, d1) - log_likelihood(state.beta, state.gamma, d2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_log_posterior_symbolic_d1_n2():
    x = np.array([[0.7], [-1.2]])
    y = np.array([0.4, 1.1])
    b, g, tb, tg = 0.3, -0.2, 1.5, 0.6
    l1b, l1g, l2b, l2g = 0.9, 1.4, 0.5, 2.0
    hyp = Hyperparameters(2.0, 1.0, 3.0, 2.0, 1.5, 0.5, 2.5, 1.0)
    state = ChainState([b], [g], [tb], [tg], l1b, l1g, l2b, l2g)
    # direct transcription of the joint density, term by term
    total = 0.0
    for xi, yi in zip(x[:, 0], y):
        v = np.exp(xi * g)
        total += -0.5 * np.log(2 * np.pi * v) - (yi - xi * b) ** 2 / (2 * v)
    for c, t, l2 in ((b, tb, l2b), (g, tg, l2g)):
        p = 1 / t + l2
        total += 0.5 * np.log(p / (2 * np.pi)) - 0.5 * p * c**2
    for t, l1 in ((tb, l1b), (tg, l1g)):
        total += np.log(l1 / 2) - l1 * t / 2
    for v, a, r in ((l1b, 2.0, 1.0), (l1g, 3.0, 2.0), (l2b, 1.5, 0.5), (l2g, 2.5, 1.0)):
        total += a * np.log(r) - math.lgamma(a) + (a - 1) * np.log(v) - r * v
    assert log_posterior_unnorm(state, Dataset(x, y), hyp) == pytest.approx(total, rel=1e-12)


# -- gaussian_kl -------------------------------------------------------------------


def test_kl_identical_is_zero():
    rng = np.random.default_rng(3)
    data = Dataset(rng.standard_normal((10, 3)), rng.standard_normal(10))
    b, g = rng.standard_normal(3), rng.standard_normal(3)
    assert gaussian_kl(b, g, b, g, data) == pytest.approx(0.0, abs=1e-12)


def test_kl_hand_value():
    data = Dataset(np.array([[1.0]]), np.array([0.0]))
    assert gaussian_kl([0.0], [0.0], [1.0], [0.0], data) == pytest.approx(0.5)


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(4)
    n, d = 5, 2
    x = rng.standard_normal((n, d))
    data = Dataset(x, np.zeros(n))
    b0, g0 = rng.normal(size=d), 0.3 * rng.normal(size=d)
    b, g = rng.normal(size=d), 0.3 * rng.normal(size=d)
    m0, s0 = x @ b0, np.exp(0.5 * x @ g0)
    m1, s1 = x @ b, np.exp(0.5 * x @ g)
    draws = m0 + s0 * rng.standard_normal((100_000, n))
    log_ratio = stats.norm.logpdf(draws, m0, s0) - stats.norm.logpdf(draws, m1, s1)
    per_draw = log_ratio.mean(axis=1)
    mc, se = per_draw.mean(), per_draw.std(ddof=1) / np.sqrt(len(per_draw))
    assert abs(gaussian_kl(b0, g0, b, g, data) - mc) < 3 * se


@given(hnp.arrays(float, (4, 2), elements=finite), hnp.arrays(float, 8, elements=finite))
def test_kl_non_negative(x, params):
    data = Dataset(x, np.zeros(4))
    assert gaussian_kl(params[:2], params[2:4], params[4:6], params[6:], data) >= 0.0


def test_kl_dimension_mismatch():
    data = Dataset(np.ones((2, 2)), np.ones(2))
    with pytest.raises(ContractViolation):
        gaussian_kl(np.ones(2), np.ones(2), np.ones(3), np.ones(2), data)


# -- fisher_information_active --------------------------------------------------------


def test_fisher_orthonormal_identity_blocks():
    n = 4
    q, _ = np.linalg.qr(np.random.default_rng(5).standard_normal((n, 2)))
    data = Dataset(q * np.sqrt(n), np.zeros(n))
    np.testing.assert_allclose(fisher_information_active(data, [0], [1]), np.eye(2), atol=1e-12)


def test_fisher_single_column():
    x = np.array([[1.0, 5.0], [2.0, 6.0], [3.0, 7.0]])
    out = fisher_information_active(Dataset(x, np.zeros(3)), [0], [])
    np.testing.assert_allclose(out, [[14.0 / 3]])


def test_fisher_dense_product_oracle():
    x = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    data = Dataset(x, np.zeros(3))
    out = fisher_information_active(data, [0, 1], [0, 1])
    g = x.T @ x / 3
    expected = np.block([[g, np.zeros((2, 2))], [np.zeros((2, 2)), g]])
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_fisher_empty_and_out_of_range():
    data = Dataset(np.ones((3, 2)), np.zeros(3))
    assert fisher_information_active(data, [], []).shape == (0, 0)
    with pytest.raises(ContractViolation):
        fisher_information_active(data, [2], [])


@given(hnp.arrays(float, (6, 4), elements=finite), st.sets(st.integers(0, 3)),
       st.sets(st.integers(0, 3)))
def test_fisher_symmetric_psd(x, sb, sg):
    out = fisher_information_active(Dataset(x, np.zeros(6)), sb, sg)
    if out.size:
        assert np.max(np.abs(out - out.T)) < 1e-12
        assert np.linalg.eigvalsh(out).min() >= -1e-10
