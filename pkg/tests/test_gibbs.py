import math

import numpy as np
import pytest
from scipy.special import expit, log_expit

from mvlogit.estimator import MultivariateLogitRegression, TreatmentDesign
from mvlogit.exceptions import ChainError, ValidationError
from mvlogit.gibbs import (RHAT_THRESHOLD, ChainConfig, NormalPrior, gelman_rubin,
                           gibbs_sweep, run_chains)
from mvlogit.simulation import DgmSpec, generate_dataset


def grid_posterior_1d(successes, n, prior_var=100.0):
    b = np.linspace(-4, 4, 200_001)
    logp = successes * log_expit(b) + (n - successes) * log_expit(-b) - b * b / (2 * prior_var)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    mean = float(w @ b)
    return mean, float(math.sqrt(w @ (b - mean) ** 2))


def intercept_only(successes, n):
    X = np.ones((n, 1))
    cats = np.array([0] * successes + [1] * (n - successes))  # 0 = success, 1 = reference
    return X, cats


def test_intercept_only_matches_quadrature():
    X, cats = intercept_only(30, 50)
    post = run_chains(X, cats, NormalPrior.default(1, 1), ChainConfig(5000, 500, 2, seed=4))
    draws = post.pooled()[:, 0, 0]
    mean, sd = grid_posterior_1d(30, 50)
    assert abs(draws.mean() - mean) < 0.02
    assert abs(draws.std() / sd - 1) < 0.10


def test_one_covariate_matches_grid_quadrature():
    rng = np.random.default_rng(7)
    n = 50
    x = rng.normal(size=n)
    y = rng.random(n) < expit(0.3 + 0.8 * x)
    X = np.column_stack([np.ones(n), x])
    cats = np.where(y, 0, 1)
    post = run_chains(X, cats, NormalPrior.default(1, 2), ChainConfig(5000, 500, 2, seed=8))
    draws = post.pooled()[:, 0, :]
    g0, g1 = np.meshgrid(np.linspace(-2.5, 3.5, 601), np.linspace(-1.5, 3.5, 601), indexing="ij")
    eta = g0[..., None] + g1[..., None] * x
    logp = np.where(y, log_expit(eta), log_expit(-eta)).sum(-1) - (g0 ** 2 + g1 ** 2) / 200
    w = np.exp(logp - logp.max())
    w /= w.sum()
    for j, g in enumerate((g0, g1)):
        m = float((w * g).sum())
        sd = math.sqrt(float((w * (g - m) ** 2).sum()))
        assert abs(draws[:, j].mean() - m) < 0.02
        assert abs(draws[:, j].std() / sd - 1) < 0.10


def test_strong_prior_collapses_draws():
    X, cats = intercept_only(30, 50)
    prior = NormalPrior.default(1, 1, precision=1e6)
    post = run_chains(X, cats, prior, ChainConfig(500, 50, 1, seed=1))
    assert post.pooled().std() < 0.05
    assert abs(post.mean()[0, 0]) < 0.01


def test_equal_seeds_give_identical_draws():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(40), rng.normal(size=40)])
    cats = rng.integers(0, 4, 40)
    prior = NormalPrior.default(3, 2)
    a = run_chains(X, cats, prior, ChainConfig(50, 10, 2, seed=99))
    b = run_chains(X, cats, prior, ChainConfig(50, 10, 2, seed=99), n_jobs=2)
    np.testing.assert_array_equal(a.draws, b.draws)
    c = run_chains(X, cats, prior, ChainConfig(50, 10, 2, seed=100))
    assert not np.array_equal(a.draws, c.draws)


def test_recovers_known_coefficients():
    beta = np.array([[-0.5, 0.4, 0.3, -0.2], [0.2, -0.3, 0.1, 0.2], [0.1, 0.2, -0.4, 0.1]])
    data = generate_dataset(DgmSpec(beta, "normal", 2000), seed=11)
    raw = np.column_stack([data.treatment, data.covariates])
    X = TreatmentDesign().fit_transform(raw)
    est = MultivariateLogitRegression(1500, 300, 2, random_state=5).fit(X, data.y)
    sd = est.coef_draws().std(axis=0)
    assert np.all(np.abs(est.coef_ - beta) < 3 * sd)
    assert est.rhat_ < RHAT_THRESHOLD and est.converged_


def test_empty_dataset_rejected():
    with pytest.raises(ValidationError):
        run_chains(np.ones((0, 1)), np.zeros(0, int), NormalPrior.default(1, 1), ChainConfig(10))


def test_input_checks():
    prior = NormalPrior.default(3, 2)
    with pytest.raises(ValidationError):
        run_chains(np.ones((5, 3)), np.zeros(5, int), prior, ChainConfig(10))
    with pytest.raises(ValidationError):
        run_chains(np.ones((5, 2)), np.full(5, 4), prior, ChainConfig(10))
    with pytest.raises(ValidationError):
        run_chains(np.full((5, 2), np.nan), np.zeros(5, int), prior, ChainConfig(10))
    with pytest.raises(ValidationError):
        ChainConfig(n_iter=0)
    with pytest.raises(ValidationError):
        NormalPrior(np.zeros((1, 2)), np.array([[[1.0, 2.0], [2.0, 1.0]]]))


def test_singular_conditional_raises_chain_error():
    X = np.array([[1.0, 1e160], [1.0, 2e160]])
    with pytest.raises(ChainError):
        gibbs_sweep(np.zeros((1, 2)), X, np.array([0, 1]), NormalPrior.default(1, 2),
                    np.random.default_rng(0))


def test_gibbs_sweep_changes_only_free_rows():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(30), rng.normal(size=30)])
    cats = rng.integers(0, 4, 30)
    beta = gibbs_sweep(np.zeros((3, 2)), X, cats, NormalPrior.default(3, 2), rng)
    assert beta.shape == (3, 2) and np.all(np.isfinite(beta))


def test_gelman_rubin_examples():
    rng = np.random.default_rng(0)
    chain = rng.normal(size=(500, 3))
    assert gelman_rubin(np.stack([chain, chain])) <= 1.001
    shifted = np.stack([chain, chain + 10.0])
    assert gelman_rubin(shifted) > 1.1
    with pytest.raises(ValidationError):
        gelman_rubin(chain[None])
    with pytest.raises(ValidationError):
        gelman_rubin(np.stack([chain[:5], chain[:5]]))


def test_gelman_rubin_direct_formula():
    rng = np.random.default_rng(1)
    chains = rng.normal(size=(3, 200, 2)) + np.array([0.0, 0.1, 0.3])[:, None, None]
    m, n, _ = chains.shape
    means = chains.mean(axis=1)
    W = sum(np.cov(c, rowvar=False) for c in chains) / m
    B_n = np.cov(means, rowvar=False)
    lam = np.max(np.linalg.eigvals(np.linalg.solve(W, B_n)).real)
    expected = (n - 1) / n + (m + 1) / m * lam
    assert gelman_rubin(chains) == pytest.approx(expected, rel=1e-10)


def test_nonconvergence_flag_and_warning():
    X, cats = intercept_only(25, 50)
    prior = NormalPrior.default(1, 1, precision=1e-2)
    post = run_chains(X, cats, prior, ChainConfig(200, 100, 2, seed=3))
    assert post.converged and post.rhat < RHAT_THRESHOLD
    # chains offset by many sds must trip the flag
    fake = np.stack([post.draws[0], post.draws[1] + 5.0])
    assert gelman_rubin(fake) >= RHAT_THRESHOLD


def _fit_phi(Y, X, seed, n_iter=3000):
    est = MultivariateLogitRegression(n_iter, 500, 2, random_state=seed).fit(X, Y)
    return est.predict_joint_proba(X[:4])


def test_category_relabeling_equivariance():
    rng = np.random.default_rng(21)
    n = 400
    x = rng.normal(size=(n, 1))
    Y = (rng.random((n, 2)) < expit(np.column_stack([0.3 * x[:, 0], -0.2 + 0.5 * x[:, 0]])))
    Y = Y.astype(int)
    phi = _fit_phi(Y, x, 1)
    phi_swapped = _fit_phi(Y[:, ::-1], x, 2)
    # swapping the outcomes exchanges patterns 10 and 01
    np.testing.assert_allclose(phi_swapped[:, [0, 2, 1, 3]], phi, atol=0.02)


def test_scale_equivariance():
    rng = np.random.default_rng(5)
    n = 300
    x = rng.normal(size=(n, 1))
    y = (rng.random(n) < expit(0.5 + x[:, 0])).astype(int)
    kw = dict(n_iter=4000, burnin=500, n_chains=2, prior_precision=1e-8)
    a = MultivariateLogitRegression(random_state=1, **kw).fit(x, y)
    b = MultivariateLogitRegression(random_state=2, **kw).fit(2 * x, y)
    sd = a.coef_draws()[:, 0, 1].std()
    assert abs(b.coef_[0, 1] - a.coef_[0, 1] / 2) < 0.15 * sd + 0.01
    assert abs(b.coef_[0, 0] - a.coef_[0, 0]) < 0.15 * a.coef_draws()[:, 0, 0].std() + 0.01


def test_posterior_records_layout():
    X, cats = intercept_only(10, 20)
    post = run_chains(X, cats, NormalPrior.default(1, 1), ChainConfig(20, 0, 2, seed=0))
    rec = post.to_records()
    assert rec.shape == (2 * 20, 5)
    assert rec[-1, 0] == 1 and rec[-1, 1] == 19
    assert rec[5, 4] == post.draws[0, 5, 0, 0]
