import numpy as np
import pytest

from mvlogit.decision import DecisionRule
from mvlogit.effects import PopulationSpec
from mvlogit.elicitation import BeliefSet
from mvlogit.exceptions import ConfigurationError, ValidationError
from mvlogit.simulation import (DgmSpec, Scenario, SimAnalysis, calibrate_dgm, generate_dataset,
                                population_truth, run_replications, scenario_from_dict,
                                simulate_direct_power)

FAST = SimAnalysis(n_iter=400, burnin=100)


def test_null_beliefs_give_zero_effects():
    th = [[0.4, 0.3], [0.6, 0.7]]
    dgm = calibrate_dgm(BeliefSet([th, th], -0.2, (0, 1)))
    for x in (0.0, 1.0):
        pop = PopulationSpec("fixed", (x,))
        np.testing.assert_allclose(population_truth(dgm, pop)["delta"], 0.0, atol=1e-12)
    np.testing.assert_allclose(population_truth(dgm)["delta"], 0.0, atol=1e-12)


def test_calibrated_conditional_effect_at_low_anchor():
    beliefs = BeliefSet([[[0.3, 0.3], [0.5, 0.5]], [[0.7, 0.6], [0.5, 0.5]]], 0.1, (0, 1))
    dgm = calibrate_dgm(beliefs, "binary")
    low = population_truth(dgm, PopulationSpec("fixed", (0.0,)))
    np.testing.assert_allclose(low["delta"], [0.400, 0.300], atol=1e-10)
    for T in (0, 1):
        for a, x in enumerate(beliefs.anchors):
            th = population_truth(dgm, PopulationSpec("fixed", (x,)))["theta"][T]
            np.testing.assert_allclose(th, beliefs.theta[T, a], atol=1e-10)
    ate = population_truth(dgm)["delta"]
    np.testing.assert_allclose(ate, [0.2, 0.15], atol=1e-10)


def test_normal_law_truth_by_quadrature():
    beta = np.array([[0.2, 0.5, 0.7, -0.4]])
    dgm = DgmSpec(beta, "normal")
    x = np.random.default_rng(0).standard_normal(2_000_000)
    mc = dgm.joint_probs(x, np.ones_like(x))[:, 0].mean()
    assert population_truth(dgm)["phi"][1, 0] == pytest.approx(mc, abs=1e-3)
    pos = population_truth(dgm, PopulationSpec("empirical", intervals={0: (0.0, np.inf)}))
    mc = dgm.joint_probs(x[x >= 0], 1.0)[:, 0].mean()
    assert pos["phi"][1, 0] == pytest.approx(mc, abs=1e-3)


def test_dgm_validation():
    with pytest.raises(ValidationError):
        DgmSpec(np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        DgmSpec(np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        DgmSpec(np.zeros((3, 4)), n_per_arm=1)
    with pytest.raises(ValidationError):
        DgmSpec(np.zeros((3, 4)), covariate_law="uniform")


def test_zero_beta_gives_half_success():
    n = 5000
    data = generate_dataset(DgmSpec(np.zeros((3, 4)), n_per_arm=n), seed=1)
    rates = data.y.mean(axis=0)
    assert np.all(np.abs(rates - 0.5) < 3 * np.sqrt(0.25 / (2 * n)))
    assert data.arm_counts() == {0: n, 1: n}


def test_large_sample_category_frequencies():
    beta = np.array([[0.3, 0.4, -0.5, 0.2], [-0.2, 0.1, 0.3, 0.0], [0.5, -0.6, 0.2, 0.4]])
    dgm = DgmSpec(beta, "normal", n_per_arm=50_000)
    data = generate_dataset(dgm, seed=2)
    H = dgm.H
    cats = (data.y[:, None, :] == H.rows[None]).all(axis=2).argmax(axis=1)
    truth = population_truth(dgm)["phi"]
    for T in (0, 1):
        freq = np.bincount(cats[data.treatment == T], minlength=4) / 50_000
        se = np.sqrt(truth[T] * (1 - truth[T]) / 50_000)
        assert np.all(np.abs(freq - truth[T]) < 3 * se + 1e-3)


def test_generation_is_deterministic():
    dgm = DgmSpec(np.ones((3, 4)) * 0.1, "normal", n_per_arm=50)
    a, b = generate_dataset(dgm, 7), generate_dataset(dgm, 7)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.covariates, b.covariates)
    assert not np.array_equal(a.y, generate_dataset(dgm, 8).y)


def small_scenario(**kw):
    dgm = DgmSpec(np.array([[0.2, 0.3, 0.1, 0.0], [0.0, 0.1, 0.0, 0.0], [0.1, 0.0, 0.0, 0.0]]),
                  n_per_arm=150)
    pops = (PopulationSpec("empirical", name="ATE"), PopulationSpec("fixed", (1.0,), name="x1"))
    return Scenario(dgm, populations=pops, analysis=FAST, name="small", **kw)


def test_single_replication_smoke():
    res = run_replications(small_scenario(), 1, seed=3)
    assert res.n_replications == 1
    assert res.n_failed + res.rows[0]["n_used"] == 1 if res.rows else res.n_failed == 1
    keys = {(r["population"], r["method"]) for r in res.rows}
    assert keys == {("ATE", "empirical"), ("ATE", "reference"), ("x1", "fixed"),
                    ("x1", "reference")}
    for r in res.rows:
        assert 0 <= r["p_superior"] <= 1 and 0 <= r["p_inferior"] <= 1
        assert r["se_superior"] == pytest.approx(np.sqrt(r["p_superior"] * (1 - r["p_superior"])
                                                         / r["n_used"]))
    assert len(res.csv_rows()) == len(res.rows)
    assert np.shape(res.bias_beta) == (3, 4)


def test_aggregates_independent_of_parallelism():
    sc = small_scenario()
    a = run_replications(sc, 3, seed=11, n_jobs=1)
    b = run_replications(sc, 3, seed=11, n_jobs=2)
    assert a.as_dict() == b.as_dict()


def test_failures_are_reported():
    sc = small_scenario()
    sc = Scenario(sc.dgm, populations=sc.populations, name="tiny",
                  analysis=SimAnalysis(n_iter=2, burnin=0, max_reruns=0))
    res = run_replications(sc, 2, seed=1)
    assert res.n_failed == len(res.failures)
    for f in res.failures:
        assert f["error"] and f["attempts"] == 1


def test_direct_generator():
    rule = DecisionRule("compensatory", (1.0,))
    out = simulate_direct_power([0.6, 0.4], [0.5, 0.5], 303, rule, R=500, seed=0)
    assert 0.7 < out["p"] < 0.9
    again = simulate_direct_power([0.6, 0.4], [0.5, 0.5], 303, rule, R=500, seed=0)
    assert out == again
    # null gives about alpha
    null = simulate_direct_power([0.5, 0.5], [0.5, 0.5], 303, rule, R=2000, seed=1)
    assert abs(null["p"] - 0.05) < 0.02
    phi = [0.3, 0.2, 0.2, 0.3]
    anyr = simulate_direct_power(phi, phi, 200, DecisionRule("any"), R=200, n_draws=500, seed=2)
    assert anyr["p"] < 0.12


def test_scenario_from_dict():
    d = {"name": "s", "dgm": {"beliefs": {
        "control": {"low": {"theta": [0.4, 0.3], "rho": 0}, "high": {"theta": [0.6, 0.7], "rho": 0}},
        "treatment": {"low": {"theta": [0.4, 0.3], "rho": 0}, "high": {"theta": [0.6, 0.7], "rho": 0}},
        "anchors": [0, 1]}, "n_per_arm": 20},
         "rules": ["any", {"kind": "compensatory", "weights": [0.5, 0.5]}],
         "analysis": {"n_iter": 100}}
    sc = scenario_from_dict(d)
    assert sc.analysis.n_iter == 100 and sc.dgm.levels == (0.0, 1.0)
    assert scenario_from_dict(d, full_scale=True).analysis.n_iter == 10_000
    with pytest.raises(ConfigurationError):
        scenario_from_dict({"dgm": {}})
    with pytest.raises(ConfigurationError):
        scenario_from_dict({**d, "analysis": {"bogus": 1}})
