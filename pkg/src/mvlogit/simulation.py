"""Data generation from known coefficients and replication campaigns.

A data-generating mechanism (DGM) is a single-covariate model
``psi = b0 + b1*T + b2*x + b3*x*T`` per free category, with the covariate
either binary (two levels, probability 1/2 each) or standard normal.
Campaigns repeatedly generate a balanced trial, fit the regression, turn
the draws into treatment effects and record the decisions.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import json
import math
import warnings

import numpy as np
from scipy.special import roots_legendre
from scipy.stats import norm

from .config import population_from_dict, population_to_dict, rule_from_dict
from .decision import DecisionRule, decision_probability, default_p_cut
from .effects import (PopulationSpec, dirichlet_reference, effects_at_fixed_x,
                      effects_empirical_marginal, phi_to_theta)
from .elicitation import BeliefSet, elicit_prior_means
from .estimator import MultivariateLogitRegression, TreatmentDesign
from .exceptions import ConfigurationError, MvlogitError, ValidationError
from .outcomes import TrialDataset, build_outcome_matrix, inverse_mlogit

COVARIATE_LAWS = ("binary", "normal")
METHODS = ("regression", "reference")


@dataclass(frozen=True)
class DgmSpec:
    """True coefficients ``(Q - 1, 4)``: intercept, T, x, x*T.

    ``levels`` are the two values of a binary covariate.
    """

    beta: np.ndarray
    covariate_law: str = "binary"
    n_per_arm: int = 1000
    label: str = ""
    levels: tuple = (0.0, 1.0)

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if beta.ndim != 2 or beta.shape[1] != 4:
            raise ValidationError("true coefficients must have shape (Q-1, 4)")
        Q = beta.shape[0] + 1
        if Q & (Q - 1) or Q < 2:
            raise ValidationError(f"{beta.shape[0]} free categories is not 2**K - 1")
        if not np.all(np.isfinite(beta)):
            raise ValidationError("true coefficients must be finite")
        if self.covariate_law not in COVARIATE_LAWS:
            raise ValidationError(f"covariate law must be one of {COVARIATE_LAWS}")
        if int(self.n_per_arm) < 2:
            raise ValidationError("n_per_arm must be at least 2")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "n_per_arm", int(self.n_per_arm))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))

    @property
    def H(self):
        return build_outcome_matrix(int(math.log2(self.beta.shape[0] + 1)))

    @property
    def K(self):
        return self.H.K

    def joint_probs(self, x, treatment):
        """True ``phi`` at covariate value(s) ``x`` and arm(s) ``treatment``."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(treatment, dtype=float)
        b = self.beta
        psi = (b[:, 0] + np.multiply.outer(t, b[:, 1]) + np.multiply.outer(x, b[:, 2])
               + np.multiply.outer(x * t, b[:, 3]))
        return inverse_mlogit(psi)

    def with_n(self, n):
        return DgmSpec(self.beta, self.covariate_law, n, self.label, self.levels)

    def as_dict(self):
        return {"beta": self.beta.tolist(), "covariate_law": self.covariate_law,
                "n_per_arm": self.n_per_arm, "label": self.label, "levels": list(self.levels)}


def calibrate_dgm(beliefs, covariate_law="binary", n_per_arm=1000, label=""):
    """True coefficients reproducing the beliefs exactly at the two anchors.

    For a binary covariate the anchors become its two levels.
    """
    beta = elicit_prior_means(beliefs)
    return DgmSpec(beta, covariate_law, n_per_arm, label, beliefs.anchors)


def _covariate_nodes(dgm, population):
    """Quadrature nodes and weights of the covariate law restricted to a population."""
    if population is not None and population.kind == "fixed":
        return np.array([float(population.values[0])]), np.array([1.0])
    intervals = {} if population is None else population.intervals
    equals = {} if population is None else population.equals
    for j in list(intervals) + list(equals):
        if int(j) != 0:
            raise ValidationError("the DGM has a single covariate (position 0)")
    if 0 in equals or "0" in equals:
        v = float(next(iter(equals.values())))
        if dgm.covariate_law == "binary" and v not in dgm.levels:
            raise ValidationError(f"binary covariate never equals {v}")
        return np.array([v]), np.array([1.0])
    lo, hi = next(iter(intervals.values())) if intervals else (-np.inf, np.inf)
    if dgm.covariate_law == "binary":
        x = np.array([v for v in dgm.levels if lo <= v < hi])
        if x.size == 0:
            raise ValidationError("population excludes both covariate levels")
        return x, np.full(x.size, 1.0 / x.size)
    a, b = max(lo, -12.0), min(hi, 12.0)
    nodes, w = roots_legendre(200)
    x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    w = 0.5 * (b - a) * w * norm.pdf(x)
    return x, w / w.sum()


def population_truth(dgm, population=None):
    """True ``phi`` (2, Q), ``theta`` (2, K) and ``delta`` (K,) in a population.

    Empirical populations average over the covariate law restricted to the
    predicates; fixed populations evaluate at the given value.
    """
    x, w = _covariate_nodes(dgm, population)
    phi = np.stack([w @ dgm.joint_probs(x, np.full_like(x, T)) for T in (0, 1)])
    theta = phi_to_theta(phi, dgm.H)
    return {"phi": phi, "theta": theta, "delta": theta[1] - theta[0]}


def generate_dataset(dgm, seed=None):
    """Balanced trial with ``n_per_arm`` subjects per arm drawn from the DGM."""
    rng = np.random.default_rng(seed)
    n = dgm.n_per_arm
    t = np.repeat([0, 1], n)
    if dgm.covariate_law == "binary":
        x = np.where(rng.random(2 * n) < 0.5, dgm.levels[0], dgm.levels[1])
    else:
        x = rng.standard_normal(2 * n)
    phi = dgm.joint_probs(x, t)
    u = rng.random(2 * n)
    cats = (u[:, None] > np.cumsum(phi, axis=1)[:, :-1]).sum(axis=1)
    H = dgm.H
    return TrialDataset(H.rows[cats], t, x[:, None], ("x",),
                        tuple(f"y{k + 1}" for k in range(H.K)))


@dataclass(frozen=True)
class SimAnalysis:
    """Analysis settings inside a campaign (desk-scale defaults)."""

    n_iter: int = 2000
    burnin: int = 500
    n_chains: int = 2
    prior_precision: float = 1e-2
    alpha: float = 0.05
    sidedness: str = "right"
    alpha0: float = 1.0
    max_reruns: int = 3
    max_draws: int = None


FULL_SCALE = {"n_iter": 10_000, "burnin": 1_000}


@dataclass(frozen=True)
class Scenario:
    dgm: DgmSpec
    rules: tuple = (DecisionRule("any"), DecisionRule("all"),
                    DecisionRule("compensatory", (0.5, 0.5)))
    populations: tuple = (PopulationSpec("empirical", name="ATE"),)
    methods: tuple = METHODS
    analysis: SimAnalysis = field(default_factory=SimAnalysis)
    name: str = ""

    def __post_init__(self):
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValidationError(f"unknown methods {sorted(bad)}")
        for r in self.rules:
            if r.kind == "compensatory" and len(r.weights) != self.dgm.K:
                raise ValidationError(f"rule {r.label} does not match K={self.dgm.K}")


def _estimates(scenario, data, est, design, rng):
    """``{(population, method): (EffectSample)}`` for one dataset."""
    out = {}
    z = data.covariates
    for pop in scenario.populations:
        if "regression" in scenario.methods:
            if pop.kind == "fixed":
                eff = effects_at_fixed_x(est, design, pop.values, pop.name)
            else:
                eff = effects_empirical_marginal(est, design, z, data.treatment, pop,
                                                 label=pop.name)
            out[(pop.name, pop.kind)] = eff
        if "reference" in scenario.methods:
            if pop.kind == "fixed":
                if scenario.dgm.covariate_law != "binary":
                    continue  # a point has no stratum under a continuous covariate
                mask = z[:, 0] == pop.values[0]
            else:
                mask = pop.mask(z)
            sub = data.subset(mask)
            S = est.posterior_.pooled().shape[0]
            out[(pop.name, "reference")] = dirichlet_reference(
                sub.y, sub.treatment, scenario.analysis.alpha0, S, rng, label=pop.name)
    return out


def _one_replication(scenario, index, seed_seq):
    a = scenario.analysis
    attempts = seed_seq.spawn(1 + a.max_reruns)
    rec = {"index": index, "attempts": 0, "rhat": float("nan"), "error": None}
    for ss in attempts:
        rec["attempts"] += 1
        data_ss, fit_ss, ref_ss = ss.spawn(3)
        try:
            data = generate_dataset(scenario.dgm, data_ss)
            raw = np.column_stack([data.treatment, data.covariates])
            design = TreatmentDesign().fit(raw)
            est = MultivariateLogitRegression(a.n_iter, a.burnin, a.n_chains,
                                              prior_precision=a.prior_precision,
                                              random_state=fit_ss)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                est.fit(design.transform(raw), data.y)
        except MvlogitError as exc:
            rec["error"] = f"{exc.code}: {exc}"
            continue
        rec["rhat"] = est.rhat_
        if not est.converged_:
            rec["error"] = f"nonconvergence: PSRF {est.rhat_:.3f}"
            continue
        rec["error"] = None
        break
    if rec["error"] is not None:
        return rec
    try:
        effects = _estimates(scenario, data, est, design, np.random.default_rng(ref_ss))
    except MvlogitError as exc:
        rec["error"] = f"{exc.code}: {exc}"
        return rec
    rec["beta"] = est.coef_
    rec["results"] = {}
    K = scenario.dgm.K
    for key, eff in effects.items():
        delta = eff.delta
        entry = {"delta": delta.mean(axis=0), "theta": eff.theta.mean(axis=0),
                 "superior": {}, "inferior": {}}
        for rule in scenario.rules:
            cut = default_p_cut(rule, K, a.alpha, a.sidedness)
            entry["superior"][rule.label] = decision_probability(delta, rule, "superiority") > cut
            entry["inferior"][rule.label] = decision_probability(delta, rule, "inferiority") > cut
        rec["results"][key] = entry
    return rec


def _task(args):
    return _one_replication(*args)


@dataclass
class CampaignResult:
    """Aggregated decisions and biases of one scenario.

    ``rows`` holds one dict per population x method x rule with rejection
    proportions ``p_superior``/``p_inferior`` and their standard errors
    ``sqrt(p (1 - p) / R)``, where ``R`` counts the successful replications.
    """

    scenario: str
    rows: list
    bias_beta: list
    n_replications: int
    n_failed: int
    failures: list
    seed_entropy: int
    settings: dict

    def row(self, population, method, rule):
        for r in self.rows:
            if (r["population"], r["method"], r["rule"]) == (population, method, rule):
                return r
        raise KeyError((population, method, rule))

    def as_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)

    def csv_rows(self):
        out = []
        for r in self.rows:
            flat = {k: v for k, v in r.items() if not isinstance(v, list)}
            for k, v in enumerate(r["bias_delta"]):
                flat[f"bias_delta_{k + 1}"] = v
            for T, arm in enumerate(r["bias_theta"]):
                for k, v in enumerate(arm):
                    flat[f"bias_theta_T{T}_{k + 1}"] = v
            out.append(flat)
        return out

    def to_csv(self, path):
        rows = self.csv_rows()
        if not rows:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("")
            return
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


def _aggregate(scenario, records, entropy):
    records = sorted(records, key=lambda r: r["index"])
    ok = [r for r in records if r["error"] is None]
    failures = [{"index": r["index"], "attempts": r["attempts"], "error": r["error"]}
                for r in records if r["error"] is not None]
    rows = []
    truths = {}
    for pop in scenario.populations:
        truths[pop.name] = population_truth(scenario.dgm, pop)
    keys = sorted({k for r in ok for k in r["results"]})
    for pop_name, method in keys:
        entries = [r["results"][(pop_name, method)] for r in ok]
        R = len(entries)
        truth = truths[pop_name]
        bias_delta = np.mean([e["delta"] for e in entries], axis=0) - truth["delta"]
        bias_theta = np.mean([e["theta"] for e in entries], axis=0) - truth["theta"]
        for rule in scenario.rules:
            row = {"scenario": scenario.name, "population": pop_name, "method": method,
                   "rule": rule.label, "n_used": R}
            for region in ("superior", "inferior"):
                p = float(np.mean([e[region][rule.label] for e in entries]))
                row[f"p_{region}"] = p
                row[f"se_{region}"] = math.sqrt(p * (1 - p) / R)
            row["true_delta"] = truth["delta"].tolist()
            row["bias_delta"] = bias_delta.tolist()
            row["bias_theta"] = bias_theta.tolist()
            rows.append(row)
    bias_beta = ((np.mean([r["beta"] for r in ok], axis=0) - scenario.dgm.beta).tolist()
                 if ok else [])
    settings = {"dgm": scenario.dgm.as_dict(), "analysis": asdict(scenario.analysis),
                "rules": [r.label for r in scenario.rules],
                "populations": [population_to_dict(p) for p in scenario.populations],
                "methods": list(scenario.methods),
                "reruns": int(sum(r["attempts"] - 1 for r in records))}
    return CampaignResult(scenario.name, rows, bias_beta, len(records), len(failures),
                          failures, int(entropy), settings)


def run_replications(scenario, R, seed=None, n_jobs=1):
    """Run ``R`` independent replications of a scenario.

    Replication ``r`` draws all of its randomness from the ``r``-th child of
    ``SeedSequence(seed)``, so aggregates do not depend on ``n_jobs`` or on
    the completion order.  Failed replications (errors or persistent
    non-convergence after ``max_reruns`` fresh datasets) are listed in
    ``failures`` and excluded from the proportions.
    """
    if int(R) < 1:
        raise ValidationError("R must be at least 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    tasks = [(scenario, i, ss) for i, ss in enumerate(root.spawn(int(R)))]
    if n_jobs == 1:
        records = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))
    return _aggregate(scenario, records, root.entropy)


def simulate_direct_power(phi1, phi0, n_per_arm, rule, R=2000, alpha=0.05, sidedness="right",
                          alpha0=1.0, n_draws=2000, seed=None):
    """Superiority rate of a rule when data come straight from per-arm joint probabilities.

    No covariates and no regression: each replication draws multinomial
    category counts per arm and analyses them with the conjugate Dirichlet
    posterior.  For the Compensatory rule ``P(delta_w > 0)`` uses the exact
    posterior mean and variance of ``delta_w`` with a normal approximation;
    the other rules use ``n_draws`` posterior draws.

    Returns
    -------
    dict with ``p``, ``se`` and ``R``.
    """
    phi1 = np.asarray(phi1, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    if phi1.shape != phi0.shape or not np.allclose([phi1.sum(), phi0.sum()], 1.0):
        raise ValidationError("phi1 and phi0 must be probability vectors of equal length")
    H = build_outcome_matrix(int(math.log2(len(phi1))))
    rng = np.random.default_rng(seed)
    cut = default_p_cut(rule, H.K, alpha, sidedness)
    counts = np.stack([rng.multinomial(n_per_arm, p, size=R) for p in (phi0, phi1)], axis=1)
    a_n = alpha0 + counts  # (R, 2, Q)
    if rule.kind == "compensatory":
        lin = H.rows @ np.asarray(rule.weights)
        A = a_n.sum(axis=2, keepdims=True)
        m = a_n / A
        mean = m @ lin
        var = (m @ lin ** 2 - mean ** 2) / (A[..., 0] + 1)
        d = mean[:, 1] - mean[:, 0]
        if rule.direction == "failure":
            d = -d
        p_sup = norm.cdf(d / np.sqrt(var.sum(axis=1)))
    else:
        p_sup = np.empty(R)
        for r in range(R):
            phi = rng.dirichlet(a_n[r, 1], n_draws), rng.dirichlet(a_n[r, 0], n_draws)
            delta = phi_to_theta(phi[0], H) - phi_to_theta(phi[1], H)
            p_sup[r] = decision_probability(delta, rule, "superiority")
    rate = float(np.mean(p_sup > cut))
    return {"p": rate, "se": math.sqrt(rate * (1 - rate) / R), "R": int(R), "p_cut": cut}


def scenario_from_dict(d, full_scale=False):
    """Scenario from a campaign-file entry (see ``docs/config.md``)."""
    try:
        g = d["dgm"]
    except (KeyError, TypeError):
        raise ConfigurationError("scenario needs a 'dgm' object") from None
    law = g.get("covariate_law", "binary")
    n = g.get("n_per_arm", 1000)
    if "beliefs" in g:
        dgm = calibrate_dgm(BeliefSet.from_dict(g["beliefs"]), law, n, g.get("label", ""))
    elif "beta" in g:
        dgm = DgmSpec(g["beta"], law, n, g.get("label", ""), tuple(g.get("levels", (0.0, 1.0))))
    else:
        raise ConfigurationError("dgm needs either 'beta' or 'beliefs'")
    analysis = dict(d.get("analysis", {}))
    if full_scale:
        analysis.update(FULL_SCALE)
    try:
        an = SimAnalysis(**analysis)
    except TypeError as exc:
        raise ConfigurationError(f"analysis: {exc}") from exc
    kwargs = {"dgm": dgm, "analysis": an, "name": d.get("name", dgm.label)}
    if "rules" in d:
        kwargs["rules"] = tuple(rule_from_dict(r) for r in d["rules"])
    if "populations" in d:
        kwargs["populations"] = tuple(population_from_dict(p) for p in d["populations"])
    if "methods" in d:
        kwargs["methods"] = tuple(d["methods"])
    return Scenario(**kwargs)
