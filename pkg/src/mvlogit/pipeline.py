"""Orchestration of the analysis commands.

Every ``run_*`` function returns a JSON-ready ``result`` dict and writes its
tables into ``out_dir``.  Randomness derives from one seed: the fit uses the
first and the decision step the second child of ``SeedSequence(seed)``, so
deciding from persisted draws reproduces a one-shot run exactly.
"""

from pathlib import Path

import numpy as np

from .config import analysis_config_from_dict, resolve_population, rule_from_dict
from .decision import evaluate
from .effects import dirichlet_reference, effects_at_fixed_x, effects_empirical_marginal
from .elicitation import BeliefSet, elicit_prior_means
from .estimator import MultivariateLogitRegression, TreatmentDesign
from .exceptions import ConfigurationError, EmptySubpopulationError, ValidationError
from .gibbs import ChainConfig
from .io import (dataset_summary, load_dataset_csv, read_json, read_posterior_csv, write_csv,
                 write_json, write_posterior_csv)
from .outcomes import build_outcome_matrix
from .planning import DesignTargets, required_n, statistic_correlation
from .simulation import FULL_SCALE, run_replications, scenario_from_dict

POSTERIOR_FILE = "posterior_draws.csv"
REPORT_FILE = "report.json"


def _seeds(seed):
    root = np.random.SeedSequence(seed)
    fit_ss, decide_ss = root.spawn(2)
    return root, fit_ss, decide_ss


def _design(data, config):
    raw = np.column_stack([data.treatment, data.covariates])
    design = TreatmentDesign(0, config.interaction_positions(), standardize=False).fit(raw)
    return design, raw


def _names(design, data, config):
    H = build_outcome_matrix(data.K)
    terms = ["(Intercept)"] + list(design.get_feature_names_out(
        [config.treatment] + list(config.covariates)))
    return H.labels()[:-1], terms


def fit_dataset(data, config, seed):
    """Fit the regression; returns ``(design, estimator, fit_result)``."""
    root, fit_ss, _ = _seeds(seed)
    design, raw = _design(data, config)
    est = MultivariateLogitRegression(config.n_iter, config.burnin, config.n_chains,
                                      np.asarray(config.prior_mean), config.prior_precision,
                                      random_state=fit_ss)
    est.fit(design.transform(raw), data.y)
    cats, terms = _names(design, data, config)
    draws = est.coef_draws()
    result = {
        "data": dataset_summary(data),
        "diagnostics": {"rhat": est.rhat_, "converged": est.converged_,
                        "n_chains": config.n_chains, "n_iter": config.n_iter,
                        "burnin": config.burnin, "seed": root.entropy},
        "coefficients": {"categories": cats, "terms": terms, "mean": est.coef_,
                         "sd": draws.std(axis=0, ddof=1)},
    }
    return design, est, result


def run_fit(data, config, seed, out_dir):
    design, est, result = fit_dataset(data, config, seed)
    cats, terms = result["coefficients"]["categories"], result["coefficients"]["terms"]
    write_posterior_csv(Path(out_dir) / POSTERIOR_FILE, est.posterior_, cats, terms)
    return result


def load_fit(fit_dir, data, config):
    """Rebuild the design and a fitted estimator from a ``fit`` output directory."""
    fit_dir = Path(fit_dir)
    report = read_json(fit_dir / REPORT_FILE)
    try:
        fit = report["result"]
        diag = fit["diagnostics"]
        cats, terms = fit["coefficients"]["categories"], fit["coefficients"]["terms"]
    except (KeyError, TypeError):
        raise ConfigurationError(f"{fit_dir / REPORT_FILE} is not a fit report") from None
    design, _ = _design(data, config)
    exp_cats, exp_terms = _names(design, data, config)
    if list(cats) != list(exp_cats) or list(terms) != list(exp_terms):
        raise ConfigurationError("stored draws do not match the configured model terms")
    chain_cfg = ChainConfig(diag["n_iter"], diag["burnin"], diag["n_chains"], diag["seed"])
    rhat = float("nan") if diag["rhat"] is None else diag["rhat"]
    post = read_posterior_csv(fit_dir / POSTERIOR_FILE, cats, terms, chain_cfg, rhat,
                              diag["converged"])
    est = MultivariateLogitRegression.from_posterior(post, data.K)
    return design, est, fit, diag["seed"]


def decide_effects(data, config, design, est, seed):
    """Effects, summaries and decisions for every population, method and rule."""
    _, _, decide_ss = _seeds(seed)
    rng = np.random.default_rng(decide_ss)
    rules = config.rules or (rule_from_dict("any"),)
    draws = est.coef_draws()
    if config.max_draws is not None:
        draws = draws[:int(config.max_draws)]
    out = []
    rows_dec, rows_eff = [], []
    for pop in config.populations:
        pop = resolve_population(pop, config.covariates)
        samples = []
        if "regression" in config.methods:
            if pop.kind == "fixed":
                if len(pop.values) != data.covariates.shape[1]:
                    raise ConfigurationError(
                        f"population {pop.name!r} gives {len(pop.values)} covariate values, "
                        f"model has {data.covariates.shape[1]}")
                samples.append(("fixed", effects_at_fixed_x(draws, design, pop.values, pop.name),
                                None))
            else:
                mask = pop.mask(data.covariates)
                eff = effects_empirical_marginal(draws, design, data.covariates, data.treatment,
                                                 pop, label=pop.name)
                samples.append(("empirical", eff, mask))
        if "reference" in config.methods:
            if pop.kind == "fixed":
                mask = np.all(data.covariates == np.asarray(pop.values), axis=1)
            else:
                mask = pop.mask(data.covariates)
            sub_t = data.treatment[mask]
            empty = [arm for arm in (0, 1) if not np.any(sub_t == arm)]
            if not empty:
                eff = dirichlet_reference(data.y[mask], sub_t, config.alpha0, draws.shape[0],
                                          rng, label=pop.name)
                samples.append(("reference", eff, mask))
            elif pop.kind == "fixed":
                # a point of a continuous covariate usually has no stratum
                out.append({"population": pop.name, "kind": pop.kind, "method": "reference",
                            "skipped": f"no subjects in arm(s) {empty} at the fixed values"})
            else:
                raise EmptySubpopulationError(
                    f"reference model: no subjects in arm {empty[0]} of population {pop.name!r}")
        for method, eff, mask in samples:
            entry = {"population": pop.name, "kind": pop.kind, "method": method,
                     "n_subjects": None if mask is None else
                     {str(a): int(np.sum(data.treatment[mask] == a)) for a in (0, 1)},
                     "summary": eff.summary(0.95), "decisions": []}
            for rule in rules:
                dec = evaluate(eff, rule, config.alpha, config.sidedness, config.p_cut)
                d = {"rule": rule.label, "direction": rule.direction, **dec.as_dict()}
                entry["decisions"].append(d)
                rows_dec.append([pop.name, method, rule.label, rule.direction, dec.p_superior,
                                 dec.p_inferior, dec.region_superior, dec.region_inferior,
                                 dec.p_cut, dec.sidedness, dec.verdict])
            s = entry["summary"]
            for k in range(data.K):
                rows_eff.append([pop.name, method, data.outcome_names[k] if data.outcome_names
                                 else str(k + 1), s["theta_mean"][0][k], s["theta_mean"][1][k],
                                 s["delta_mean"][k], s["delta_interval"][k][0],
                                 s["delta_interval"][k][1]])
            out.append(entry)
    return out, rows_dec, rows_eff


def run_decide(data, config, seed, out_dir, fit_dir=None):
    if fit_dir is None:
        design, est, fit = fit_dataset(data, config, seed)
    else:
        design, est, fit, stored_seed = load_fit(fit_dir, data, config)
        seed = stored_seed if seed is None else seed
    effects, rows_dec, rows_eff = decide_effects(data, config, design, est, seed)
    out_dir = Path(out_dir)
    write_csv(out_dir / "decisions.csv", ["population", "method", "rule", "direction",
                                          "p_superior", "p_inferior", "region_superior",
                                          "region_inferior", "p_cut", "sidedness", "verdict"],
              rows_dec)
    write_csv(out_dir / "effects.csv", ["population", "method", "outcome", "theta_control",
                                        "theta_treatment", "delta", "delta_lower",
                                        "delta_upper"], rows_eff)
    return {"data": fit["data"], "diagnostics": fit["diagnostics"], "effects": effects}


def run_plan(spec, out_dir):
    """Required sample size per arm from a ``plan`` config section."""
    try:
        rule = rule_from_dict(spec["rule"])
    except (KeyError, TypeError):
        raise ConfigurationError("plan needs a 'rule'") from None
    if "phi1" in spec and "phi0" in spec:
        H = build_outcome_matrix(int(np.log2(len(spec["phi1"]))))
        phi1, phi0 = np.asarray(spec["phi1"], float), np.asarray(spec["phi0"], float)
        theta1, theta0 = phi1 @ H.rows, phi0 @ H.rows
        Sigma = statistic_correlation(phi1, phi0)
    elif "theta1" in spec and "theta0" in spec:
        theta1, theta0 = spec["theta1"], spec["theta0"]
        K = len(theta1)
        corr = spec.get("correlation")
        if corr is None:
            Sigma = None
        elif np.ndim(corr) == 0:
            Sigma = np.full((K, K), float(corr))
            np.fill_diagonal(Sigma, 1.0)
        else:
            Sigma = corr
    else:
        raise ConfigurationError("plan needs theta1/theta0 or phi1/phi0")
    targets = DesignTargets(theta1, theta0, rule, Sigma, float(spec.get("alpha", 0.05)),
                            1.0 - float(spec.get("power", 0.8)))
    res = required_n(targets)
    result = {**res.as_dict(), "theta1": targets.theta1, "theta0": targets.theta0,
              "correlation": targets.Sigma}
    write_csv(Path(out_dir) / "plan.csv", ["rule", "n_per_arm", "power", "method"],
              [[res.rule, res.n, res.power, res.method]])
    return result


def run_elicit(spec, out_dir):
    beliefs = BeliefSet.from_dict(spec)
    beta = elicit_prior_means(beliefs)
    H = build_outcome_matrix(2)
    cats = H.labels()[:-1]
    terms = ["(Intercept)", "T", "x", "x:T"]
    write_csv(Path(out_dir) / "prior_means.csv", ["category"] + terms,
              [[c] + [float(v) for v in row] for c, row in zip(cats, beta)])
    return {"categories": cats, "terms": terms, "prior_mean": beta,
            "joint_probs": beliefs.joint_probs(), "anchors": beliefs.anchors}


def run_simulate(spec, seed, out_dir, full_scale=False):
    """Replication campaigns for every scenario of a campaign file."""
    scenarios = spec.get("scenarios")
    if not scenarios:
        raise ConfigurationError("campaign needs a non-empty 'scenarios' list")
    R = int(spec.get("replications", 1000 if full_scale else 200))
    n_jobs = int(spec.get("n_jobs", 1))
    root = np.random.SeedSequence(seed)
    results = []
    rows = []
    for sc_spec, ss in zip(scenarios, root.spawn(len(scenarios))):
        sc = scenario_from_dict(sc_spec, full_scale)
        res = run_replications(sc, R, ss, n_jobs)
        results.append(res.as_dict())
        rows.extend(res.csv_rows())
    header = list(dict.fromkeys(k for r in rows for k in r)) or [
        "scenario", "population", "method", "rule", "n_used", "p_superior", "se_superior",
        "p_inferior", "se_inferior"]
    write_csv(Path(out_dir) / "campaign.csv", header,
              [[r.get(k, "") for k in header] for r in rows])
    return {"replications": R, "seed": root.entropy, "full_scale": full_scale,
            "scenarios": results, "full_scale_settings": FULL_SCALE}


def load_config(path):
    return read_json(path)


def analysis_config(d):
    if not isinstance(d, dict):
        raise ValidationError("configuration must be a JSON object")
    return analysis_config_from_dict(d)
