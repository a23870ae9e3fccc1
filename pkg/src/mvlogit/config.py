"""Parsing of JSON configuration objects into domain objects."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .decision import SIDEDNESS, DecisionRule
from .effects import PopulationSpec
from .exceptions import ConfigurationError, MvlogitError, ValidationError


def _require(d, key, where):
    if key not in d:
        raise ConfigurationError(f"{where}: missing required key {key!r}")
    return d[key]


def rule_from_dict(d):
    """``{"kind": "compensatory", "weights": [..], "direction": "failure"}``."""
    if isinstance(d, str):
        d = {"kind": d}
    try:
        w = d.get("weights")
        return DecisionRule(_require(d, "kind", "rule"), None if w is None else tuple(w),
                            d.get("direction", "success"))
    except MvlogitError as exc:
        raise ConfigurationError(f"rule {d}: {exc}") from exc


def population_from_dict(d):
    """``{"kind": "empirical", "name": "low", "intervals": {"0": [-1, 0]}, "equals": {}}``.

    Keys of ``intervals`` and ``equals`` are covariate positions or names;
    names are resolved later against the dataset.
    """
    kind = d.get("kind", "empirical")
    values = d.get("values")
    intervals = {}
    for j, bounds in d.get("intervals", {}).items():
        if len(bounds) != 2:
            raise ConfigurationError(f"interval for {j!r} must be [lo, hi]")
        lo = -np.inf if bounds[0] is None else float(bounds[0])
        hi = np.inf if bounds[1] is None else float(bounds[1])
        intervals[j] = (lo, hi)
    equals = {j: float(v) for j, v in d.get("equals", {}).items()}
    try:
        return PopulationSpec(kind, None if values is None else tuple(float(v) for v in values),
                              intervals, equals, d.get("name", kind))
    except MvlogitError as exc:
        raise ConfigurationError(f"population {d.get('name', '')!r}: {exc}") from exc


def resolve_population(pop, names):
    """Replace covariate names in predicate keys by positions."""
    names = list(names)

    def idx(j):
        if isinstance(j, (int, np.integer)):
            return int(j)
        if isinstance(j, str) and j.lstrip("-").isdigit():
            return int(j)
        if j not in names:
            raise ConfigurationError(f"population {pop.name!r} refers to unknown covariate {j!r}")
        return names.index(j)

    return PopulationSpec(pop.kind, pop.values, {idx(j): v for j, v in pop.intervals.items()},
                          {idx(j): v for j, v in pop.equals.items()}, pop.name)


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything an analysis run needs besides the data.

    Parameters
    ----------
    outcomes : tuple of str
        Binary outcome columns, in model order.
    treatment : str
        0/1 treatment column (1 = experimental arm).
    covariates : tuple of str
    interactions : bool or tuple of str
        Treatment-by-covariate interactions to include.
    standardize : bool
        Center and scale covariates; population predicates are then read in
        SD units.
    prior_mean, prior_precision : float
    n_iter, burnin, n_chains : int
    rules : tuple of DecisionRule
    sidedness : str
    alpha : float
    p_cut : float, optional
        Overrides the threshold derived from ``alpha``.
    populations : tuple of PopulationSpec
    methods : tuple of str
        ``"regression"`` and/or ``"reference"`` (stratified Dirichlet model).
    alpha0 : float
        Dirichlet prior parameter of the reference model.
    max_draws : int, optional
        Use only the first draws of the pooled posterior for effects.
    """

    outcomes: tuple
    treatment: str = "treat"
    covariates: tuple = ()
    interactions: object = True
    standardize: bool = False
    prior_mean: float = 0.0
    prior_precision: float = 1e-2
    n_iter: int = 10_000
    burnin: int = 1_000
    n_chains: int = 2
    rules: tuple = ()
    sidedness: str = "right"
    alpha: float = 0.05
    p_cut: float = None
    populations: tuple = field(default_factory=lambda: (PopulationSpec("empirical", name="ATE"),))
    methods: tuple = ("regression",)
    alpha0: float = 1.0
    max_draws: int = None

    def __post_init__(self):
        if len(self.outcomes) < 1:
            raise ConfigurationError("at least one outcome column is required")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ConfigurationError("duplicate outcome columns")
        cols = list(self.outcomes) + [self.treatment] + list(self.covariates)
        if len(set(cols)) != len(cols):
            raise ConfigurationError("a column is used in more than one role")
        if self.sidedness not in SIDEDNESS:
            raise ConfigurationError(f"sidedness must be one of {SIDEDNESS}")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.p_cut is not None and not 0 < self.p_cut < 1:
            raise ConfigurationError("p_cut must lie in (0, 1)")
        if self.interactions not in (True, False):
            bad = set(self.interactions) - set(self.covariates)
            if bad:
                raise ConfigurationError(f"interactions with unknown covariates {sorted(bad)}")
        bad = set(self.methods) - {"regression", "reference"}
        if bad or not self.methods:
            raise ConfigurationError(f"unknown or missing methods {sorted(bad)}")
        if self.alpha0 < 0:
            raise ConfigurationError("alpha0 must be non-negative")
        K = len(self.outcomes)
        for rule in self.rules:
            if rule.kind == "compensatory" and len(rule.weights) != K:
                raise ConfigurationError(f"rule {rule.label}: {len(rule.weights)} weights for {K} outcomes")

    @property
    def K(self):
        return len(self.outcomes)

    def interaction_positions(self):
        if self.interactions in (True, False):
            return self.interactions
        return [list(self.covariates).index(c) for c in self.interactions]

    def as_dict(self):
        d = asdict(self)
        d["rules"] = [asdict(r) for r in self.rules]
        d["populations"] = [population_to_dict(p) for p in self.populations]
        return d


def population_to_dict(p):
    def bound(v):
        return None if not np.isfinite(v) else float(v)

    return {"kind": p.kind, "name": p.name,
            "values": None if p.values is None else list(p.values),
            "intervals": {str(j): [bound(lo), bound(hi)] for j, (lo, hi) in p.intervals.items()},
            "equals": {str(j): v for j, v in p.equals.items()}}


def _number_or_table(v, where):
    if isinstance(v, (int, float)):
        return float(v)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where} must be a number or a numeric table") from None
    return tuple(map(tuple, np.atleast_2d(arr).tolist()))


def analysis_config_from_dict(d):
    """Build an :class:`AnalysisConfig` from parsed JSON (see ``docs/config.md``)."""
    if not isinstance(d, dict):
        raise ConfigurationError("configuration must be a JSON object")
    data = d.get("data", {})
    model = d.get("model", {})
    prior = d.get("prior", {})
    chains = d.get("chains", {})
    dec = d.get("decision", {})
    outcomes = _require(data, "outcomes", "data")
    if isinstance(outcomes, str) or not outcomes:
        raise ConfigurationError("data.outcomes must be a non-empty list of column names")
    inter = model.get("interactions", True)
    pops = d.get("populations")
    kwargs = dict(
        outcomes=tuple(outcomes),
        treatment=data.get("treatment", "treat"),
        covariates=tuple(data.get("covariates", ())),
        interactions=inter if isinstance(inter, bool) else tuple(inter),
        standardize=bool(model.get("standardize", False)),
        prior_mean=_number_or_table(prior.get("mean", 0.0), "prior.mean"),
        prior_precision=float(prior.get("precision", 1e-2)),
        n_iter=int(chains.get("n_iter", 10_000)),
        burnin=int(chains.get("burnin", 1_000)),
        n_chains=int(chains.get("n_chains", 2)),
        rules=tuple(rule_from_dict(r) for r in dec.get("rules", ["any", "all"])),
        sidedness=dec.get("sidedness", "right"),
        alpha=float(dec.get("alpha", 0.05)),
        p_cut=dec.get("p_cut"),
        methods=tuple(d.get("methods", ("regression",))),
        alpha0=float(d.get("reference", {}).get("alpha0", 1.0)),
        max_draws=d.get("max_draws"),
    )
    if pops is not None:
        kwargs["populations"] = tuple(population_from_dict(p) for p in pops)
    try:
        return AnalysisConfig(**kwargs)
    except (TypeError, ValidationError) as exc:
        raise ConfigurationError(str(exc)) from exc
