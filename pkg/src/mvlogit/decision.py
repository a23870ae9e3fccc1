"""Superiority and inferiority decisions for multiple binary outcomes.

Three rules partition the space of treatment differences ``delta``:

* Any: superior if some ``delta_k > 0``, inferior if some ``delta_k < 0``;
* All: superior if every ``delta_k > 0``, inferior if every ``delta_k < 0``;
* Compensatory: the sign of the weighted difference ``sum_k w_k delta_k``.

Regions are open, so ``delta = 0`` belongs to neither.  The All and
Compensatory regions are disjoint.  The Any regions overlap where the
outcomes move in opposite directions, so under that rule both posterior
probabilities can exceed the threshold; the verdict is then ``"mixed"``.

All and Compensatory decisions compare the posterior probability of the
region with the threshold.  Any decisions compare the largest per-outcome
probability ``max_k P(delta_k > 0)`` with the Bonferroni threshold
``1 - alpha/K``; the probability of the union region itself would reject
a true null far more often than ``alpha``.
"""

from dataclasses import asdict, dataclass, replace

import numpy as np

from .effects import EffectSample, check_weights
from .exceptions import ConsistencyError, ValidationError

RULES = ("any", "all", "compensatory")
DIRECTIONS = ("success", "failure")
SIDEDNESS = ("right", "left", "two-sided")


@dataclass(frozen=True)
class DecisionRule:
    """Decision rule.

    ``direction="failure"`` marks outcomes where a success is bad (e.g. an
    adverse event); the regions are then evaluated on ``-delta``.
    """

    kind: str
    weights: tuple = None
    direction: str = "success"

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in RULES:
            raise ValidationError(f"unknown rule {self.kind!r}; expected one of {RULES}")
        object.__setattr__(self, "kind", kind)
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}")
        if kind == "compensatory":
            if self.weights is None:
                raise ValidationError("the compensatory rule needs weights")
            w = np.asarray(self.weights, dtype=float)
            check_weights(w, len(w))
            object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @property
    def label(self):
        if self.kind == "compensatory":
            return "compensatory(" + ",".join(f"{w:g}" for w in self.weights) + ")"
        return self.kind


def _oriented(delta, rule):
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta)):
        raise ValidationError("treatment differences must be finite")
    return -delta if rule.direction == "failure" else delta


def in_region(delta, rule, region="superiority"):
    """Membership of ``delta`` (trailing axis = outcomes) in a rejection region."""
    d = _oriented(delta, rule)
    if region not in ("superiority", "inferiority"):
        raise ValidationError("region must be 'superiority' or 'inferiority'")
    sup = region == "superiority"
    if rule.kind == "any":
        return d.max(axis=-1) > 0 if sup else d.min(axis=-1) < 0
    if rule.kind == "all":
        return d.min(axis=-1) > 0 if sup else d.max(axis=-1) < 0
    w = np.asarray(rule.weights)
    if d.shape[-1] != len(w):
        raise ValidationError(f"{len(w)} weights for {d.shape[-1]} outcomes")
    s = d @ w
    return s > 0 if sup else s < 0


def rejection_probability(effects, rule, region="superiority"):
    """Fraction of posterior draws of ``delta`` inside the region."""
    delta = effects.delta if isinstance(effects, EffectSample) else np.asarray(effects, float)
    if delta.ndim == 1:
        delta = delta[:, None]
    if delta.shape[0] == 0:
        raise ValidationError("no draws to evaluate")
    return float(np.mean(in_region(delta, rule, region)))


def decision_probability(effects, rule, region="superiority"):
    """Posterior probability a rule compares with its threshold.

    For Any this is the largest per-outcome probability of a difference in
    the region's direction; otherwise :func:`rejection_probability`.
    """
    if rule.kind != "any":
        return rejection_probability(effects, rule, region)
    delta = effects.delta if isinstance(effects, EffectSample) else np.asarray(effects, float)
    if delta.ndim == 1:
        delta = delta[:, None]
    if delta.shape[0] == 0:
        raise ValidationError("no draws to evaluate")
    if region not in ("superiority", "inferiority"):
        raise ValidationError("region must be 'superiority' or 'inferiority'")
    d = _oriented(delta, rule)
    per = (d > 0) if region == "superiority" else (d < 0)
    return float(per.mean(axis=0).max())


def default_p_cut(rule, K, alpha=0.05, sidedness="right"):
    """Posterior threshold for a targeted Type I error ``alpha``.

    One-sided: ``1 - alpha`` (All, Compensatory) or ``1 - alpha/K`` (Any).
    Two-sided: ``1 - alpha/2`` and ``1 - alpha/(2K)``.
    """
    kind = rule.kind if isinstance(rule, DecisionRule) else str(rule).lower()
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    if sidedness not in SIDEDNESS:
        raise ValidationError(f"sidedness must be one of {SIDEDNESS}")
    a = alpha / 2 if sidedness == "two-sided" else alpha
    if kind == "any":
        a = a / K
    return 1.0 - a


@dataclass(frozen=True)
class DecisionOutcome:
    """Verdict with the probabilities behind it.

    ``region_superior`` and ``region_inferior`` are the posterior
    probabilities of the rejection regions; they equal ``p_superior`` and
    ``p_inferior`` except under the Any rule.
    """

    p_superior: float
    p_inferior: float
    verdict: str
    p_cut: float
    sidedness: str
    region_superior: float = None
    region_inferior: float = None

    def as_dict(self):
        return asdict(self)


def decide(p_superior, p_inferior, p_cut_sup, p_cut_inf=None, sidedness="right",
           allow_mixed=False):
    """Compare posterior probabilities with thresholds (strict ``>``).

    Both probabilities exceeding their thresholds is impossible for disjoint
    regions and raises :class:`ConsistencyError` unless ``allow_mixed``.
    """
    p_cut_inf = p_cut_sup if p_cut_inf is None else p_cut_inf
    for p in (p_superior, p_inferior):
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"probability {p} outside [0, 1]")
    if sidedness not in SIDEDNESS:
        raise ValidationError(f"sidedness must be one of {SIDEDNESS}")
    sup = p_superior > p_cut_sup and sidedness in ("right", "two-sided")
    inf = p_inferior > p_cut_inf and sidedness in ("left", "two-sided")
    if sup and inf:
        if not allow_mixed:
            raise ConsistencyError(
                f"both superiority ({p_superior}) and inferiority ({p_inferior}) exceed threshold")
        verdict = "mixed"
    else:
        verdict = "superior" if sup else "inferior" if inf else "inconclusive"
    return DecisionOutcome(float(p_superior), float(p_inferior), verdict, float(p_cut_sup),
                           sidedness)


def evaluate(effects, rule, alpha=0.05, sidedness="right", p_cut=None):
    """Posterior probabilities and verdict for one rule on one effect sample."""
    delta = effects.delta if isinstance(effects, EffectSample) else np.asarray(effects, float)
    K = delta.shape[-1]
    cut = default_p_cut(rule, K, alpha, sidedness) if p_cut is None else p_cut
    p_sup = decision_probability(delta, rule, "superiority")
    p_inf = decision_probability(delta, rule, "inferiority")
    out = decide(p_sup, p_inf, cut, cut, sidedness, allow_mixed=rule.kind == "any")
    return replace(out, region_superior=rejection_probability(delta, rule, "superiority"),
                   region_inferior=rejection_probability(delta, rule, "inferiority"))
