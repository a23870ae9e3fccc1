"""Frequentist sample-size planning for the Any, All and Compensatory rules.

Any and All use the large-sample multivariate normal approximation of the
per-outcome test statistics; the per-arm ``n`` is found by scanning upward
from 2 until the power reaches the target.  The Compensatory rule reduces to
a two-proportion test on the weighted success probabilities and has a
closed form.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .decision import DecisionRule
from .exceptions import InfeasibleDesignError, ValidationError
from .outcomes import build_outcome_matrix

N_MAX = 10 ** 6


def check_correlation(Sigma, K=None):
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if S.shape[0] != S.shape[1] or (K is not None and S.shape[0] != K):
        raise ValidationError(f"correlation matrix must be {K}x{K}, got {S.shape}")
    if not np.allclose(S, S.T, atol=1e-12):
        raise ValidationError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(S), 1.0, atol=1e-12):
        raise ValidationError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(S) > 1 + 1e-12) or np.linalg.eigvalsh(S).min() < -1e-10:
        raise ValidationError("correlation matrix is not positive semi-definite")
    return S


def _bvn_cdf(c1, c2, rho):
    if rho >= 1.0:
        return float(ndtr(min(c1, c2)))
    if rho <= -1.0:
        return float(max(0.0, ndtr(c1) + ndtr(c2) - 1.0))
    if c1 == -np.inf or c2 == -np.inf:
        return 0.0
    s = math.sqrt(1.0 - rho * rho)

    def f(x):
        return stats.norm.pdf(x) * ndtr((c2 - rho * x) / s)

    # split at 0 so quad sees the bulk of the mass on a finite-width piece
    lo_edge = min(c1, 0.0)
    val, _ = integrate.quad(f, -np.inf, lo_edge, epsabs=1e-12, epsrel=1e-10, limit=200)
    if c1 > 0:
        upper = c1 if np.isfinite(c1) else np.inf
        v2, _ = integrate.quad(f, 0.0, upper, epsabs=1e-12, epsrel=1e-10, limit=200)
        val += v2
    return float(min(max(val, 0.0), 1.0))


def _genz_qmc(c, S, rng, n_points=2 ** 12, n_randomizations=16, tol=1e-4, max_points=2 ** 20):
    K = len(c)
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        Lc = np.linalg.cholesky(S + 1e-10 * np.eye(K))
    while True:
        estimates = np.empty(n_randomizations)
        for r in range(n_randomizations):
            w = qmc.Sobol(K - 1, scramble=True, seed=rng).random(n_points)
            e = np.full(n_points, ndtr(c[0] / Lc[0, 0]))
            f = e.copy()
            y = np.zeros((n_points, K))
            for i in range(1, K):
                u = np.clip(w[:, i - 1] * e, 1e-300, 1 - 1e-16)
                y[:, i - 1] = ndtri(u)
                e = ndtr((c[i] - y[:, :i] @ Lc[i, :i]) / Lc[i, i])
                f *= e
            estimates[r] = f.mean()
        err = 3.0 * estimates.std(ddof=1) / math.sqrt(n_randomizations)
        if err <= tol or n_points >= max_points:
            return float(estimates.mean()), float(err)
        n_points *= 4


def mvn_cdf(c, Sigma, seed=None, return_error=False):
    """``P(Z <= c)`` for ``Z ~ N(0, Sigma)`` with ``Sigma`` a correlation matrix.

    One dimension uses the error function, two dimensions adaptive quadrature
    of the conditional normal, more dimensions randomized quasi-Monte Carlo
    (Genz's separation of variables) with a 3-sigma error estimate.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    S = check_correlation(Sigma, len(c))
    if np.any(np.isnan(c)):
        raise ValidationError("limits must not be NaN")
    K = len(c)
    if K == 1:
        p, err = float(ndtr(c[0])), 0.0
    elif K == 2:
        p, err = _bvn_cdf(c[0], c[1], S[0, 1]), 1e-10
    else:
        p, err = _genz_qmc(c, S, np.random.default_rng(seed))
    return (p, err) if return_error else p


@dataclass(frozen=True)
class DesignTargets:
    """Planning inputs: per-arm success probabilities, outcome correlation, error rates."""

    theta1: tuple
    theta0: tuple
    rule: DecisionRule
    Sigma: np.ndarray = None
    alpha: float = 0.05
    beta_type2: float = 0.2
    n_max: int = N_MAX

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.theta1, dtype=float))
        t0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if t1.shape != t0.shape or t1.ndim != 1:
            raise ValidationError("theta1 and theta0 must be vectors of equal length")
        if np.any((t1 <= 0) | (t1 >= 1) | (t0 <= 0) | (t0 >= 1)):
            raise ValidationError("success probabilities must lie in (0, 1)")
        if not (0 < self.alpha < 1 and 0 < self.beta_type2 < 1):
            raise ValidationError("alpha and beta_type2 must lie in (0, 1)")
        S = np.eye(len(t1)) if self.Sigma is None else check_correlation(self.Sigma, len(t1))
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta0", t0)
        object.__setattr__(self, "Sigma", S)
        if self.rule.kind == "compensatory" and len(self.rule.weights) != len(t1):
            raise ValidationError("weights do not match the number of outcomes")

    @property
    def K(self):
        return len(self.theta1)

    def effects(self):
        d = self.theta1 - self.theta0
        return -d if self.rule.direction == "failure" else d

    def weighted(self):
        w = np.asarray(self.rule.weights)
        return float(w @ self.theta1), float(w @ self.theta0)


def critical_values(targets, n):
    """Per-outcome limits of the orthant probability for the Any/All rules."""
    t1, t0 = targets.theta1, targets.theta0
    se = np.sqrt((t1 * (1 - t1) + t0 * (1 - t0)) / n)
    z = targets.effects() / se
    K = targets.K
    if targets.rule.kind == "any":
        return stats.norm.ppf(1 - targets.alpha / K) - z
    if targets.rule.kind == "all":
        return -stats.norm.ppf(1 - targets.alpha) + z
    raise ValidationError("critical values are defined for the Any and All rules only")


def power_any_all(targets, n):
    """Approximate power at ``n`` subjects per arm.

    All: ``Psi_K(c)``, the probability that every statistic clears its
    critical value.  Any: ``1 - Psi_K(c)``, one minus the probability that
    none does.
    """
    if n < 2:
        raise ValidationError("n must be at least 2 per arm")
    c = critical_values(targets, n)
    p = mvn_cdf(c, targets.Sigma, seed=0)
    return 1.0 - p if targets.rule.kind == "any" else p


def power_compensatory(targets, n):
    p1, p0 = targets.weighted()
    d = p1 - p0 if targets.rule.direction == "success" else p0 - p1
    se = math.sqrt((p1 * (1 - p1) + p0 * (1 - p0)) / n)
    return float(ndtr(d / se - stats.norm.ppf(1 - targets.alpha)))


def compensatory_n(targets):
    """Closed-form per-arm n on the weighted success probabilities (real valued)."""
    p1, p0 = targets.weighted()
    if p1 == p0 or (p1 < p0) == (targets.rule.direction == "success"):
        raise InfeasibleDesignError("weighted effect does not favour the treatment")
    za = stats.norm.ppf(1 - targets.alpha)
    zb = stats.norm.ppf(1 - targets.beta_type2)
    return (p1 * (1 - p1) + p0 * (1 - p0)) * ((za + zb) / (p1 - p0)) ** 2


@dataclass(frozen=True)
class PlanResult:
    n: int
    power: float
    method: str
    rule: str
    alpha: float
    target_power: float
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def _scan_start(targets, target):
    """Largest n known to fall short, plus one; keeps the step-1 scan minimal.

    All power is at most each marginal power; Any power is at most the sum
    of the marginal powers.  Both bounds are cheap on a vector of n.
    """
    n = np.arange(2, targets.n_max + 1, dtype=float)
    t1, t0 = targets.theta1, targets.theta0
    se = np.sqrt((t1 * (1 - t1) + t0 * (1 - t0))[:, None] / n)
    z = targets.effects()[:, None] / se
    if targets.rule.kind == "all":
        bound = ndtr(z - stats.norm.ppf(1 - targets.alpha)).min(axis=0)
    else:
        bound = ndtr(z - stats.norm.ppf(1 - targets.alpha / targets.K)).sum(axis=0)
    # small slack so rounding in the bound never skips the true minimum
    ok = np.flatnonzero(bound >= target - 1e-9)
    return int(n[ok[0]]) if len(ok) else targets.n_max


def required_n(targets):
    """Smallest per-arm ``n`` reaching power ``1 - beta_type2``.

    Raises :class:`InfeasibleDesignError` when no ``n`` up to ``n_max`` works.
    """
    target = 1 - targets.beta_type2
    kind = targets.rule.kind
    if kind == "compensatory":
        exact = compensatory_n(targets)
        n = max(2, math.ceil(exact - 1e-9))
        if n > targets.n_max:
            raise InfeasibleDesignError(f"required n {n} exceeds cap {targets.n_max}",
                                        power_compensatory(targets, targets.n_max), targets.n_max)
        return PlanResult(n, power_compensatory(targets, n), "closed-form two-proportion",
                          targets.rule.label, targets.alpha, target, {"n_exact": exact})
    d = targets.effects()
    if (kind == "all" and np.any(d <= 0)) or (kind == "any" and np.all(d <= 0)):
        raise InfeasibleDesignError(
            f"the {kind} rule cannot reach power {target:.3f}: effects {d.tolist()}", 0.0, None)
    power = 0.0
    for n in range(_scan_start(targets, target), targets.n_max + 1):
        power = power_any_all(targets, n)
        if power >= target:
            return PlanResult(n, power, "multivariate normal scan", targets.rule.label,
                              targets.alpha, target)
    raise InfeasibleDesignError(f"power {power:.4f} below target at cap n={targets.n_max}",
                                power, targets.n_max)


def statistic_correlation(phi1, phi0):
    """Correlation matrix of the per-outcome differences in sample proportions.

    ``phi1`` and ``phi0`` are the joint response probabilities of the two
    arms; the covariance of each arm's proportions is
    ``H' diag(phi) H - theta theta'``.
    """
    phi1 = np.asarray(phi1, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    K = int(round(math.log2(phi1.shape[-1])))
    H = build_outcome_matrix(K).rows.astype(float)
    cov = np.zeros((K, K))
    for phi in (phi1, phi0):
        th = phi @ H
        cov += H.T @ (phi[:, None] * H) - np.outer(th, th)
    sd = np.sqrt(np.diag(cov))
    return cov / np.outer(sd, sd)


def correlation_from_joint(phi):
    """Pairwise outcome correlation implied by a K=2 joint probability vector."""
    phi = np.asarray(phi, dtype=float)
    th1, th2 = phi[..., 0] + phi[..., 1], phi[..., 0] + phi[..., 2]
    return (phi[..., 0] - th1 * th2) / np.sqrt(th1 * (1 - th1) * th2 * (1 - th2))


__all__ = ["DesignTargets", "PlanResult", "mvn_cdf", "power_any_all", "power_compensatory",
           "compensatory_n", "required_n", "critical_values", "check_correlation",
           "correlation_from_joint", "statistic_correlation"]
