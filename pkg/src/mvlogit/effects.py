"""From coefficient draws to success probabilities and treatment differences.

Every draw is pushed through the same chain: joint response probabilities
``phi`` per arm, marginal success probabilities ``theta`` (sums of ``phi``
over the patterns with a success on the outcome) and differences
``delta = theta_1 - theta_0``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptySubpopulationError, ImproperPosteriorError, ValidationError
from .gibbs import PosteriorSample
from .outcomes import OutcomeMatrix, build_outcome_matrix, encode_response, inverse_mlogit


def phi_to_theta(phi, H):
    """Marginal success probabilities; works on the trailing axis of ``phi``.

    Each ``theta_k`` is the plain sum of the selected ``phi`` (a matrix
    product may round differently).  Sums that round just above one are
    clipped.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.stack([phi[..., H.rows[:, k] == 1].sum(axis=-1) for k in range(H.K)], axis=-1)
    return np.minimum(theta, 1.0)


def theta_to_delta(theta1, theta0):
    return np.asarray(theta1, dtype=float) - np.asarray(theta0, dtype=float)


def check_weights(w, K):
    w = np.asarray(w, dtype=float)
    if w.shape != (K,):
        raise ValidationError(f"expected {K} weights, got shape {w.shape}")
    if np.any(w < 0) or np.any(w > 1) or not np.isclose(w.sum(), 1.0, atol=1e-9):
        raise ValidationError("weights must lie in [0, 1] and sum to one")
    return w


def weighted(delta, w):
    """Weighted treatment difference ``sum_k w_k delta_k``."""
    delta = np.asarray(delta, dtype=float)
    return delta @ check_weights(w, delta.shape[-1])


@dataclass(frozen=True)
class EffectSample:
    """Per-draw joint probabilities for control (index 0) and treatment (1).

    ``phi`` has shape ``(S, 2, Q)``.
    """

    phi: np.ndarray = field(repr=False)
    H: OutcomeMatrix
    label: str = ""

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 3 or phi.shape[1] != 2 or phi.shape[2] != self.H.Q:
            raise ValidationError(f"phi must have shape (S, 2, {self.H.Q}), got {phi.shape}")
        if phi.shape[0] == 0:
            raise ValidationError("effect sample is empty")
        object.__setattr__(self, "phi", phi)

    @property
    def n_draws(self):
        return self.phi.shape[0]

    @property
    def theta(self):
        return phi_to_theta(self.phi, self.H)

    @property
    def delta(self):
        th = self.theta
        return theta_to_delta(th[:, 1], th[:, 0])

    def weighted_delta(self, w):
        return weighted(self.delta, w)

    def summary(self, level=0.95):
        """Posterior means and central intervals of theta and delta."""
        lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
        th, de = self.theta, self.delta
        return {
            "theta_mean": th.mean(axis=0).tolist(),
            "theta_interval": np.quantile(th, [lo, hi], axis=0).tolist(),
            "delta_mean": de.mean(axis=0).tolist(),
            "delta_interval": np.quantile(de, [lo, hi], axis=0).transpose().tolist(),
            "phi_mean": self.phi.mean(axis=0).tolist(),
        }

    def to_records(self):
        """Long rows ``(draw, arm, kind, index, value)``; kind 0=phi, 1=theta, 2=delta."""
        S = self.n_draws
        out = []
        d, t, q = np.indices(self.phi.shape).reshape(3, -1)
        out.append(np.column_stack([d, t, np.zeros_like(d), q, self.phi.ravel()]))
        th = self.theta
        d, t, k = np.indices(th.shape).reshape(3, -1)
        out.append(np.column_stack([d, t, np.ones_like(d), k, th.ravel()]))
        de = self.delta
        d, k = np.indices(de.shape).reshape(2, -1)
        out.append(np.column_stack([d, np.full(S * de.shape[1], -1), np.full_like(d, 2), k,
                                    de.ravel()]))
        return np.vstack(out)


@dataclass(frozen=True)
class PopulationSpec:
    """A (sub)population of interest.

    ``kind="fixed"`` plugs in the covariate vector ``values``;
    ``kind="empirical"`` averages over the subjects selected by the
    conjunction of half-open ``intervals`` ``{j: (lo, hi)}`` and exact
    ``equals`` ``{j: value}`` predicates on the covariate columns.  An
    empirical spec without predicates selects everybody.
    """

    kind: str = "empirical"
    values: tuple = None
    intervals: dict = field(default_factory=dict)
    equals: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("fixed", "empirical"):
            raise ValidationError(f"unknown population kind {self.kind!r}")
        if self.kind == "fixed" and self.values is None:
            raise ValidationError("fixed population needs covariate values")
        for j, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ValidationError(f"empty interval [{lo}, {hi}) for covariate {j}")

    def mask(self, covariates):
        z = np.asarray(covariates, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        keep = np.ones(z.shape[0], dtype=bool)
        for j, (lo, hi) in self.intervals.items():
            keep &= (z[:, int(j)] >= lo) & (z[:, int(j)] < hi)
        for j, v in self.equals.items():
            keep &= z[:, int(j)] == v
        return keep


def _beta_draws(posterior):
    if isinstance(posterior, PosteriorSample):
        return posterior.pooled()
    if hasattr(posterior, "coef_draws"):
        return posterior.coef_draws()
    beta = np.asarray(posterior, dtype=float)
    if beta.ndim == 2:
        beta = beta[None]
    if beta.ndim != 3:
        raise ValidationError("coefficient draws must have shape (S, Q-1, P+1)")
    return beta


def _phi_from_rows(beta, rows):
    # beta (S, Q-1, P+1), rows (n, P) -> (S, n, Q)
    psi = beta[:, None, :, 0] + np.einsum("np,sqp->snq", rows, beta[:, :, 1:])
    return inverse_mlogit(psi)


def effects_at_fixed_x(posterior, design, z, label=""):
    """Effects for a population described by fixed covariate values.

    Parameters
    ----------
    posterior : PosteriorSample, fitted MultivariateLogitRegression, or array
        Coefficient draws of shape ``(S, Q - 1, P + 1)``.
    design : TreatmentDesign
        Fitted design that maps ``(z, T)`` onto a model row.
    z : array_like
        Covariate values on the model scale.
    """
    beta = _beta_draws(posterior)
    rows = np.vstack([design.build(np.atleast_1d(np.asarray(z, dtype=float)), T)
                      for T in (0, 1)])
    if rows.shape[1] != beta.shape[2] - 1:
        raise ValidationError(
            f"design produces {rows.shape[1]} columns, coefficients expect {beta.shape[2] - 1}")
    phi = _phi_from_rows(beta, rows)
    H = build_outcome_matrix(int(np.log2(beta.shape[1] + 1)))
    return EffectSample(phi, H, label)


def effects_empirical_marginal(posterior, design, covariates, treatment, population=None,
                               chunk=256, label=""):
    """Effects averaged over the observed covariates of a (sub)population.

    For every draw both arms are evaluated at the covariates of every
    retained subject, whatever arm the subject was in, and the joint
    probabilities are averaged.  Comparing the arms on one covariate sample
    keeps chance imbalance between the arms out of ``delta``.  At least one
    retained subject per arm is still required.
    """
    beta = _beta_draws(posterior)
    z = np.asarray(covariates, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    t = np.asarray(treatment)
    keep = np.ones(len(t), dtype=bool) if population is None else population.mask(z)
    for arm in (0, 1):
        if not np.any(keep & (t == arm)):
            raise EmptySubpopulationError(
                f"no subjects in arm {arm} fall in population {getattr(population, 'name', '')!r}")
    # identical covariate rows share their probabilities; weight by multiplicity
    zu, counts = np.unique(z[keep], axis=0, return_counts=True)
    weights = counts / counts.sum()
    Q = beta.shape[1] + 1
    phi = np.empty((beta.shape[0], 2, Q))
    for arm in (0, 1):
        rows = design.build(zu, arm)
        if rows.shape[1] != beta.shape[2] - 1:
            raise ValidationError(
                f"design produces {rows.shape[1]} columns, coefficients expect {beta.shape[2] - 1}")
        for start in range(0, beta.shape[0], chunk):
            sub = _phi_from_rows(beta[start:start + chunk], rows)
            phi[start:start + chunk, arm] = np.einsum("n,snq->sq", weights, sub)
    H = build_outcome_matrix(int(np.log2(Q)))
    return EffectSample(phi, H, label)


def dirichlet_posterior_params(Y, treatment, alpha0, H):
    """Per-arm posterior Dirichlet parameters ``alpha0 + category counts``."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    alpha0 = np.broadcast_to(np.asarray(alpha0, dtype=float), (H.Q,))
    if np.any(alpha0 < 0):
        raise ValidationError("Dirichlet prior parameters must be non-negative")
    t = np.asarray(treatment)
    cats = encode_response(Y, H) if len(Y) else np.zeros(0, dtype=int)
    return np.vstack([alpha0 + np.bincount(cats[t == arm], minlength=H.Q) for arm in (0, 1)])


def dirichlet_reference(Y, treatment, alpha0, n_draws, rng, H=None, label=""):
    """Covariate-free conjugate reference model for a (stratified) sample.

    Raises :class:`ImproperPosteriorError` when a posterior parameter is zero,
    which happens with the improper ``alpha0 = 0`` prior and an empty
    category.
    """
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    H = build_outcome_matrix(Y.shape[1]) if H is None else H
    alpha_n = dirichlet_posterior_params(Y, treatment, alpha0, H)
    for arm in (0, 1):
        empty = np.flatnonzero(alpha_n[arm] <= 0)
        if empty.size:
            pats = ", ".join(H.labels()[q] for q in empty)
            raise ImproperPosteriorError(
                f"arm {arm}: posterior Dirichlet parameter is zero for pattern(s) {pats}; "
                "use a proper prior (alpha0 > 0)")
    phi = np.stack([rng.dirichlet(alpha_n[arm], size=n_draws) for arm in (0, 1)], axis=1)
    return EffectSample(phi, H, label)
