"""scikit-learn style front end: design construction and the Bayesian model."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ValidationError
from .gibbs import ChainConfig, NormalPrior, run_chains
from .outcomes import (build_outcome_matrix, encode_response, inverse_mlogit,
                       log_inverse_mlogit)


class TreatmentDesign(TransformerMixin, BaseEstimator):
    """Build model rows ``(T, z_1..z_m, T*z_j ...)`` from ``[T, z]`` input.

    Parameters
    ----------
    treatment_col : int
        Column of the input holding the 0/1 treatment indicator.
    interactions : bool or sequence of int
        ``True`` interacts the treatment with every covariate, ``False`` with
        none, or give covariate positions (0-based, in covariate order).
    standardize : bool
        Center and scale covariates with the training mean and sd.
    """

    def __init__(self, treatment_col=0, interactions=True, standardize=False):
        self.treatment_col = treatment_col
        self.interactions = interactions
        self.standardize = standardize

    def _split(self, X):
        X = check_array(X, dtype=float, ensure_min_features=1)
        t = X[:, self.treatment_col]
        if not np.all((t == 0) | (t == 1)):
            raise ValidationError("treatment column must be coded 0/1")
        z = np.delete(X, self.treatment_col, axis=1)
        return t, z

    def fit(self, X, y=None):
        t, z = self._split(X)
        self.n_features_in_ = z.shape[1] + 1
        self.n_covariates_ = z.shape[1]
        if self.standardize and z.shape[1]:
            self.center_ = z.mean(axis=0)
            self.scale_ = z.std(axis=0, ddof=1)
            self.scale_[self.scale_ == 0] = 1.0
        else:
            self.center_ = np.zeros(z.shape[1])
            self.scale_ = np.ones(z.shape[1])
        if self.interactions is True:
            self.interaction_idx_ = np.arange(z.shape[1])
        elif self.interactions is False:
            self.interaction_idx_ = np.arange(0)
        else:
            idx = np.asarray(self.interactions, dtype=int)
            if np.any((idx < 0) | (idx >= z.shape[1])):
                raise ValidationError("interaction index out of range")
            self.interaction_idx_ = idx
        return self

    def scale_covariates(self, z):
        """Map raw covariates onto the model scale."""
        check_is_fitted(self, "center_")
        return (np.asarray(z, dtype=float) - self.center_) / self.scale_

    def build(self, z, treatment):
        """Design rows for covariates already on the model scale.

        ``z`` is ``(n, m)`` or a single length-``m`` vector and ``treatment``
        a scalar or length-``n`` vector.
        """
        check_is_fitted(self, "center_")
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        if z.shape[1] != self.n_covariates_:
            raise ValidationError(
                f"expected {self.n_covariates_} covariates, got {z.shape[1]}")
        t = np.broadcast_to(np.asarray(treatment, dtype=float), (z.shape[0],))
        if not np.all((t == 0) | (t == 1)):
            raise ValidationError("treatment must be 0 or 1")
        rows = np.column_stack([t, z, t[:, None] * z[:, self.interaction_idx_]])
        return rows[0] if single else rows

    def transform(self, X):
        t, z = self._split(X)
        return self.build(self.scale_covariates(z), t)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "center_")
        if input_features is None:
            input_features = ["T"] + [f"x{j}" for j in range(self.n_covariates_)]
        input_features = list(input_features)
        t_name = input_features[self.treatment_col]
        covs = [f for j, f in enumerate(input_features) if j != self.treatment_col]
        return np.array([t_name] + covs + [f"{covs[j]}:{t_name}" for j in self.interaction_idx_],
                        dtype=object)


class MultivariateLogitRegression(BaseEstimator):
    """Bayesian multinomial logistic regression on joint binary outcomes.

    The ``K`` binary responses of each subject are recoded into one of
    ``2**K`` joint categories and the category probabilities are modeled
    with a multinomial logit.  The posterior is sampled by Polya-Gamma
    augmented Gibbs sampling.

    Parameters
    ----------
    n_iter : int
        Stored draws per chain.
    burnin : int
        Discarded draws per chain.
    n_chains : int
    prior_mean : float or array of shape (Q - 1, P + 1)
    prior_precision : float, array of shape (P + 1,), or (P + 1, P + 1)
        Common precision of the normal prior of every free category.
    random_state : int, optional
    n_jobs : int
        Chains run concurrently.

    Attributes
    ----------
    posterior_ : PosteriorSample
    coef_ : ndarray of shape (Q - 1, P + 1)
        Posterior mean coefficients, intercept in column 0.
    outcome_matrix_ : OutcomeMatrix
    rhat_ : float
        Multivariate Gelman-Rubin statistic (NaN with one chain).
    converged_ : bool
    """

    def __init__(self, n_iter=10_000, burnin=1_000, n_chains=2, prior_mean=0.0,
                 prior_precision=1e-2, random_state=None, n_jobs=1):
        self.n_iter = n_iter
        self.burnin = burnin
        self.n_chains = n_chains
        self.prior_mean = prior_mean
        self.prior_precision = prior_precision
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _prior(self, n_free, width):
        return NormalPrior.default(n_free, width, self.prior_mean, self.prior_precision)

    def fit(self, X, Y):
        X = check_array(X, dtype=float, ensure_min_features=0)
        Y = np.asarray(Y)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape[0] != X.shape[0]:
            raise ValidationError("X and Y have different numbers of rows")
        H = build_outcome_matrix(Y.shape[1])
        cats = encode_response(Y, H)
        X1 = np.column_stack([np.ones(X.shape[0]), X])
        prior = self._prior(H.Q - 1, X1.shape[1])
        config = ChainConfig(self.n_iter, self.burnin, self.n_chains, self.random_state)
        self.posterior_ = run_chains(X1, cats, prior, config, n_jobs=self.n_jobs)
        self._set_fitted(H, X.shape[1])
        return self

    def _set_fitted(self, H, n_features):
        self.outcome_matrix_ = H
        self.n_features_in_ = n_features
        self.n_outcomes_ = H.K
        self.coef_ = self.posterior_.mean()
        self.rhat_ = self.posterior_.rhat
        self.converged_ = self.posterior_.converged

    @classmethod
    def from_posterior(cls, posterior, n_outcomes, **params):
        """Wrap previously stored draws as a fitted estimator."""
        est = cls(**params)
        est.posterior_ = posterior
        est._set_fitted(build_outcome_matrix(n_outcomes), posterior.draws.shape[-1] - 1)
        return est

    def coef_draws(self):
        check_is_fitted(self, "posterior_")
        return self.posterior_.pooled()

    def _check_X(self, X):
        check_is_fitted(self, "posterior_")
        X = check_array(X, dtype=float, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {X.shape[1]} features, model was fitted with {self.n_features_in_}")
        return X

    def joint_proba_draws(self, X, max_draws=None):
        """Posterior draws of joint probabilities, shape ``(S, n, Q)``."""
        X = self._check_X(X)
        beta = self.coef_draws()
        if max_draws is not None:
            beta = beta[:max_draws]
        psi = beta[:, None, :, 0] + np.einsum("np,sqp->snq", X, beta[:, :, 1:])
        return inverse_mlogit(psi)

    def predict_joint_proba(self, X, chunk=512):
        """Posterior mean probability of each joint response pattern."""
        X = self._check_X(X)
        beta = self.coef_draws()
        total = np.zeros((X.shape[0], self.outcome_matrix_.Q))
        for start in range(0, beta.shape[0], chunk):
            b = beta[start:start + chunk]
            psi = b[:, None, :, 0] + np.einsum("np,sqp->snq", X, b[:, :, 1:])
            total += inverse_mlogit(psi).sum(axis=0)
        return total / beta.shape[0]

    def predict_proba(self, X):
        """Posterior mean marginal success probability of each outcome."""
        return self.predict_joint_proba(X) @ self.outcome_matrix_.rows

    def predict(self, X):
        """Most probable joint response pattern, as ``(n, K)`` binary rows."""
        phi = self.predict_joint_proba(X)
        return self.outcome_matrix_.rows[np.argmax(phi, axis=1)].astype(int)

    def score(self, X, Y):
        """Average log-likelihood per subject at the posterior mean coefficients."""
        X = self._check_X(X)
        Y = np.asarray(Y)
        if Y.ndim == 1:
            Y = Y[:, None]
        cats = encode_response(Y, self.outcome_matrix_)
        psi = self.coef_[:, 0] + X @ self.coef_[:, 1:].T
        return float(log_inverse_mlogit(psi)[np.arange(len(cats)), cats].mean())
