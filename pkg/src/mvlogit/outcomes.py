"""Joint-response encoding and the multinomial logistic link.

``K`` binary outcomes are represented by ``Q = 2**K`` mutually exclusive
response categories.  Category indices are zero based throughout the package:
index 0 is the all-success pattern and index ``Q - 1`` is the all-failure
pattern, whose regression coefficients are pinned at zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConfigurationError, ValidationError

MAX_OUTCOMES = 10


@dataclass(frozen=True)
class OutcomeMatrix:
    """The ``Q x K`` matrix of joint response patterns.

    Row ``j`` is the binary expansion of ``Q - 1 - j`` with the first outcome
    as the most significant bit, so rows run from all ones to all zeros.
    """

    rows: np.ndarray = field(repr=False)

    @property
    def K(self):
        return self.rows.shape[1]

    @property
    def Q(self):
        return self.rows.shape[0]

    def encode(self, y):
        return encode_response(y, self)

    def decode(self, q):
        return decode_category(q, self)

    def success_mask(self, k):
        """Boolean selector of the categories with a success on outcome ``k``."""
        return self.rows[:, k] == 1

    def labels(self):
        return ["".join(str(v) for v in row) for row in self.rows]


def build_outcome_matrix(K):
    """Enumerate the ``2**K`` joint response patterns of ``K`` binary outcomes."""
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)):
        raise ConfigurationError(f"outcome count must be an integer, got {K!r}")
    if not 1 <= K <= MAX_OUTCOMES:
        raise ConfigurationError(
            f"outcome count must lie in [1, {MAX_OUTCOMES}], got {K}")
    Q = 2 ** int(K)
    codes = Q - 1 - np.arange(Q)
    shifts = np.arange(K - 1, -1, -1)
    rows = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    rows.setflags(write=False)
    return OutcomeMatrix(rows)


def _as_binary(y, K):
    arr = np.asarray(y)
    if arr.ndim == 0 or arr.shape[-1] != K:
        raise ValidationError(f"response must have trailing length {K}, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("response entries must be 0 or 1")
    return arr.astype(np.int64)


def encode_response(y, H):
    """Map binary response vector(s) to category indices.

    Accepts a single length-``K`` vector (returns an int) or an ``(n, K)``
    array (returns an integer array of length ``n``).
    """
    arr = _as_binary(y, H.K)
    weights = 1 << np.arange(H.K - 1, -1, -1)
    codes = arr @ weights
    idx = H.Q - 1 - codes
    if np.ndim(idx) == 0:
        return int(idx)
    return idx


def decode_category(q, H):
    """Inverse of :func:`encode_response`."""
    q_arr = np.asarray(q)
    if not np.issubdtype(q_arr.dtype, np.integer):
        raise ValidationError("category index must be an integer")
    if np.any((q_arr < 0) | (q_arr >= H.Q)):
        raise ValidationError(f"category index out of range [0, {H.Q})")
    return H.rows[q_arr].copy()


def linear_predictors(beta, x):
    """Linear predictors ``psi`` of the ``Q - 1`` free categories.

    Parameters
    ----------
    beta : array, shape (Q - 1, P + 1)
        Coefficients; column 0 is the intercept.
    x : array, shape (P,) or (n, P)
        Design row(s) without the leading one.

    Returns
    -------
    psi : array, shape (Q - 1,) or (n, Q - 1)
    """
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    if beta.ndim != 2:
        raise ValidationError("beta must be a 2-D (Q-1, P+1) array")
    P = beta.shape[1] - 1
    if x.ndim == 0 or x.shape[-1] != P:
        raise ValidationError(
            f"design width {x.shape[-1] if x.ndim else 0} does not match beta width {P}")
    return beta[:, 0] + x @ beta[:, 1:].T


def inverse_mlogit(psi):
    """Joint response probabilities from linear predictors.

    Works on the trailing axis; the reference category gets an implicit
    predictor of zero and is appended last.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 0:
        raise ValidationError("psi must be at least 1-D")
    if not np.all(np.isfinite(psi)):
        raise ValidationError("linear predictors must be finite")
    full = np.concatenate([psi, np.zeros(psi.shape[:-1] + (1,))], axis=-1)
    full -= full.max(axis=-1, keepdims=True)
    np.exp(full, out=full)
    full /= full.sum(axis=-1, keepdims=True)
    return full


def log_inverse_mlogit(psi):
    """Log of :func:`inverse_mlogit`, accurate in the tails."""
    psi = np.asarray(psi, dtype=float)
    full = np.concatenate([psi, np.zeros(psi.shape[:-1] + (1,))], axis=-1)
    return full - logsumexp(full, axis=-1, keepdims=True)


def log_likelihood(beta, X, Y, H=None):
    """Multinomial log-likelihood of binary responses ``Y`` given design ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y))
    if X.shape[0] == 0:
        raise ValidationError("data must contain at least one subject")
    if X.shape[0] != Y.shape[0]:
        raise ValidationError("design and response row counts differ")
    if H is None:
        H = build_outcome_matrix(Y.shape[1])
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != H.Q - 1:
        raise ValidationError(f"beta has {beta.shape[0]} rows, expected {H.Q - 1}")
    cats = encode_response(Y, H)
    logphi = log_inverse_mlogit(linear_predictors(beta, X))
    return float(logphi[np.arange(len(cats)), cats].sum())


@dataclass(frozen=True)
class TrialDataset:
    """Binary multivariate responses of a two-arm trial.

    ``covariates`` are on the model scale; when they were standardized,
    ``standardization`` holds one ``(center, scale)`` pair per covariate.
    """

    y: np.ndarray
    treatment: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()
    outcome_names: tuple = ()
    standardization: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        t = np.asarray(self.treatment)
        z = np.asarray(self.covariates, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if y.ndim != 2 or y.shape[0] == 0:
            raise ValidationError("responses must be a non-empty (n, K) array")
        if not np.all((y == 0) | (y == 1)):
            raise ValidationError("responses must be coded 0/1")
        if t.shape != (y.shape[0],) or not np.all((t == 0) | (t == 1)):
            raise ValidationError("treatment must be a length-n 0/1 vector")
        if z.shape[0] != y.shape[0]:
            raise ValidationError("covariate and response row counts differ")
        if not np.all(np.isfinite(z)):
            raise ValidationError("covariates must be finite")
        object.__setattr__(self, "y", y.astype(np.int8))
        object.__setattr__(self, "treatment", t.astype(np.int8))
        object.__setattr__(self, "covariates", z)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def K(self):
        return self.y.shape[1]

    def arm_counts(self):
        return {0: int(np.sum(self.treatment == 0)), 1: int(np.sum(self.treatment == 1))}

    def subset(self, mask):
        mask = np.asarray(mask, dtype=bool)
        return TrialDataset(self.y[mask], self.treatment[mask], self.covariates[mask],
                            self.covariate_names, self.outcome_names, self.standardization)
