"""Polya-Gamma augmented Gibbs sampler for multinomial logistic regression.

Each sweep visits the free categories in ascending order.  For category ``q``
the other categories enter through the offset
``c_i = log(sum_{m != q} exp(psi_i^m))`` (the pinned reference contributes
``exp(0)``), the augmentation variables are refreshed as
``omega_i ~ PG(1, psi_i^q - c_i)`` and then

    beta^q ~ N(V (X' (kappa + Omega c) + B b), V),   V = (X' Omega X + B)^-1

with ``kappa_i = 1{y_i = q} - 1/2`` and ``B`` the prior precision.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numba
import numpy as np
from scipy import linalg

from .exceptions import ChainError, ValidationError
from .polyagamma import pg1_draw_prepared, pg1_prepare

RHAT_THRESHOLD = 1.10


@dataclass(frozen=True)
class NormalPrior:
    """Independent normal priors per free category.

    ``mean`` has shape ``(Q - 1, P + 1)`` and ``precision`` shape
    ``(Q - 1, P + 1, P + 1)``.
    """

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        prec = np.asarray(self.precision, dtype=float)
        if mean.ndim != 2:
            raise ValidationError("prior mean must be (Q-1, P+1)")
        if prec.shape != mean.shape + (mean.shape[1],):
            raise ValidationError(
                f"prior precision shape {prec.shape} does not match mean shape {mean.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(prec))):
            raise ValidationError("prior hyperparameters must be finite")
        for q, B in enumerate(prec):
            if not np.allclose(B, B.T):
                raise ValidationError(f"prior precision of category {q} is not symmetric")
            try:
                np.linalg.cholesky(B)
            except np.linalg.LinAlgError:
                raise ValidationError(
                    f"prior precision of category {q} is not positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", prec)

    @classmethod
    def default(cls, n_free, width, mean=0.0, precision=1e-2):
        """Diagonal prior with common precision (0.01 unless overridden)."""
        m = np.broadcast_to(np.asarray(mean, dtype=float), (n_free, width)).copy()
        prec = np.asarray(precision, dtype=float)
        if prec.ndim <= 1:
            diag = np.broadcast_to(prec, (width,))
            B = np.broadcast_to(np.diag(diag), (n_free, width, width)).copy()
        else:
            B = np.broadcast_to(prec, (n_free, width, width)).copy()
        return cls(m, B)


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 10_000
    burnin: int = 1_000
    n_chains: int = 2
    seed: int = None

    def __post_init__(self):
        if self.n_iter < 1 or self.burnin < 0 or self.n_chains < 1:
            raise ValidationError(
                f"invalid chain configuration n_iter={self.n_iter}, burnin={self.burnin}, "
                f"n_chains={self.n_chains}")


@dataclass(frozen=True)
class PosteriorSample:
    """Stored draws of the free-category coefficients.

    ``draws`` has shape ``(n_chains, n_iter, Q - 1, P + 1)``; the reference
    category is implicit.
    """

    draws: np.ndarray = field(repr=False)
    config: ChainConfig
    rhat: float = float("nan")
    converged: bool = True
    seeds: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim != 4:
            raise ValidationError("draws must be (chains, iterations, Q-1, P+1)")
        if not np.all(np.isfinite(d)):
            raise ValidationError("posterior draws contain non-finite values")
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def n_iter(self):
        return self.draws.shape[1]

    @property
    def Q(self):
        return self.draws.shape[2] + 1

    def pooled(self):
        """All draws stacked chain after chain, shape ``(S, Q - 1, P + 1)``."""
        return self.draws.reshape((-1,) + self.draws.shape[2:])

    def mean(self):
        return self.pooled().mean(axis=0)

    def to_records(self):
        """Long-format rows ``(chain, iteration, q, p, value)``."""
        c, it, q, p = np.indices(self.draws.shape).reshape(4, -1)
        return np.column_stack([c, it, q, p, self.draws.ravel()])


@numba.njit(cache=True)
def _cholesky_inplace(A):
    # lower Cholesky factor; returns False when A is not positive definite
    d = A.shape[0]
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if not s > 0.0:
            return False
        A[j, j] = math.sqrt(s)
        for i in range(j + 1, d):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for j in range(d):
        for i in range(j):
            A[i, j] = 0.0
    return True


@numba.njit(cache=True)
def _forward(Lf, b):
    d = b.shape[0]
    x = np.empty(d)
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= Lf[i, k] * x[k]
        x[i] = s / Lf[i, i]
    return x


@numba.njit(cache=True)
def _backward(Lf, b):
    # solves L' x = b
    d = b.shape[0]
    x = np.empty(d)
    for i in range(d - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, d):
            s -= Lf[k, i] * x[k]
        x[i] = s / Lf[i, i]
    return x


@numba.njit(cache=True)
def _update_category(q, Xu, sizes, counts, psi, beta, prior_mean, prior_prec, rng, omega,
                     offset):
    # rows of Xu are the distinct design rows; sizes[g] subjects share row g and
    # counts[g, q] of them responded in category q.  The subjects of a row share
    # the same PG tilt, so only the sum of their draws enters the update.
    G, d = Xu.shape
    n_free = psi.shape[1]
    for g in range(G):
        mx = 0.0
        for m in range(n_free):
            if m != q and psi[g, m] > mx:
                mx = psi[g, m]
        acc = math.exp(-mx)
        for m in range(n_free):
            if m != q:
                acc += math.exp(psi[g, m] - mx)
        c = mx + math.log(acc)
        offset[g] = c
        h, fz, p_exp = pg1_prepare(psi[g, q] - c)
        w = 0.0
        for _ in range(sizes[g]):
            w += pg1_draw_prepared(rng, h, fz, p_exp)
        omega[g] = w

    prec = prior_prec[q].copy()
    rhs = prior_prec[q] @ prior_mean[q]
    for g in range(G):
        w = omega[g]
        kappa = counts[g, q] - 0.5 * sizes[g]
        r = kappa + w * offset[g]
        for a in range(d):
            xa = Xu[g, a]
            rhs[a] += xa * r
            wxa = w * xa
            for b in range(a + 1):
                prec[a, b] += wxa * Xu[g, b]
    for a in range(d):
        for b in range(a):
            prec[b, a] = prec[a, b]
    if not _cholesky_inplace(prec):
        return False
    mean = _backward(prec, _forward(prec, rhs))
    eps = np.empty(d)
    for a in range(d):
        eps[a] = rng.standard_normal()
    noise = _backward(prec, eps)
    for a in range(d):
        beta[q, a] = mean[a] + noise[a]
    for g in range(G):
        s = 0.0
        for a in range(d):
            s += Xu[g, a] * beta[q, a]
        psi[g, q] = s
    return True


@numba.njit(cache=True)
def _sweep(Xu, sizes, counts, psi, beta, prior_mean, prior_prec, rng, omega, offset):
    for q in range(beta.shape[0]):
        if not _update_category(q, Xu, sizes, counts, psi, beta, prior_mean, prior_prec, rng,
                                omega, offset):
            return q
    return -1


@numba.njit(cache=True, nogil=True)
def _run_chain(Xu, sizes, counts, beta, prior_mean, prior_prec, burnin, n_iter, rng, out):
    G = Xu.shape[0]
    psi = Xu @ beta.T
    omega = np.empty(G)
    offset = np.empty(G)
    for it in range(burnin + n_iter):
        if _sweep(Xu, sizes, counts, psi, beta, prior_mean, prior_prec, rng, omega,
                  offset) >= 0:
            return it
        if it >= burnin:
            out[it - burnin] = beta
    return -1


def _group_rows(X, cats, Q):
    """Distinct design rows, their multiplicities and per-category counts."""
    Xu, inv, sizes = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    counts = np.zeros((Xu.shape[0], Q), dtype=np.int64)
    np.add.at(counts, (inv, cats), 1)
    return np.ascontiguousarray(Xu), sizes.astype(np.int64), counts


def _check_inputs(X, cats, prior):
    X = np.ascontiguousarray(X, dtype=float)
    cats = np.ascontiguousarray(cats, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("design must be a non-empty 2-D array")
    if not np.all(np.isfinite(X)):
        raise ValidationError("design contains non-finite values")
    if cats.shape != (X.shape[0],):
        raise ValidationError("category vector length does not match design rows")
    n_free, d = prior.mean.shape
    if X.shape[1] != d:
        raise ValidationError(f"design has {X.shape[1]} columns, prior expects {d}")
    if cats.min() < 0 or cats.max() > n_free:
        raise ValidationError("category index out of range for the prior")
    return X, cats


def gibbs_sweep(beta, X, cats, prior, rng):
    """Run one full sweep and return the updated coefficients.

    ``X`` includes the intercept column.  Raises :class:`ChainError` when a
    conditional covariance is numerically singular.
    """
    X, cats = _check_inputs(X, cats, prior)
    beta = np.array(beta, dtype=float)
    Xu, sizes, counts = _group_rows(X, cats, beta.shape[0] + 1)
    psi = Xu @ beta.T
    G = Xu.shape[0]
    failed = _sweep(Xu, sizes, counts, psi, beta, prior.mean, prior.precision, rng,
                    np.empty(G), np.empty(G))
    if failed >= 0:
        raise ChainError(f"posterior precision of category {failed} is not positive definite",
                         iteration=0)
    return beta


def _spawn_generators(seed, n):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children], ss


def run_chains(X, cats, prior, config, init=None, n_jobs=1):
    """Sample the posterior with ``config.n_chains`` independent chains.

    Parameters
    ----------
    X : array, shape (n, P + 1)
        Design including the intercept column.
    cats : array of int, shape (n,)
        Zero-based response categories (``Q - 1`` is the reference).
    prior : NormalPrior
    config : ChainConfig
    init : array, optional
        Starting coefficients; defaults to the prior mean.
    n_jobs : int
        Chains to run concurrently in threads (the kernel releases the GIL).

    Returns
    -------
    PosteriorSample
    """
    X, cats = _check_inputs(X, cats, prior)
    Xu, sizes, counts = _group_rows(X, cats, prior.mean.shape[0] + 1)
    start = prior.mean if init is None else np.asarray(init, dtype=float)
    rngs, ss = _spawn_generators(config.seed, config.n_chains)
    n_free, d = prior.mean.shape
    out = np.empty((config.n_chains, config.n_iter, n_free, d))

    def one(c):
        return _run_chain(Xu, sizes, counts, start.copy(), prior.mean, prior.precision,
                          config.burnin, config.n_iter, rngs[c], out[c])

    if n_jobs == 1 or config.n_chains == 1:
        status = [one(c) for c in range(config.n_chains)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            status = list(pool.map(one, range(config.n_chains)))
    for c, it in enumerate(status):
        if it >= 0:
            raise ChainError(
                f"chain {c}: conditional posterior precision not positive definite at iteration {it}",
                iteration=int(it), chain=c)

    rhat = float("nan")
    converged = True
    if config.n_chains >= 2 and config.n_iter >= 10:
        rhat = gelman_rubin(out)
        converged = bool(rhat < RHAT_THRESHOLD)
        if not converged:
            warnings.warn(f"possible non-convergence: multivariate PSRF {rhat:.3f}",
                          RuntimeWarning, stacklevel=2)
    return PosteriorSample(out, config, rhat, converged, seeds=(ss.entropy,))


def gelman_rubin(chains):
    """Multivariate potential scale reduction factor (Brooks and Gelman).

    Parameters
    ----------
    chains : PosteriorSample or array, shape (m, n, ...)
        ``m >= 2`` chains of ``n >= 10`` draws; trailing axes are flattened
        into one parameter vector.

    Returns
    -------
    float
    """
    draws = chains.draws if isinstance(chains, PosteriorSample) else np.asarray(chains, float)
    if draws.ndim < 2 or draws.shape[0] < 2:
        raise ValidationError("Gelman-Rubin diagnostic needs at least two chains")
    m, n = draws.shape[:2]
    if n < 10:
        raise ValidationError("Gelman-Rubin diagnostic needs at least 10 draws per chain")
    theta = draws.reshape(m, n, -1)
    # drop parameters that are constant across every draw
    keep = np.ptp(theta.reshape(m * n, -1), axis=0) > 0
    if not np.any(keep):
        return 1.0
    theta = theta[:, :, keep]
    means = theta.mean(axis=1)
    centered = theta - means[:, None, :]
    W = np.einsum("mni,mnj->ij", centered, centered) / (m * (n - 1))
    B_over_n = np.atleast_2d(np.cov(means, rowvar=False, ddof=1))
    try:
        lam = linalg.eigh(B_over_n, W, eigvals_only=True)[-1]
    except linalg.LinAlgError:
        lam = np.max(np.real(np.linalg.eigvals(np.linalg.pinv(W) @ B_over_n)))
    return float((n - 1) / n + (m + 1) / m * max(lam, 0.0))
