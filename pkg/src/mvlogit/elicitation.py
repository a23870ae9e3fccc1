"""Prior means of regression coefficients from beliefs about success rates.

Works for two outcomes and the model ``psi = b0 + b1*T + b2*x + b3*x*T``:
beliefs about ``theta`` and the outcome correlation in both arms at a low
and a high covariate value pin down the four coefficients of every free
category exactly.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ElicitationError, UnsupportedScopeError, ValidationError


def elicit_joint_probs(theta, rho):
    """Joint probabilities ``(p11, p10, p01, p00)`` of two binary outcomes.

    Raises :class:`ElicitationError` when the correlation is outside the
    range attainable for the given marginals.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2,):
        raise UnsupportedScopeError("elicitation supports exactly two outcomes")
    t1, t2 = theta
    if not (0 < t1 < 1 and 0 < t2 < 1):
        raise ElicitationError(f"success probabilities must lie in (0, 1), got {theta.tolist()}")
    if not -1 <= rho <= 1:
        raise ElicitationError(f"correlation {rho} outside [-1, 1]")
    p11 = rho * np.sqrt(t1 * (1 - t1) * t2 * (1 - t2)) + t1 * t2
    phi = np.array([p11, t1 - p11, t2 - p11, 1 - t1 - t2 + p11])
    names = ("p11 >= 0", "p10 >= 0 (p11 <= theta1)", "p01 >= 0 (p11 <= theta2)",
             "p00 >= 0 (p11 >= theta1 + theta2 - 1)")
    for v, name in zip(phi, names):
        if v < -1e-12:
            lo = max(0.0, t1 + t2 - 1)
            hi = min(t1, t2)
            sd = np.sqrt(t1 * (1 - t1) * t2 * (1 - t2))
            raise ElicitationError(
                f"correlation {rho} violates {name}; feasible range for theta={theta.tolist()} "
                f"is [{(lo - t1 * t2) / sd:.4f}, {(hi - t1 * t2) / sd:.4f}]")
    return np.clip(phi, 0.0, 1.0)


@dataclass(frozen=True)
class BeliefSet:
    """Beliefs per arm and anchor.

    ``theta[T][a]`` is the pair of success probabilities in arm ``T`` at
    anchor ``a`` (0 = low, 1 = high); ``rho[T][a]`` the matching correlation.
    """

    theta: np.ndarray
    rho: np.ndarray
    anchors: tuple = (-1.0, 1.0)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        rho = np.broadcast_to(np.asarray(self.rho, dtype=float), (2, 2)).copy()
        if theta.shape != (2, 2, 2):
            if theta.ndim == 3 and theta.shape[:2] == (2, 2):
                raise UnsupportedScopeError("elicitation supports exactly two outcomes")
            raise ValidationError("theta must have shape (arm, anchor, outcome) = (2, 2, 2)")
        lo, hi = (float(a) for a in self.anchors)
        if not lo < hi:
            raise ValidationError("anchors must satisfy x_low < x_high")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "anchors", (lo, hi))

    @classmethod
    def from_dict(cls, d):
        """Build from ``{"treatment": {"low": {...}, "high": {...}}, "control": ..., "anchors": [lo, hi]}``.

        Each leaf is ``{"theta": [t1, t2], "rho": r}``.
        """
        theta = np.empty((2, 2, 2))
        rho = np.empty((2, 2))
        for T, arm in enumerate(("control", "treatment")):
            for a, anchor in enumerate(("low", "high")):
                try:
                    leaf = d[arm][anchor]
                    theta[T, a] = leaf["theta"]
                    rho[T, a] = leaf["rho"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValidationError(f"beliefs missing or malformed at {arm}/{anchor}") from exc
        return cls(theta, rho, tuple(d.get("anchors", (-1.0, 1.0))))

    def joint_probs(self):
        """``phi`` per arm and anchor, shape ``(2, 2, 4)``."""
        return np.array([[elicit_joint_probs(self.theta[T, a], self.rho[T, a])
                          for a in range(2)] for T in range(2)])


def elicit_prior_means(beliefs):
    """Coefficients ``(Q - 1, 4)`` (columns: intercept, T, x, x*T) matching the beliefs."""
    phi = beliefs.joint_probs()
    if np.any(phi <= 0):
        raise ElicitationError("beliefs imply a zero joint probability; log-odds undefined")
    psi = np.log(phi[..., :-1] / phi[..., -1:])  # (arm, anchor, Q-1)
    xl, xh = beliefs.anchors
    span = xh - xl
    p0l, p0h = psi[0, 0], psi[0, 1]
    p1l, p1h = psi[1, 0], psi[1, 1]
    b0 = (xh * p0l - xl * p0h) / span
    b1 = (xh * (p1l - p0l) + xl * (p0h - p1h)) / span
    b2 = (p0h - p0l) / span
    b3 = (p1h - p0h - p1l + p0l) / span
    return np.column_stack([b0, b1, b2, b3])
