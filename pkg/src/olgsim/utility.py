"""Regularized CRRA utility with marginal and inverse-marginal maps.

The utility is ``x**(1-gamma) / (1-gamma)`` (``log x`` for gamma = 1)
for ``x >= eps`` and a concave quadratic below the threshold, chosen so
that value and slope match at the knot.  This keeps utility and
marginal utility finite on the whole real line, which the Monte Carlo
solvers rely on: intermediate iterates can produce wealth or
consumption below the CRRA domain without blowing up.

A bound constant ``kappa`` is computed numerically at construction.  It
dominates the sampled sup of the inverse marginal and the sampled
Lipschitz constants of the marginal and its inverse, and serves as the
upper clamp for consumption.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError

__all__ = [
    "UtilitySpec",
    "utility_eval",
    "marginal_utility",
    "inverse_marginal",
]

# Range of consumption values over which the bound constant is probed.
_KAPPA_X_MAX = 1.0e7
_KAPPA_GRID_SIZE = 2001


@dataclass(frozen=True)
class UtilitySpec:
    """CRRA utility with a concave quadratic branch below ``eps``."""

    gamma: float
    eps: float = 1e-3
    p: float = 2.0
    # Quadratic-branch coefficients u(x) = q2*x^2 + q1*x + q0 for x < eps,
    # and the numeric bound constant; all derived in __post_init__.
    q2: float = field(init=False, repr=False)
    q1: float = field(init=False, repr=False)
    q0: float = field(init=False, repr=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps}")
        if not self.p >= 1:
            raise ConfigurationError(f"p must be >= 1, got {self.p}")
        eps, gamma, p = self.eps, self.gamma, self.p
        q2 = -0.5 * eps ** (-p)
        q1 = eps ** (-gamma) + eps ** (1.0 - p)
        # Continuity of value at the knot; slope continuity holds by
        # construction: 2*q2*eps + q1 = eps**(-gamma).
        q0 = self._crra(eps) - q2 * eps**2 - q1 * eps
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "kappa", self._compute_kappa())

    # -- CRRA branch -------------------------------------------------

    def _crra(self, x):
        if self.gamma == 1.0:
            return np.log(x)
        return np.power(x, 1.0 - self.gamma) / (1.0 - self.gamma)

    # -- public maps -------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            crra = self._crra(np.maximum(x, self.eps))
        quad = self.q2 * x**2 + self.q1 * x + self.q0
        out = np.where(x >= self.eps, crra, quad)
        return out if out.ndim else float(out)

    def marginal(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            crra = np.power(np.maximum(x, self.eps), -self.gamma)
        affine = 2.0 * self.q2 * x + self.q1
        out = np.where(x >= self.eps, crra, affine)
        return out if out.ndim else float(out)

    def inverse_marginal(self, y):
        """Inverse of :meth:`marginal`, clamped to ``[0, kappa]``.

        For ``y`` in the CRRA range the inverse is ``y**(-1/gamma)``;
        for larger ``y`` (sub-threshold consumption) the root is found
        by bracketed bisection on ``[0, eps]``.  Arguments are clipped
        below at 0.
        """
        y_in = np.asarray(y, dtype=float)
        scalar = y_in.ndim == 0
        yv = np.maximum(np.atleast_1d(y_in), 0.0)
        m_eps = self.eps ** (-self.gamma)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.minimum(np.power(yv, -1.0 / self.gamma), self.kappa)
        sub = yv > m_eps
        if np.any(sub):
            target = yv[sub]
            lo = np.zeros_like(target)
            hi = np.full_like(target, self.eps)
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                high_side = (2.0 * self.q2 * mid + self.q1) > target
                lo = np.where(high_side, mid, lo)
                hi = np.where(high_side, hi, mid)
            out[sub] = 0.5 * (lo + hi)
        np.clip(out, 0.0, self.kappa, out=out)
        return float(out[0]) if scalar else out.reshape(y_in.shape)

    # -- bound constant ----------------------------------------------

    def _compute_kappa(self) -> float:
        eps, gamma = self.eps, self.gamma
        xs = np.geomspace(eps * 1e-3, _KAPPA_X_MAX, _KAPPA_GRID_SIZE)
        xs_full = np.concatenate((np.linspace(-1.0, eps, 201)[:-1], xs))
        with np.errstate(invalid="ignore", divide="ignore"):
            crra = np.power(np.maximum(xs_full, eps), -gamma)
        m = np.where(xs_full >= eps, crra, 2.0 * self.q2 * xs_full + self.q1)
        dm = np.diff(m)
        dx = np.diff(xs_full)
        lip_marginal = float(np.max(np.abs(dm / dx)))
        # Inverse Lipschitz constant over the same sampled range.
        nonflat = np.abs(dm) > 0
        lip_inverse = float(np.max(np.abs(dx[nonflat] / dm[nonflat])))
        sup_inverse = float(xs[-1])
        return max(sup_inverse, lip_marginal, lip_inverse, eps ** (-gamma))


def utility_eval(u: UtilitySpec, x):
    """Evaluate the regularized utility at ``x`` (scalar or array)."""
    return u(x)


def marginal_utility(u: UtilitySpec, x):
    """Evaluate the (globally nonincreasing) marginal utility at ``x``."""
    return u.marginal(x)


def inverse_marginal(u: UtilitySpec, y):
    """Invert the marginal utility; result clamped to ``[0, u.kappa]``."""
    return u.inverse_marginal(y)
