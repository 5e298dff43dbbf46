"""Generalized asymmetric Laplace (GAL) distributions for lateral acceleration.

Within a single driving state, lateral-acceleration samples are modeled as
the normal mean-variance mixture

    Y = delta + G * mu + sqrt(G) * sigma * Z,
    G ~ Gamma(shape 1/nu, scale 1),  Z ~ N(0, 1),

whose marginal is a generalized asymmetric Laplace law.  ``mu`` controls
skew, ``nu`` tail weight (larger nu concentrates G near zero and fattens
the tails), ``sigma`` the Gaussian scale, ``delta`` location.  The closed
form density involves the modified Bessel function of the second kind.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "GalParams",
    "GalFit",
    "EmissionModel",
    "bessel_k",
    "gal_logpdf",
    "gal_pdf",
    "gal_mean",
    "gal_var",
    "gal_sample",
    "gal_fit_mle",
]


@dataclass(frozen=True)
class GalParams:
    """Parameter set of a univariate GAL distribution.

    delta : location (signal units)
    mu    : asymmetry (signal units; 0 gives a symmetric law)
    nu    : tail/shape parameter, > 0; the mixing Gamma has shape 1/nu
    sigma : scale of the Gaussian component, > 0
    """

    delta: float
    mu: float
    nu: float
    sigma: float

    def __post_init__(self):
        for name in ("delta", "mu", "nu", "sigma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu!r}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")


def bessel_k(order: float, x) -> np.ndarray | float:
    """Modified Bessel function of the second kind K_order(x), x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_k requires x > 0")
    out = special.kv(order, x)
    if out.ndim == 0:
        return float(out)
    return out


def _log_bessel_k(order: float, x: np.ndarray) -> np.ndarray:
    # kve = kv * exp(x) stays representable far beyond the kv underflow point
    return np.log(special.kve(order, x)) - x


def gal_logpdf(params: GalParams, y) -> np.ndarray | float:
    """Log density of the GAL law at ``y`` (scalar or array).

    The density has an integrable singularity at ``delta`` when nu >= 2;
    there the exact limit (+inf) is returned.  For nu < 2 the finite limit
    of the closed form is used at ``y == delta``.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)

    lam = 1.0 / params.nu - 0.5
    s2 = params.sigma * params.sigma
    c = math.sqrt(2.0 * s2 + params.mu * params.mu)
    a = np.abs(y - params.delta)
    z = a * (c / s2)

    out = np.empty_like(y)
    at_delta = a == 0.0
    reg = ~at_delta
    base = (
        math.log(2.0)
        - math.log(params.sigma)
        - 0.5 * math.log(2.0 * math.pi)
        - special.gammaln(1.0 / params.nu)
    )
    with np.errstate(divide="ignore"):
        out[reg] = (
            base
            + (y[reg] - params.delta) * (params.mu / s2)
            + lam * np.log(a[reg] / c)
            + _log_bessel_k(lam, z[reg])
        )
    if np.any(at_delta):
        if lam > 0:
            lim = (
                special.gammaln(lam)
                + lam * math.log(2.0 * s2 / (c * c))
                - math.log(params.sigma)
                - 0.5 * math.log(2.0 * math.pi)
                - special.gammaln(1.0 / params.nu)
            )
            out[at_delta] = lim
        else:
            out[at_delta] = np.inf
    return float(out[0]) if scalar else out


def gal_pdf(params: GalParams, y) -> np.ndarray | float:
    return np.exp(gal_logpdf(params, y))


def gal_mean(params: GalParams) -> float:
    """E[Y] = delta + mu / nu."""
    return params.delta + params.mu / params.nu


def gal_var(params: GalParams) -> float:
    """Var[Y] = (sigma^2 + mu^2) / nu."""
    return (params.sigma**2 + params.mu**2) / params.nu


def gal_sample(params: GalParams, n: int, rng) -> np.ndarray:
    """Draw ``n`` i.i.d. samples via the Gamma mixture representation."""
    rng = np.random.default_rng(rng)
    g = rng.gamma(1.0 / params.nu, 1.0, size=n)
    z = rng.standard_normal(n)
    return params.delta + g * params.mu + np.sqrt(g) * params.sigma * z


@dataclass(frozen=True)
class GalFit:
    """Result of a maximum-likelihood fit."""

    params: GalParams
    loglik: float
    converged: bool
    n_evals: int


def _neg_loglik(theta: np.ndarray, y: np.ndarray) -> float:
    delta, mu, log_nu, log_sigma = theta
    if abs(log_nu) > 12 or abs(log_sigma) > 12:
        return np.inf
    p = GalParams(delta, mu, math.exp(log_nu), math.exp(log_sigma))
    ll = gal_logpdf(p, y)
    # a sample landing exactly on a singular delta would be +inf; cap it
    ll = np.minimum(ll, 700.0)
    total = float(np.sum(ll))
    return -total if math.isfinite(total) else np.inf


def _moment_init(y: np.ndarray) -> GalParams:
    """Cumulant-matched starting point.

    Excess kurtosis is 3 nu at mu = 0 and skewness is about
    3 mu sqrt(nu) / sigma, which pins nu and mu well enough for the
    simplex to take over; sigma then balances the variance identity
    (sigma^2 + mu^2) / nu = var.
    """
    m1 = float(np.mean(y))
    c = y - m1
    v = float(np.mean(c**2))
    if v <= 0:
        raise ValueError("cannot fit a constant sample")
    g1 = float(np.mean(c**3)) / v**1.5
    g2 = float(np.mean(c**4)) / v**2 - 3.0
    nu0 = min(max(g2 / 3.0, 1e-2), 1e4)
    mu0 = g1 * math.sqrt(v) / 3.0
    s2 = max(v * nu0 - mu0**2, 0.05 * v * nu0)
    return GalParams(m1 - mu0 / nu0, mu0, nu0, math.sqrt(s2))


def gal_fit_mle(y, init: GalParams | None = None, max_evals: int = 500) -> GalFit:
    """Fit GAL parameters by derivative-free likelihood maximization.

    ``nu`` and ``sigma`` are optimized on log scale to keep them
    positive; the start point matches sample cumulants unless ``init``
    is given.  A second simplex run polishes the first if it ran out of
    budget.  The ``converged`` flag reports whether the simplex
    terminated on its own.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 100:
        warnings.warn(
            f"fitting on {y.size} samples; estimates will be unstable",
            stacklevel=2,
        )
    if init is None:
        init = _moment_init(y)
    x0 = np.array(
        [init.delta, init.mu, math.log(init.nu), math.log(init.sigma)]
    )
    opts = {"maxfev": max_evals, "xatol": 1e-6, "fatol": 1e-8}
    res = optimize.minimize(
        _neg_loglik, x0, args=(y,), method="Nelder-Mead", options=opts
    )
    n_evals = int(res.nfev)
    if not res.success:
        res = optimize.minimize(
            _neg_loglik, res.x, args=(y,), method="Nelder-Mead", options=opts
        )
        n_evals += int(res.nfev)
    best = res.x if res.fun <= _neg_loglik(x0, y) else x0
    params = GalParams(best[0], best[1], math.exp(best[2]), math.exp(best[3]))
    return GalFit(
        params=params,
        loglik=-_neg_loglik(best, y),
        converged=bool(res.success),
        n_evals=n_evals,
    )


class EmissionModel:
    """Per-state GAL emission laws for an m-state driving model.

    States are indexed 0..m-1; the canonical three-state layout is
    0 = right turn, 1 = straight, 2 = left turn.
    """

    def __init__(self, states: tuple[GalParams, ...] | list[GalParams]):
        if len(states) == 0:
            raise ValueError("need at least one state")
        self.states = tuple(states)

    @property
    def m(self) -> int:
        return len(self.states)

    def logdens(self, y) -> np.ndarray:
        """Log densities; shape (m,) for scalar y, (len(y), m) for arrays."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            return np.array([gal_logpdf(p, float(y)) for p in self.states])
        out = np.empty((y.size, self.m))
        for k, p in enumerate(self.states):
            out[:, k] = gal_logpdf(p, y)
        return out

    def sample(self, states, rng) -> np.ndarray:
        """One draw per entry of the state-index array ``states``."""
        rng = np.random.default_rng(rng)
        states = np.asarray(states)
        y = np.empty(states.size)
        for k, p in enumerate(self.states):
            idx = np.flatnonzero(states == k)
            if idx.size:
                y[idx] = gal_sample(p, idx.size, rng)
        return y

    def __repr__(self):
        return f"EmissionModel({list(self.states)!r})"
