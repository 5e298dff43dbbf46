"""Hidden Markov machinery: filtering, likelihood, EM, Viterbi decoding.

The driving-state process Z_t is a finite Markov chain with transition
matrix Q; observations are emitted per state by an ``EmissionModel``.  The
first observation is absorbed against the prior ``pi0`` directly; every
later observation is preceded by exactly one transition, with the filter
step propagating the state distribution and then absorbing the new
observation's density.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import _kernels
from .gal import EmissionModel

__all__ = [
    "validate_transition_matrix",
    "empirical_transition_matrix",
    "filter_init",
    "filter_step",
    "retrospective_kernel",
    "loglik",
    "batch_em",
    "viterbi",
]

# Surrogate for +inf log densities (emission laws with a pole can report the
# exact limit when an observation lands on it to the last bit).  Far above any
# finite log density, so the filter still sends all mass to the singular
# state, but sums and comparisons stay finite.
LOGDENS_CAP = 1e6


def _finite_logdens(logdens: np.ndarray) -> np.ndarray:
    hit = np.isposinf(logdens)
    if hit.any():
        logdens = np.where(hit, LOGDENS_CAP, logdens)
    return logdens


def validate_transition_matrix(q, atol: float = 1e-9) -> np.ndarray:
    """Return ``q`` as a float array after checking row-stochasticity."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"transition matrix must be square, got {q.shape}")
    if np.any(q < -atol) or np.any(q > 1 + atol):
        raise ValueError("transition probabilities must lie in [0, 1]")
    rows = q.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > atol):
        raise ValueError(f"rows must sum to 1, got sums {rows}")
    return q


def empirical_transition_matrix(states, m: int | None = None) -> np.ndarray:
    """Maximum-likelihood transition matrix from an observed state path.

    States never left (or never visited) get a uniform row so the result
    is always stochastic.
    """
    s = np.asarray(states, dtype=np.int64)
    if s.size < 2:
        raise ValueError("need at least two states to count transitions")
    if m is None:
        m = int(s.max()) + 1
    counts = np.zeros((m, m))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    out = np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), 1.0 / m)
    return out


def _prior_vector(m: int, pi0=None) -> np.ndarray:
    """Normalized prior state distribution; uniform when ``pi0`` is omitted."""
    if pi0 is None:
        return np.full(m, 1.0 / m)
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.shape != (m,) or np.any(pi0 < 0):
        raise ValueError("pi0 must be a nonnegative vector of length m")
    s = pi0.sum()
    if not math.isfinite(s) or s <= 0:
        raise ValueError("pi0 must have positive mass")
    return pi0 / s


def _absorb_row(prior, logdens_row):
    """Weight ``prior`` by exp(logdens_row) and renormalize, in log space.

    Returns (phi, degenerate); a fully degenerate row (zero density in
    every state) comes back as the uniform distribution.  Infinite entries
    (an observation on a density singularity) take all the mass.
    """
    mx = np.max(logdens_row)
    m = prior.size
    if mx == -np.inf:
        return np.full(m, 1.0 / m), True
    if mx == np.inf:
        w = np.where(np.isposinf(logdens_row), prior, 0.0)
    else:
        w = prior * np.exp(logdens_row - mx)
    s = w.sum()
    if s <= 0:
        return np.full(m, 1.0 / m), True
    return w / s, False


def filter_init(em: EmissionModel, y0: float, pi0=None) -> np.ndarray:
    """Filter distribution after the first observation.

    The first observation is judged against the prior directly; transitions
    only enter from the second observation on.  A zero-density first
    observation yields the uniform distribution with a warning.
    """
    prior = _prior_vector(em.m, pi0)
    phi, degenerate = _absorb_row(prior, np.asarray(em.logdens(float(y0)), dtype=float))
    if degenerate:
        warnings.warn("observation has zero density in every state", stacklevel=2)
    return phi

def filter_step(phi, q, logdens) -> np.ndarray:
    """One filter update: predict through ``q``, weight by the new
    observation's per-state log densities, renormalize.

    A fully degenerate observation (all densities zero) yields the uniform
    distribution with a warning.  Infinite densities (an observation on an
    interior singularity) concentrate the mass on the singular states.
    """
    phi = np.asarray(phi, dtype=float)
    q = np.asarray(q, dtype=float)
    logdens = np.asarray(logdens, dtype=float)
    m = phi.size
    pred = phi @ q
    mx = np.max(logdens)
    if mx == -np.inf:
        warnings.warn("all emission densities vanished; filter reset to uniform", stacklevel=2)
        return np.full(m, 1.0 / m)
    if mx == np.inf:
        w = pred * (logdens == np.inf)
        return w / w.sum()
    w = pred * np.exp(logdens - mx)
    s = w.sum()
    if s <= 0:
        warnings.warn("all emission densities vanished; filter reset to uniform", stacklevel=2)
        return np.full(m, 1.0 / m)
    return w / s


def retrospective_kernel(phi, q) -> np.ndarray:
    """Backward-look kernel r(k'|k) = phi(k') q(k', k) / sum_j phi(j) q(j, k).

    Column k is the distribution of the previous state given that the next
    state is k.  Columns with no reachable mass become uniform (warned).
    """
    phi = np.asarray(phi, dtype=float)
    q = np.asarray(q, dtype=float)
    r = phi[:, None] * q
    mass = r.sum(axis=0)
    dead = mass <= 0
    if np.any(dead):
        warnings.warn("unreachable next-state column(s) in retrospective kernel", stacklevel=2)
        r[:, dead] = 1.0 / phi.size
        mass = np.where(dead, 1.0, mass)
    return r / mass


def loglik(y, q, em: EmissionModel, pi0=None) -> float:
    """Log likelihood of observations ``y`` under (q, em, pi0)."""
    q = validate_transition_matrix(q)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    p0 = _prior_vector(q.shape[0], pi0)
    ld = _finite_logdens(em.logdens(y))
    return float(_kernels.forward_loglik_kernel(ld, q, p0))


def _estep(logdens: np.ndarray, q: np.ndarray, p0: np.ndarray):
    """Forward-only E-step: absorb the first observation against the prior,
    then run the filter plus pairwise-count recursion with the 1/t weight
    schedule, which reproduces the exact per-transition-normalized expected
    counts.  Returns (phi_T, rho_T, S)."""
    T, m = logdens.shape
    phi, _ = _absorb_row(p0, logdens[0])
    rho = np.zeros((m, m, m))
    if T > 1:
        # unused outputs; the kernel tracks events only when asked
        diag_out = np.empty((T - 1, m))
        eta_out = np.empty((T - 1, m))
        counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)
        qwork = q.copy()
        _kernels.stream_kernel(
            logdens[1:],
            qwork,
            phi,
            rho,
            np.zeros(m),
            np.full(m, 1.0 / m),
            np.full(m, 1.0 / m),
            0,
            T,  # M-step disabled for a pure E-step pass
            _kernels.POLICY_DECAYING,
            0.0,
            1.0,
            0,
            diag_out,
            eta_out,
            counters,
        )
    S = np.einsum("ijk,k->ij", rho, phi)
    return phi, rho, S


def batch_em(
    y,
    q0,
    em: EmissionModel,
    pi0=None,
    n_iter: int = 20,
) -> list[tuple[np.ndarray, float]]:
    """Estimate the transition matrix by EM with fixed emissions.

    Each iteration runs the forward-only E-step over the whole record and
    renormalizes the expected pairwise counts row-wise.  Returns the full
    iterate trajectory [(Q_0, ll_0), (Q_1, ll_1), ...] including the start.
    """
    q = validate_transition_matrix(q0).copy()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    m = q.shape[0]
    p0 = _prior_vector(m, pi0)
    ld = _finite_logdens(em.logdens(y))
    out = [(q.copy(), float(_kernels.forward_loglik_kernel(ld, q, p0)))]
    for _ in range(n_iter):
        _, _, S = _estep(ld, q, p0)
        rows = S.sum(axis=1, keepdims=True)
        dead = rows[:, 0] <= 0
        if np.any(dead):
            warnings.warn("state(s) with no posterior mass; rows kept", stacklevel=2)
        qn = np.where(dead[:, None], q, S / np.where(rows > 0, rows, 1.0))
        q = qn
        out.append((q.copy(), float(_kernels.forward_loglik_kernel(ld, q, p0))))
    return out


def viterbi(y, q, em: EmissionModel, pi0=None) -> np.ndarray:
    """Most probable state path (0-based indices); ties pick the lower index."""
    q = validate_transition_matrix(q)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    p0 = _prior_vector(q.shape[0], pi0)
    ld = _finite_logdens(em.logdens(y))
    return np.asarray(_kernels.viterbi_kernel(ld, q, p0))
