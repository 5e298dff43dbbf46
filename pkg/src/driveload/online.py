"""Streaming transition-matrix estimation with forgetting.

The estimator consumes one observation at a time and maintains: the filter
distribution phi, a pairwise-count tensor rho (expected transition counts
conditioned on the current state, normalized per sample), the running
transition estimate Q, and cumulative expected state-entry counts eta.
Per-step cost is O(m^4) and independent of stream length, so arbitrarily
long records can be processed with constant memory.

Forgetting policies trade tracking speed against variance:

- decaying weights 1/t^alpha converge on stationary data but respond
  sluggishly after a regime change;
- a fixed weight gamma tracks regime switches at bounded variance;
- the fixed weight can be derived from a retention target (R, K): the most
  recent K+1 samples hold total weight R;
- the per-state variant scales gamma by the average occupancy of the
  destination state so that rarely visited states forget more slowly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .gal import EmissionModel
from .hmm import _absorb_row, _prior_vector, validate_transition_matrix

__all__ = [
    "ForgettingPolicy",
    "gamma_from_rk",
    "resolve_gamma",
    "stationary_distribution",
    "event_rate",
    "OnlineRunResult",
    "OnlineHmmEstimator",
]

GAMMA_FLOOR = _kernels.GAMMA_FLOOR


def gamma_from_rk(r: float, k: int) -> float:
    """Fixed forgetting weight holding total weight ``r`` on the last
    ``k + 1`` samples: gamma solves sum_{i=0..k} gamma (1-gamma)^i = r."""
    if not 0 < r < 1:
        raise ValueError(f"retention r must lie in (0, 1), got {r!r}")
    if k < 1:
        raise ValueError(f"window k must be >= 1, got {k!r}")
    return 1.0 - (1.0 - r) ** (1.0 / (k + 1))


@dataclass(frozen=True)
class ForgettingPolicy:
    """Forgetting schedule; build via the class methods."""

    kind: str
    gamma: float | None = None
    alpha: float | None = None
    r: float | None = None
    k: int | None = None

    @classmethod
    def decaying(cls, alpha: float = 0.9) -> "ForgettingPolicy":
        if not 0.5 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0.5, 1], got {alpha!r}")
        return cls(kind="decaying", alpha=alpha)

    @classmethod
    def fixed(cls, gamma: float) -> "ForgettingPolicy":
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
        return cls(kind="fixed", gamma=gamma)

    @classmethod
    def from_rk(cls, r: float, k: int) -> "ForgettingPolicy":
        return cls(kind="fixed_rk", gamma=gamma_from_rk(r, k), r=r, k=k)

    @classmethod
    def per_state(cls, gamma: float) -> "ForgettingPolicy":
        if not 0 < gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
        return cls(kind="per_state", gamma=gamma)

    def label(self) -> str:
        if self.kind == "decaying":
            return f"decaying({self.alpha:g})"
        if self.kind == "fixed_rk":
            return f"fixed_rk({self.r:g},{self.k})"
        return f"{self.kind}({self.gamma:g})"

    def _kernel_args(self) -> tuple[int, float, float]:
        if self.kind == "decaying":
            return _kernels.POLICY_DECAYING, 0.0, float(self.alpha)
        if self.kind in ("fixed", "fixed_rk"):
            return _kernels.POLICY_FIXED, float(self.gamma), 0.0
        if self.kind == "per_state":
            return _kernels.POLICY_PER_STATE, float(self.gamma), 0.0
        raise ValueError(f"unknown policy kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for f in ("gamma", "alpha", "r", "k"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForgettingPolicy":
        kind = d.get("kind")
        if kind == "decaying":
            return cls.decaying(d["alpha"])
        if kind == "fixed":
            return cls.fixed(d["gamma"])
        if kind == "fixed_rk":
            return cls.from_rk(d["r"], d["k"])
        if kind == "per_state":
            return cls.per_state(d["gamma"])
        raise ValueError(f"unknown policy kind {kind!r}")


def resolve_gamma(policy: ForgettingPolicy, t: int, m: int, pi_bar=None) -> np.ndarray:
    """Per-destination-state forgetting weights for (1-based) step ``t``."""
    if t < 1:
        raise ValueError("step index t is 1-based")
    if policy.kind == "decaying":
        return np.full(m, float(t) ** (-policy.alpha))
    if policy.kind in ("fixed", "fixed_rk"):
        return np.full(m, policy.gamma)
    if policy.kind == "per_state":
        if pi_bar is None:
            raise ValueError("per-state policy needs the averaged occupancy pi_bar")
        return np.clip(policy.gamma * np.asarray(pi_bar, dtype=float), GAMMA_FLOOR, 1.0)
    raise ValueError(f"unknown policy kind {policy.kind!r}")


def stationary_distribution(q) -> np.ndarray:
    """Stationary row vector pi with pi Q = pi, sum(pi) = 1.

    For reducible or otherwise degenerate chains the minimum-norm least
    squares solution is returned with a non-uniqueness warning.
    """
    q = validate_transition_matrix(q)
    m = q.shape[0]
    A = q.T - np.eye(m)
    sv = np.linalg.svd(A, compute_uv=False)
    unique = sv[m - 2] > 1e-10 * max(1.0, sv[0]) if m >= 2 else True
    B = A.copy()
    B[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    if unique:
        pi = np.linalg.solve(B, b)
    else:
        warnings.warn("stationary distribution is not unique; returning a least-squares representative", stacklevel=2)
        pi = np.linalg.lstsq(B, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    s = pi.sum()
    if s <= 0:
        return np.full(m, 1.0 / m)
    return pi / s


def event_rate(q, pi=None) -> np.ndarray:
    """Expected entries into each state per sample: sum_{j!=i} pi_j q(j,i)."""
    q = np.asarray(q, dtype=float)
    if pi is None:
        pi = stationary_distribution(q)
    pi = np.asarray(pi, dtype=float)
    return pi @ q - pi * np.diag(q)


@dataclass
class OnlineRunResult:
    """Per-step trajectories recorded by ``OnlineHmmEstimator.run``."""

    diag: np.ndarray  # (T, m) transition-diagonal after each step
    eta: np.ndarray  # (T, m) cumulative expected entries after each step


class OnlineHmmEstimator:
    """Online EM for the transition matrix of a hidden Markov chain.

    The very first observation of a stream initializes the filter against
    the prior without a transition; every later observation advances the
    chain one step and updates the pairwise-count statistics.

    Parameters
    ----------
    em : EmissionModel
        Fixed per-state emission laws.
    policy : ForgettingPolicy
        Forgetting schedule for the pairwise-count updates.
    q0 : array, optional
        Starting transition matrix; default has 0.9 on the diagonal.
    pi0 : array, optional
        Prior state distribution; uniform by default.
    burn_in : int
        Number of leading observations during which Q stays frozen.
    """

    SNAPSHOT_VERSION = 1

    def __init__(
        self,
        em: EmissionModel,
        policy: ForgettingPolicy,
        q0=None,
        pi0=None,
        burn_in: int = 50,
    ):
        m = em.m
        if q0 is None:
            q0 = np.full((m, m), 0.1 / (m - 1) if m > 1 else 0.0)
            np.fill_diagonal(q0, 0.9 if m > 1 else 1.0)
        if burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        self.em = em
        self.policy = policy
        self.burn_in = int(burn_in)
        self.q = validate_transition_matrix(q0).copy()
        self.phi = _prior_vector(m, pi0)
        self.rho = np.zeros((m, m, m))
        self.eta = np.zeros(m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.pi_bar = stationary_distribution(self.q)
        self.pi_cur = self.pi_bar.copy()
        self.t = 0
        self.counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)

    @property
    def m(self) -> int:
        return self.em.m

    def step(self, y: float) -> None:
        """Absorb a single observation."""
        self.run(np.array([float(y)]))

    def run(self, y, record: bool = False) -> OnlineRunResult | None:
        """Absorb a block of observations in stream order.

        With ``record=True`` the per-step transition diagonal and
        cumulative expected entry counts are returned.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        T = y.size
        if T == 0:
            return OnlineRunResult(np.empty((0, self.m)), np.empty((0, self.m))) if record else None
        ld = self.em.logdens(y)
        return self.run_logdens(ld, record=record)

    def run_logdens(self, logdens: np.ndarray, record: bool = False) -> OnlineRunResult | None:
        """Same as ``run`` but on precomputed per-state log densities."""
        logdens = np.ascontiguousarray(logdens, dtype=float)
        T, m = logdens.shape
        if m != self.m:
            raise ValueError("logdens has wrong state dimension")
        first = None
        if self.t == 0 and T > 0:
            # very first observation: weighted against the prior, no transition
            phi, degenerate = _absorb_row(self.phi, logdens[0])
            if degenerate:
                self.counters[_kernels.C_DEGENERATE_OBS] += 1
            self.phi[:] = phi
            self.t = 1
            first = (np.diag(self.q).copy(), self.eta.copy())
            logdens = logdens[1:]
        n = logdens.shape[0]
        kind, g_base, alpha = self.policy._kernel_args()
        diag_out = np.empty((n, m))
        eta_out = np.empty((n, m))
        if n:
            _kernels.stream_kernel(
                logdens,
                self.q,
                self.phi,
                self.rho,
                self.eta,
                self.pi_bar,
                self.pi_cur,
                self.t - 1,
                self.burn_in,
                kind,
                g_base,
                alpha,
                1,
                diag_out,
                eta_out,
                self.counters,
            )
            self.t += n
        if record:
            if first is not None:
                diag_out = np.vstack([first[0][None, :], diag_out])
                eta_out = np.vstack([first[1][None, :], eta_out])
            return OnlineRunResult(diag=diag_out, eta=eta_out)
        return None

    def pairwise_counts(self) -> np.ndarray:
        """Current normalized expected transition counts S(i, j)."""
        return np.einsum("ijk,k->ij", self.rho, self.phi)

    # -- persistence ----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "version": self.SNAPSHOT_VERSION,
            "t": int(self.t),
            "burn_in": self.burn_in,
            "policy": self.policy.to_dict(),
            "emissions": [
                {"delta": p.delta, "mu": p.mu, "nu": p.nu, "sigma": p.sigma}
                for p in self.em.states
            ],
            "q": self.q.tolist(),
            "phi": self.phi.tolist(),
            "rho": self.rho.tolist(),
            "eta": self.eta.tolist(),
            "pi_bar": self.pi_bar.tolist(),
            "pi_cur": self.pi_cur.tolist(),
            "counters": self.counters.tolist(),
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "OnlineHmmEstimator":
        from .gal import GalParams

        if d.get("version") != cls.SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {d.get('version')!r}")
        em = EmissionModel([GalParams(**p) for p in d["emissions"]])
        est = cls(
            em,
            ForgettingPolicy.from_dict(d["policy"]),
            q0=np.asarray(d["q"], dtype=float),
            burn_in=d["burn_in"],
        )
        est.phi = np.asarray(d["phi"], dtype=float)
        est.rho = np.asarray(d["rho"], dtype=float)
        est.eta = np.asarray(d["eta"], dtype=float)
        est.pi_bar = np.asarray(d["pi_bar"], dtype=float)
        est.pi_cur = np.asarray(d["pi_cur"], dtype=float)
        est.t = int(d["t"])
        est.counters = np.asarray(d["counters"], dtype=np.int64)
        return est
