"""Rainflow fatigue damage and its crossing-intensity prediction.

Two routes to the same quantity live here.  The counting route takes an
actual load record: turning points, rainflow cycles, Palmgren-Miner damage
sum.  The model route never touches the record: a 3-state transition
matrix collapses to a 2-state turn-type chain, turn extremes get a tail
model, and an interval-crossing intensity is integrated into expected
damage per turn event.  The two are tied together by the counting identity
(cycles spanning an interval = completed upcrossings of it), which holds
exactly with the boundary conventions used below.

The reduced load interleaves zeros with signed turn extremes,
``[0, e1, 0, e2, ..., 0]``, one left-turn maximum or right-turn minimum
per event; damage of that record is what the intensity route predicts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "turning_points",
    "rainflow_count",
    "pm_damage",
    "interval_upcross_count",
    "turn_extremes",
    "reduce_load",
    "turn_chain_from_q",
    "lt_to_rt_prob",
    "TailModel",
    "fit_rayleigh_tails",
    "empirical_tails",
    "solve_p2",
    "osc_intensity",
    "damage_intensity",
    "per_turn_damage",
    "frame_damage",
]

LT = "LT"
RT = "RT"


# ---------------------------------------------------------------------------
# counting route


def turning_points(y) -> np.ndarray:
    """Alternating local extrema of a record, endpoints included.

    Plateaus collapse to their first sample.  A constant record has no
    turning points: an empty array is returned with a warning.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        return y.copy()
    keep = np.ones(y.size, dtype=bool)
    keep[1:] = np.diff(y) != 0
    z = y[keep]
    if z.size == 1:
        warnings.warn("constant load has no turning points", stacklevel=2)
        return np.empty(0)
    if z.size == 2:
        return z
    d = np.sign(np.diff(z))
    mask = np.concatenate(([True], d[:-1] != d[1:], [True]))
    return z[mask]


def _range_min_table(a: np.ndarray):
    """Sparse table for O(1) range-minimum queries over ``a``."""
    n = a.size
    levels = max(1, n.bit_length())
    table = [a]
    span = 1
    while 2 * span <= n:
        prev = table[-1]
        table.append(np.minimum(prev[: n - 2 * span + 1], prev[span : n - span + 1]))
        span *= 2
    return table


def _range_min(table, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Minimum of a over [lo, hi] inclusive, elementwise; requires lo <= hi."""
    width = hi - lo + 1
    k = np.frexp(width.astype(float))[1] - 1  # floor(log2(width))
    left = np.empty(lo.size)
    right = np.empty(lo.size)
    for kk in np.unique(k):
        sel = k == kk
        t = table[kk]
        left[sel] = t[lo[sel]]
        right[sel] = t[hi[sel] - (1 << int(kk)) + 1]
    return np.minimum(left, right)


def rainflow_count(y) -> np.ndarray:
    """Rainflow cycles of a record as an (n, 2) array of (min, max) pairs.

    One cycle per cycle-generating top of the turning-point sequence: any
    turning point strictly above its predecessor (so interior maxima plus
    a final ascending point; the first point never generates a cycle).
    The cycle minimum is the larger of the one-sided minima, scanning
    backward until a strictly greater value and forward until a value at
    least as large.  A forward scan that runs off the record leaves that
    side unconstrained and the backward minimum stands alone; a backward
    scan that runs off the record simply takes the minimum of what it saw.
    These conventions make the spanning-cycle count equal the completed
    interval-upcrossing count at every (u, v), exactly.
    """
    tp = turning_points(y)
    n = tp.size
    if n < 2:
        return np.empty((0, 2))
    tops = np.flatnonzero(np.concatenate(([False], tp[1:] > tp[:-1])))
    if tops.size == 0:
        return np.empty((0, 2))

    # previous strictly-greater / next greater-or-equal via monotonic stacks
    prev_gt = np.full(n, -1, dtype=np.int64)
    stack: list[int] = []
    for i in range(n):
        v = tp[i]
        while stack and tp[stack[-1]] <= v:
            stack.pop()
        if stack:
            prev_gt[i] = stack[-1]
        stack.append(i)
    next_geq = np.full(n, n, dtype=np.int64)
    stack = []
    for i in range(n - 1, -1, -1):
        v = tp[i]
        while stack and tp[stack[-1]] < v:
            stack.pop()
        if stack:
            next_geq[i] = stack[-1]
        stack.append(i)

    table = _range_min_table(tp)
    mb = _range_min(table, prev_gt[tops] + 1, tops - 1)
    q = next_geq[tops]
    constrained = q < n
    rfc = mb.copy()
    if np.any(constrained):
        c = np.flatnonzero(constrained)
        mf = _range_min(table, tops[c] + 1, q[c] - 1)
        rfc[c] = np.maximum(mb[c], mf)
    return np.column_stack((rfc, tp[tops]))


def pm_damage(cycles, beta: float, alpha: float = 1.0) -> float:
    """Palmgren-Miner damage sum alpha * sum_i (max_i - min_i)^beta."""
    cycles = np.asarray(cycles, dtype=float)
    if cycles.size == 0:
        return 0.0
    h = cycles[:, 1] - cycles[:, 0]
    if np.any(h < 0):
        raise ValueError("cycle max below cycle min")
    return float(alpha * np.sum(h**beta))


def interval_upcross_count(y, u: float, v: float) -> int:
    """Completed passages of the record from below ``u`` to above ``v``."""
    if not u < v:
        raise ValueError(f"need u < v, got ({u!r}, {v!r})")
    y = np.asarray(y, dtype=float).ravel()
    z = np.where(y > v, 1, np.where(y < u, -1, 0))
    w = z[z != 0]
    if w.size < 2:
        return 0
    return int(np.sum((w[:-1] == -1) & (w[1:] == 1)))


# ---------------------------------------------------------------------------
# turn events and the reduced load


def turn_extremes(y, events) -> np.ndarray:
    """Signed per-event extremes: the maximum over each left-turn event,
    the minimum over each right-turn event, in event order."""
    y = np.asarray(y, dtype=float)
    out = np.empty(len(events))
    for i, (label, start, stop) in enumerate(events):
        seg = y[start : stop + 1]
        if seg.size == 0:
            raise ValueError(f"event {i} has empty span [{start}, {stop}]")
        if label == LT:
            out[i] = seg.max()
        elif label == RT:
            out[i] = seg.min()
        else:
            raise ValueError(f"unknown turn label {label!r}")
    return out


def reduce_load(y, events) -> np.ndarray:
    """Reduced load [0, e1, 0, e2, ..., 0] from a record and its events."""
    e = turn_extremes(y, events)
    out = np.zeros(2 * e.size + 1)
    out[1::2] = e
    return out


# ---------------------------------------------------------------------------
# model route


def turn_chain_from_q(q) -> np.ndarray:
    """Collapse a 3-state transition matrix (RT, straight, LT) to the
    2-state chain of successive turn types (row/col 0 = LT, 1 = RT)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3):
        raise ValueError("turn-chain reduction needs a 3x3 matrix")
    hold = 1.0 - np.diag(q)
    if np.any(hold <= 0):
        raise ValueError("a state with self-transition probability 1 never yields a next turn")
    p_ll = q[2, 1] * q[1, 2] / (hold[1] * hold[2])
    p_rr = q[0, 1] * q[1, 0] / (hold[1] * hold[0])
    return np.array([[p_ll, 1.0 - p_ll], [1.0 - p_rr, p_rr]])


def lt_to_rt_prob(q) -> np.ndarray | float:
    """LT-to-RT turn transition by first-passage decomposition; equals
    1 - P[0, 0] of ``turn_chain_from_q`` identically (useful as a check)."""
    q = np.asarray(q, dtype=float)
    return (q[..., 2, 1] * q[..., 1, 0] / (1.0 - q[..., 1, 1]) + q[..., 2, 0]) / (
        1.0 - q[..., 2, 2]
    )


def _turn_stationary(P: np.ndarray) -> np.ndarray:
    a, b = P[0, 1], P[1, 0]
    if a + b <= 0:
        warnings.warn("degenerate turn chain; assuming balanced turn mix", stacklevel=3)
        return np.array([0.5, 0.5])
    return np.array([b, a]) / (a + b)


@dataclass(frozen=True)
class TailModel:
    """Upper/lower tail laws of turn extremes.

    ``upper_sf(v)`` is P(LT maximum > v) for v >= 0; ``lower_sf(u)`` is
    P(RT minimum < u) for u <= 0.  Both are pinned to 1 at zero.
    """

    kind: str  # "rayleigh" or "empirical"
    s_up: float | None = None
    s_lo: float | None = None
    pos: np.ndarray | None = None  # ascending positive extremes
    neg: np.ndarray | None = None  # ascending negative extremes

    def upper_sf(self, v):
        v = np.asarray(v, dtype=float)
        vv = np.maximum(v, 0.0)
        if self.kind == "rayleigh":
            out = np.exp(-0.5 * (vv / self.s_up) ** 2)
        else:
            out = 1.0 - np.searchsorted(self.pos, vv, side="right") / max(self.pos.size, 1)
            out = np.where(vv == 0.0, 1.0, out)
        return out if out.ndim else float(out)

    def lower_sf(self, u):
        u = np.asarray(u, dtype=float)
        uu = np.minimum(u, 0.0)
        if self.kind == "rayleigh":
            out = np.exp(-0.5 * (uu / self.s_lo) ** 2)
        else:
            out = np.searchsorted(self.neg, uu, side="left") / max(self.neg.size, 1)
            out = np.where(uu == 0.0, 1.0, out)
        return out if out.ndim else float(out)

    def upper_edge(self, eps: float) -> float:
        """Smallest v >= 0 with upper_sf(v) <= eps (support end if bounded)."""
        if self.kind == "rayleigh":
            return self.s_up * math.sqrt(-2.0 * math.log(eps))
        return float(self.pos[-1]) if self.pos.size else 0.0

    def lower_edge(self, eps: float) -> float:
        if self.kind == "rayleigh":
            return -self.s_lo * math.sqrt(-2.0 * math.log(eps))
        return float(self.neg[0]) if self.neg.size else 0.0


def _split_extremes(extremes) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(extremes, dtype=float)
    return np.sort(e[e > 0]), np.sort(e[e < 0])


def fit_rayleigh_tails(extremes, min_count: int = 10) -> TailModel:
    """Method-of-moments Rayleigh tails from signed turn extremes.

    Falls back to the empirical tails (with a warning) when either side
    has fewer than ``min_count`` extremes.
    """
    pos, neg = _split_extremes(extremes)
    if pos.size < min_count or neg.size < min_count:
        warnings.warn(
            f"too few extremes for a Rayleigh fit ({pos.size} up, {neg.size} down); using empirical tails",
            stacklevel=2,
        )
        return empirical_tails(extremes)
    return TailModel(
        kind="rayleigh",
        s_up=math.sqrt(np.mean(pos**2) / 2.0),
        s_lo=math.sqrt(np.mean(neg**2) / 2.0),
    )


def empirical_tails(extremes) -> TailModel:
    pos, neg = _split_extremes(extremes)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("empirical tails need at least one extreme of each sign")
    return TailModel(kind="empirical", pos=pos, neg=neg)


def _p2_grid(P: np.ndarray, SM, Sm):
    """Success probabilities (exceed v before dropping below u) started
    after an LT (p1) or RT (p2) event; vectorized 2x2 Cramer solve.
    ``SM`` = P(M > v), ``Sm`` = P(m >= u), broadcastable grids."""
    Fv = 1.0 - SM
    a11 = 1.0 - P[0, 0] * Fv
    a12 = -P[0, 1] * Sm
    a21 = -P[1, 0] * Fv
    a22 = 1.0 - P[1, 1] * Sm
    det = a11 * a22 - a12 * a21
    b1 = SM * P[0, 0]
    b2 = SM * P[1, 0]
    safe = np.abs(det) > 1e-300
    det = np.where(safe, det, 1.0)
    p1 = np.where(safe, (b1 * a22 - a12 * b2) / det, 0.0)
    p2 = np.where(safe, (a11 * b2 - b1 * a21) / det, 0.0)
    return p1, p2


def solve_p2(P, tails: TailModel, u: float, v: float) -> np.ndarray:
    """Renewal success probabilities [p1, p2] for the interval (u, v):
    starting right after a turn of the given type (1 = LT, 2 = RT), the
    probability that the reduced load exceeds ``v`` strictly before it
    next falls below ``u``."""
    P = np.asarray(P, dtype=float)
    SM = float(tails.upper_sf(v))
    Sm = 1.0 - float(tails.lower_sf(u))
    p1, p2 = _p2_grid(P, SM, Sm)
    return np.array([float(p1), float(p2)])


def osc_intensity(u: float, v: float, P, tails: TailModel, pi_prime=None) -> float:
    """Expected upcrossings of (u, v) per reduced-load step (two steps,
    one zero and one extreme, per turn event)."""
    if u > v:
        raise ValueError(f"need u <= v, got ({u!r}, {v!r})")
    P = np.asarray(P, dtype=float)
    pi = _turn_stationary(P) if pi_prime is None else np.asarray(pi_prime, dtype=float)
    if v < 0:
        return 0.5 * pi[1] * float(tails.lower_sf(u))
    if u > 0:
        return 0.5 * pi[0] * float(tails.upper_sf(v))
    p2 = solve_p2(P, tails, u, v)[1]
    return 0.5 * pi[1] * float(tails.lower_sf(u)) * p2


STEPS_PER_EVENT = 2


def damage_intensity(
    beta: float,
    P,
    tails: TailModel,
    nodes: int = 201,
    tail_eps: float = 1e-12,
) -> float:
    """Expected rainflow damage per turn event.

    Integrates beta (beta-1) (v-u)^(beta-2) against the upcrossing
    intensity over {u < v} by a midpoint tensor rule on the three sign
    regions, with tails truncated where both survival functions fall
    below ``tail_eps``, then converts from per-step to per-event units.
    A truncation remainder exceeding 1% of the accumulated integral is
    flagged as non-integrable for this ``beta``.
    """
    if beta <= 2:
        raise ValueError("damage exponent must exceed 2 for the crossing representation")
    P = np.asarray(P, dtype=float)
    pi = _turn_stationary(P)
    lo = tails.lower_edge(tail_eps)
    hi = tails.upper_edge(tail_eps)
    if lo == 0.0 or hi == 0.0:
        return 0.0

    def midgrid(a, b, n):
        h = (b - a) / n
        return a + (np.arange(n) + 0.5) * h, h

    total = 0.0
    # u < v < 0: every deep right-turn dip recovers through v on its way back
    uu, du = midgrid(lo, 0.0, nodes)
    vv, dv = midgrid(lo, 0.0, nodes)
    U, V = np.meshgrid(uu, vv, indexing="ij")
    W = 0.5 * pi[1] * tails.lower_sf(U) * (V > U)
    total += np.sum((np.maximum(V - U, 0.0)) ** (beta - 2.0) * W) * du * dv

    # u <= 0 <= v: dips below u must recover above v before dipping again
    uu, du = midgrid(lo, 0.0, nodes)
    vv, dv = midgrid(0.0, hi, nodes)
    U, V = np.meshgrid(uu, vv, indexing="ij")
    _, p2 = _p2_grid(P, tails.upper_sf(V), 1.0 - tails.lower_sf(U))
    W = 0.5 * pi[1] * tails.lower_sf(U) * p2
    total += np.sum((V - U) ** (beta - 2.0) * W) * du * dv

    # 0 < u < v: every left-turn peak above v crossed up from a zero below u
    uu, du = midgrid(0.0, hi, nodes)
    vv, dv = midgrid(0.0, hi, nodes)
    U, V = np.meshgrid(uu, vv, indexing="ij")
    W = 0.5 * pi[0] * tails.upper_sf(V) * (V > U)
    total += np.sum((np.maximum(V - U, 0.0)) ** (beta - 2.0) * W) * du * dv

    d = beta * (beta - 1.0) * total
    remainder = (
        beta
        * (beta - 1.0)
        * (float(tails.upper_sf(hi)) + float(tails.lower_sf(lo)))
        * (hi - lo) ** (beta - 1.0)
    )
    if d > 0 and remainder > 0.01 * d:
        warnings.warn(
            f"tail truncation remainder {remainder:.3g} exceeds 1% of the integral; "
            f"damage intensity for beta={beta} may diverge",
            stacklevel=2,
        )
    return STEPS_PER_EVENT * d


def per_turn_damage(q, tails: TailModel, beta: float, nodes: int = 201) -> float:
    """Expected damage per turn under the turn chain implied by ``q``."""
    return damage_intensity(beta, turn_chain_from_q(q), tails, nodes=nodes)


def frame_damage(eta, d) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame expected damage from cumulative expected turn counts.

    ``eta`` holds the cumulative expected number of turn events at each
    frame end (nondecreasing, starting from zero counts before the first
    frame); ``d`` is the per-turn damage, scalar or per frame.  Returns
    (per-frame damage increments, cumulative damage).
    """
    eta = np.asarray(eta, dtype=float)
    increments = np.diff(eta, prepend=0.0)
    if np.any(increments < -1e-9):
        raise ValueError("cumulative expected counts must be nondecreasing")
    d = np.asarray(d, dtype=float)
    if d.ndim not in (0, 1) or (d.ndim == 1 and d.size != eta.size):
        raise ValueError("per-turn damage must be scalar or one value per frame")
    if np.any(d < 0):
        raise ValueError("per-turn damage must be nonnegative")
    delta = np.maximum(increments, 0.0) * d
    return delta, np.cumsum(delta)
