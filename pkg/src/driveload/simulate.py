"""Synthetic lateral-acceleration journeys.

A three-state regime chain (right turn, straight, left turn) drives
conditionally independent generalized asymmetric Laplace emissions.
Presets model an urban grid (frequent turns) and a highway (long straight
stretches); the benchmark journey alternates the two in four equal legs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._kernels import chain_kernel
from .gal import EmissionModel, GalParams

__all__ = [
    "STATE_RT",
    "STATE_SF",
    "STATE_LT",
    "STATE_NAMES",
    "CITY_TRANSITIONS",
    "HIGHWAY_TRANSITIONS",
    "LATERAL_EMISSIONS",
    "TurnEvent",
    "turn_events",
    "turn_counts",
    "simulate_chain",
    "simulate_observations",
    "SimResult",
    "simulate_regime",
    "benchmark_journey",
]

STATE_RT = 0
STATE_SF = 1
STATE_LT = 2
STATE_NAMES = ("RT", "SF", "LT")

CITY_TRANSITIONS = np.array(
    [
        [0.85, 0.10, 0.05],
        [0.025, 0.95, 0.025],
        [0.05, 0.10, 0.85],
    ]
)

HIGHWAY_TRANSITIONS = np.array(
    [
        [0.90, 0.08, 0.02],
        [0.005, 0.99, 0.005],
        [0.02, 0.08, 0.90],
    ]
)

# sharp heavy-shouldered pulses in the turn states, a symmetric
# heavier-tailed hum when driving straight
LATERAL_EMISSIONS = EmissionModel(
    (
        GalParams(delta=-1.0, mu=-0.5, nu=10.0, sigma=0.2),
        GalParams(delta=0.0, mu=0.0, nu=0.5, sigma=1.0),
        GalParams(delta=1.0, mu=0.5, nu=10.0, sigma=0.2),
    )
)

_PRESETS = {"city": CITY_TRANSITIONS, "highway": HIGHWAY_TRANSITIONS}


class TurnEvent(NamedTuple):
    """A maximal run of one turn state; ``stop`` is inclusive."""

    label: str
    start: int
    stop: int


def turn_events(states) -> list[TurnEvent]:
    """Maximal runs of the two turn states, in time order."""
    s = np.asarray(states)
    if s.size == 0:
        return []
    bounds = np.flatnonzero(np.diff(s) != 0) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [s.size])) - 1
    out = []
    for a, b in zip(starts, stops):
        k = s[a]
        if k == STATE_LT:
            out.append(TurnEvent("LT", int(a), int(b)))
        elif k == STATE_RT:
            out.append(TurnEvent("RT", int(a), int(b)))
    return out


def turn_counts(states) -> dict[str, int]:
    ev = turn_events(states)
    return {
        "LT": sum(1 for e in ev if e.label == "LT"),
        "RT": sum(1 for e in ev if e.label == "RT"),
    }


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def simulate_chain(q, n: int, rng, start_state: int = STATE_SF) -> np.ndarray:
    """Sample ``n`` steps of a Markov chain, first state drawn from the
    ``start_state`` row (the start itself is not recorded)."""
    q = np.asarray(q, dtype=float)
    rng = _rng(rng)
    cum = np.cumsum(q, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(n)
    return chain_kernel(cum, start_state, u)


def simulate_observations(states, em: EmissionModel, rng) -> np.ndarray:
    return em.sample(np.asarray(states), _rng(rng))


@dataclass
class SimResult:
    """A simulated journey: hidden states, observations, leg layout."""

    states: np.ndarray
    y: np.ndarray
    segment_names: list[str]
    segment_bounds: np.ndarray  # cumulative end indices, one per leg
    seed: object = None
    events: list[TurnEvent] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.y.size

    def counts(self) -> dict[str, int]:
        return turn_counts(self.states)


def _run_segments(segments, seed, em: EmissionModel, start_state: int) -> SimResult:
    ss = np.random.SeedSequence(seed)
    chain_ss, obs_ss = ss.spawn(2)
    chain_rng = np.random.Generator(np.random.PCG64(chain_ss))
    obs_rng = np.random.Generator(np.random.PCG64(obs_ss))

    names, bounds, parts = [], [], []
    state = start_state
    total = 0
    for name, q, n in segments:
        s = simulate_chain(q, n, chain_rng, start_state=state)
        parts.append(s)
        state = int(s[-1])
        total += n
        names.append(name)
        bounds.append(total)
    states = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    y = simulate_observations(states, em, obs_rng)
    return SimResult(
        states=states,
        y=y,
        segment_names=names,
        segment_bounds=np.asarray(bounds, dtype=np.int64),
        seed=seed,
        events=turn_events(states),
    )


def simulate_regime(regime, n: int, seed=None, em: EmissionModel | None = None) -> SimResult:
    """One homogeneous leg; ``regime`` is "city", "highway", or a matrix."""
    if isinstance(regime, str):
        name, q = regime, _PRESETS[regime]
    else:
        name, q = "custom", np.asarray(regime, dtype=float)
    return _run_segments([(name, q, n)], seed, em or LATERAL_EMISSIONS, STATE_SF)


def benchmark_journey(
    seed=None, leg_length: int = 50_000, em: EmissionModel | None = None
) -> SimResult:
    """The four-leg city/highway/city/highway reference journey."""
    legs = [
        ("city", CITY_TRANSITIONS, leg_length),
        ("highway", HIGHWAY_TRANSITIONS, leg_length),
        ("city", CITY_TRANSITIONS, leg_length),
        ("highway", HIGHWAY_TRANSITIONS, leg_length),
    ]
    return _run_segments(legs, seed, em or LATERAL_EMISSIONS, STATE_SF)
