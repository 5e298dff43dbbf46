"""Track a regime-switching journey with different forgetting policies.

Simulates the four-leg city/highway benchmark journey, then runs the
streaming estimator once per policy and prints how the estimated
transition diagonal follows the active regime, plus the final expected
turn counts against the simulated truth.  A fixed forgetting factor
keeps adapting forever; the decaying schedule converges to a blend of
both regimes and goes stale after the first switch.
"""

import numpy as np

from driveload import ForgettingPolicy, OnlineHmmEstimator
from driveload.simulate import (
    CITY_TRANSITIONS,
    HIGHWAY_TRANSITIONS,
    LATERAL_EMISSIONS,
    STATE_LT,
    STATE_RT,
    benchmark_journey,
    turn_counts,
)

LEG = 50_000
POLICIES = [
    ForgettingPolicy.fixed(0.002),
    ForgettingPolicy.from_rk(0.9, 1000),
    ForgettingPolicy.decaying(0.9),
]


def main():
    sim = benchmark_journey(seed=11)
    counts = turn_counts(sim.states)
    logdens = LATERAL_EMISSIONS.logdens(sim.y)
    true_diag = {"city": np.diag(CITY_TRANSITIONS), "highway": np.diag(HIGHWAY_TRANSITIONS)}

    print(f"journey: {sim.n} samples, observed turns LT={counts['LT']} RT={counts['RT']}")
    for policy in POLICIES:
        est = OnlineHmmEstimator(LATERAL_EMISSIONS, policy)
        rec = est.run_logdens(logdens, record=True)
        print(f"\npolicy {policy.label()}")
        print("  leg      truth diag           estimate at leg end      L1 gap")
        for i, name in enumerate(("city", "highway", "city", "highway")):
            tail = rec.diag[(i + 1) * LEG - 2000:(i + 1) * LEG].mean(axis=0)
            gap = np.abs(tail - true_diag[name]).sum()
            fmt = lambda v: " ".join(f"{x:.3f}" for x in v)
            print(f"  {name:<8} [{fmt(true_diag[name])}]  [{fmt(tail)}]  {gap:.3f}")
        e_lt, e_rt = est.eta[STATE_LT], est.eta[STATE_RT]
        print(
            f"  expected turns LT={e_lt:7.1f} ({e_lt / counts['LT'] - 1:+.1%})   "
            f"RT={e_rt:7.1f} ({e_rt / counts['RT'] - 1:+.1%})"
        )


if __name__ == "__main__":
    main()
