"""Rainflow cycles, interval upcrossings, and the identity linking them.

Builds a short rough signal, lists its turning points and rainflow
cycles, then demonstrates that the number of cycles spanning an interval
[u, v] equals the number of completed passages from below u to above v,
for every such interval.  That identity is what lets expected damage be
written as an integral over crossing intensities.
"""

import numpy as np

from driveload import interval_upcross_count, pm_damage, rainflow_count, turning_points


def main():
    rng = np.random.default_rng(3)
    y = np.round(np.cumsum(rng.normal(0, 1.0, 40)), 1)
    tp = turning_points(y)
    print(f"signal: {y.size} samples in [{y.min():+.1f}, {y.max():+.1f}]")
    print("turning points:", " ".join(f"{v:+.1f}" for v in tp))

    cycles = rainflow_count(y)
    print(f"\n{cycles.shape[0]} rainflow cycles (min, max, range):")
    for lo, hi in cycles:
        print(f"  {lo:+6.1f}  {hi:+6.1f}   {hi - lo:5.1f}")
    for beta in (3.0, 5.0):
        print(f"damage (beta={beta:.0f}): {pm_damage(cycles, beta):.4g}")

    print("\ncycles spanning (u, v)  vs  completed upcrossings of (u, v):")
    levels = np.linspace(y.min() + 0.3, y.max() - 0.3, 5)
    header = "  u \\ v  " + "".join(f"{v:+6.1f}    " for v in levels)
    print(header)
    for u in levels:
        cells = []
        for v in levels:
            if u >= v:
                cells.append("   .      ")
                continue
            spanning = int(np.sum((cycles[:, 0] < u) & (cycles[:, 1] > v)))
            up = interval_upcross_count(y, u, v)
            mark = "" if spanning == up else " MISMATCH"
            cells.append(f"{spanning:3d} ={up:3d}{mark} ")
        print(f"  {u:+5.1f} " + "".join(cells))


if __name__ == "__main__":
    main()
