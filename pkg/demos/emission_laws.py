"""Show the per-state lateral-acceleration laws: moments, samples, shape.

The three driving states carry very different distributions even though
all come from the same four-parameter family: turns sit on sharp plateaus
near +-1 (high nu concentrates the law at its location), while straight
driving is a wide symmetric hum.  Run with no arguments.
"""

import numpy as np

from driveload import GalParams, gal_logpdf, gal_mean, gal_sample, gal_var
from driveload.simulate import LATERAL_EMISSIONS, STATE_NAMES


def describe(name, p: GalParams, rng):
    mean, var = gal_mean(p), gal_var(p)
    draws = gal_sample(p, 200_000, rng)
    print(f"\n{name}: delta={p.delta} mu={p.mu} nu={p.nu} sigma={p.sigma}")
    print(f"  moments     mean={mean:+.4f}  sd={np.sqrt(var):.4f}")
    print(f"  from draws  mean={draws.mean():+.4f}  sd={draws.std():.4f}")
    qs = np.quantile(draws, [0.01, 0.25, 0.5, 0.75, 0.99])
    print("  quantiles   " + "  ".join(f"{q:+.3f}" for q in qs))


def ascii_profile(p: GalParams, lo, hi, cols=61, rows=12):
    """Crude terminal density sketch on a fixed window."""
    x = np.linspace(lo, hi, cols)
    with np.errstate(over="ignore"):
        d = np.exp(np.minimum(gal_logpdf(p, x), 50.0))
    d = d / d.max()
    for level in np.linspace(1.0, 1.0 / rows, rows):
        print("  " + "".join("#" if v >= level - 1e-12 else " " for v in d))
    print(f"  {lo:<+8.2f}{'':{cols - 16}}{hi:>+8.2f}")


def ascii_hist(draws, lo, hi, cols=61, rows=12):
    """Terminal histogram on a log count scale; the laws here put most of
    their mass in one bin, so a linear scale would show a single bar."""
    counts, _ = np.histogram(draws, bins=cols, range=(lo, hi))
    d = np.log1p(counts) / np.log1p(counts.max())
    for level in np.linspace(1.0, 1.0 / rows, rows):
        print("  " + "".join("#" if v >= level - 1e-12 else " " for v in d))
    print(f"  {lo:<+8.2f}{'':{cols - 16}}{hi:>+8.2f}")


def main():
    rng = np.random.default_rng(0)
    for name, p in zip(STATE_NAMES, LATERAL_EMISSIONS.states):
        describe(name, p, rng)
    print("\nStraight-driving density (symmetric, heavy shoulders):")
    ascii_profile(LATERAL_EMISSIONS.states[1], -5.0, 5.0)
    print("\nLeft-turn sample mass, log scale (spike at +1 over a wide shoulder):")
    ascii_hist(gal_sample(LATERAL_EMISSIONS.states[2], 200_000, rng), -0.5, 2.5)


if __name__ == "__main__":
    main()
