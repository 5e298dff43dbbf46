"""Command-line front end.

Subcommands:

* ``simulate`` writes a synthetic journey as CSV plus a JSON sidecar.
* ``fit-emission`` fits per-state acceleration laws from labeled data.
* ``run-online`` streams a CSV through the online estimator, emitting
  NDJSON records at a configurable stride and a final summary.
* ``damage-report`` turns a labeled record into per-frame expected
  damage next to its rainflow reference values.
* ``compare-baselines`` scores online turn counts against observed and
  Viterbi counts across forgetting policies and replications.

Exit codes: 0 on success, 2 for validation/data errors, 3 for I/O
errors.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
import warnings

import numpy as np

from .damage import (
    fit_rayleigh_tails,
    empirical_tails,
    pm_damage,
    per_turn_damage,
    rainflow_count,
    reduce_load,
    frame_damage,
    turn_extremes,
)
from .gal import gal_fit_mle
from .hmm import empirical_transition_matrix, viterbi
from .io import (
    DataFormatError,
    RunConfig,
    emissions_from_dicts,
    emissions_to_dicts,
    load_snapshot,
    save_snapshot,
    stream_signal,
    write_ndjson,
    write_signal_csv,
)
from .online import ForgettingPolicy, OnlineHmmEstimator, gamma_from_rk
from .simulate import (
    LATERAL_EMISSIONS,
    STATE_LT,
    STATE_RT,
    benchmark_journey,
    simulate_regime,
    turn_counts,
    turn_events,
)

PRESETS = ("paper-journey", "city", "highway")
DEFAULT_POLICIES = ("decaying:0.9", "fixed:0.01", "fixed:0.002", "fixed:0.001")


# ---------------------------------------------------------------------------
# shared plumbing


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    beta = None
    if getattr(args, "beta", None):
        beta = tuple(float(b) for b in args.beta.split(","))
    return cfg.override(
        seed=getattr(args, "seed", None),
        stride=getattr(args, "stride", None),
        frame_size=getattr(args, "frames", None),
        beta=beta,
    )


def _emissions_from_args(args, cfg: RunConfig):
    path = getattr(args, "emissions", None)
    if path:
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}: invalid JSON ({e})") from e
        items = d["emissions"] if isinstance(d, dict) else d
        return emissions_from_dicts(items)
    return cfg.emissions if cfg.emissions is not None else LATERAL_EMISSIONS


def _parse_policy_spec(spec: str) -> ForgettingPolicy:
    parts = spec.strip().split(":")
    name = parts[0]
    try:
        if name == "decaying":
            return ForgettingPolicy.decaying(float(parts[1]) if len(parts) > 1 else 0.9)
        if name == "fixed":
            return ForgettingPolicy.fixed(float(parts[1]))
        if name == "per-state":
            return ForgettingPolicy.per_state(float(parts[1]))
        if name == "rk":
            return ForgettingPolicy.from_rk(float(parts[1]), int(parts[2]))
    except (IndexError, ValueError) as e:
        raise DataFormatError(f"bad policy spec {spec!r}: {e}") from e
    raise DataFormatError(f"unknown policy {name!r}")


def _policy_from_args(args, cfg: RunConfig) -> ForgettingPolicy:
    name = getattr(args, "policy", None)
    rk = getattr(args, "rk", None)
    gamma = getattr(args, "gamma", None)
    if rk:
        try:
            r_s, k_s = rk.split(",")
            gamma = gamma_from_rk(float(r_s), int(k_s))
        except ValueError as e:
            raise DataFormatError(f"bad --rk value {rk!r}: expected R,K") from e
    if name is None:
        if gamma is not None:
            return ForgettingPolicy.fixed(gamma)
        return cfg.policy if cfg.policy is not None else ForgettingPolicy.fixed(0.002)
    if name == "decaying":
        return ForgettingPolicy.decaying(getattr(args, "alpha", None) or 0.9)
    if name == "fixed":
        return ForgettingPolicy.fixed(gamma if gamma is not None else 0.002)
    if name == "per-state":
        return ForgettingPolicy.per_state(gamma if gamma is not None else 0.002)
    raise DataFormatError(f"unknown policy {name!r}")


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _read_labeled(path):
    """Whole labeled record as (t, y, state) arrays."""
    ts, ys, ss = [], [], []
    for chunk in stream_signal(path):
        if chunk.state is None:
            raise DataFormatError(f"{path}: a 'state' column is required here")
        ts.append(chunk.t)
        ys.append(chunk.y)
        ss.append(chunk.state)
    t = np.concatenate(ts) if ts else np.empty(0)
    y = np.concatenate(ys) if ys else np.empty(0)
    s = np.concatenate(ss) if ss else np.empty(0, dtype=np.int64)
    if y.size == 0:
        raise DataFormatError(f"{path}: no data rows")
    return t, y, s


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    seed = cfg.seed if cfg.seed is not None else 0
    n = args.samples
    if n <= 0:
        raise DataFormatError("--samples must be positive")
    em = _emissions_from_args(args, cfg)
    if args.preset == "paper-journey":
        if n % 4:
            raise DataFormatError("paper-journey length must divide into four equal legs")
        sim = benchmark_journey(seed=seed, leg_length=n // 4, em=em)
    else:
        sim = simulate_regime(args.preset, n, seed=seed, em=em)
    write_signal_csv(args.output, sim.y, state=sim.states)
    sidecar = {
        "preset": args.preset,
        "seed": seed,
        "n": int(sim.n),
        "segments": [
            {"name": name, "end": int(end)}
            for name, end in zip(sim.segment_names, sim.segment_bounds)
        ],
        "counts": sim.counts(),
        "emissions": emissions_to_dicts(em),
    }
    with open(str(args.output) + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# fit-emission


def cmd_fit_emission(args) -> int:
    buckets: dict[int, list[np.ndarray]] = {}
    for chunk in stream_signal(args.input):
        if chunk.state is None:
            raise DataFormatError(f"{args.input}: fitting needs a 'state' column")
        for k in np.unique(chunk.state):
            buckets.setdefault(int(k), []).append(chunk.y[chunk.state == k])
    if not buckets:
        raise DataFormatError(f"{args.input}: no data rows")
    m = max(buckets) + 1
    fits = []
    for k in range(m):
        if k not in buckets:
            raise DataFormatError(f"state {k + 1} has no samples; cannot fit its emission law")
        fits.append(gal_fit_mle(np.concatenate(buckets[k])))
    report = {
        "version": 1,
        "emissions": [
            {"delta": f.params.delta, "mu": f.params.mu, "nu": f.params.nu, "sigma": f.params.sigma}
            for f in fits
        ],
        "loglik": [f.loglik for f in fits],
        "converged": [f.converged for f in fits],
        "n_samples": [sum(a.size for a in buckets[k]) for k in range(m)],
    }
    with _open_out(args.output) as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# run-online


def cmd_run_online(args) -> int:
    cfg = _config_from_args(args)
    if args.resume:
        est = load_snapshot(args.resume)
    else:
        est = OnlineHmmEstimator(
            _emissions_from_args(args, cfg),
            _policy_from_args(args, cfg),
            q0=cfg.q0,
            burn_in=cfg.burn_in,
        )
    stride = cfg.stride
    if stride <= 0:
        raise DataFormatError("stride must be positive")
    snap_path = args.snapshot
    if snap_path is None and args.output not in (None, "-"):
        snap_path = str(args.output) + ".snapshot.json"

    n_rows = n_bad = n_slow = 0
    with _open_out(args.output) as out:
        for chunk in stream_signal(args.input):
            n_rows, n_bad = chunk.n_rows, chunk.n_bad
            y = chunk.y
            if chunk.speed is not None:
                keep = chunk.speed >= cfg.speed_threshold
                n_slow += int(np.count_nonzero(~keep))
                y = y[keep]
            if y.size == 0:
                continue
            t0 = est.t
            rec = est.run(y, record=True)
            for s in range((t0 // stride + 1) * stride, est.t + 1, stride):
                i = s - t0 - 1
                write_ndjson(
                    out,
                    {
                        "t": s,
                        "diag": rec.diag[i].tolist(),
                        "eta_lt": rec.eta[i, STATE_LT] if est.m == 3 else None,
                        "eta_rt": rec.eta[i, STATE_RT] if est.m == 3 else None,
                    },
                )
        if snap_path:
            save_snapshot(est, snap_path)
        write_ndjson(
            out,
            {
                "summary": True,
                "t": est.t,
                "eta_lt": est.eta[STATE_LT] if est.m == 3 else None,
                "eta_rt": est.eta[STATE_RT] if est.m == 3 else None,
                "eta": est.eta.tolist(),
                "q": est.q.tolist(),
                "rows_read": n_rows,
                "malformed": n_bad,
                "skipped_slow": n_slow,
                "snapshot": snap_path,
            },
        )
    return 0


# ---------------------------------------------------------------------------
# damage-report


def cmd_damage_report(args) -> int:
    cfg = _config_from_args(args)
    _, y, states = _read_labeled(args.input)
    events = turn_events(states)
    frame_size = cfg.frame_size
    if frame_size <= 0:
        raise DataFormatError("frame size must be positive")
    n_frames = max(1, -(-y.size // frame_size))
    frame_ends = np.minimum((np.arange(n_frames) + 1) * frame_size, y.size)

    totals: dict[str, dict] = {}
    rows: list[list] = []
    if not events:
        warnings.warn("no turn events detected; damage is zero", stacklevel=2)
        for b in cfg.beta:
            totals[str(b)] = {
                "n_turns": 0,
                "d_per_turn": 0.0,
                "expected_total": 0.0,
                "reduced_load_damage": 0.0,
                "total_signal_damage": float(pm_damage(rainflow_count(y), b)),
            }
            for k in range(n_frames):
                rows.append([b, k, int(frame_ends[k]), 0.0, 0.0, 0.0, 0.0, 0.0])
    else:
        extremes = turn_extremes(y, events)
        tails = (
            empirical_tails(extremes)
            if args.tails == "empirical"
            else fit_rayleigh_tails(extremes)
        )
        qhat = empirical_transition_matrix(states, m=3)
        starts = np.array([e.start for e in events])
        eta = np.searchsorted(starts, frame_ends, side="left").astype(float)
        reduced = reduce_load(y, events)
        red_cycles = rainflow_count(reduced)
        sig_cycles = rainflow_count(y)
        for b in cfg.beta:
            d = per_turn_damage(qhat, tails, b)
            delta, cum = frame_damage(eta, d)
            d_eta = np.diff(eta, prepend=0.0)
            for k in range(n_frames):
                rows.append(
                    [b, k, int(frame_ends[k]), eta[k], d_eta[k], d, delta[k], cum[k]]
                )
            totals[str(b)] = {
                "n_turns": len(events),
                "d_per_turn": d,
                "expected_total": float(cum[-1]),
                "reduced_load_damage": float(pm_damage(red_cycles, b)),
                "total_signal_damage": float(pm_damage(sig_cycles, b)),
            }

    header = ["beta", "frame", "t_end", "eta", "delta_eta", "d_per_turn", "delta_d", "cum_d"]
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        if events:
            write_signal_csv(str(args.output) + ".reduced.csv", reduced)
        json.dump({"frames": n_frames, "betas": totals}, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
        json.dump({"frames": n_frames, "betas": totals}, sys.stderr, indent=2, sort_keys=True)
        sys.stderr.write("\n")
    return 0


# ---------------------------------------------------------------------------
# compare-baselines


def _journey_counts(y, states, em, policies):
    obs = turn_counts(states)
    qhat = empirical_transition_matrix(states, m=3)
    path = viterbi(y, qhat, em)
    vit = turn_counts(path)
    ld = em.logdens(y)
    out = {"observed": (obs["LT"], obs["RT"]), "viterbi": (vit["LT"], vit["RT"])}
    for spec, policy in policies:
        est = OnlineHmmEstimator(em, policy)
        est.run_logdens(ld)
        out[spec] = (float(est.eta[STATE_LT]), float(est.eta[STATE_RT]))
    return out


def cmd_compare_baselines(args) -> int:
    cfg = _config_from_args(args)
    em = _emissions_from_args(args, cfg)
    policies = [(s, _parse_policy_spec(s)) for s in args.policies.split(",")]
    seed = cfg.seed if cfg.seed is not None else 0

    results = []
    if args.input:
        _, y, states = _read_labeled(args.input)
        results.append(_journey_counts(y, states, em, policies))
    else:
        for i in range(args.replications):
            sim = benchmark_journey(seed=seed + i)
            results.append(_journey_counts(sim.y, sim.states, em, policies))

    methods = ["observed", "viterbi"] + [s for s, _ in policies]
    obs_lt = np.array([r["observed"][0] for r in results], dtype=float)
    obs_rt = np.array([r["observed"][1] for r in results], dtype=float)

    def std(a):
        return float(np.std(a, ddof=1)) if a.size > 1 else 0.0

    with _open_out(args.output) as fh:
        w = csv.writer(fh)
        w.writerow(
            ["method", "mean_lt", "std_lt", "mean_rt", "std_rt",
             "mean_err_lt", "std_err_lt", "mean_err_rt", "std_err_rt", "rel_err"]
        )
        for name in methods:
            lt = np.array([r[name][0] for r in results], dtype=float)
            rt = np.array([r[name][1] for r in results], dtype=float)
            err_lt = np.abs(lt - obs_lt)
            err_rt = np.abs(rt - obs_rt)
            rel = float(np.mean((err_lt + err_rt) / (obs_lt + obs_rt)))
            w.writerow(
                [
                    name,
                    f"{lt.mean():.6g}", f"{std(lt):.6g}",
                    f"{rt.mean():.6g}", f"{std(rt):.6g}",
                    f"{err_lt.mean():.6g}", f"{std(err_lt):.6g}",
                    f"{err_rt.mean():.6g}", f"{std(err_rt):.6g}",
                    f"{rel:.6g}",
                ]
            )
    return 0


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="driveload",
        description="Online driving-event detection and fatigue-load accumulation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="write a synthetic journey CSV + sidecar")
    sp.add_argument("--output", required=True)
    sp.add_argument("--preset", choices=PRESETS, default="paper-journey")
    sp.add_argument("--samples", type=int, default=200_000)
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--emissions", help="emission parameter JSON (from fit-emission)")
    sp.set_defaults(func=cmd_simulate)

    fp = sub.add_parser("fit-emission", help="fit per-state emission laws from labeled CSV")
    fp.add_argument("input")
    fp.add_argument("--output")
    fp.set_defaults(func=cmd_fit_emission)

    rp = sub.add_parser("run-online", help="stream a CSV through the online estimator")
    rp.add_argument("input")
    rp.add_argument("--output")
    rp.add_argument("--config")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--stride", type=int)
    rp.add_argument("--policy", choices=("decaying", "fixed", "per-state"))
    rp.add_argument("--gamma", type=float)
    rp.add_argument("--alpha", type=float)
    rp.add_argument("--rk", metavar="R,K")
    rp.add_argument("--emissions")
    rp.add_argument("--snapshot", help="write the final estimator state here")
    rp.add_argument("--resume", help="resume from a snapshot file")
    rp.set_defaults(func=cmd_run_online)

    dp = sub.add_parser("damage-report", help="per-frame expected and reference damage")
    dp.add_argument("input")
    dp.add_argument("--output")
    dp.add_argument("--config")
    dp.add_argument("--beta", help="comma-separated damage exponents")
    dp.add_argument("--frames", type=int, help="frame length in samples")
    dp.add_argument("--tails", choices=("rayleigh", "empirical"), default="rayleigh")
    dp.set_defaults(func=cmd_damage_report)

    cp = sub.add_parser("compare-baselines", help="online vs Viterbi vs observed turn counts")
    cp.add_argument("input", nargs="?")
    cp.add_argument("--output")
    cp.add_argument("--config")
    cp.add_argument("--seed", type=int)
    cp.add_argument("--replications", type=int, default=1)
    cp.add_argument("--policies", default=",".join(DEFAULT_POLICIES))
    cp.add_argument("--emissions")
    cp.set_defaults(func=cmd_compare_baselines)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
