"""Online detection of driving events from lateral acceleration, and the
fatigue load they accumulate.

A three-state hidden Markov chain (right turn / straight / left turn)
with generalized asymmetric Laplace emissions models the lateral
acceleration signal.  The transition matrix is estimated on the fly by a
forgetting-factor online EM recursion, which yields running expected
turn counts; a rainflow-equivalent crossing model converts turn counts
and turn-extreme statistics into expected fatigue damage.
"""

from .gal import (
    EmissionModel,
    GalFit,
    GalParams,
    bessel_k,
    gal_fit_mle,
    gal_logpdf,
    gal_mean,
    gal_pdf,
    gal_sample,
    gal_var,
)
from .hmm import (
    batch_em,
    empirical_transition_matrix,
    filter_init,
    filter_step,
    loglik,
    retrospective_kernel,
    validate_transition_matrix,
    viterbi,
)
from .online import (
    ForgettingPolicy,
    OnlineHmmEstimator,
    OnlineRunResult,
    event_rate,
    gamma_from_rk,
    resolve_gamma,
    stationary_distribution,
)
from .damage import (
    TailModel,
    damage_intensity,
    empirical_tails,
    fit_rayleigh_tails,
    frame_damage,
    interval_upcross_count,
    lt_to_rt_prob,
    osc_intensity,
    per_turn_damage,
    pm_damage,
    rainflow_count,
    reduce_load,
    solve_p2,
    turn_chain_from_q,
    turn_extremes,
    turning_points,
)
from .simulate import (
    CITY_TRANSITIONS,
    HIGHWAY_TRANSITIONS,
    LATERAL_EMISSIONS,
    SimResult,
    TurnEvent,
    benchmark_journey,
    simulate_chain,
    simulate_observations,
    simulate_regime,
    turn_counts,
    turn_events,
)
from .io import (
    RunConfig,
    load_snapshot,
    save_snapshot,
    stream_signal,
    write_signal_csv,
)

__version__ = "0.1.0"

__all__ = [
    "EmissionModel",
    "GalFit",
    "GalParams",
    "bessel_k",
    "gal_fit_mle",
    "gal_logpdf",
    "gal_mean",
    "gal_pdf",
    "gal_sample",
    "gal_var",
    "batch_em",
    "empirical_transition_matrix",
    "filter_init",
    "filter_step",
    "loglik",
    "retrospective_kernel",
    "validate_transition_matrix",
    "viterbi",
    "ForgettingPolicy",
    "OnlineHmmEstimator",
    "OnlineRunResult",
    "event_rate",
    "gamma_from_rk",
    "resolve_gamma",
    "stationary_distribution",
    "TailModel",
    "damage_intensity",
    "empirical_tails",
    "fit_rayleigh_tails",
    "frame_damage",
    "interval_upcross_count",
    "lt_to_rt_prob",
    "osc_intensity",
    "per_turn_damage",
    "pm_damage",
    "rainflow_count",
    "reduce_load",
    "solve_p2",
    "turn_chain_from_q",
    "turn_extremes",
    "turning_points",
    "CITY_TRANSITIONS",
    "HIGHWAY_TRANSITIONS",
    "LATERAL_EMISSIONS",
    "SimResult",
    "TurnEvent",
    "benchmark_journey",
    "simulate_chain",
    "simulate_observations",
    "simulate_regime",
    "turn_counts",
    "turn_events",
    "RunConfig",
    "load_snapshot",
    "save_snapshot",
    "stream_signal",
    "write_signal_csv",
    "__version__",
]
