"""Checkpoint-period planning and discrete-event validation for
platforms with fault prediction."""

from .analysis import (
    ConvergenceError,
    PeriodRecommendation,
    WasteBreakdown,
    beta_lim,
    compose_waste,
    exact_exponential_makespan,
    optimize_period,
    period_daly,
    period_exponential_lambert,
    period_no_pred,
    period_optimal_exponential,
    period_pred,
    period_pred_approx,
    period_rfo,
    period_young,
    prediction_waste_coefficients,
    simple_policy_fault_waste,
    waste_no_prediction,
    waste_simple_policy,
    waste_with_prediction,
)
from .model import (
    DEFAULT_ALPHA,
    SECONDS_PER_DAY,
    SECONDS_PER_YEAR,
    AdmissibleInterval,
    CostParams,
    EventRates,
    PlatformParams,
    PredictorParams,
    admissible_interval,
    derive_rates,
    mu_platform,
    multi_fault_probability,
)
from .search import SearchSpec, best_period, default_grid
from .simulator import (
    HorizonExhaustedError,
    Inexact,
    Periodic,
    PiecewiseTrust,
    Policy,
    RandomTrust,
    SimCounts,
    SimOutcome,
    ThresholdTrust,
    TimeLedger,
    run_optimal_prediction,
    simulate,
    waste_of,
)
from .tracegen import (
    EmpiricalDurations,
    Event,
    EventTrace,
    Exponential,
    UniformMean,
    Weibull,
    empirical_conditional_survival,
    estimate_platform_mtbf,
    gen_false_predictions,
    gen_platform_fault_trace,
    ingest_fta_durations,
    label_predictions,
    merge_events,
    read_trace_csv,
    splitmix64,
    write_trace_csv,
)

__version__ = "0.1.0"
