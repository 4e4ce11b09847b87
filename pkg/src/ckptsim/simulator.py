"""Discrete-event execution of a checkpointed job against an event trace.

Scheduling conventions
----------------------
Work proceeds in chunks of useful length T - C, each sealed by a regular
checkpoint of cost C; the job also ends with a checkpoint, and a shorter
final chunk is allowed.  A prediction dated t is acted on at t - Cp, the
latest instant a proactive checkpoint of cost Cp can still complete by
the predicted date.  Trusting is only feasible while plain work is in
progress (never during a checkpoint, downtime or recovery); the trust
offset sigma is the predicted date measured from the moment work last
(re)started, i.e. the work a proactive checkpoint would protect, plus Cp.

A trusted proactive checkpoint banks the work done so far and the chunk
then continues with its remaining work and its regular end checkpoint.
Any fault aborts the activity in progress, destroys the work done since
the last completed checkpoint, and costs a downtime D followed by a
recovery R; execution then resumes the chunk plan stored with the
recovered checkpoint.  Faults hitting a checkpoint, downtime or recovery
abort it and restart fault handling from scratch (the pessimistic
convention).

An internal ledger assigns every simulated second to exactly one bucket
(work, completed checkpoints, downtime, recovery, aborted activity) and
the run fails loudly if the buckets do not add up to the makespan.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .analysis import beta_lim, optimize_period
from .model import CostParams, PredictorParams
from .tracegen import KIND_FAULT, KIND_PRED_TRUE, MASK64, EventTrace


class HorizonExhaustedError(RuntimeError):
    """The trace horizon ended before the job completed."""

    def __init__(self, time_reached: float, work_saved: float, t_base: float):
        super().__init__(
            f"trace horizon exhausted at t={time_reached:.0f}s with "
            f"{work_saved:.0f}s of {t_base:.0f}s checkpointed"
        )
        self.time_reached = time_reached
        self.work_saved = work_saved
        self.t_base = t_base


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Periodic:
    """Plain periodic checkpointing; every prediction is ignored."""

    period: float


@dataclass(frozen=True)
class ThresholdTrust:
    """Trust a prediction iff its offset sigma is at least `threshold`."""

    period: float
    threshold: float


@dataclass(frozen=True)
class RandomTrust:
    """Trust each actionable prediction with fixed probability."""

    period: float
    trust_prob: float


@dataclass(frozen=True)
class PiecewiseTrust:
    """Trust probability chosen by the interval of [Cp, T] that sigma
    falls into; `intervals` is a contiguous list of (start, end, prob)."""

    period: float
    intervals: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class Inexact:
    """Same decision rule as ThresholdTrust; named separately because it
    is meant to run against traces with uncertain fault dates."""

    period: float
    threshold: float


Policy = Periodic | ThresholdTrust | RandomTrust | PiecewiseTrust | Inexact


def _validate_policy(policy: Policy, costs: CostParams) -> None:
    t = policy.period
    if t < costs.regular_ckpt:
        raise ValueError("policy period must be >= regular checkpoint cost")
    if isinstance(policy, (ThresholdTrust, Inexact)):
        if not 0.0 <= policy.threshold <= t:
            raise ValueError("threshold must lie in [0, period]")
    elif isinstance(policy, RandomTrust):
        if not 0.0 <= policy.trust_prob <= 1.0:
            raise ValueError("trust_prob must lie in [0, 1]")
    elif isinstance(policy, PiecewiseTrust):
        iv = policy.intervals
        if not iv:
            raise ValueError("intervals must be non-empty")
        cp = costs.proactive_ckpt
        if not math.isclose(iv[0][0], cp, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError("intervals must start at the proactive checkpoint cost")
        if not math.isclose(iv[-1][1], t, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError("intervals must end at the period")
        prev_end = iv[0][0]
        for lo, hi, q in iv:
            if not math.isclose(lo, prev_end, rel_tol=1e-9, abs_tol=1e-9) or hi <= lo:
                raise ValueError("intervals must be contiguous and non-degenerate")
            if not 0.0 <= q <= 1.0:
                raise ValueError("interval probabilities must lie in [0, 1]")
            prev_end = hi


def _trust(policy: Policy, sigma: float, rng: np.random.Generator) -> bool:
    if isinstance(policy, Periodic):
        return False
    if isinstance(policy, (ThresholdTrust, Inexact)):
        return sigma >= policy.threshold
    if isinstance(policy, RandomTrust):
        return rng.random() < policy.trust_prob
    # PiecewiseTrust: sigma beyond the last boundary uses the last interval
    q = policy.intervals[-1][2]
    for lo, hi, prob in policy.intervals:
        if sigma < hi:
            q = prob
            break
    return rng.random() < q


# ---------------------------------------------------------------------------
# Outcome
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimCounts:
    unpredicted_faults_hit: int
    trusted_predictions: int
    ignored_predictions: int
    false_alarms_paid: int
    periodic_ckpts: int
    proactive_ckpts: int
    rollbacks: int


@dataclass(frozen=True)
class TimeLedger:
    """Per-bucket wall-time totals; work_executed includes re-executed
    seconds, of which work_lost were destroyed by faults."""

    work_executed: float
    work_lost: float
    ckpt_regular: float
    ckpt_proactive: float
    downtime: float
    recovery: float
    aborted: float

    def total(self) -> float:
        return (
            self.work_executed
            + self.ckpt_regular
            + self.ckpt_proactive
            + self.downtime
            + self.recovery
            + self.aborted
        )


@dataclass(frozen=True)
class SimOutcome:
    makespan: float
    waste: float
    counts: SimCounts
    ledger: TimeLedger


def waste_of(makespan: float, t_base: float) -> float:
    """Waste fraction (makespan - t_base) / makespan."""
    if makespan < t_base:
        raise ValueError("makespan cannot be below the useful work executed")
    return (makespan - t_base) / makespan


# machine activities
_WORK, _CKPT_REG, _CKPT_PRO, _DOWN, _RECOVER = range(5)
# event priorities: decisions before faults at equal times, so that a
# zero-cost proactive checkpoint can still protect its predicted fault
_PRIO_DECIDE, _PRIO_FAULT = 0, 1


def simulate(
    trace: EventTrace,
    policy: Policy,
    costs: CostParams,
    t_base: float,
    rng_seed: int = 0,
) -> SimOutcome:
    """Run one job of size t_base against a trace under a policy.

    Deterministic given (trace, policy, costs, t_base, rng_seed).  Raises
    HorizonExhaustedError when the trace ends before the job does, so
    truncated runs can never bias waste statistics.
    """
    if t_base <= 0:
        raise ValueError("t_base must be > 0")
    _validate_policy(policy, costs)
    c, cp = costs.regular_ckpt, costs.proactive_ckpt
    d_t, r_t = costs.downtime, costs.recovery
    period = policy.period
    rng = np.random.default_rng(rng_seed & MASK64)

    # (time, priority, seq, pred_time, carries_fault) ; faults use the
    # last two fields as padding so tuples stay comparable
    events: list[tuple[float, int, int, float, bool]] = []
    for seq, ev in enumerate(trace.events):
        if ev.time < trace.job_start:
            continue
        if ev.kind == KIND_FAULT:
            events.append((ev.time, _PRIO_FAULT, seq, 0.0, False))
        else:
            is_true = ev.kind == KIND_PRED_TRUE
            events.append((ev.time - cp, _PRIO_DECIDE, seq, ev.time, is_true))
            if is_true:
                events.append((ev.actual_fault_time, _PRIO_FAULT, seq, 0.0, True))
    heapq.heapify(events)

    now = trace.job_start
    saved = 0.0  # checkpointed work
    at_risk = 0.0  # work since the last completed checkpoint
    chunk_left = min(period - c, t_base)
    resume_chunk_left = chunk_left  # chunk plan stored with the last recovery point
    stretch_start = now
    mode = _WORK
    mode_end = now + chunk_left
    mode_elapsed = 0.0  # time spent in the current non-work activity

    n_unpred = n_trusted = n_ignored = n_false_paid = 0
    n_ckpt_reg = n_ckpt_pro = n_rollbacks = 0
    led_work = led_lost = led_reg = led_pro = led_down = led_rec = led_aborted = 0.0
    makespan = None

    def account(until: float) -> None:
        nonlocal now, at_risk, chunk_left, mode_elapsed, led_work
        dt = until - now
        if dt < 0:
            raise AssertionError("time went backwards")
        if mode == _WORK:
            led_work += dt
            at_risk += dt
            chunk_left -= dt
        else:
            mode_elapsed += dt
        now = until

    while True:
        if now > trace.horizon:
            raise HorizonExhaustedError(now, saved, t_base)
        # stale decisions: predictions whose action point predates the job
        while events and events[0][0] < now:
            _, prio, _, _, _ = heapq.heappop(events)
            if prio != _PRIO_DECIDE:
                raise AssertionError("fault event popped in the past")
            n_ignored += 1
        next_time = events[0][0] if events else math.inf

        if next_time < mode_end:
            account(next_time)
            _, prio, _, pred_time, carries_fault = heapq.heappop(events)
            if prio == _PRIO_FAULT:
                # destroy unsaved work, abort the current activity, go down
                n_rollbacks += 1
                if not carries_fault:
                    n_unpred += 1
                led_lost += at_risk
                at_risk = 0.0
                if mode != _WORK:
                    led_aborted += mode_elapsed
                mode = _DOWN
                mode_end = now + d_t
                mode_elapsed = 0.0
            else:
                if mode == _WORK:
                    sigma = pred_time - stretch_start
                    if _trust(policy, sigma, rng):
                        n_trusted += 1
                        if not carries_fault:
                            n_false_paid += 1
                        mode = _CKPT_PRO
                        mode_end = pred_time  # == now + cp
                        mode_elapsed = 0.0
                    else:
                        n_ignored += 1
                else:
                    n_ignored += 1  # mid-checkpoint/downtime/recovery: cannot act
            continue

        account(mode_end)
        if mode == _WORK:
            mode = _CKPT_REG
            mode_end = now + c
            mode_elapsed = 0.0
        elif mode == _CKPT_REG:
            led_reg += mode_elapsed
            n_ckpt_reg += 1
            saved += at_risk
            at_risk = 0.0
            if saved >= t_base - 1e-9 * max(t_base, 1.0):
                if now > trace.horizon:
                    raise HorizonExhaustedError(now, saved, t_base)
                makespan = now - trace.job_start
                break
            chunk_left = min(period - c, t_base - saved)
            resume_chunk_left = chunk_left
            stretch_start = now
            mode = _WORK
            mode_end = now + chunk_left
        elif mode == _CKPT_PRO:
            led_pro += mode_elapsed
            n_ckpt_pro += 1
            saved += at_risk
            at_risk = 0.0
            resume_chunk_left = chunk_left
            stretch_start = now
            mode = _WORK
            mode_end = now + chunk_left
        elif mode == _DOWN:
            led_down += mode_elapsed
            mode = _RECOVER
            mode_end = now + r_t
            mode_elapsed = 0.0
        else:  # _RECOVER
            led_rec += mode_elapsed
            chunk_left = resume_chunk_left
            stretch_start = now
            mode = _WORK
            mode_end = now + chunk_left

    ledger = TimeLedger(
        work_executed=led_work,
        work_lost=led_lost,
        ckpt_regular=led_reg,
        ckpt_proactive=led_pro,
        downtime=led_down,
        recovery=led_rec,
        aborted=led_aborted,
    )
    tol = 1e-9 * max(makespan, 1.0)
    if abs(ledger.total() - makespan) > tol:
        raise AssertionError("time ledger does not add up to the makespan")
    if abs((ledger.work_executed - ledger.work_lost) - t_base) > tol:
        raise AssertionError("net work does not add up to the job size")

    counts = SimCounts(
        unpredicted_faults_hit=n_unpred,
        trusted_predictions=n_trusted,
        ignored_predictions=n_ignored,
        false_alarms_paid=n_false_paid,
        periodic_ckpts=n_ckpt_reg,
        proactive_ckpts=n_ckpt_pro,
        rollbacks=n_rollbacks,
    )
    return SimOutcome(
        makespan=makespan,
        waste=waste_of(makespan, t_base),
        counts=counts,
        ledger=ledger,
    )


def run_optimal_prediction(
    trace: EventTrace,
    mu: float,
    pred: PredictorParams,
    costs: CostParams,
    t_base: float,
    rng_seed: int = 0,
) -> SimOutcome:
    """Simulate the recommended offset-threshold policy: period from
    optimize_period, trust threshold at the break-even offset Cp/p."""
    rec = optimize_period(mu, pred, costs)
    blim = beta_lim(costs, pred)
    if blim > rec.period:
        # the trust window [Cp/p, T] is empty: never act on predictions
        policy: Policy = Periodic(rec.period)
    else:
        policy = ThresholdTrust(rec.period, blim)
    return simulate(trace, policy, costs, t_base, rng_seed)
