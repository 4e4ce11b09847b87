"""Failure-trace generation and ingestion.

A platform trace is built in four steps: sample per-unit fault dates over
a fixed horizon (synthetic laws or an empirical availability-interval
distribution), label each fault as predicted or not with probability r,
overlay an independent renewal stream of false predictions with mean
spacing p*mu/(r*(1-p)), and merge everything into one time-ordered event
stream.  All randomness flows from a 64-bit base seed through named
substreams, so identical inputs give byte-identical traces.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma as _gamma

MASK64 = (1 << 64) - 1

# substream tags: one independent generator per randomised pipeline stage
STREAM_FAULTS = 1
STREAM_LABELS = 2
STREAM_FALSE_PREDS = 3
STREAM_POLICY = 4


def splitmix64(x: int) -> int:
    """One SplitMix64 step; the standard 64-bit avalanche mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return (z ^ (z >> 31)) & MASK64


def instance_seed(base_seed: int, instance: int) -> int:
    return (base_seed ^ splitmix64(instance)) & MASK64


def stream_seed(base_seed: int, instance: int, stream: int) -> int:
    return splitmix64(instance_seed(base_seed, instance) + stream)


class TraceParseError(ValueError):
    """A trace or durations file failed to parse; carries the line number."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Inter-arrival distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self) -> None:
        if self.mean <= 0:
            raise ValueError("mean must be > 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(self.mean, size)

    def rescaled(self, mean: float) -> "Exponential":
        return Exponential(mean)


@dataclass(frozen=True)
class Weibull:
    """Weibull law parameterised by shape and mean; the scale follows as
    mean / Gamma(1 + 1/shape)."""

    shape: float
    mean: float

    def __post_init__(self) -> None:
        if self.shape <= 0:
            raise ValueError("shape must be > 0")
        if self.mean <= 0:
            raise ValueError("mean must be > 0")

    @property
    def scale(self) -> float:
        return self.mean / _gamma(1.0 + 1.0 / self.shape)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * rng.weibull(self.shape, size)

    def rescaled(self, mean: float) -> "Weibull":
        return Weibull(self.shape, mean)


@dataclass(frozen=True)
class UniformMean:
    """Uniform on (0, 2*mean): the simplest law with a prescribed mean."""

    mean: float

    def __post_init__(self) -> None:
        if self.mean <= 0:
            raise ValueError("mean must be > 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(0.0, 2.0 * self.mean, size)

    def rescaled(self, mean: float) -> "UniformMean":
        return UniformMean(mean)


@dataclass(frozen=True)
class EmpiricalDurations:
    """Multiset of observed availability durations; sampling draws
    uniformly from the multiset, which realises the conditional survival
    ratio #(X >= t) / #(X >= tau) of the underlying log."""

    samples: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.samples) == 0:
            raise ValueError("samples must be non-empty")
        if any(s <= 0 for s in self.samples):
            raise ValueError("all samples must be > 0")

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        arr = np.asarray(self.samples, dtype=float)
        return arr[rng.integers(0, len(arr), size)]

    def rescaled(self, mean: float) -> "EmpiricalDurations":
        factor = mean / self.mean
        return EmpiricalDurations(tuple(s * factor for s in self.samples))


DistributionSpec = Exponential | Weibull | UniformMean | EmpiricalDurations


# ---------------------------------------------------------------------------
# Events and traces
# ---------------------------------------------------------------------------

KIND_FAULT = "fault"
KIND_PRED_TRUE = "pred_true"
KIND_PRED_FALSE = "pred_false"

_KIND_ORDER = {KIND_FAULT: 0, KIND_PRED_TRUE: 1, KIND_PRED_FALSE: 2}


@dataclass(frozen=True)
class Event:
    """One trace event.  For a true prediction, `time` is the predicted
    fault date and `actual_fault_time` the date the fault really strikes
    (equal under exact prediction, up to one uncertainty window later
    under inexact prediction)."""

    time: float
    kind: str
    actual_fault_time: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KIND_ORDER:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == KIND_PRED_TRUE:
            if self.actual_fault_time is None:
                raise ValueError("true prediction needs an actual fault time")
            if self.actual_fault_time < self.time:
                raise ValueError("actual fault time must be >= predicted time")
        elif self.actual_fault_time is not None:
            raise ValueError("only true predictions carry an actual fault time")


@dataclass(frozen=True)
class EventTrace:
    events: tuple[Event, ...]
    horizon: float
    job_start: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if not 0 <= self.job_start < self.horizon:
            raise ValueError("job_start must lie in [0, horizon)")
        prev = -math.inf
        for ev in self.events:
            if ev.time < prev:
                raise ValueError("events must be sorted by time")
            if not 0.0 <= ev.time <= self.horizon:
                raise ValueError("event times must lie in [0, horizon]")
            prev = ev.time


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def gen_platform_fault_trace(
    dist: DistributionSpec, n_units: int, horizon: float, rng_seed: int
) -> np.ndarray:
    """Merged, sorted fault dates of n_units independent renewal processes.

    Each unit accumulates IID inter-arrival samples from `dist` until the
    running sum exceeds the horizon; the per-unit streams are then merged.
    """
    if n_units < 1:
        raise ValueError("n_units must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if isinstance(dist, EmpiricalDurations) and n_units > len(dist.samples):
        warnings.warn(
            f"sampling {n_units} units from only {len(dist.samples)} observed "
            "durations oversamples the empirical distribution",
            stacklevel=2,
        )
    rng = np.random.default_rng(rng_seed & MASK64)
    times = dist.sample(rng, n_units)
    collected: list[np.ndarray] = []
    while times.size:
        alive = times <= horizon
        if not alive.any():
            break
        times = times[alive]
        collected.append(times.copy())
        times = times + dist.sample(rng, times.size)
    if not collected:
        return np.empty(0, dtype=float)
    return np.sort(np.concatenate(collected), kind="stable")


def ingest_fta_durations(path: str | Path) -> EmpiricalDurations:
    """Read availability durations (seconds, one per line, `#` comments
    allowed) into an empirical distribution."""
    path = Path(path)
    samples: list[float] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                value = float(line)
            except ValueError:
                raise TraceParseError(str(path), line_no, f"not a duration: {line!r}") from None
            if value <= 0 or not math.isfinite(value):
                raise TraceParseError(str(path), line_no, f"duration must be positive and finite: {line!r}")
            samples.append(value)
    if not samples:
        raise TraceParseError(str(path), 0, "no durations found")
    return EmpiricalDurations(tuple(samples))


def empirical_conditional_survival(
    samples: tuple[float, ...] | list[float] | np.ndarray, t: float, tau: float
) -> float:
    """P(X >= t | X >= tau) as the count ratio #(X >= t) / #(X >= tau)."""
    if not 0 <= tau <= t:
        raise ValueError("need t >= tau >= 0")
    arr = np.asarray(samples, dtype=float)
    denom = int(np.count_nonzero(arr >= tau))
    if denom == 0:
        raise InsufficientDataError("no sample survives to tau")
    return int(np.count_nonzero(arr >= t)) / denom


def label_predictions(
    faults: np.ndarray | list[float],
    recall: float,
    rng_seed: int,
    inexact_window: float | None = None,
) -> tuple[list[Event], list[Event]]:
    """Split fault dates into predicted and unpredicted events.

    Each fault is predicted independently with probability `recall`.  A
    predicted fault becomes a true-prediction event dated at the fault
    time; with an `inexact_window` the actual fault is instead displaced
    uniformly into (t, t + window].
    """
    if not 0.0 <= recall <= 1.0:
        raise ValueError("recall must lie in [0, 1]")
    if inexact_window is not None and inexact_window <= 0:
        raise ValueError("inexact_window must be > 0")
    arr = np.asarray(faults, dtype=float)
    rng = np.random.default_rng(rng_seed & MASK64)
    predicted = rng.random(arr.size) < recall
    pred_times = arr[predicted]
    if inexact_window is None:
        actual = pred_times
    else:
        actual = pred_times + inexact_window - rng.uniform(0.0, inexact_window, pred_times.size)
    true_preds = [
        Event(time=float(t), kind=KIND_PRED_TRUE, actual_fault_time=float(a))
        for t, a in zip(pred_times, actual)
    ]
    unpredicted = [Event(time=float(t), kind=KIND_FAULT) for t in arr[~predicted]]
    return true_preds, unpredicted


def false_prediction_mean(pred, mu: float) -> float:
    """Mean spacing of false predictions, p*mu/(r*(1-p))."""
    r, p = pred.recall, pred.precision
    if r == 0.0 or p == 1.0:
        return math.inf
    return p * mu / (r * (1.0 - p))


def gen_false_predictions(
    dist_family: DistributionSpec, pred, mu: float, horizon: float, rng_seed: int
) -> list[Event]:
    """Renewal stream of false predictions over [0, horizon].

    The inter-arrival law is `dist_family` rescaled to the false-alarm
    mean spacing; an always-silent or always-right predictor yields an
    empty stream.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    mean = false_prediction_mean(pred, mu)
    if math.isinf(mean):
        return []
    dist = dist_family.rescaled(mean)
    rng = np.random.default_rng(rng_seed & MASK64)
    times: list[float] = []
    # draw in batches sized from the expected count to limit round trips
    t = 0.0
    batch = max(16, int(horizon / mean * 1.2) + 8)
    while True:
        gaps = dist.sample(rng, batch)
        arr = t + np.cumsum(gaps)
        keep = arr <= horizon
        times.extend(arr[keep].tolist())
        if not keep.all():
            break
        t = float(arr[-1])
    return [Event(time=float(t), kind=KIND_PRED_FALSE) for t in times]


def merge_events(
    unpredicted: list[Event],
    true_preds: list[Event],
    false_preds: list[Event],
    horizon: float,
    job_start: float,
    seed: int = 0,
) -> EventTrace:
    """Merge the three sorted component streams into one trace.

    Ties are broken by kind (fault, then true prediction, then false
    prediction) and then by position within the source stream, so merging
    is fully deterministic.  Events dated before the job start can never
    affect a simulation and are dropped here.
    """
    keyed = []
    for stream in (unpredicted, true_preds, false_preds):
        for idx, ev in enumerate(stream):
            if ev.time < job_start:
                continue
            keyed.append((ev.time, _KIND_ORDER[ev.kind], idx, ev))
    keyed.sort(key=lambda item: item[:3])
    return EventTrace(
        events=tuple(item[3] for item in keyed),
        horizon=horizon,
        job_start=job_start,
        seed=seed,
    )


def estimate_platform_mtbf(fault_times: np.ndarray | list[float]) -> float:
    """Mean gap between successive platform faults inside a window."""
    arr = np.asarray(fault_times, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError("need at least two faults to estimate an MTBF")
    return float(np.diff(arr).mean())


# ---------------------------------------------------------------------------
# Trace CSV round trip
# ---------------------------------------------------------------------------

_CSV_HEADER = ["time_s", "kind", "actual_fault_time_s"]


def _format_time(value: float) -> str:
    return repr(float(value))


def write_trace_csv(trace: EventTrace, path: str | Path) -> None:
    """Write a trace as CSV (`time_s,kind,actual_fault_time_s`).

    Horizon, job start and seed travel as `#`-prefixed header comments so
    the file stays a plain CSV for any reader that skips comments.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# horizon_s={_format_time(trace.horizon)}\n")
        fh.write(f"# job_start_s={_format_time(trace.job_start)}\n")
        fh.write(f"# seed={trace.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for ev in trace.events:
            actual = "" if ev.actual_fault_time is None else _format_time(ev.actual_fault_time)
            writer.writerow([_format_time(ev.time), ev.kind, actual])


def read_trace_csv(
    path: str | Path,
    horizon: float | None = None,
    job_start: float | None = None,
) -> EventTrace:
    """Read a trace written by `write_trace_csv`.

    Explicit `horizon`/`job_start` arguments override the file's comment
    metadata; files without metadata must supply both.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    rows: list[tuple[int, list[str]]] = []
    with path.open("r", encoding="utf-8") as fh:
        data_lines: list[tuple[int, str]] = []
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if line.strip():
                data_lines.append((line_no, line))
    if not data_lines:
        raise TraceParseError(str(path), 0, "empty trace file")
    header_no, header_line = data_lines[0]
    header = next(csv.reader(io.StringIO(header_line)))
    if header != _CSV_HEADER:
        raise TraceParseError(str(path), header_no, f"unexpected header {header!r}")
    for line_no, line in data_lines[1:]:
        rows.append((line_no, next(csv.reader(io.StringIO(line)))))

    if horizon is None:
        if "horizon_s" not in meta:
            raise TraceParseError(str(path), 0, "missing horizon (no metadata, no override)")
        horizon = float(meta["horizon_s"])
    if job_start is None:
        job_start = float(meta.get("job_start_s", 0.0))
    seed = int(meta.get("seed", 0))

    events: list[Event] = []
    for line_no, row in rows:
        if len(row) != 3:
            raise TraceParseError(str(path), line_no, f"expected 3 columns, got {len(row)}")
        time_s, kind, actual_s = row
        try:
            time = float(time_s)
        except ValueError:
            raise TraceParseError(str(path), line_no, f"bad time {time_s!r}") from None
        if kind not in _KIND_ORDER:
            raise TraceParseError(str(path), line_no, f"bad kind {kind!r}")
        actual: float | None = None
        if kind == KIND_PRED_TRUE:
            try:
                actual = float(actual_s)
            except ValueError:
                raise TraceParseError(str(path), line_no, f"bad actual fault time {actual_s!r}") from None
        elif actual_s not in ("", None):
            raise TraceParseError(str(path), line_no, "actual_fault_time_s must be empty except for pred_true")
        events.append(Event(time=time, kind=kind, actual_fault_time=actual))
    return EventTrace(events=tuple(events), horizon=horizon, job_start=job_start, seed=seed)
