"""Experiment harness: scenario construction, sweep execution, CSV output.

A scenario pins one platform (per-unit fault law, unit count, horizon,
job start), one predictor, one cost set and one job size.  Heuristic
names select how the checkpoint period and trust rule are chosen; each
(scenario, heuristic) cell is averaged over seeded instances and written
as one row of results.csv.  Exponential scenarios additionally produce a
periods.csv with the first-order and exact-optimal periods per platform
size.  Everything is deterministic given the base seed.
"""

from __future__ import annotations

import csv
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, model, search, simulator, tracegen
from .model import CostParams, PredictorParams, SECONDS_PER_YEAR
from .simulator import Inexact, Periodic, Policy, SimOutcome, ThresholdTrust
from .tracegen import (
    STREAM_FALSE_PREDS,
    STREAM_FAULTS,
    STREAM_LABELS,
    STREAM_POLICY,
    DistributionSpec,
    EventTrace,
    stream_seed,
)

HEURISTIC_NAMES = (
    "young",
    "daly",
    "rfo",
    "optimal-prediction",
    "inexact-prediction",
    "best-period-rfo",
    "best-period-optimal-prediction",
    "best-period-inexact-prediction",
)

_UNIT_SECONDS = {
    "s": 1.0,
    "sec": 1.0,
    "min": model.SECONDS_PER_MINUTE,
    "h": model.SECONDS_PER_HOUR,
    "d": model.SECONDS_PER_DAY,
    "y": SECONDS_PER_YEAR,
}


class ConfigError(ValueError):
    pass


def parse_duration(text: str) -> float:
    """Parse '600', '600 s', '10 min', '2 h', '1 d' or '125 y' to seconds."""
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*([a-zA-Z]*)\s*", str(text))
    if not m:
        raise ConfigError(f"cannot parse duration {text!r}")
    value, unit = m.group(1), m.group(2).lower()
    try:
        seconds = float(value)
    except ValueError:
        raise ConfigError(f"cannot parse duration {text!r}") from None
    if unit:
        if unit not in _UNIT_SECONDS:
            raise ConfigError(f"unknown duration unit {unit!r} in {text!r}")
        seconds *= _UNIT_SECONDS[unit]
    return seconds


def parse_count(text: str) -> int:
    """Parse an integer, allowing the power form '2^16'."""
    text = str(text).strip()
    m = re.fullmatch(r"(\d+)\s*\^\s*(\d+)", text)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"cannot parse count {text!r}") from None


def parse_list(text: str) -> list[str]:
    return [item.strip() for item in str(text).split(",") if item.strip()]


def parse_distribution(text: str) -> tuple[str, float | str | None]:
    """Parse a distribution spec string: 'exp', 'weibull:K', 'fta:FILE'
    or 'uniform'.  Returns (kind, parameter)."""
    text = str(text).strip()
    if text in ("exp", "exponential"):
        return "exp", None
    if text == "uniform":
        return "uniform", None
    if text.startswith("weibull:"):
        try:
            return "weibull", float(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad Weibull shape in {text!r}") from None
    if text.startswith("fta:"):
        return "fta", text.split(":", 1)[1]
    raise ConfigError(f"unknown distribution {text!r}")


def build_distribution(kind: str, param: float | str | None, mean: float | None) -> DistributionSpec:
    if kind == "exp":
        return tracegen.Exponential(mean)
    if kind == "uniform":
        return tracegen.UniformMean(mean)
    if kind == "weibull":
        return tracegen.Weibull(shape=float(param), mean=mean)
    if kind == "fta":
        return tracegen.ingest_fta_durations(str(param))
    raise ConfigError(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One fully pinned simulation setting."""

    scenario_id: str
    dist: DistributionSpec
    n_processors: int
    processors_per_unit: int
    horizon: float
    job_start: float
    t_base: float
    costs: CostParams
    predictor: PredictorParams
    false_pred_family: str  # "faults" or "uniform"

    def __post_init__(self) -> None:
        if self.n_processors % self.processors_per_unit:
            raise ConfigError("n_processors must be a multiple of processors_per_unit")
        if self.false_pred_family not in ("faults", "uniform"):
            raise ConfigError("false_pred_family must be 'faults' or 'uniform'")

    @property
    def n_units(self) -> int:
        return self.n_processors // self.processors_per_unit

    @property
    def platform_mtbf(self) -> float:
        return self.dist.mean / self.n_units


def scenario_trace(
    scenario: Scenario,
    instance: int,
    base_seed: int,
    inexact_window: float | None = None,
) -> EventTrace:
    """Deterministic trace for one scenario instance: per-unit faults,
    prediction labels, and the false-prediction overlay, merged."""
    faults = tracegen.gen_platform_fault_trace(
        scenario.dist,
        scenario.n_units,
        scenario.horizon,
        stream_seed(base_seed, instance, STREAM_FAULTS),
    )
    true_preds, unpredicted = tracegen.label_predictions(
        faults,
        scenario.predictor.recall,
        stream_seed(base_seed, instance, STREAM_LABELS),
        inexact_window=inexact_window,
    )
    if scenario.false_pred_family == "uniform":
        family: DistributionSpec = tracegen.UniformMean(1.0)
    else:
        family = scenario.dist
    false_preds = tracegen.gen_false_predictions(
        family,
        scenario.predictor,
        scenario.platform_mtbf,
        scenario.horizon,
        stream_seed(base_seed, instance, STREAM_FALSE_PREDS),
    )
    return tracegen.merge_events(
        unpredicted,
        true_preds,
        false_preds,
        scenario.horizon,
        scenario.job_start,
        seed=tracegen.instance_seed(base_seed, instance),
    )


def heuristic_period(name: str, scenario: Scenario) -> float:
    """Planned checkpoint period of a heuristic on a scenario."""
    mu = scenario.platform_mtbf
    c = scenario.costs.regular_ckpt
    d, r = scenario.costs.downtime, scenario.costs.recovery
    base = name.removeprefix("best-period-")
    if base == "young":
        return analysis.period_young(mu, c)
    if base == "daly":
        return analysis.period_daly(mu, c, d, r)
    if base == "rfo":
        return analysis.period_rfo(mu, c, d, r)
    if base in ("optimal-prediction", "inexact-prediction"):
        return analysis.optimize_period(mu, scenario.predictor, scenario.costs).period
    raise ConfigError(f"unknown heuristic {name!r}")


def heuristic_policy(name: str, scenario: Scenario, period: float) -> Policy:
    base = name.removeprefix("best-period-")
    if base in ("young", "daly", "rfo"):
        return Periodic(period)
    blim = analysis.beta_lim(scenario.costs, scenario.predictor)
    if blim > period:
        return Periodic(period)
    if base == "inexact-prediction":
        return Inexact(period, blim)
    return ThresholdTrust(period, blim)


def heuristic_inexact_window(name: str, scenario: Scenario) -> float | None:
    """Inexact heuristics run against traces whose true faults strike up
    to two regular checkpoints after their predicted date."""
    base = name.removeprefix("best-period-")
    if base == "inexact-prediction":
        return 2.0 * scenario.costs.regular_ckpt
    return None


def run_heuristic_cell(
    scenario: Scenario, heuristic: str, instances: int, base_seed: int
) -> tuple[float, list[SimOutcome]]:
    """Run one (scenario, heuristic) cell: returns the period used and the
    per-instance outcomes."""
    window = heuristic_inexact_window(heuristic, scenario)
    if heuristic.startswith("best-period-"):
        t_ref = heuristic_period(heuristic, scenario)
        spec = search.SearchSpec(
            grid=search.default_grid(t_ref, scenario.costs.regular_ckpt),
            instances_per_candidate=instances,
            refinement_rounds=2,
        )
        period, _ = search.best_period(
            lambda t: heuristic_policy(heuristic, scenario, t),
            lambda i: scenario_trace(scenario, i, base_seed, window),
            scenario.costs,
            scenario.t_base,
            spec,
            policy_seed_for_instance=lambda i: stream_seed(base_seed, i, STREAM_POLICY),
        )
    else:
        period = heuristic_period(heuristic, scenario)
    outcomes = []
    for i in range(instances):
        trace = scenario_trace(scenario, i, base_seed, window)
        outcomes.append(
            simulator.simulate(
                trace,
                heuristic_policy(heuristic, scenario, period),
                scenario.costs,
                scenario.t_base,
                stream_seed(base_seed, i, STREAM_POLICY),
            )
        )
    return period, outcomes


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    dist_kind: str
    dist_param: float | str | None
    mtbf_ind: float | None
    n_list: tuple[int, ...]
    horizon: float
    job_start: float
    years_per_platform: float
    predictors: tuple[PredictorParams, ...]
    regular_ckpt: float
    recovery: float
    downtime: float
    cp_ratios: tuple[float, ...]
    heuristics: tuple[str, ...]
    instances: int
    base_seed: int
    false_pred_family: str | None = None
    processors_per_unit: int | None = None

    def __post_init__(self) -> None:
        if not self.n_list:
            raise ConfigError("n list must be non-empty")
        if not self.predictors:
            raise ConfigError("predictor list must be non-empty")
        if not self.cp_ratios:
            raise ConfigError("cp_ratio list must be non-empty")
        if self.years_per_platform <= 0:
            raise ConfigError("years_per_platform must be > 0")
        if self.instances < 1:
            raise ConfigError("instances must be >= 1")
        for name in self.heuristics:
            if name not in HEURISTIC_NAMES:
                raise ConfigError(f"unknown heuristic {name!r}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse the flat `key = value` config file with [section] headers."""
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")
    try:
        scen = parser["scenario"]
        costs = parser["costs"]
        run = parser["run"]
        pred = parser["predictor"]
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc}") from None

    kind, param = parse_distribution(scen.get("distribution", "exp"))
    mtbf_ind = parse_duration(scen["mtbf_ind"]) if "mtbf_ind" in scen else None
    if kind != "fta" and mtbf_ind is None:
        raise ConfigError("mtbf_ind is required for synthetic distributions")
    recalls = [float(v) for v in parse_list(pred["recall"])]
    precisions = [float(v) for v in parse_list(pred["precision"])]
    if len(recalls) != len(precisions):
        raise ConfigError("recall and precision lists must have equal length")
    ppu_default = 4 if kind == "fta" else 1
    return ExperimentConfig(
        dist_kind=kind,
        dist_param=param,
        mtbf_ind=mtbf_ind,
        n_list=tuple(parse_count(v) for v in parse_list(scen["n"])),
        horizon=parse_duration(scen.get("horizon", "2 y")),
        job_start=parse_duration(scen.get("job_start", "1 y")),
        years_per_platform=float(scen.get("years_per_platform", "10000")),
        predictors=tuple(PredictorParams(r, p) for r, p in zip(recalls, precisions)),
        regular_ckpt=parse_duration(costs.get("c", "600")),
        recovery=parse_duration(costs.get("r", "600")),
        downtime=parse_duration(costs.get("d", "60")),
        cp_ratios=tuple(float(v) for v in parse_list(costs.get("cp_ratio", "1"))),
        heuristics=tuple(parse_list(run.get("heuristics", ""))),
        instances=int(run.get("instances", "100")),
        base_seed=int(run.get("base_seed", "1")),
        false_pred_family=scen.get("false_predictions", None),
        processors_per_unit=int(scen.get("processors_per_unit", str(ppu_default))),
    )


def build_scenarios(config: ExperimentConfig) -> list[Scenario]:
    """Cross product of platform sizes, predictors and proactive-cost
    ratios, each as one scenario."""
    if config.false_pred_family is not None:
        family = config.false_pred_family
    else:
        family = "uniform" if config.dist_kind == "fta" else "faults"
    dist = build_distribution(config.dist_kind, config.dist_param, config.mtbf_ind)
    scenarios = []
    for n in config.n_list:
        for pred in config.predictors:
            for ratio in config.cp_ratios:
                costs = CostParams(
                    regular_ckpt=config.regular_ckpt,
                    proactive_ckpt=ratio * config.regular_ckpt,
                    downtime=config.downtime,
                    recovery=config.recovery,
                )
                sid = (
                    f"{config.dist_kind}"
                    f"{'' if config.dist_param is None else ':' + str(config.dist_param)}"
                    f"-n{n}-r{pred.recall:g}-p{pred.precision:g}-cp{ratio:g}"
                )
                scenarios.append(
                    Scenario(
                        scenario_id=sid,
                        dist=dist,
                        n_processors=n,
                        processors_per_unit=config.processors_per_unit or 1,
                        horizon=config.horizon,
                        job_start=config.job_start,
                        t_base=config.years_per_platform * SECONDS_PER_YEAR / n,
                        costs=costs,
                        predictor=pred,
                        false_pred_family=family,
                    )
                )
    return scenarios


# ---------------------------------------------------------------------------
# Experiment execution and CSV output
# ---------------------------------------------------------------------------

RESULTS_COLUMNS = [
    "scenario_id",
    "n",
    "heuristic",
    "period_s",
    "mean_waste",
    "waste_stderr",
    "mean_makespan_s",
    "gain_vs_rfo_percent",
    "instances",
]

PERIODS_COLUMNS = [
    "n",
    "mu_s",
    "young_s",
    "young_dev_pct",
    "daly_s",
    "daly_dev_pct",
    "rfo_s",
    "rfo_dev_pct",
    "optimal_s",
]

ERRORS_COLUMNS = ["scenario_id", "n", "heuristic", "instance", "error"]


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def stderr_of_mean(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


@dataclass
class ExperimentResult:
    results_path: Path
    periods_path: Path | None
    errors_path: Path | None
    n_errors: int


def _worker_count() -> int:
    raw = os.environ.get("CKPT_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_cell_task(args) -> tuple[int, str, dict]:
    scenario, heuristic, instances, base_seed, index = args
    try:
        period, outcomes = run_heuristic_cell(scenario, heuristic, instances, base_seed)
    except Exception as exc:  # per-cell failure becomes an errors.csv row
        return index, heuristic, {"error": f"{type(exc).__name__}: {exc}"}
    wastes = [o.waste for o in outcomes]
    makespans = [o.makespan for o in outcomes]
    return index, heuristic, {
        "period": period,
        "mean_waste": float(np.mean(wastes)),
        "waste_stderr": stderr_of_mean(wastes),
        "mean_makespan": float(np.mean(makespans)),
        "instances": len(outcomes),
    }


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> ExperimentResult:
    """Run every (scenario, heuristic) cell and write results.csv (plus
    periods.csv for Exponential scenarios and errors.csv on failures)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = build_scenarios(config)

    tasks = [
        (scenario, heuristic, config.instances, config.base_seed, idx)
        for idx, scenario in enumerate(scenarios)
        for heuristic in config.heuristics
    ]
    workers = _worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_run_cell_task, tasks))
    else:
        raw = [_run_cell_task(t) for t in tasks]
    cells = {(idx, heuristic): payload for idx, heuristic, payload in raw}

    errors: list[list[str]] = []
    rows: list[list[str]] = []
    for idx, scenario in enumerate(scenarios):
        rfo_makespan = None
        payload = cells.get((idx, "rfo"))
        if payload is not None and "error" not in payload:
            rfo_makespan = payload["mean_makespan"]
        for heuristic in config.heuristics:
            payload = cells[(idx, heuristic)]
            if "error" in payload:
                print(
                    f"[cell] {scenario.scenario_id} {heuristic}: {payload['error']}",
                    file=sys.stderr,
                )
                errors.append(
                    [scenario.scenario_id, str(scenario.n_processors), heuristic, "*", payload["error"]]
                )
                continue
            print(
                f"[cell] {scenario.scenario_id} {heuristic}: period={payload['period']:.0f}s "
                f"waste={payload['mean_waste']:.4f} over {payload['instances']} instances",
                file=sys.stderr,
            )
            if rfo_makespan is None:
                gain = ""
            else:
                gain = _fmt(100.0 * (rfo_makespan - payload["mean_makespan"]) / rfo_makespan)
            rows.append(
                [
                    scenario.scenario_id,
                    str(scenario.n_processors),
                    heuristic,
                    _fmt(payload["period"]),
                    _fmt(payload["mean_waste"]),
                    _fmt(payload["waste_stderr"]),
                    _fmt(payload["mean_makespan"]),
                    gain,
                    str(payload["instances"]),
                ]
            )
    rows.sort(key=lambda row: (row[0], int(row[1]), row[2]))

    results_path = out_dir / "results.csv"
    with results_path.open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_COLUMNS)
        writer.writerows(rows)

    periods_path = None
    if config.dist_kind == "exp":
        periods_path = out_dir / "periods.csv"
        write_periods_csv(config, periods_path)

    errors_path = None
    if errors:
        errors_path = out_dir / "errors.csv"
        with errors_path.open("w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ERRORS_COLUMNS)
            writer.writerows(errors)

    return ExperimentResult(
        results_path=results_path,
        periods_path=periods_path,
        errors_path=errors_path,
        n_errors=len(errors),
    )


def periods_table(
    mtbf_ind: float, n_list: tuple[int, ...], c: float, r: float, d: float
) -> list[dict[str, float]]:
    """First-order periods and the exact Exponential optimum per platform
    size, with relative deviations from the optimum."""
    table = []
    for n in n_list:
        mu = mtbf_ind / n
        young = analysis.period_young(mu, c)
        daly = analysis.period_daly(mu, c, d, r)
        rfo = analysis.period_rfo(mu, c, d, r)
        opt = analysis.period_optimal_exponential(mu, c)
        table.append(
            {
                "n": n,
                "mu_s": mu,
                "young_s": young,
                "young_dev_pct": 100.0 * (young - opt) / opt,
                "daly_s": daly,
                "daly_dev_pct": 100.0 * (daly - opt) / opt,
                "rfo_s": rfo,
                "rfo_dev_pct": 100.0 * (rfo - opt) / opt,
                "optimal_s": opt,
            }
        )
    return table


def write_periods_csv(config: ExperimentConfig, path: Path) -> None:
    table = periods_table(
        config.mtbf_ind,
        config.n_list,
        config.regular_ckpt,
        config.recovery,
        config.downtime,
    )
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PERIODS_COLUMNS)
        for row in table:
            writer.writerow(
                [str(int(row["n"]))] + [_fmt(row[col]) for col in PERIODS_COLUMNS[1:]]
            )


WASTE_CURVE_COLUMNS = [
    "t_s",
    "analytical_waste",
    "simulated_mean_waste",
    "simulated_stderr",
    "valid",
]


def emit_waste_curve(
    scenario: Scenario,
    heuristic: str,
    periods: list[float],
    instances: int,
    base_seed: int,
    out_path: str | Path,
) -> None:
    """Pair the analytical waste with simulated means over a period grid.

    Rows whose period is below the checkpoint cost are flagged invalid and
    kept, never silently dropped.
    """
    mu = scenario.platform_mtbf
    window = heuristic_inexact_window(heuristic, scenario)
    base = heuristic.removeprefix("best-period-")
    with_prediction = base in ("optimal-prediction", "inexact-prediction")
    rows = []
    for t in periods:
        if t < scenario.costs.regular_ckpt or t > scenario.horizon:
            rows.append([_fmt(t), "", "", "", "false"])
            continue
        if with_prediction:
            analytic = analysis.waste_with_prediction(t, mu, scenario.predictor, scenario.costs)
        else:
            analytic = analysis.waste_no_prediction(t, mu, scenario.costs).total
        wastes = []
        for i in range(instances):
            trace = scenario_trace(scenario, i, base_seed, window)
            policy = heuristic_policy(heuristic, scenario, t)
            wastes.append(
                simulator.simulate(
                    trace, policy, scenario.costs, scenario.t_base,
                    stream_seed(base_seed, i, STREAM_POLICY),
                ).waste
            )
        rows.append(
            [
                _fmt(t),
                _fmt(analytic),
                _fmt(float(np.mean(wastes))),
                _fmt(stderr_of_mean(wastes)),
                "true",
            ]
        )
    out_path = Path(out_path)
    with out_path.open("w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WASTE_CURVE_COLUMNS)
        writer.writerows(rows)
