"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime or configuration error,
3 partial failure (an experiment wrote a non-empty errors.csv).
"""

from __future__ import annotations

import argparse
import sys

from . import analysis, harness, simulator, tracegen
from .model import CostParams, PredictorParams


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_cost_flags(p: argparse.ArgumentParser, with_cp: bool = True) -> None:
    p.add_argument("--c", default="600", help="regular checkpoint cost (duration)")
    p.add_argument("--r-cost", default="600", help="recovery cost (duration)")
    p.add_argument("--d", default="60", help="downtime (duration)")
    if with_cp:
        p.add_argument("--cp", default=None, help="proactive checkpoint cost (duration, default = --c)")


def _costs_from(args) -> CostParams:
    c = harness.parse_duration(args.c)
    cp = harness.parse_duration(args.cp) if getattr(args, "cp", None) else c
    return CostParams(
        regular_ckpt=c,
        proactive_ckpt=cp,
        downtime=harness.parse_duration(args.d),
        recovery=harness.parse_duration(args.r_cost),
    )


def _predictor_from(args) -> PredictorParams | None:
    if args.recall is None and args.precision is None:
        return None
    if args.recall is None or args.precision is None:
        raise harness.ConfigError("--recall and --precision must be given together")
    return PredictorParams(recall=float(args.recall), precision=float(args.precision))


def _cmd_periods(args) -> int:
    mtbf_ind = harness.parse_duration(args.mtbf_ind)
    n_list = tuple(harness.parse_count(v) for v in harness.parse_list(args.n))
    table = harness.periods_table(
        mtbf_ind,
        n_list,
        harness.parse_duration(args.c),
        harness.parse_duration(args.r_cost),
        harness.parse_duration(args.d),
    )
    print(",".join(harness.PERIODS_COLUMNS))
    for row in table:
        cells = [str(int(row["n"]))] + [f"{row[k]:.10g}" for k in harness.PERIODS_COLUMNS[1:]]
        print(",".join(cells))
    return 0


def _cmd_waste(args) -> int:
    mu = harness.parse_duration(args.mu)
    t = harness.parse_duration(args.t)
    costs = _costs_from(args)
    pred = _predictor_from(args)
    if pred is None:
        breakdown = analysis.waste_no_prediction(t, mu, costs)
        print(f"fault_free_waste={breakdown.fault_free:.10g}")
        print(f"fault_waste={breakdown.fault:.10g}")
        print(f"total_waste={breakdown.total:.10g}")
        print(f"valid={str(breakdown.valid).lower()}")
    elif args.q is not None:
        total = analysis.waste_simple_policy(t, float(args.q), mu, pred, costs)
        fault = analysis.simple_policy_fault_waste(t, float(args.q), mu, pred, costs)
        print(f"fault_waste={fault:.10g}")
        print(f"total_waste={total:.10g}")
    else:
        total = analysis.waste_with_prediction(t, mu, pred, costs)
        print(f"total_waste={total:.10g}")
    return 0


def _cmd_optimize(args) -> int:
    mu = harness.parse_duration(args.mu)
    costs = _costs_from(args)
    pred = _predictor_from(args)
    if pred is None:
        raise harness.ConfigError("optimize requires --recall and --precision")
    t_np = analysis.period_no_pred(mu, pred, costs)
    rec = analysis.optimize_period(mu, pred, costs)
    print(f"period_no_pred_s={t_np:.10g}")
    if pred.recall < 1.0:
        print(f"period_pred_s={analysis.period_pred(mu, pred, costs):.10g}")
    print(f"chosen_branch={rec.branch}")
    print(f"chosen_period_s={rec.period:.10g}")
    print(f"predicted_waste={rec.predicted_waste:.10g}")
    print(f"clamped={str(rec.clamped).lower()}")
    return 0


def _policy_from(args, costs: CostParams) -> simulator.Policy:
    t = harness.parse_duration(args.t)
    kind = args.policy
    if kind == "periodic":
        return simulator.Periodic(t)
    if kind == "threshold":
        if args.beta is None:
            raise harness.ConfigError("threshold policy requires --beta")
        return simulator.ThresholdTrust(t, harness.parse_duration(args.beta))
    if kind == "inexact":
        if args.beta is None:
            raise harness.ConfigError("inexact policy requires --beta")
        return simulator.Inexact(t, harness.parse_duration(args.beta))
    if kind == "random":
        if args.q is None:
            raise harness.ConfigError("random policy requires --q")
        return simulator.RandomTrust(t, float(args.q))
    if kind == "piecewise":
        if not args.intervals:
            raise harness.ConfigError("piecewise policy requires --intervals lo:hi:q,...")
        triples = []
        for part in harness.parse_list(args.intervals):
            lo, hi, q = part.split(":")
            triples.append((harness.parse_duration(lo), harness.parse_duration(hi), float(q)))
        return simulator.PiecewiseTrust(t, tuple(triples))
    raise harness.ConfigError(f"unknown policy {kind!r}")


def _cmd_simulate(args) -> int:
    costs = _costs_from(args)
    trace = tracegen.read_trace_csv(
        args.trace,
        horizon=harness.parse_duration(args.horizon) if args.horizon else None,
        job_start=harness.parse_duration(args.job_start) if args.job_start else None,
    )
    policy = _policy_from(args, costs)
    outcome = simulator.simulate(
        trace, policy, costs, harness.parse_duration(args.tbase), args.seed
    )
    print(f"makespan_s={outcome.makespan:.10g}")
    print(f"waste={outcome.waste:.10g}")
    for field in (
        "unpredicted_faults_hit",
        "trusted_predictions",
        "ignored_predictions",
        "false_alarms_paid",
        "periodic_ckpts",
        "proactive_ckpts",
        "rollbacks",
    ):
        print(f"{field}={getattr(outcome.counts, field)}")
    return 0


def _dist_from(args) -> tracegen.DistributionSpec:
    kind, param = harness.parse_distribution(args.dist)
    mean = harness.parse_duration(args.mean) if args.mean else None
    if kind != "fta" and mean is None:
        raise harness.ConfigError("--mean is required for synthetic distributions")
    return harness.build_distribution(kind, param, mean)


def _cmd_gen_trace(args) -> int:
    dist = _dist_from(args)
    horizon = harness.parse_duration(args.horizon)
    job_start = harness.parse_duration(args.job_start)
    faults = tracegen.gen_platform_fault_trace(dist, args.n, horizon, args.seed)
    if args.recall is not None:
        pred = _predictor_from(args)
        window = harness.parse_duration(args.inexact_window) if args.inexact_window else None
        true_preds, unpredicted = tracegen.label_predictions(
            faults, pred.recall, tracegen.splitmix64(args.seed + 1), window
        )
        family: tracegen.DistributionSpec = (
            tracegen.UniformMean(1.0) if args.false_dist == "uniform" else dist
        )
        mu = dist.mean / args.n
        false_preds = tracegen.gen_false_predictions(
            family, pred, mu, horizon, tracegen.splitmix64(args.seed + 2)
        )
    else:
        true_preds = []
        false_preds = []
        unpredicted = [tracegen.Event(time=float(t), kind=tracegen.KIND_FAULT) for t in faults]
    trace = tracegen.merge_events(
        unpredicted, true_preds, false_preds, horizon, job_start, seed=args.seed
    )
    tracegen.write_trace_csv(trace, args.out)
    print(f"wrote {len(trace.events)} events to {args.out}")
    return 0


def _cmd_best_period(args) -> int:
    dist = _dist_from(args)
    costs = _costs_from(args)
    pred = _predictor_from(args) or PredictorParams(recall=0.0, precision=1.0)
    scenario = harness.Scenario(
        scenario_id="cli",
        dist=dist,
        n_processors=args.n,
        processors_per_unit=1,
        horizon=harness.parse_duration(args.horizon),
        job_start=harness.parse_duration(args.job_start),
        t_base=harness.parse_duration(args.tbase),
        costs=costs,
        predictor=pred,
        false_pred_family=args.false_dist if args.false_dist else "faults",
    )
    period, outcomes = harness.run_heuristic_cell(
        scenario, f"best-period-{args.family}", args.instances, args.seed
    )
    import numpy as np

    wastes = [o.waste for o in outcomes]
    print(f"best_period_s={period:.10g}")
    print(f"mean_waste={float(np.mean(wastes)):.10g}")
    return 0


def _cmd_ingest_fta(args) -> int:
    dist = tracegen.ingest_fta_durations(args.file)
    print(f"samples={len(dist.samples)}")
    print(f"mean_s={dist.mean:.10g}")
    return 0


def _cmd_experiment(args) -> int:
    config = harness.load_config(args.config)
    if args.instances is not None:
        config = type(config)(**{**config.__dict__, "instances": args.instances})
    if args.seed is not None:
        config = type(config)(**{**config.__dict__, "base_seed": args.seed})
    result = harness.run_experiment(config, args.out)
    print(f"wrote {result.results_path}")
    if args.days:
        _print_day_view(result.results_path)
    if result.periods_path:
        print(f"wrote {result.periods_path}")
    if result.errors_path:
        print(f"wrote {result.errors_path} ({result.n_errors} errors)")
        return 3
    return 0


def _print_day_view(results_path) -> None:
    """Day-denominated summary of results.csv (the file itself stays in
    seconds)."""
    import csv

    with open(results_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    print("scenario_id,n,heuristic,mean_makespan_d,gain_vs_rfo_percent")
    for row in rows:
        days = float(row["mean_makespan_s"]) / 86_400.0
        print(
            f"{row['scenario_id']},{row['n']},{row['heuristic']},"
            f"{days:.1f},{row['gain_vs_rfo_percent']}"
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="ckptsim", description="Checkpoint-period planning and simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("periods", parents=[], help="first-order and exact-optimal periods per platform size")
    p.add_argument("--mtbf-ind", required=True, help="individual MTBF (duration, e.g. '125 y')")
    p.add_argument("--n", required=True, help="comma list of platform sizes (2^k allowed)")
    _add_cost_flags(p, with_cp=False)
    p.set_defaults(func=_cmd_periods)

    p = sub.add_parser("waste", help="evaluate the analytical waste at a given period")
    p.add_argument("--mu", required=True, help="platform MTBF (duration)")
    p.add_argument("--t", required=True, help="checkpoint period (duration)")
    p.add_argument("--recall", default=None)
    p.add_argument("--precision", default=None)
    p.add_argument("--q", default=None, help="constant trust probability (selects the simple policy)")
    _add_cost_flags(p)
    p.set_defaults(func=_cmd_waste)

    p = sub.add_parser("optimize", help="recommended period with and without trusting predictions")
    p.add_argument("--mu", required=True)
    p.add_argument("--recall", default=None)
    p.add_argument("--precision", default=None)
    _add_cost_flags(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("simulate", help="run one policy against a trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--policy", required=True, choices=["periodic", "threshold", "random", "piecewise", "inexact"])
    p.add_argument("--t", required=True, help="checkpoint period (duration)")
    p.add_argument("--tbase", required=True, help="job size (duration)")
    p.add_argument("--beta", default=None, help="trust threshold offset (duration)")
    p.add_argument("--q", default=None, help="trust probability")
    p.add_argument("--intervals", default=None, help="piecewise intervals lo:hi:q,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", default=None, help="override trace horizon (duration)")
    p.add_argument("--job-start", default=None, help="override trace job start (duration)")
    _add_cost_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen-trace", help="generate a seeded event trace CSV")
    p.add_argument("--dist", required=True, help="exp | weibull:K | fta:FILE | uniform")
    p.add_argument("--mean", default=None, help="per-unit mean inter-arrival (duration)")
    p.add_argument("--n", type=int, required=True, help="number of independent units")
    p.add_argument("--horizon", required=True, help="trace horizon (duration)")
    p.add_argument("--job-start", default="0", help="job start within the horizon (duration)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--recall", default=None)
    p.add_argument("--precision", default=None)
    p.add_argument("--inexact-window", default=None, help="uncertainty window for true predictions (duration)")
    p.add_argument("--false-dist", default=None, choices=[None, "faults", "uniform"], help="false-prediction family")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_trace)

    p = sub.add_parser("best-period", help="brute-force the best period for a policy family")
    p.add_argument("--family", required=True, choices=["rfo", "optimal-prediction", "inexact-prediction"])
    p.add_argument("--dist", required=True)
    p.add_argument("--mean", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", required=True)
    p.add_argument("--job-start", default="0")
    p.add_argument("--tbase", required=True)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--recall", default=None)
    p.add_argument("--precision", default=None)
    p.add_argument("--false-dist", default=None, choices=[None, "faults", "uniform"])
    _add_cost_flags(p)
    p.set_defaults(func=_cmd_best_period)

    p = sub.add_parser("ingest-fta", help="parse an availability-durations file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_ingest_fta)

    p = sub.add_parser("experiment", help="run a config-driven sweep into CSV files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=None, help="override the config instance count")
    p.add_argument("--seed", type=int, default=None, help="override the config base seed")
    p.add_argument("--days", action="store_true", help="print a day-denominated makespan view")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, tracegen.TraceParseError, ValueError, OSError) as exc:
        print(f"ckptsim: error: {exc}", file=sys.stderr)
        return 2
    except simulator.HorizonExhaustedError as exc:
        print(f"ckptsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
