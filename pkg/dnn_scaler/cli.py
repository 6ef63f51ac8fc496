"""
Command line entry point: ``dnn-scaler [--log LEVEL] <subcommand> ...``

Subcommands: profile, run, compare, sensitivity, sweep. Artifacts are
written under --out (default ``out/``). Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error.
"""
from typing import List, Optional, Sequence
import argparse
import logging
import sys

from dnn_scaler.artifacts import (
    ensure_out_dir,
    write_comparison,
    write_json,
    write_metrics_csv,
    write_summary_json,
    write_sweep_csv,
)
from dnn_scaler.catalog import load_catalog, load_scenario
from dnn_scaler.config import ControllerSettings, configure_logging, default_seed
from dnn_scaler.error_renderer import CODE_ERROR_DEFS, format_report, render_exception
from dnn_scaler.errors import EXIT_OK, EXIT_RUNTIME, ConfigError, DnnScalerError, HarnessError
from dnn_scaler.harness import combination_sweep, make_rng, run_scenario, scenario_settings, sensitivity
from dnn_scaler.perfmodel import SimulatedGpu
from dnn_scaler.profiler import decide, profile
from dnn_scaler.schemas import ComparisonTable, ControllerKind, JobFailure, JobTrace, Scenario

logger = logging.getLogger(__name__)


def _parse_int_list(raw: str) -> List[int]:
    values = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            values.append(int(chunk))
        except ValueError:
            raise argparse.ArgumentTypeError(f"Invalid integer value '{chunk}'")
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnn-scaler", description="SLO-aware batch size / multi-tenancy scaler simulator")
    parser.add_argument("--log", help="Log level (DEBUG, INFO, WARNING, ERROR); defaults to $DNNSCALER_LOG or WARNING.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default="out", help="Output directory (default: out/).")
        p.add_argument("--seed", type=int, help="Random seed (default: scenario seed, $DNNSCALER_SEED or 42).")
        p.add_argument("--sigma", type=float, help="Latency noise scale; 0 makes the simulator deterministic.")

    def dnn(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dnn", required=True, help="DNN id from the catalog, e.g. inc-v1.")
        p.add_argument("--dataset", help="Dataset tag; may be omitted when the DNN has a single entry.")
        p.add_argument("--catalog", help="Catalog JSON file (default: the bundled catalog).")

    p = sub.add_parser("profile", help="Profile one DNN and print the chosen approach.")
    dnn(p)
    p.add_argument("-m", type=int, help="Probe batch size (default 32).")
    p.add_argument("-n", type=int, help="Probe multi-tenancy level (default 8).")
    common(p)

    p = sub.add_parser("run", help="Run a scenario file.")
    p.add_argument("--config", required=True, help="Scenario JSON file.")
    p.add_argument("--controller", choices=[k.value for k in ControllerKind],
                   help="Run only this controller instead of the scenario's list.")
    p.add_argument("--workers", type=int, default=1, help="Jobs simulated in parallel.")
    common(p)

    p = sub.add_parser("compare", help="Run a scenario under DNNScaler and Clipper and compare them.")
    p.add_argument("--config", required=True, help="Scenario JSON file.")
    p.add_argument("--workers", type=int, default=1, help="Jobs simulated in parallel.")
    common(p)

    p = sub.add_parser("sensitivity", help="Run the jobs of a scenario that carry an SLO schedule.")
    p.add_argument("--config", required=True, help="Scenario JSON file.")
    common(p)

    p = sub.add_parser("sweep", help="Measure throughput and latency over a (BS, MTL) grid.")
    dnn(p)
    p.add_argument("--bs", type=_parse_int_list, required=True, help="Comma-separated batch sizes.")
    p.add_argument("--mtl", type=_parse_int_list, required=True, help="Comma-separated multi-tenancy levels.")
    common(p)
    return parser


def _seed(args: argparse.Namespace, scenario: Optional[Scenario] = None) -> int:
    if args.seed is not None:
        return args.seed
    if scenario is not None and "seed" in scenario.model_fields_set:
        return scenario.seed
    return default_seed()


def _load_scenario(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.config)
    update = {"seed": _seed(args, scenario)}
    if args.sigma is not None:
        update["overrides"] = scenario.overrides.model_copy(update={"sigma": args.sigma})
    return scenario.model_copy(update=update)


def _print_summaries(traces: Sequence[JobTrace]) -> None:
    print(f"{'job':>4} {'controller':<10} {'dnn':<18} {'approach':<13} {'knob':<8} "
          f"{'items/s':>10} {'p95 ms':>9} {'compl':>6} {'W':>7}")
    for t in traces:
        s = t.summary
        approach = s.approach.value if s.approach else "-"
        p95 = f"{s.p95_overall:.2f}" if s.p95_overall is not None else "-"
        # * marks a knob still moving when the job ended
        knob = f"{s.steady_knob}{'' if s.settled else '*'}"
        print(f"{s.job_id:>4} {s.controller.value:<10} {s.dnn_id:<18} {approach:<13} {knob:<8} "
              f"{s.avg_throughput:>10.2f} {p95:>9} {s.slo_compliance_fraction:>6.3f} {s.avg_power:>7.1f}")


def _print_comparison(table: ComparisonTable) -> None:
    print(f"{'job':>4} {'dnn':<18} {'approach':<13} {'dnnscaler':>10} {'clipper':>10} {'gain %':>9} {'eff gain %':>10}")
    for r in table.rows:
        approach = r.approach.value if r.approach else "-"
        print(f"{r.job_id:>4} {r.dnn_id:<18} {approach:<13} {r.dnnscaler_throughput:>10.2f} "
              f"{r.clipper_throughput:>10.2f} {r.throughput_improvement:>9.2f} {r.efficiency_improvement:>10.2f}")
    for label, value in (("average improvement", table.average_improvement),
                         ("average MT improvement", table.average_mt_improvement),
                         ("average power-efficiency improvement", table.average_efficiency_improvement)):
        print(f"{label}: {'-' if value is None else f'{value:.2f}%'}")


def _report_failures(failures: Sequence[JobFailure], total: int) -> None:
    if not failures:
        return
    for f in failures:
        print(f"job {f.job_id} ({f.controller.value}) failed: [{f.error}] {f.diagnostics}", file=sys.stderr)
    err = HarnessError(f"{len(failures)} of {total} jobs failed")
    # A usage problem in any job (unknown DNN, zero duration) wins over runtime failures
    err.exit_code = max(CODE_ERROR_DEFS.get(f.error, {}).get("exit_code", EXIT_RUNTIME) for f in failures)
    raise err


def cmd_profile(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    entry = catalog.get(args.dnn, args.dataset)
    settings = ControllerSettings().with_overrides(m=args.m, n=args.n, sigma=args.sigma)
    backend = SimulatedGpu(catalog.models(entry, settings), max_mtl=max(settings.max_mtl, settings.n),
                           abs_max_bs=max(settings.abs_max_bs, settings.m))
    report = profile(backend, entry, settings.m, settings.n, settings.batches_per_point, make_rng(_seed(args), 0))
    approach = decide(report, settings.eps)

    out = ensure_out_dir(args.out)
    write_json(out / "profile.json", {"dnn_id": entry.id, "dataset_tag": entry.dataset_tag,
                                      "decision": approach.value, "report": report.model_dump(mode="json")})
    print(f"{entry.id}/{entry.dataset_tag}: base {report.base_throughput:.2f} items/s, "
          f"TI_B {report.ti_b:.2f}% (BS={report.m}), TI_MT {report.ti_mt:.2f}% (MTL={report.n}) -> {approach.value}")
    return EXIT_OK


def _run(args: argparse.Namespace, scenario: Scenario) -> int:
    result = run_scenario(scenario, workers=args.workers)
    traces = [t for kind in scenario.controllers for t in result.traces.get(kind, [])]

    out = ensure_out_dir(args.out)
    write_metrics_csv(out / "metrics.csv", traces)
    write_summary_json(out / "summary.json", traces, result.failures)
    _print_summaries(traces)
    if result.comparison is not None:
        write_comparison(out, result.comparison)
        print()
        _print_comparison(result.comparison)
    _report_failures(result.failures, len(scenario.jobs) * len(scenario.controllers))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    if args.controller:
        scenario = scenario.model_copy(update={"controllers": [ControllerKind(args.controller)]})
        if scenario.controllers[0] is ControllerKind.STATIC and scenario.static_knob is None:
            raise ConfigError("controller 'static' requires static_knob in the scenario")
    return _run(args, scenario)


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    scenario = scenario.model_copy(update={"controllers": [ControllerKind.DNNSCALER, ControllerKind.CLIPPER]})
    return _run(args, scenario)


def cmd_sensitivity(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    jobs = [job for job in scenario.jobs if job.slo_schedule]
    if not jobs:
        raise ConfigError(f"no job in {args.config} has an slo_schedule")
    settings = scenario_settings(scenario)
    catalog = load_catalog(scenario.catalog_path)
    traces = [sensitivity(job, settings, catalog, rng=make_rng(scenario.seed, job.job_id)) for job in jobs]

    out = ensure_out_dir(args.out)
    write_metrics_csv(out / "metrics.csv", traces)
    write_summary_json(out / "summary.json", traces)
    _print_summaries(traces)
    for t in traces:
        print(f"job {t.summary.job_id}: periods to re-enter the band after each SLO step: "
              f"{t.summary.readaptation_periods}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    catalog = load_catalog(args.catalog)
    entry = catalog.get(args.dnn, args.dataset)
    settings = ControllerSettings().with_overrides(sigma=args.sigma)
    points = combination_sweep(catalog, entry, settings, args.bs, args.mtl, seed=_seed(args))

    out = ensure_out_dir(args.out)
    write_sweep_csv(out / "sweep.csv", points)
    print(f"{'bs':>4} {'mtl':>4} {'items/s':>10} {'p95 ms':>9} {'W':>7}")
    for p in points:
        print(f"{p.bs:>4} {p.mtl:>4} {p.throughput:>10.2f} {p.p95:>9.2f} {p.power:>7.1f}")
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "run": cmd_run,
    "compare": cmd_compare,
    "sensitivity": cmd_sensitivity,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log)
        return COMMANDS[args.command](args)
    except DnnScalerError as e:
        report = render_exception(e)
        print(format_report(report), file=sys.stderr)
        return report.exit_code
