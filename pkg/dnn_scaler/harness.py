"""
Closed-loop execution of jobs against the simulated GPU.

The backend is kept saturated: the next batch (or MT round) starts as soon as
the previous one completes. Latency samples are pushed per request; when the
window is full, or the next batch would overflow it, one control period ends:
a MetricsRecord is emitted, the controller decides, and the window is cleared.
"""
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from dnn_scaler.catalog import Catalog, load_catalog, load_latency_rows
from dnn_scaler.config import ControllerSettings
from dnn_scaler.controllers import (
    ClipperController,
    Controller,
    DnnScalerBatching,
    DnnScalerMultiTenancy,
    StaticController,
)
from dnn_scaler.domain import throughput_improvement, weighted_percentile
from dnn_scaler.errors import ConfigError, DnnScalerError
from dnn_scaler.perfmodel import SimulatedGpu
from dnn_scaler.profiler import decide, profile
from dnn_scaler.scaler import band, mt_init
from dnn_scaler.schemas import (
    Approach,
    BandVerdict,
    CatalogEntry,
    ComparisonRow,
    ComparisonTable,
    ControllerKind,
    JobFailure,
    JobSpec,
    JobSummary,
    JobTrace,
    Knob,
    KnobKind,
    MetricsRecord,
    ProfileReport,
    Scenario,
    ScenarioResult,
    SweepPoint,
)

logger = logging.getLogger(__name__)


def make_rng(seed: int, job_id: int) -> np.random.Generator:
    """Per-job generator; independent of the order in which jobs run."""
    return np.random.default_rng(np.random.SeedSequence([seed, job_id]))


@dataclass
class _Tally:
    """Running counters of one job."""
    served: int = 0  # requests served under control (profiling excluded)
    within: int = 0
    transition_ms: float = 0.0
    latencies: Counter = field(default_factory=Counter)  # latency -> requests served at it
    change_after: List[int] = field(default_factory=list)  # record indices followed by a knob change
    slo_steps: List[int] = field(default_factory=list)  # record index at which each SLO step took effect

    def observe(self, latencies: Sequence[float], per_sample: int, slo: float) -> int:
        within = sum(per_sample for lat in latencies if lat <= slo)
        for lat in latencies:
            self.latencies[lat] += per_sample
        self.served += per_sample * len(latencies)
        self.within += within
        return within


def _launch(backend: SimulatedGpu, target: int, tally: _Tally, slo: float) -> None:
    while backend.mtl < target:
        change = backend.apply_instance_change(+1)
        tally.transition_ms += change.cost_ms
        tally.served += change.items
        tally.within += change.items if change.latency_ms <= slo else 0


def _build_controller(kind: ControllerKind, spec: JobSpec, entry: CatalogEntry, settings: ControllerSettings,
                      backend: SimulatedGpu, rng: np.random.Generator, catalog: Catalog,
                      static_knob: Optional[Knob], catalog_rows: Optional[List[List[float]]],
                      tally: _Tally) -> Tuple[Controller, Optional[ProfileReport]]:
    if kind is ControllerKind.CLIPPER:
        return ClipperController(settings), None
    if kind is ControllerKind.STATIC:
        if static_knob is None:
            raise ConfigError("controller 'static' requires a static knob")
        if static_knob.kind is KnobKind.MULTI_TENANCY:
            if static_knob.value > settings.max_mtl:
                raise ConfigError(f"static MTL {static_knob.value} exceeds max_mtl {settings.max_mtl}")
            # Fixed knobs start already deployed
            backend.mtl = static_knob.value
        elif static_knob.value > settings.abs_max_bs:
            raise ConfigError(f"static BS {static_knob.value} exceeds abs_max_bs {settings.abs_max_bs}")
        return StaticController(settings, static_knob), None

    # 1️⃣ Profile once and choose the approach
    report = profile(backend, entry, settings.m, settings.n, settings.batches_per_point, rng)
    tally.transition_ms += report.elapsed_s * 1000.0
    approach = decide(report, settings.eps)
    logger.info(f"run_job: job {spec.job_id} ({entry.id}/{entry.dataset_tag}) uses {approach.value}")
    if approach is Approach.BATCHING:
        return DnnScalerBatching(settings), report

    # 2️⃣ Seed the MTL from matrix completion, then launch the instances
    rows = catalog_rows if catalog_rows is not None else catalog.latency_rows(settings, settings.max_mtl,
                                                                              exclude=entry.key)
    if rows:
        initial = mt_init({1: report.lat_base, settings.n: report.lat_mt}, rows, spec.slo, settings.max_mtl,
                          rank=settings.rank, max_iters=settings.max_iters, tol=settings.tol, ridge=settings.ridge)
    else:
        logger.warning(f"run_job: no reference latency rows for job {spec.job_id}; starting at MTL 1")
        initial = 1
    _launch(backend, initial, tally, spec.slo)
    return DnnScalerMultiTenancy(settings, initial_mtl=initial), report


def run_job(spec: JobSpec, settings: ControllerSettings, catalog: Catalog,
            controller: ControllerKind = ControllerKind.DNNSCALER, rng: Optional[np.random.Generator] = None,
            static_knob: Optional[Knob] = None, catalog_rows: Optional[List[List[float]]] = None,
            seed: int = 42) -> JobTrace:
    """
    Run one job for ``spec.duration`` simulated seconds under a controller.

    Args:
        spec: The job.
        settings: Controller and simulator constants.
        catalog: Calibration catalog holding the job's DNN.
        controller: Which controller drives the knob.
        rng: Random stream; derived from (seed, job_id) when omitted.
        static_knob: Knob for the static controller.
        catalog_rows: Reference latency rows for matrix completion; the
            catalog's other rows are used when omitted.

    Returns:
        JobTrace with one record per control period and the job summary.

    Raises:
        UnknownDnnError: the DNN is not in the catalog (nothing runs).
        ConfigError: zero duration.
    """
    entry = catalog.get(spec.dnn_id, spec.dataset_tag)
    if spec.duration <= 0:
        raise ConfigError("zero duration", error_type="zero_duration", error_data={"job_id": spec.job_id})
    rng = rng if rng is not None else make_rng(seed, spec.job_id)

    backend = SimulatedGpu(catalog.models(entry, settings), max_mtl=settings.max_mtl,
                           abs_max_bs=settings.abs_max_bs)
    tally = _Tally()
    ctl, report = _build_controller(controller, spec, entry, settings, backend, rng, catalog,
                                    static_knob, catalog_rows, tally)

    duration_ms = spec.duration * 1000.0
    slo = spec.slo
    schedule = deque(spec.slo_schedule)
    records: List[MetricsRecord] = []
    window = ctl.window

    period_start, period_items, period_energy = backend.clock_ms, backend.items, backend.energy_j
    period_within = 0
    while backend.clock_ms < duration_ms:
        # 3️⃣ Apply SLO steps that are due
        while schedule and schedule[0].time * 1000.0 <= backend.clock_ms:
            step = schedule.popleft()
            tally.slo_steps.append(len(records))
            if step.slo != slo:
                logger.info(f"run_job: job {spec.job_id} SLO {slo} -> {step.slo} ms at {backend.clock_ms / 1000:.1f}s")
                slo = step.slo
                ctl.on_slo_change()

        # 4️⃣ Serve one batch or one MT round
        knob = ctl.knob
        if knob.kind is KnobKind.BATCHING:
            latency = backend.serve_batch(knob.value, rng)
            window.push_many([latency] * knob.value)
            period_within += tally.observe([latency], knob.value, slo)
        else:
            latencies = backend.serve_round(rng)
            window.push_many(latencies.tolist())
            period_within += tally.observe(latencies.tolist(), 1, slo)

        if len(window) < window.capacity and len(window) + knob.value <= window.capacity:
            continue

        # 5️⃣ Close the control period
        elapsed_ms = backend.clock_ms - period_start
        items = backend.items - period_items
        p95 = window.p95()
        records.append(MetricsRecord(
            time=backend.clock_ms / 1000.0,
            job_id=spec.job_id,
            knob=knob,
            p95=p95,
            mean_latency=window.mean(),
            throughput=items * 1000.0 / elapsed_ms,
            power=(backend.energy_j - period_energy) * 1000.0 / elapsed_ms,
            slo=slo,
            violated=p95 > slo,
            verdict=band(p95, slo, settings.alpha),
            items=items,
            span_s=elapsed_ms / 1000.0,
            within_slo=period_within,
        ))
        new_knob = ctl.decide(p95, slo)
        window.clear()
        if new_knob is not None:
            tally.change_after.append(len(records) - 1)
            if new_knob.kind is KnobKind.MULTI_TENANCY:
                change = backend.apply_instance_change(new_knob.value - knob.value)
                tally.transition_ms += change.cost_ms
                tally.served += change.items
                tally.within += change.items if change.latency_ms <= slo else 0
            logger.debug(f"run_job: job {spec.job_id} {knob} -> {new_knob} at {backend.clock_ms / 1000:.2f}s")
        period_start, period_items, period_energy = backend.clock_ms, backend.items, backend.energy_j
        period_within = 0

    summary = _summarize(spec, entry, ctl, backend, tally, records, report, settings.alpha)
    logger.info(f"run_job: job {spec.job_id} {ctl.kind.value} done: {summary.avg_throughput:.2f} items/s, "
                f"steady {summary.steady_knob}, {len(records)} periods")
    return JobTrace(records=records, summary=summary)


def _readaptation(records: List[MetricsRecord], steps: List[int]) -> List[Optional[int]]:
    """Periods from each SLO step to the first InBand verdict (0 = the first period after it)."""
    out: List[Optional[int]] = []
    for start in steps:
        hit = next((i - start for i in range(start, len(records)) if records[i].verdict is BandVerdict.IN_BAND), None)
        out.append(hit)
    return out


def _summarize(spec: JobSpec, entry: CatalogEntry, ctl: Controller, backend: SimulatedGpu, tally: _Tally,
               records: List[MetricsRecord], report: Optional[ProfileReport], alpha: float) -> JobSummary:
    total_s = backend.clock_ms / 1000.0
    avg_throughput = backend.items / total_s
    avg_power = backend.energy_j / total_s

    # Records after the last knob change; empty when the final decision still moved the knob
    settle_index = tally.change_after[-1] + 1 if tally.change_after else 0
    steady = records[settle_index:]
    steady_items = sum(r.items for r in steady)
    steady_span = math.fsum(r.span_s for r in steady)
    settled = steady_span > 0
    compliance = (sum(r.within_slo for r in steady) / steady_items) if steady_items else (
        tally.within / tally.served if tally.served else 0.0)

    return JobSummary(
        job_id=spec.job_id,
        dnn_id=entry.id,
        dataset_tag=entry.dataset_tag,
        controller=ctl.kind,
        approach=ctl.approach,
        avg_throughput=avg_throughput,
        p95_overall=weighted_percentile(list(tally.latencies), list(tally.latencies.values()), 0.95)
        if tally.latencies else None,
        slo_compliance_fraction=compliance,
        overall_compliance=tally.within / tally.served if tally.served else 0.0,
        avg_power=avg_power,
        power_efficiency=avg_throughput / avg_power,
        steady_knob=ctl.knob,
        steady_throughput=steady_items / steady_span if settled else None,
        settled=settled,
        decisions_to_settle=settle_index,
        total_items=backend.items,
        total_time_s=total_s,
        transition_s=tally.transition_ms / 1000.0,
        infeasible=ctl.infeasible,
        readaptation_periods=_readaptation(records, tally.slo_steps),
        profile=report,
    )


def compare(dnnscaler: Sequence[JobTrace], clipper: Sequence[JobTrace]) -> ComparisonTable:
    """Per-job DNNScaler vs Clipper throughput and power efficiency, matched by job id."""
    by_id = {t.summary.job_id: t.summary for t in clipper}
    rows: List[ComparisonRow] = []
    for trace in dnnscaler:
        ds = trace.summary
        cl = by_id.get(ds.job_id)
        if cl is None:
            continue
        rows.append(ComparisonRow(
            job_id=ds.job_id,
            dnn_id=ds.dnn_id,
            approach=ds.approach,
            dnnscaler_throughput=ds.avg_throughput,
            clipper_throughput=cl.avg_throughput,
            throughput_improvement=throughput_improvement(ds.avg_throughput, cl.avg_throughput),
            dnnscaler_power=ds.avg_power,
            clipper_power=cl.avg_power,
            dnnscaler_efficiency=ds.power_efficiency,
            clipper_efficiency=cl.power_efficiency,
            efficiency_improvement=throughput_improvement(ds.power_efficiency, cl.power_efficiency),
        ))

    def _mean(values: List[float]) -> Optional[float]:
        return math.fsum(values) / len(values) if values else None

    mt_rows = [r for r in rows if r.approach is KnobKind.MULTI_TENANCY]
    return ComparisonTable(
        rows=rows,
        average_improvement=_mean([r.throughput_improvement for r in rows]),
        average_mt_improvement=_mean([r.throughput_improvement for r in mt_rows]),
        average_efficiency_improvement=_mean([r.efficiency_improvement for r in rows]),
    )


def scenario_settings(scenario: Scenario, base: Optional[ControllerSettings] = None) -> ControllerSettings:
    return (base or ControllerSettings()).with_overrides(**scenario.overrides.model_dump())


def run_scenario(scenario: Scenario, settings: Optional[ControllerSettings] = None,
                 catalog: Optional[Catalog] = None, workers: int = 1) -> ScenarioResult:
    """
    Run every job of the scenario under each requested controller.

    Each job gets its own generator from (scenario seed, job id), so results do
    not depend on ``workers``. A failing job is reported in ``failures`` and
    does not stop the others.
    """
    if not scenario.jobs:
        raise ConfigError("the scenario has no jobs", error_type="empty_scenario")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    settings = scenario_settings(scenario, settings)
    catalog = catalog if catalog is not None else load_catalog(scenario.catalog_path)
    rows = load_latency_rows(scenario.latency_rows_path, settings.max_mtl) if scenario.latency_rows_path else None

    tasks = [(kind, job) for kind in scenario.controllers for job in scenario.jobs]

    def _one(task: Tuple[ControllerKind, JobSpec]):
        kind, job = task
        try:
            return run_job(job, settings, catalog, controller=kind, rng=make_rng(scenario.seed, job.job_id),
                           static_knob=scenario.static_knob, catalog_rows=rows)
        except DnnScalerError as e:
            logger.warning(f"run_scenario: job {job.job_id} under {kind.value} failed: {e.diagnostics}")
            return JobFailure(job_id=job.job_id, controller=kind, error=e.error_type, diagnostics=e.diagnostics)

    if workers == 1:
        outcomes = [_one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one, tasks))

    traces: Dict[ControllerKind, List[JobTrace]] = {kind: [] for kind in scenario.controllers}
    failures: List[JobFailure] = []
    for (kind, _), outcome in zip(tasks, outcomes):
        if isinstance(outcome, JobFailure):
            failures.append(outcome)
        else:
            traces[kind].append(outcome)

    comparison = None
    if ControllerKind.DNNSCALER in traces and ControllerKind.CLIPPER in traces:
        comparison = compare(traces[ControllerKind.DNNSCALER], traces[ControllerKind.CLIPPER])
    return ScenarioResult(traces=traces, failures=failures, comparison=comparison)


def sensitivity(spec: JobSpec, settings: ControllerSettings, catalog: Catalog,
                rng: Optional[np.random.Generator] = None, seed: int = 42) -> JobTrace:
    """DNNScaler run of a job whose SLO changes mid-run."""
    if not spec.slo_schedule:
        raise ConfigError(f"job {spec.job_id} has no slo_schedule")
    return run_job(spec, settings, catalog, ControllerKind.DNNSCALER, rng=rng, seed=seed)


def combination_sweep(catalog: Catalog, entry: CatalogEntry, settings: ControllerSettings,
                      bs_list: Sequence[int], mtl_list: Sequence[int], seed: int = 42,
                      rounds: int = 20) -> List[SweepPoint]:
    """
    Measure every (bs, mtl) pair with k instances each serving batches of bs.

    Measurement only; no controller is involved.
    """
    if not bs_list or not mtl_list:
        raise ConfigError("sweep needs non-empty batch-size and MTL lists")
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    models = catalog.models(entry, settings)
    points: List[SweepPoint] = []
    for bs in bs_list:
        for k in mtl_list:
            if bs < 1 or k < 1:
                raise ConfigError(f"batch sizes and MTLs must be >= 1, got bs={bs}, mtl={k}")
            rng = np.random.default_rng(np.random.SeedSequence([seed, bs, k]))
            backend = SimulatedGpu(models, max_mtl=max(k, settings.max_mtl), abs_max_bs=max(bs, settings.abs_max_bs))
            samples = np.concatenate([backend.serve_combined(bs, k, rng) for _ in range(rounds)])
            total_s = backend.clock_ms / 1000.0
            points.append(SweepPoint(
                bs=bs,
                mtl=k,
                throughput=backend.items / total_s,
                p95=weighted_percentile(samples.tolist(), [bs] * samples.size, 0.95),
                mean_latency=float(samples.mean()),
                power=backend.energy_j / total_s,
            ))
    logger.info(f"combination_sweep: {entry.id} {len(points)} points")
    return points

