"""Pydantic models for dnn-scaler inputs, traces and reports.

Covers the calibration catalog, job/scenario files, per-period metrics,
profiling reports, job summaries and CLI error reports. File schemas are
strict (unknown fields rejected); see docs/SCHEMAS.md.
"""
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class KnobKind(str, Enum):
    """The two control knobs: batch size, or number of co-located instances."""
    BATCHING = "batching"
    MULTI_TENANCY = "multi_tenancy"


# The profiler's decision uses the same two values
Approach = KnobKind


class BandVerdict(str, Enum):
    """Where a tail latency falls relative to the [alpha*SLO, SLO] band."""
    BELOW = "below"
    IN_BAND = "in_band"
    ABOVE = "above"


class ControllerKind(str, Enum):
    DNNSCALER = "dnnscaler"
    CLIPPER = "clipper"
    STATIC = "static"


class Knob(BaseModel):
    """
    A control knob setting.

    kind: batching (value = batch size) or multi_tenancy (value = instances).
    value: positive integer; the upper bound is enforced by the backend.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: KnobKind
    value: int = Field(..., ge=1)

    @classmethod
    def batching(cls, bs: int) -> "Knob":
        return cls(kind=KnobKind.BATCHING, value=bs)

    @classmethod
    def multi_tenancy(cls, k: int) -> "Knob":
        return cls(kind=KnobKind.MULTI_TENANCY, value=k)

    def __str__(self) -> str:
        return f"BS={self.value}" if self.kind is KnobKind.BATCHING else f"MTL={self.value}"


class DnnProfile(BaseModel):
    """
    A DNN with its size and measured calibration points.

    param_count: parameters, in millions.
    flops: mega-FLOP per inference.
    batching_points: (batch_size, throughput items/s), must include batch_size=1.
    mt_points: (mtl, throughput items/s), must include mtl=1.
    """
    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    param_count: float = Field(..., gt=0)
    flops: float = Field(..., gt=0)
    batching_points: List[Tuple[int, float]]
    mt_points: List[Tuple[int, float]]

    @field_validator("batching_points", "mt_points")
    @classmethod
    def _positive_points(cls, points: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        for x, tput in points:
            if x < 1:
                raise ValueError(f"knob value must be >= 1, got {x}")
            if tput <= 0:
                raise ValueError(f"throughput must be > 0, got {tput}")
        return points

    @model_validator(mode="after")
    def _shared_base_point(self) -> "DnnProfile":
        base_b = dict(self.batching_points).get(1)
        base_mt = dict(self.mt_points).get(1)
        if base_b is None:
            raise ValueError("batching_points needs an entry for batch_size=1")
        if base_mt is None:
            raise ValueError("mt_points needs an entry for mtl=1")
        # BS=1 and MTL=1 are the same measurement
        if abs(base_b - base_mt) > 1e-9 * max(base_b, base_mt):
            raise ValueError(f"throughput at bs=1 ({base_b}) and mtl=1 ({base_mt}) must match")
        return self

    @property
    def base_throughput(self) -> float:
        return dict(self.batching_points)[1]


class CatalogEntry(DnnProfile):
    """Catalog row: a DnnProfile for one dataset, with optional model overrides."""
    dataset_tag: str = Field("default", min_length=1)
    sigma: Optional[float] = Field(None, ge=0, description="Per-DNN lognormal noise scale.")
    u1: Optional[float] = Field(None, gt=0, le=1, description="Utilization of one instance at BS=1.")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.id, self.dataset_tag)


class SloStep(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    time: float = Field(..., ge=0, description="Simulated seconds from job start.")
    slo: float = Field(..., gt=0, description="New p95 target in ms.")


class JobSpec(BaseModel):
    """One inference job: a DNN on a dataset with a p95 latency target."""
    model_config = ConfigDict(extra="forbid")

    job_id: int = Field(..., ge=0)
    dnn_id: str
    dataset_tag: str = "default"
    slo: float = Field(..., gt=0, description="95th-percentile latency target in ms.")
    duration: float = Field(..., ge=0, description="Simulated seconds.")
    slo_schedule: List[SloStep] = Field(default_factory=list)

    @model_validator(mode="after")
    def _schedule_order(self) -> "JobSpec":
        times = [step.time for step in self.slo_schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("slo_schedule times must be strictly increasing")
        if times and times[-1] >= self.duration:
            raise ValueError("slo_schedule times must be before the job duration")
        return self


class ScenarioOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: Optional[float] = None
    m: Optional[int] = None
    n: Optional[int] = None
    abs_max_bs: Optional[int] = None
    max_mtl: Optional[int] = None
    window: Optional[int] = None
    sigma: Optional[float] = None


class Scenario(BaseModel):
    """A set of jobs run under one or more controllers with a fixed seed."""
    model_config = ConfigDict(extra="forbid")

    jobs: List[JobSpec]
    controllers: List[ControllerKind] = Field(default_factory=lambda: [ControllerKind.DNNSCALER])
    static_knob: Optional[Knob] = None
    seed: int = Field(42, ge=0)
    catalog_path: Optional[str] = None
    latency_rows_path: Optional[str] = None
    overrides: ScenarioOverrides = Field(default_factory=ScenarioOverrides)

    @model_validator(mode="after")
    def _static_needs_knob(self) -> "Scenario":
        if ControllerKind.STATIC in self.controllers and self.static_knob is None:
            raise ValueError("controller 'static' requires static_knob")
        if len(set(self.controllers)) != len(self.controllers):
            raise ValueError("controllers must not repeat")
        return self


class MetricsRecord(BaseModel):
    """Measurements for one control period."""
    model_config = ConfigDict(frozen=True)

    time: float = Field(..., description="Simulated seconds at the end of the period.")
    job_id: int
    knob: Knob
    p95: float
    mean_latency: float
    throughput: float = Field(..., ge=0)
    power: float
    slo: float
    violated: bool
    verdict: BandVerdict
    items: int = Field(..., ge=0)
    span_s: float = Field(..., ge=0)
    within_slo: int = Field(..., ge=0)


class ProfileReport(BaseModel):
    """Profiler evidence: base and probe throughputs, improvements and probe latencies."""
    model_config = ConfigDict(frozen=True)

    base_throughput: float = Field(..., gt=0)
    tput_bs_m: float
    tput_mtl_n: float
    ti_b: float
    ti_mt: float
    lat_base: float
    lat_b: float
    lat_mt: float
    m: int
    n: int
    elapsed_s: float = 0.0


class JobSummary(BaseModel):
    job_id: int
    dnn_id: str
    dataset_tag: str
    controller: ControllerKind
    approach: Optional[KnobKind] = None
    avg_throughput: float
    p95_overall: Optional[float]
    slo_compliance_fraction: float = Field(..., ge=0, le=1)
    overall_compliance: float = Field(..., ge=0, le=1)
    avg_power: float
    power_efficiency: float
    steady_knob: Optional[Knob]
    steady_throughput: Optional[float]  # None when the knob was still moving at the end
    settled: bool
    decisions_to_settle: int
    total_items: int
    total_time_s: float
    transition_s: float
    infeasible: bool = False
    readaptation_periods: List[Optional[int]] = Field(default_factory=list)
    profile: Optional[ProfileReport] = None


class JobTrace(BaseModel):
    records: List[MetricsRecord]
    summary: JobSummary


class JobFailure(BaseModel):
    job_id: int
    controller: ControllerKind
    error: str
    diagnostics: str


class ComparisonRow(BaseModel):
    job_id: int
    dnn_id: str
    approach: Optional[KnobKind]
    dnnscaler_throughput: float
    clipper_throughput: float
    throughput_improvement: float
    dnnscaler_power: float
    clipper_power: float
    dnnscaler_efficiency: float
    clipper_efficiency: float
    efficiency_improvement: float


class ComparisonTable(BaseModel):
    rows: List[ComparisonRow]
    average_improvement: Optional[float]
    average_mt_improvement: Optional[float]
    average_efficiency_improvement: Optional[float]


class ScenarioResult(BaseModel):
    traces: Dict[ControllerKind, List[JobTrace]]
    failures: List[JobFailure] = Field(default_factory=list)
    comparison: Optional[ComparisonTable] = None


class SweepPoint(BaseModel):
    bs: int
    mtl: int
    throughput: float
    p95: float
    mean_latency: float
    power: float


class ErrorIssue(BaseModel):
    """
    A single issue attached to an error report.

    severity: issue severity (e.g., 'error', 'information').
    code: machine-readable issue code (e.g., 'missing').
    diagnostics: human-friendly explanation of the issue.
    details: optional structured details (e.g. the offending field path).
    """
    severity: Optional[str] = Field(None, description="Issue severity (e.g., 'error', 'information').")
    code: Optional[str] = Field(None, description="Machine-readable issue code.")
    diagnostics: Optional[str] = Field(None, description="Human-friendly explanation of the issue.")
    details: Optional[str] = Field(None, description="Optional structured details.")


class ErrorReport(BaseModel):
    """
    Top-level error report printed by the CLI.

    error: short error summary.
    friendly_message: plain-language explanation.
    next_steps: optional remediation guidance.
    exit_code: process exit code (1 runtime failure, 2 usage/config error).
    issues: list of ErrorIssue instances.
    """
    error: str = Field(..., description="Short, machine-readable error summary.")
    friendly_message: str = Field(..., description="Plain-language explanation.")
    next_steps: Optional[str] = Field(None, description="Suggestions for resolving the error.")
    exit_code: int = Field(..., description="Process exit code.")
    issues: List[ErrorIssue] = Field(default_factory=list, description="List of detailed issue objects.")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "error": "Unknown dnn",
                "friendly_message": "No calibration entry was found for DNN 'inc-v9' (dataset 'imagenet').",
                "next_steps": "Check the DNN id and dataset tag against the catalog.",
                "exit_code": 2,
                "issues": [
                    {"severity": "error", "code": "unknown_dnn", "diagnostics": "unknown DNN 'inc-v9'", "details": None}
                ],
            }
        }
    )
