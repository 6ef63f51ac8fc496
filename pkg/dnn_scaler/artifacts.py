"""CSV and JSON writers for run outputs. Outputs are byte-stable for a given seed."""
from pathlib import Path
from typing import Iterable, List, Sequence
import csv
import json
import logging

from pydantic import BaseModel

from dnn_scaler.errors import ConfigError
from dnn_scaler.schemas import ComparisonTable, JobTrace, SweepPoint

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "time_s", "job_id", "controller", "knob_kind", "knob_value", "p95_ms", "mean_ms",
    "throughput", "power_w", "slo_ms", "violated",
]
COMPARISON_COLUMNS = [
    "job_id", "dnn_id", "approach", "dnnscaler_throughput", "clipper_throughput", "throughput_improvement",
    "dnnscaler_power", "clipper_power", "dnnscaler_efficiency", "clipper_efficiency", "efficiency_improvement",
]
SWEEP_COLUMNS = ["bs", "mtl", "throughput", "p95_ms", "mean_ms", "power_w"]


def _f(value: float) -> str:
    return f"{value:.6f}"


def ensure_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory '{out_dir}': {e.strerror or e}") from e
    return path


def _write_csv(path: Path, columns: List[str], rows: Iterable[dict]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"_write_csv: wrote {path}")
    return path


def write_json(path: Path, payload) -> Path:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"write_json: wrote {path}")
    return path


def write_metrics_csv(path: Path, traces: Sequence[JobTrace]) -> Path:
    def rows():
        for trace in traces:
            for r in trace.records:
                yield {
                    "time_s": _f(r.time),
                    "job_id": r.job_id,
                    "controller": trace.summary.controller.value,
                    "knob_kind": r.knob.kind.value,
                    "knob_value": r.knob.value,
                    "p95_ms": _f(r.p95),
                    "mean_ms": _f(r.mean_latency),
                    "throughput": _f(r.throughput),
                    "power_w": _f(r.power),
                    "slo_ms": _f(r.slo),
                    "violated": int(r.violated),
                }
    return _write_csv(path, METRICS_COLUMNS, rows())


def write_summary_json(path: Path, traces: Sequence[JobTrace], failures: Sequence[BaseModel] = ()) -> Path:
    return write_json(path, {
        "jobs": [t.summary.model_dump(mode="json") for t in traces],
        "failures": [f.model_dump(mode="json") for f in failures],
    })


def write_comparison(out: Path, table: ComparisonTable) -> List[Path]:
    rows = ({
        "job_id": r.job_id,
        "dnn_id": r.dnn_id,
        "approach": r.approach.value if r.approach else "",
        **{c: _f(getattr(r, c)) for c in COMPARISON_COLUMNS[3:]},
    } for r in table.rows)
    return [write_json(out / "comparison.json", table), _write_csv(out / "comparison.csv", COMPARISON_COLUMNS, rows)]


def write_sweep_csv(path: Path, points: Sequence[SweepPoint]) -> Path:
    rows = ({
        "bs": p.bs,
        "mtl": p.mtl,
        "throughput": _f(p.throughput),
        "p95_ms": _f(p.p95),
        "mean_ms": _f(p.mean_latency),
        "power_w": _f(p.power),
    } for p in points)
    return _write_csv(path, SWEEP_COLUMNS, rows)
