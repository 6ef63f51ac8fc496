"""
Runtime probe choosing between Batching and Multi-Tenancy.

A few batches are run at BS=1, BS=m and MTL=n; the throughput improvements
of BS=m and MTL=n over the shared BS=1/MTL=1 baseline decide the approach.
"""
from typing import List
import logging
import math

import numpy as np

from dnn_scaler.domain import throughput_improvement
from dnn_scaler.errors import ProfilerError
from dnn_scaler.perfmodel import SimulatedGpu
from dnn_scaler.schemas import Approach, DnnProfile, ProfileReport

logger = logging.getLogger(__name__)


def _measure_batches(backend: SimulatedGpu, bs: int, count: int, rng: np.random.Generator):
    latencies: List[float] = [backend.serve_batch(bs, rng) for _ in range(count)]
    elapsed = math.fsum(latencies)
    return bs * count * 1000.0 / elapsed, elapsed / count


def _measure_rounds(backend: SimulatedGpu, k: int, count: int, rng: np.random.Generator):
    rounds = [backend.serve_round(rng, k=k) for _ in range(count)]
    elapsed = math.fsum(float(r.mean()) for r in rounds)
    return k * count * 1000.0 / elapsed, float(np.concatenate(rounds).mean())


def profile(backend: SimulatedGpu, dnn: DnnProfile, m: int, n: int, batches_per_point: int,
            rng: np.random.Generator) -> ProfileReport:
    """
    Measure throughput at BS=1, BS=m and MTL=n on the backend.

    MTL=1 is not measured separately; it is the same run as BS=1. The
    backend's clock is charged for every probe batch.

    Args:
        backend: Simulated GPU for the job.
        dnn: The DNN being probed (used for logging).
        m: Probe batch size, > 1.
        n: Probe multi-tenancy level, > 1.
        batches_per_point: Batches (or MT rounds) per probe point.
        rng: Job random stream.

    Returns:
        ProfileReport with throughputs, improvements and mean probe latencies.
    """
    if m <= 1 or n <= 1:
        raise ProfilerError(f"probe sizes must exceed 1, got m={m}, n={n}")
    if batches_per_point < 1:
        raise ProfilerError(f"batches_per_point must be >= 1, got {batches_per_point}")

    start_ms = backend.clock_ms
    base, lat_base = _measure_batches(backend, 1, batches_per_point, rng)
    tput_b, lat_b = _measure_batches(backend, m, batches_per_point, rng)
    tput_mt, lat_mt = _measure_rounds(backend, n, batches_per_point, rng)

    report = ProfileReport(
        base_throughput=base,
        tput_bs_m=tput_b,
        tput_mtl_n=tput_mt,
        ti_b=throughput_improvement(tput_b, base),
        ti_mt=throughput_improvement(tput_mt, base),
        lat_base=lat_base,
        lat_b=lat_b,
        lat_mt=lat_mt,
        m=m,
        n=n,
        elapsed_s=(backend.clock_ms - start_ms) / 1000.0,
    )
    logger.info(f"profile: {dnn.id} base={base:.2f}/s TI_B={report.ti_b:.2f}% TI_MT={report.ti_mt:.2f}% "
                f"in {report.elapsed_s:.2f}s")
    return report


def decide(report: ProfileReport, eps: float = 0.5) -> Approach:
    """Higher improvement wins; within eps percentage points the lower probe latency wins."""
    if report.ti_b > report.ti_mt + eps:
        return Approach.BATCHING
    if report.ti_mt > report.ti_b + eps:
        return Approach.MULTI_TENANCY
    return Approach.BATCHING if report.lat_b <= report.lat_mt else Approach.MULTI_TENANCY
