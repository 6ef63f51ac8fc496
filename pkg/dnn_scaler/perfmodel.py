"""
Analytic stand-in for a GPU serving one DNN.

Batching: every request of a batch of size bs sees latency (a + b*bs)*noise.
Multi-tenancy: k instances at batch size 1 each see l1*max(1, k/c)*noise,
so aggregate throughput is (1000/l1)*min(k, c) items/s.
Noise is multiplicative lognormal, exp(sigma*z) with z drawn from the
caller's numpy Generator.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple
import logging
import math

import numpy as np

from dnn_scaler.errors import CalibrationError, PerfModelError
from dnn_scaler.schemas import Knob, KnobKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchingModel:
    a: float  # fixed per-batch overhead, ms
    b: float  # marginal cost per item, ms
    sigma: float = 0.05

    def mean_latency(self, bs: int) -> float:
        return self.a + self.b * bs

    def throughput(self, bs: int) -> float:
        return bs * 1000.0 / self.mean_latency(bs)


@dataclass(frozen=True)
class MtModel:
    l1: float  # single-instance latency, ms
    capacity: float  # instances sustained before time-sharing
    sigma: float = 0.05
    launch_delay: float = 500.0
    terminate_delay: float = 100.0

    def mean_latency(self, k: int) -> float:
        return self.l1 * max(1.0, k / self.capacity)

    def throughput(self, k: int) -> float:
        return k * 1000.0 / self.mean_latency(k)


@dataclass(frozen=True)
class PowerModel:
    p_idle: float = 50.0
    p_max: float = 250.0
    u1: float = 0.1
    batching_slope: float = 1.0

    def __post_init__(self):
        if not 0 < self.p_idle < self.p_max:
            raise PerfModelError(f"power model needs 0 < p_idle < p_max, got {self.p_idle}, {self.p_max}",
                                 error_type="invalid_argument")
        if not 0 < self.u1 <= 1:
            raise PerfModelError(f"u1 must be in (0, 1], got {self.u1}", error_type="invalid_argument")


@dataclass(frozen=True)
class DnnModels:
    """The three calibrated models of one catalog entry."""
    batching: BatchingModel
    mt: MtModel
    power: PowerModel


def _check_points(points: Iterable[Tuple[int, float]]) -> list:
    pts = [(int(x), float(t)) for x, t in points]
    for x, t in pts:
        if x < 1 or t <= 0:
            raise CalibrationError(f"calibration point ({x}, {t}) needs knob >= 1 and throughput > 0",
                                   error_type="invalid_argument")
    return pts


def calibrate_batching(points: Iterable[Tuple[int, float]], sigma: float = 0.05) -> BatchingModel:
    """
    Fit latency(bs) = a + b*bs to measured (batch_size, throughput) points.

    Each point gives latency = bs*1000/throughput ms. Two points are solved
    exactly, more points by least squares.

    Raises:
        CalibrationError: fewer than two distinct batch sizes, or a fit with
            a < 0 or b <= 0.
    """
    pts = _check_points(points)
    if len({bs for bs, _ in pts}) < 2:
        raise CalibrationError(f"singular system: need two distinct batch sizes, got {[bs for bs, _ in pts]}")
    bs = np.array([p[0] for p in pts], dtype=float)
    lat = bs * 1000.0 / np.array([p[1] for p in pts], dtype=float)
    design = np.column_stack([np.ones_like(bs), bs])
    (a, b), *_ = np.linalg.lstsq(design, lat, rcond=None)
    # Exact fits can land a hair below zero
    if abs(a) < 1e-9:
        a = 0.0
    if b <= 0 or a < 0:
        raise CalibrationError(f"points imply a={a:.4f} ms, b={b:.4f} ms; need a >= 0 and b > 0")
    return BatchingModel(a=float(a), b=float(b), sigma=sigma)


def calibrate_mt(points: Iterable[Tuple[int, float]], sigma: float = 0.05,
                 launch_delay: float = 500.0, terminate_delay: float = 100.0) -> MtModel:
    """l1 from the MTL=1 point; capacity from the largest measured MTL, clamped to [1, n]."""
    pts = dict(_check_points(points))
    if 1 not in pts:
        raise CalibrationError("missing mtl=1 point", error_type="invalid_argument")
    n = max(pts)
    if n == 1:
        raise CalibrationError("need a point with mtl > 1", error_type="invalid_argument")
    capacity = min(max(pts[n] / pts[1], 1.0), float(n))
    return MtModel(l1=1000.0 / pts[1], capacity=capacity, sigma=sigma,
                   launch_delay=launch_delay, terminate_delay=terminate_delay)


def _noise(sigma: float, rng: np.random.Generator, size: Optional[int] = None):
    # Always draw so the stream position does not depend on sigma
    z = rng.standard_normal(size)
    return np.exp(sigma * z)


def batch_latency(m: BatchingModel, bs: int, rng: np.random.Generator) -> float:
    if bs < 1:
        raise PerfModelError(f"batch size must be >= 1, got {bs}")
    return float(m.mean_latency(bs) * _noise(m.sigma, rng))


def mt_latency(m: MtModel, k: int, rng: np.random.Generator) -> float:
    if k < 1:
        raise PerfModelError(f"MTL must be >= 1, got {k}")
    return float(m.mean_latency(k) * _noise(m.sigma, rng))


def mt_round(m: MtModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """One latency per co-located instance."""
    if k < 1:
        raise PerfModelError(f"MTL must be >= 1, got {k}")
    return m.mean_latency(k) * _noise(m.sigma, rng, size=k)


def combined_round(models: DnnModels, bs: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k instances each serving batches of bs: (a + b*bs)*max(1, k/c) per instance."""
    if bs < 1 or k < 1:
        raise PerfModelError(f"batch size and MTL must be >= 1, got bs={bs}, k={k}")
    base = models.batching.mean_latency(bs) * max(1.0, k / models.mt.capacity)
    return base * _noise(models.batching.sigma, rng, size=k)


def utilization(pm: PowerModel, knob: Knob, model: Optional[BatchingModel] = None) -> float:
    """SM utilization fraction for a knob setting, saturating at 1."""
    if knob.kind is KnobKind.MULTI_TENANCY:
        return min(1.0, knob.value * pm.u1)
    if model is None:
        raise PerfModelError("batching utilization needs the batching model", error_type="invalid_argument")
    busy = model.b * knob.value / model.mean_latency(knob.value)
    return min(1.0, pm.u1 * busy * pm.batching_slope)


def power(pm: PowerModel, u: float) -> float:
    if not 0 <= u <= 1:
        raise PerfModelError(f"utilization must be in [0, 1], got {u}")
    return pm.p_idle + (pm.p_max - pm.p_idle) * u


@dataclass(frozen=True)
class InstanceChange:
    """Outcome of launching or terminating one instance."""
    cost_ms: float
    items: int  # served at the pre-change rate during the delay
    latency_ms: float  # noise-free pre-change latency of those items


class SimulatedGpu:
    """
    Backend owning one simulated GPU for a single job.

    Tracks the simulated clock, served items, energy and the number of
    running instances. Every serve call advances the clock by the work's
    elapsed time.
    """

    def __init__(self, models: DnnModels, max_mtl: int = 10, abs_max_bs: int = 128):
        self.models = models
        self.max_mtl = max_mtl
        self.abs_max_bs = abs_max_bs
        self.mtl = 1
        self.clock_ms = 0.0
        self.items = 0
        self.energy_j = 0.0

    def _account(self, knob: Knob, elapsed_ms: float, items: int) -> float:
        watts = power(self.models.power, utilization(self.models.power, knob, self.models.batching))
        self.clock_ms += elapsed_ms
        self.items += items
        self.energy_j += watts * elapsed_ms / 1000.0
        return watts

    def serve_batch(self, bs: int, rng: np.random.Generator) -> float:
        """Run one batch; every request in it observes the returned latency."""
        if bs > self.abs_max_bs:
            raise PerfModelError(f"batch size {bs} exceeds the maximum {self.abs_max_bs}")
        latency = batch_latency(self.models.batching, bs, rng)
        self._account(Knob.batching(bs), latency, bs)
        return latency

    def serve_round(self, rng: np.random.Generator, k: Optional[int] = None) -> np.ndarray:
        """One request on each of k instances (default: the running ones); elapsed = mean latency."""
        k = self.mtl if k is None else k
        latencies = mt_round(self.models.mt, k, rng)
        self._account(Knob.multi_tenancy(k), float(latencies.mean()), k)
        return latencies

    def serve_combined(self, bs: int, k: int, rng: np.random.Generator) -> np.ndarray:
        latencies = combined_round(self.models, bs, k, rng)
        elapsed = float(latencies.mean())
        # A single instance is plain batching; otherwise utilization follows the instance count
        knob = Knob.batching(bs) if k == 1 else Knob.multi_tenancy(k)
        self._account(knob, elapsed, bs * k)
        return latencies

    def apply_instance_change(self, delta: int) -> InstanceChange:
        """
        Launch (+1) or terminate (-1) an instance.

        The clock advances by the launch or terminate delay; requests keep
        completing at the pre-change rate while it elapses.

        Raises:
            PerfModelError: the resulting MTL leaves [1, max_mtl].
        """
        if delta == 0:
            return InstanceChange(cost_ms=0.0, items=0, latency_ms=0.0)
        if abs(delta) != 1:
            raise PerfModelError(f"instances change one at a time, got delta={delta}", error_type="invalid_argument")
        target = self.mtl + delta
        if not 1 <= target <= self.max_mtl:
            raise PerfModelError(f"MTL {self.mtl} -> {target} is outside [1, {self.max_mtl}]")
        mt = self.models.mt
        cost = mt.launch_delay if delta > 0 else mt.terminate_delay
        latency = mt.mean_latency(self.mtl)
        items = math.floor(cost / latency) * self.mtl
        self._account(Knob.multi_tenancy(self.mtl), cost, items)
        logger.debug(f"apply_instance_change: MTL {self.mtl} -> {target}, {cost:.0f} ms, {items} items in transit")
        self.mtl = target
        return InstanceChange(cost_ms=cost, items=items, latency_ms=latency)
