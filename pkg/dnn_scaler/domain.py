"""Statistics shared by the profiler, scalers and harness."""
from collections import deque
from typing import Deque, Iterable, Sequence
import math

import numpy as np

from dnn_scaler.errors import StatisticsError


def percentile(samples: Sequence[float], q: float) -> float:
    """
    Nearest-rank percentile: the ceil(q*n)-th smallest sample.

    Args:
        samples: Latencies in ms; must be non-empty.
        q: Fraction in (0, 1].

    Returns:
        One of the input samples.
    """
    if len(samples) == 0:
        raise StatisticsError("no samples")
    if not 0 < q <= 1:
        raise StatisticsError(f"percentile fraction must be in (0, 1], got {q}", error_type="invalid_argument")
    ordered = sorted(samples)
    rank = max(1, math.ceil(q * len(ordered) - 1e-12))
    return ordered[rank - 1]


def weighted_percentile(values: Sequence[float], weights: Sequence[int], q: float) -> float:
    """Nearest-rank percentile of a multiset given as distinct values with integer counts."""
    if len(values) == 0 or sum(weights) == 0:
        raise StatisticsError("no samples")
    if not 0 < q <= 1:
        raise StatisticsError(f"percentile fraction must be in (0, 1], got {q}", error_type="invalid_argument")
    vals = np.asarray(values, dtype=float)
    order = np.argsort(vals, kind="stable")
    cumulative = np.cumsum(np.asarray(weights, dtype=np.int64)[order])
    rank = max(1, math.ceil(q * int(cumulative[-1]) - 1e-12))
    return float(vals[order][np.searchsorted(cumulative, rank)])


def throughput_improvement(t_new: float, t_base: float) -> float:
    """Percentage improvement of ``t_new`` over ``t_base``."""
    if t_base <= 0:
        raise StatisticsError("invalid baseline", error_type="invalid_baseline", error_data={"t_base": t_base})
    if t_new < 0:
        raise StatisticsError(f"throughput must be >= 0, got {t_new}", error_type="invalid_argument")
    return (t_new - t_base) / t_base * 100.0


class LatencyWindow:
    """Bounded FIFO of latency samples; the oldest sample is evicted on overflow."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise StatisticsError(f"window capacity must be >= 1, got {capacity}", error_type="invalid_argument")
        self.capacity = capacity
        self._samples: Deque[float] = deque(maxlen=capacity)

    def push(self, latency: float) -> None:
        self._samples.append(latency)

    def push_many(self, latencies: Iterable[float]) -> None:
        self._samples.extend(latencies)

    def clear(self) -> None:
        self._samples.clear()

    @property
    def samples(self) -> list:
        return list(self._samples)

    @property
    def full(self) -> bool:
        return len(self._samples) >= self.capacity

    def __len__(self) -> int:
        return len(self._samples)

    def p95(self) -> float:
        return percentile(self._samples, 0.95)

    def mean(self) -> float:
        if not self._samples:
            raise StatisticsError("no samples")
        return math.fsum(self._samples) / len(self._samples)
