"""Clipper-style AIMD batch sizing used as the comparison baseline."""
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple
import logging
import math

from dnn_scaler.domain import LatencyWindow
from dnn_scaler.errors import ScalerError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClipperState:
    current_bs: int = 1
    step: int = 4
    backoff: float = 0.10
    abs_max_bs: int = 128
    window: LatencyWindow = field(default_factory=lambda: LatencyWindow(100), compare=False, repr=False)
    converged: bool = False

    def __post_init__(self):
        if not 1 <= self.current_bs <= self.abs_max_bs:
            raise ScalerError(f"need 1 <= current_bs <= {self.abs_max_bs}, got {self.current_bs}")


def clipper_step(s: ClipperState, p95: float, slo: float) -> Tuple[ClipperState, Optional[int]]:
    """
    Additive increase by ``step`` until the first violation, then back off by
    ``backoff`` and hold; later violations back off again.

    Returns:
        (new state, new batch size or None when unchanged).
    """
    if slo <= 0:
        raise ScalerError(f"slo must be > 0, got {slo}")
    cur = s.current_bs
    if p95 > slo:
        # 1e-9 absorbs binary rounding in bs*(1-backoff)
        new_bs = max(1, math.floor(cur * (1 - s.backoff) + 1e-9))
        new = replace(s, current_bs=new_bs, converged=True)
    elif not s.converged:
        new = replace(s, current_bs=min(cur + s.step, s.abs_max_bs))
    else:
        return s, None

    if new.current_bs == cur:
        return new, None
    s.window.clear()
    logger.debug(f"clipper_step: p95={p95:.2f} slo={slo:.2f}: BS {cur} -> {new.current_bs}")
    return new, new.current_bs
