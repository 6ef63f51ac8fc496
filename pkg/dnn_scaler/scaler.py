"""
Knob control for a running job.

Batching: pseudo-binary search over the batch size between min_bs and
max_bs. Multi-tenancy: start at the MTL suggested by matrix completion,
then add or remove one instance at a time. Both hold while the window's
p95 stays inside [alpha*SLO, SLO]. The batch search also holds when the
band holds no batch size.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple
import logging
import math

from dnn_scaler.domain import LatencyWindow
from dnn_scaler.errors import ScalerError
from dnn_scaler.matcomp import estimate_row, pick_mtl
from dnn_scaler.schemas import BandVerdict

logger = logging.getLogger(__name__)


class MtAction(str, Enum):
    HOLD = "hold"
    ADD = "add"
    REMOVE_LAST = "remove_last"


def band(p95: float, slo: float, alpha: float) -> BandVerdict:
    if slo <= 0:
        raise ScalerError(f"slo must be > 0, got {slo}")
    if not 0 < alpha < 1:
        raise ScalerError(f"alpha must be in (0, 1), got {alpha}")
    if p95 > slo:
        return BandVerdict.ABOVE
    if p95 < alpha * slo:
        return BandVerdict.BELOW
    return BandVerdict.IN_BAND


@dataclass(frozen=True)
class BatchScalerState:
    """
    Search bounds of the batch-size scaler; the window is cleared whenever the batch size changes.

    ceiling_hit: max_bs was measured Above under the current SLO.
    settled: the search holds, either in band or because no batch size lands in it.
    """
    current_bs: int = 1
    min_bs: int = 1
    max_bs: int = 128
    abs_max_bs: int = 128
    window: LatencyWindow = field(default_factory=lambda: LatencyWindow(100), compare=False, repr=False)
    infeasible: bool = False
    ceiling_hit: bool = False
    settled: bool = False

    def __post_init__(self):
        if not 1 <= self.min_bs <= self.current_bs <= self.max_bs <= self.abs_max_bs:
            raise ScalerError(f"need 1 <= min_bs <= current_bs <= max_bs <= abs_max_bs, got "
                              f"{self.min_bs}, {self.current_bs}, {self.max_bs}, {self.abs_max_bs}")


def batch_step(s: BatchScalerState, p95: float, slo: float,
               alpha: float) -> Tuple[BatchScalerState, Optional[int]]:
    """
    One decision of the pseudo-binary batch-size search.

    Returns:
        (new state, new batch size or None when the batch size is kept).
    """
    verdict = band(p95, slo, alpha)
    cur = s.current_bs
    if verdict is BandVerdict.IN_BAND:
        return replace(s, infeasible=False, settled=True), None

    if verdict is BandVerdict.BELOW:
        if cur >= s.abs_max_bs:
            return replace(s, infeasible=False, settled=True), None
        # A ceiling found under a tighter SLO must not block growth
        stale = cur >= s.max_bs
        max_bs = s.abs_max_bs if stale else s.max_bs
        ceiling_hit = s.ceiling_hit and not stale
        new_bs = math.ceil((cur + max_bs) / 2)
        if ceiling_hit and new_bs >= max_bs:
            # cur is Below and cur + 1 is Above: the band holds no batch size
            if not s.settled:
                logger.info(f"batch_step: no BS lands in [{alpha * slo:.2f}, {slo:.2f}] ms; holding BS {cur}")
            return replace(s, infeasible=False, settled=True), None
        new = replace(s, min_bs=cur, max_bs=max_bs, current_bs=new_bs, infeasible=False,
                      ceiling_hit=ceiling_hit, settled=False)
    else:
        if cur == 1:
            logger.warning(f"batch_step: p95 {p95:.2f} ms exceeds SLO {slo:.2f} ms at BS=1; "
                           f"further BS reduction is not possible")
            return replace(s, infeasible=True, settled=False), None
        if cur == s.min_bs:
            new = replace(s, min_bs=1, max_bs=cur, current_bs=(1 + cur) // 2, ceiling_hit=True, settled=False)
        else:
            new = replace(s, max_bs=cur, current_bs=(s.min_bs + cur) // 2, ceiling_hit=True, settled=False)

    s.window.clear()
    logger.debug(f"batch_step: {verdict.value} p95={p95:.2f} slo={slo:.2f}: BS {cur} -> {new.current_bs} "
                 f"[{new.min_bs}, {new.max_bs}]")
    return new, new.current_bs


def batch_on_slo_change(s: BatchScalerState) -> BatchScalerState:
    return replace(s, infeasible=False, ceiling_hit=False, settled=False)


@dataclass(frozen=True)
class MtScalerState:
    """
    Multi-tenancy scaler state.

    guard: armed by every RemoveLast; while armed a Below verdict holds. A
    non-Below verdict or an SLO change releases it.
    """
    mtl: int = 1
    max_mtl: int = 10
    window: LatencyWindow = field(default_factory=lambda: LatencyWindow(100), compare=False, repr=False)
    last_action: MtAction = MtAction.HOLD
    guard: bool = False
    infeasible: bool = False

    def __post_init__(self):
        if not 1 <= self.mtl <= self.max_mtl:
            raise ScalerError(f"need 1 <= mtl <= max_mtl, got {self.mtl}, {self.max_mtl}")


def mt_step(s: MtScalerState, p95: float, slo: float, alpha: float) -> Tuple[MtScalerState, MtAction]:
    """One AIMD decision: add an instance below the band, remove the last one above it."""
    verdict = band(p95, slo, alpha)
    if verdict is BandVerdict.IN_BAND:
        return replace(s, last_action=MtAction.HOLD, guard=False, infeasible=False), MtAction.HOLD

    if verdict is BandVerdict.BELOW:
        if s.guard or s.mtl >= s.max_mtl:
            return replace(s, last_action=MtAction.HOLD, infeasible=False), MtAction.HOLD
        new = replace(s, mtl=s.mtl + 1, last_action=MtAction.ADD, infeasible=False)
        action = MtAction.ADD
    else:
        if s.mtl == 1:
            logger.warning(f"mt_step: p95 {p95:.2f} ms exceeds SLO {slo:.2f} ms with a single instance")
            return replace(s, last_action=MtAction.HOLD, guard=False, infeasible=True), MtAction.HOLD
        new = replace(s, mtl=s.mtl - 1, last_action=MtAction.REMOVE_LAST, guard=True)
        action = MtAction.REMOVE_LAST

    s.window.clear()
    logger.debug(f"mt_step: {verdict.value} p95={p95:.2f} slo={slo:.2f}: {action.value} -> MTL {new.mtl}")
    return new, action


def mt_on_slo_change(s: MtScalerState) -> MtScalerState:
    return replace(s, guard=False, infeasible=False)


def mt_init(observed: Dict[int, float], catalog_rows: Sequence[Sequence[float]], slo: float, max_mtl: int,
            rank: int = 2, max_iters: int = 200, tol: float = 1e-8, ridge: float = 1e-6) -> int:
    """
    Starting MTL from the profiled latencies.

    Args:
        observed: Profiled per-request latencies keyed by MTL (e.g. {1: ..., 8: ...}).
        catalog_rows: Fully observed latency rows of other DNNs for MTL 1..max_mtl.
        slo: p95 target in ms.
        max_mtl: Largest allowed MTL.
    """
    estimates = estimate_row(catalog_rows, observed, max_mtl, rank=rank, max_iters=max_iters, tol=tol, ridge=ridge)
    mtl = pick_mtl(estimates, slo, max_mtl)
    logger.info(f"mt_init: estimates {[round(e, 2) for e in estimates]} -> MTL {mtl} for SLO {slo}")
    return mtl
