"""
Uniform controller interface used by the harness.

Each controller owns its latency window and current knob; ``decide`` is called
once per control period and returns the new knob when it changes.
"""
from abc import ABC, abstractmethod
from typing import Optional
import logging

from dnn_scaler.baseline import ClipperState, clipper_step
from dnn_scaler.config import ControllerSettings
from dnn_scaler.domain import LatencyWindow
from dnn_scaler.scaler import (
    BatchScalerState,
    MtAction,
    MtScalerState,
    batch_on_slo_change,
    batch_step,
    mt_on_slo_change,
    mt_step,
)
from dnn_scaler.schemas import ControllerKind, Knob, KnobKind

logger = logging.getLogger(__name__)


class Controller(ABC):
    kind: ControllerKind
    approach: Optional[KnobKind] = None

    @property
    @abstractmethod
    def knob(self) -> Knob:
        ...

    @property
    @abstractmethod
    def window(self) -> LatencyWindow:
        ...

    @property
    def infeasible(self) -> bool:
        return False

    @abstractmethod
    def decide(self, p95: float, slo: float) -> Optional[Knob]:
        """Take one control decision; returns the new knob, or None when it is kept."""

    def on_slo_change(self) -> None:
        """Called when the job's SLO changes."""


class DnnScalerBatching(Controller):
    kind = ControllerKind.DNNSCALER
    approach = KnobKind.BATCHING

    def __init__(self, settings: ControllerSettings):
        self.alpha = settings.alpha
        self.state = BatchScalerState(current_bs=1, min_bs=1, max_bs=settings.abs_max_bs,
                                      abs_max_bs=settings.abs_max_bs, window=LatencyWindow(settings.window))

    @property
    def knob(self) -> Knob:
        return Knob.batching(self.state.current_bs)

    @property
    def window(self) -> LatencyWindow:
        return self.state.window

    @property
    def infeasible(self) -> bool:
        return self.state.infeasible

    def decide(self, p95: float, slo: float) -> Optional[Knob]:
        self.state, new_bs = batch_step(self.state, p95, slo, self.alpha)
        return None if new_bs is None else Knob.batching(new_bs)

    def on_slo_change(self) -> None:
        self.state = batch_on_slo_change(self.state)


class DnnScalerMultiTenancy(Controller):
    kind = ControllerKind.DNNSCALER
    approach = KnobKind.MULTI_TENANCY

    def __init__(self, settings: ControllerSettings, initial_mtl: int = 1):
        self.alpha = settings.alpha
        self.state = MtScalerState(mtl=initial_mtl, max_mtl=settings.max_mtl, window=LatencyWindow(settings.window))

    @property
    def knob(self) -> Knob:
        return Knob.multi_tenancy(self.state.mtl)

    @property
    def window(self) -> LatencyWindow:
        return self.state.window

    @property
    def infeasible(self) -> bool:
        return self.state.infeasible

    def decide(self, p95: float, slo: float) -> Optional[Knob]:
        self.state, action = mt_step(self.state, p95, slo, self.alpha)
        return None if action is MtAction.HOLD else Knob.multi_tenancy(self.state.mtl)

    def on_slo_change(self) -> None:
        self.state = mt_on_slo_change(self.state)


class ClipperController(Controller):
    kind = ControllerKind.CLIPPER
    approach = KnobKind.BATCHING

    def __init__(self, settings: ControllerSettings):
        self.state = ClipperState(current_bs=1, step=settings.clipper_step, backoff=settings.clipper_backoff,
                                  abs_max_bs=settings.abs_max_bs, window=LatencyWindow(settings.window))

    @property
    def knob(self) -> Knob:
        return Knob.batching(self.state.current_bs)

    @property
    def window(self) -> LatencyWindow:
        return self.state.window

    def decide(self, p95: float, slo: float) -> Optional[Knob]:
        self.state, new_bs = clipper_step(self.state, p95, slo)
        return None if new_bs is None else Knob.batching(new_bs)


class StaticController(Controller):
    """Holds a fixed knob for the whole job."""
    kind = ControllerKind.STATIC

    def __init__(self, settings: ControllerSettings, knob: Knob):
        self._knob = knob
        self._window = LatencyWindow(settings.window)
        self.approach = knob.kind

    @property
    def knob(self) -> Knob:
        return self._knob

    @property
    def window(self) -> LatencyWindow:
        return self._window

    def decide(self, p95: float, slo: float) -> Optional[Knob]:
        return None
