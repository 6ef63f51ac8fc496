from dnn_scaler.controllers import ClipperController, DnnScalerBatching, DnnScalerMultiTenancy, StaticController
from dnn_scaler.schemas import ControllerKind, Knob, KnobKind


def test_batching_controller_follows_search(settings):
    ctl = DnnScalerBatching(settings)
    assert ctl.knob == Knob.batching(1)
    assert ctl.approach is KnobKind.BATCHING
    assert ctl.decide(27.0, 419.0) == Knob.batching(65)
    assert ctl.decide(538.0, 419.0) == Knob.batching(33)
    assert ctl.decide(400.0, 419.0) is None
    assert ctl.knob == Knob.batching(33)


def test_batching_controller_reports_infeasible(settings):
    ctl = DnnScalerBatching(settings)
    assert ctl.decide(500.0, 100.0) is None
    assert ctl.infeasible
    ctl.on_slo_change()
    assert not ctl.infeasible


def test_mt_controller_adds_and_removes(settings):
    ctl = DnnScalerMultiTenancy(settings, initial_mtl=3)
    assert ctl.knob == Knob.multi_tenancy(3)
    assert ctl.decide(10.0, 100.0) == Knob.multi_tenancy(4)
    assert ctl.decide(120.0, 100.0) == Knob.multi_tenancy(3)
    # Guarded after the removal
    assert ctl.decide(10.0, 100.0) is None
    ctl.on_slo_change()
    assert ctl.decide(10.0, 100.0) == Knob.multi_tenancy(4)


def test_clipper_controller(settings):
    ctl = ClipperController(settings)
    assert ctl.kind is ControllerKind.CLIPPER
    assert ctl.decide(10.0, 100.0) == Knob.batching(5)
    assert ctl.window.capacity == settings.window


def test_static_controller_never_moves(settings):
    ctl = StaticController(settings, Knob.multi_tenancy(4))
    assert ctl.approach is KnobKind.MULTI_TENANCY
    assert ctl.decide(1000.0, 10.0) is None
    assert ctl.decide(1.0, 10.0) is None
    assert ctl.knob == Knob.multi_tenancy(4)
