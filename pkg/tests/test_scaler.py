import numpy as np
import pytest

from dnn_scaler.domain import LatencyWindow
from dnn_scaler.errors import ScalerError
from dnn_scaler.matcomp import pick_mtl
from dnn_scaler.perfmodel import BatchingModel, MtModel
from dnn_scaler.scaler import (
    BatchScalerState,
    MtAction,
    MtScalerState,
    band,
    batch_on_slo_change,
    batch_step,
    mt_init,
    mt_on_slo_change,
    mt_step,
)
from dnn_scaler.schemas import BandVerdict

ALPHA = 0.85


def test_band_edges():
    assert band(100.0, 100.0, ALPHA) is BandVerdict.IN_BAND
    assert band(86.0, 100.0, ALPHA) is BandVerdict.IN_BAND
    assert band(84.9, 100.0, ALPHA) is BandVerdict.BELOW
    assert band(100.1, 100.0, ALPHA) is BandVerdict.ABOVE
    with pytest.raises(ScalerError):
        band(1.0, 0.0, ALPHA)
    with pytest.raises(ScalerError):
        band(1.0, 10.0, 1.0)


def _search(model, slo, state=None, limit=18):
    """Run the batch search on a noise-free model; returns (fixed point, decisions taken, visited sizes)."""
    state = state or BatchScalerState()
    visited = [state.current_bs]
    for decisions in range(1, limit + 1):
        state, new_bs = batch_step(state, model.mean_latency(state.current_bs), slo, ALPHA)
        if new_bs is None:
            return state, decisions, visited
        visited.append(new_bs)
    pytest.fail(f"no fixed point within {limit} decisions: {visited}")


def test_batch_search_job3_trajectory():
    state, _, visited = _search(BatchingModel(a=19.18, b=7.99, sigma=0.0), 419.0)
    assert visited == [1, 65, 33, 49]
    assert state.current_bs == 49


def test_batch_search_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        model = BatchingModel(a=float(rng.uniform(0.0, 30.0)), b=float(rng.uniform(0.2, 10.0)), sigma=0.0)
        target = int(rng.integers(1, 129))
        # Put the target batch size inside the band so the band is never empty
        slo = model.mean_latency(target) / float(rng.uniform(ALPHA + 0.005, 1.0))
        latencies = [model.mean_latency(bs) for bs in range(1, 129)]
        opt = max(bs for bs in range(1, 129) if latencies[bs - 1] <= slo)

        state, decisions, visited = _search(model, slo)
        fixed = state.current_bs
        assert decisions <= 18
        assert model.mean_latency(fixed) <= slo
        assert fixed <= opt
        if opt == 1 or ALPHA * slo > latencies[opt - 2]:
            assert fixed == opt, (model, slo, visited)


def test_batch_search_holds_when_band_is_empty(caplog):
    model = BatchingModel(a=19.18, b=7.99, sigma=0.0)
    # BS 1 is below [28.05, 33] and BS 2 is above it
    assert model.mean_latency(1) < ALPHA * 33.0 and model.mean_latency(2) > 33.0
    with caplog.at_level("INFO"):
        state, decisions, visited = _search(model, 33.0)
    assert visited == [1, 65, 33, 17, 9, 5, 3, 2, 1]
    assert decisions == 9
    assert state.current_bs == 1
    assert state.settled and state.ceiling_hit
    assert "holding BS 1" in caplog.text

    for _ in range(5):
        state, new_bs = batch_step(state, model.mean_latency(1), 33.0, ALPHA)
        assert new_bs is None
    assert state.current_bs == 1


def test_batch_search_empty_band_settles_on_largest_feasible():
    rng = np.random.default_rng(7)
    for _ in range(200):
        model = BatchingModel(a=float(rng.uniform(0.0, 30.0)), b=float(rng.uniform(0.2, 10.0)), sigma=0.0)
        slo = float(rng.uniform(model.mean_latency(1), model.mean_latency(128)))
        latencies = [model.mean_latency(bs) for bs in range(1, 129)]
        opt = max(bs for bs in range(1, 129) if latencies[bs - 1] <= slo)

        state, _, visited = _search(model, slo)
        assert latencies[state.current_bs - 1] <= slo
        assert state.settled
        if not any(ALPHA * slo <= lat <= slo for lat in latencies):
            assert state.current_bs == opt, (model, slo, visited)


def test_batch_slo_change_releases_empty_band_hold():
    model = BatchingModel(a=19.18, b=7.99, sigma=0.0)
    state, _, _ = _search(model, 33.0)
    assert state.current_bs == 1

    state = batch_on_slo_change(state)
    assert not state.settled and not state.ceiling_hit
    state, new_bs = batch_step(state, model.mean_latency(1), 60.0, ALPHA)
    assert new_bs == 2
    state, _, _ = _search(model, 60.0, state=state)
    assert state.current_bs == 5
    assert ALPHA * 60.0 <= model.mean_latency(5) <= 60.0


def test_batch_step_infeasible_at_one(caplog):
    state = BatchScalerState()
    with caplog.at_level("WARNING"):
        state, new_bs = batch_step(state, 500.0, 100.0, ALPHA)
    assert new_bs is None
    assert state.infeasible
    assert "further BS reduction is not possible" in caplog.text
    state, _ = batch_step(state, 90.0, 100.0, ALPHA)
    assert not state.infeasible


def test_batch_step_resets_stale_ceiling():
    state = BatchScalerState(current_bs=40, min_bs=20, max_bs=40, abs_max_bs=128)
    state, new_bs = batch_step(state, 10.0, 100.0, ALPHA)
    assert new_bs == 84
    assert (state.min_bs, state.max_bs) == (40, 128)


def test_batch_step_holds_at_abs_max():
    state = BatchScalerState(current_bs=128, min_bs=64, max_bs=128, abs_max_bs=128)
    _, new_bs = batch_step(state, 10.0, 100.0, ALPHA)
    assert new_bs is None


def test_batch_step_clears_window_on_change():
    window = LatencyWindow(10)
    window.push_many([1.0] * 5)
    state = BatchScalerState(window=window)
    batch_step(state, 10.0, 100.0, ALPHA)
    assert len(window) == 0


def test_batch_state_invariants():
    with pytest.raises(ScalerError):
        BatchScalerState(current_bs=10, min_bs=20, max_bs=40)
    with pytest.raises(ScalerError):
        BatchScalerState(current_bs=1, max_bs=256, abs_max_bs=128)


def test_batch_slo_up_regrows_after_ceiling():
    model = BatchingModel(a=19.18, b=7.99, sigma=0.0)
    state, _, _ = _search(model, 200.0)
    assert state.current_bs == 21
    state = batch_on_slo_change(state)
    state, _, _ = _search(model, 419.0, state=state)
    assert state.current_bs > 21
    assert model.mean_latency(state.current_bs) <= 419.0


def _mt_run(model, slo, init, max_mtl=10, limit=40):
    state = MtScalerState(mtl=init, max_mtl=max_mtl)
    changes = 0
    for _ in range(limit):
        state, action = mt_step(state, model.mean_latency(state.mtl), slo, ALPHA)
        assert 1 <= state.mtl <= max_mtl
        if action is MtAction.HOLD:
            return state, changes
        changes += 1
    pytest.fail("AIMD did not settle")


def test_mt_oracle_with_perturbed_estimates():
    rng = np.random.default_rng(11)
    for _ in range(200):
        model = MtModel(l1=float(rng.uniform(2.0, 30.0)), capacity=float(rng.uniform(1.0, 6.0)), sigma=0.0)
        latencies = [model.mean_latency(k) for k in range(1, 11)]
        slo = float(rng.uniform(model.l1 * 1.05, latencies[-1] * 1.3))
        opt = max(k for k in range(1, 11) if latencies[k - 1] <= slo)
        estimates = [lat * float(rng.uniform(0.7, 1.3)) for lat in latencies]
        init = pick_mtl(estimates, slo, 10)

        state, changes = _mt_run(model, slo, init)
        assert latencies[state.mtl - 1] <= slo
        assert state.mtl <= opt
        assert changes <= abs(init - opt) + 2
        if ALPHA * slo > latencies[opt - 1]:
            assert state.mtl == opt


def test_mt_guard_blocks_ping_pong():
    model = MtModel(l1=10.0, capacity=1.0, sigma=0.0)
    # MTL 5 is below the band and MTL 6 is above it
    state, changes = _mt_run(model, 59.5, init=3)
    assert state.mtl == 5
    assert state.guard
    assert changes == 4
    state, action = mt_step(state, model.mean_latency(5), 59.5, ALPHA)
    assert action is MtAction.HOLD


def test_mt_slo_change_releases_guard():
    state = MtScalerState(mtl=3, guard=True)
    state = mt_on_slo_change(state)
    assert not state.guard
    state, action = mt_step(state, 1.0, 100.0, ALPHA)
    assert action is MtAction.ADD
    assert state.mtl == 4


def test_mt_infeasible_single_instance(caplog):
    with caplog.at_level("WARNING"):
        state, action = mt_step(MtScalerState(mtl=1), 50.0, 10.0, ALPHA)
    assert action is MtAction.HOLD
    assert state.infeasible
    assert "single instance" in caplog.text


def test_mt_holds_at_max():
    state, action = mt_step(MtScalerState(mtl=10, max_mtl=10), 1.0, 100.0, ALPHA)
    assert action is MtAction.HOLD
    assert state.mtl == 10


def test_mt_init_from_profiled_latencies():
    rows = [[MtModel(l1=l1, capacity=2.0).mean_latency(k) for k in range(1, 11)] for l1 in (4.0, 9.0, 20.0)]
    model = MtModel(l1=8.43, capacity=2.0)
    observed = {1: model.mean_latency(1), 8: model.mean_latency(8)}
    assert mt_init(observed, rows, slo=35.0, max_mtl=10, rank=1) == 8
