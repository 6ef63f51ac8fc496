import pytest

from dnn_scaler.domain import LatencyWindow, percentile, throughput_improvement, weighted_percentile
from dnn_scaler.errors import StatisticsError


def test_percentile_is_nearest_rank():
    assert percentile([5, 1, 3, 2, 4], 0.95) == 5
    assert percentile([5, 1, 3, 2, 4], 0.5) == 3
    assert percentile(list(range(1, 101)), 0.95) == 95


def test_percentile_single_sample():
    assert percentile([7.5], 0.95) == 7.5


def test_percentile_empty_raises():
    with pytest.raises(StatisticsError) as exc:
        percentile([], 0.95)
    assert exc.value.error_type == "no_samples"


@pytest.mark.parametrize("q", [0, -0.1, 1.5])
def test_percentile_rejects_bad_fraction(q):
    with pytest.raises(StatisticsError) as exc:
        percentile([1.0, 2.0], q)
    assert exc.value.error_type == "invalid_argument"


def test_weighted_percentile_matches_expanded_samples():
    values, weights = [30.0, 10.0, 20.0], [3, 90, 7]
    expanded = [v for v, w in zip(values, weights) for _ in range(w)]
    for q in (0.5, 0.9, 0.95, 0.97, 1.0):
        assert weighted_percentile(values, weights, q) == percentile(expanded, q)


def test_weighted_percentile_boundary():
    assert weighted_percentile([10.0, 20.0], [95, 5], 0.95) == 10.0
    assert weighted_percentile([10.0, 20.0], [94, 6], 0.95) == 20.0


def test_throughput_improvement_job1():
    assert throughput_improvement(237.28, 118.66) == pytest.approx(99.96, abs=0.01)
    assert throughput_improvement(125.67, 118.66) == pytest.approx(5.91, abs=0.01)


def test_throughput_improvement_invalid_baseline():
    with pytest.raises(StatisticsError) as exc:
        throughput_improvement(10.0, 0.0)
    assert exc.value.error_type == "invalid_baseline"
    assert exc.value.error_data["t_base"] == 0.0


def test_window_evicts_oldest():
    window = LatencyWindow(3)
    window.push_many([1.0, 2.0, 3.0])
    window.push(4.0)
    assert window.samples == [2.0, 3.0, 4.0]
    assert window.full
    assert window.mean() == pytest.approx(3.0)
    assert window.p95() == 4.0


def test_window_clear():
    window = LatencyWindow(2)
    window.push(1.0)
    window.clear()
    assert len(window) == 0
    with pytest.raises(StatisticsError):
        window.p95()


def test_window_capacity_must_be_positive():
    with pytest.raises(StatisticsError):
        LatencyWindow(0)
