import numpy as np
import pytest

from dnn_scaler.errors import CompletionError
from dnn_scaler.matcomp import LatencyMatrix, complete, estimate_row, pick_mtl


def _hidden_error(truth, estimates, mask):
    hidden = ~mask
    return np.abs(estimates[hidden] - truth[hidden]) / truth[hidden]


def test_rank1_recovery():
    r = np.array([1.0, 2.0, 3.0, 4.0, 0.5])
    c = np.array([8.0, 8.5, 12.0, 16.0, 20.0, 24.0])
    truth = np.outer(r, c)
    mask = np.zeros_like(truth, dtype=bool)
    mask[0] = True
    for i, cols in enumerate([(0, 5), (1, 3), (2, 4), (0, 2)], start=1):
        mask[i, list(cols)] = True

    result = complete(LatencyMatrix(truth, mask), rank=1)
    assert result.converged
    assert np.max(_hidden_error(truth, result.estimates, mask)) < 1e-6


def test_rank2_recovery_at_sixty_percent():
    rng = np.random.default_rng(3)
    truth = rng.uniform(1.0, 2.0, (8, 2)) @ rng.uniform(1.0, 2.0, (2, 10))
    mask = np.zeros_like(truth, dtype=bool)
    mask[:2] = True
    for i in range(2, 8):
        mask[i, rng.choice(10, size=5, replace=False)] = True
    assert mask.mean() == pytest.approx(0.625)

    result = complete(LatencyMatrix(truth, mask), rank=2)
    hidden = ~mask
    rmse = np.sqrt(np.mean((result.estimates[hidden] - truth[hidden]) ** 2))
    assert rmse / np.sqrt(np.mean(truth[hidden] ** 2)) < 1e-4


def test_observed_scale_does_not_change_relative_fit():
    truth = np.outer([1.0, 2.0, 3.0], [5.0, 6.0, 9.0, 11.0])
    mask = np.ones_like(truth, dtype=bool)
    mask[2, 1:] = False
    small = complete(LatencyMatrix(truth, mask), rank=1).estimates
    large = complete(LatencyMatrix(truth * 1e4, mask), rank=1).estimates
    assert np.allclose(large, small * 1e4, rtol=1e-8)


def test_matrix_validation():
    values = np.ones((3, 4))
    mask = np.ones((3, 4), dtype=bool)

    mask[1] = False
    with pytest.raises(CompletionError) as exc:
        LatencyMatrix(values, mask)
    assert exc.value.error_type == "empty_row"

    mask = np.ones((3, 4), dtype=bool)
    mask[:, 0] = False
    with pytest.raises(CompletionError) as exc:
        LatencyMatrix(values, mask)
    assert exc.value.error_type == "empty_row"

    with pytest.raises(CompletionError) as exc:
        LatencyMatrix(-values, np.ones((3, 4), dtype=bool))
    assert exc.value.error_type == "invalid_argument"

    with pytest.raises(CompletionError):
        LatencyMatrix(values, np.ones((3, 5), dtype=bool))


def test_rank_must_fit_matrix():
    m = LatencyMatrix(np.ones((3, 4)), np.ones((3, 4), dtype=bool))
    with pytest.raises(CompletionError) as exc:
        complete(m, rank=4)
    assert exc.value.error_type == "rank_infeasible"


def test_unconverged_completion_warns(caplog):
    truth = np.outer([1.0, 2.0, 3.0], [5.0, 6.0, 9.0, 11.0])
    mask = np.ones_like(truth, dtype=bool)
    mask[2, 1:] = False
    with caplog.at_level("WARNING"):
        result = complete(LatencyMatrix(truth, mask), rank=1, max_iters=1, tol=1e-30)
    assert not result.converged
    assert "complete: no convergence" in caplog.text


def test_estimate_row_rank1_profile():
    base = np.array([8.4, 8.4, 12.6, 16.8, 21.0, 25.2, 29.4, 33.6, 37.8, 42.0])
    rows = [list(base * s) for s in (0.5, 1.5, 3.0)]
    estimates = estimate_row(rows, {1: 2.0 * base[0], 8: 2.0 * base[7]}, 10, rank=1)
    assert len(estimates) == 10
    assert estimates[0] == 2.0 * base[0]
    assert estimates[7] == 2.0 * base[7]
    assert np.allclose(estimates, 2.0 * base, rtol=1e-6)


def test_estimate_row_ignores_catalog_order():
    mtl = np.arange(1, 11, dtype=float)
    rows = [list(p + q * mtl) for p, q in ((1.0, 0.5), (2.0, 3.0), (0.5, 1.0), (4.0, 1.0))]
    truth = 3.0 + 2.0 * mtl
    observed = {1: truth[0], 8: truth[7]}

    forward = estimate_row(rows, observed, 10, rank=2)
    for order in ([3, 2, 1, 0], [2, 0, 3, 1]):
        shuffled = estimate_row([rows[i] for i in order], observed, 10, rank=2)
        assert np.allclose(shuffled, forward, rtol=1e-8)
    assert np.allclose(forward, truth, rtol=1e-6)


def test_estimate_row_single_column():
    assert estimate_row([[5.0]], {1: 3.0}, 1) == [3.0]


def test_estimate_row_ignores_out_of_range_observations():
    rows = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]
    estimates = estimate_row(rows, {1: 3.0, 9: 100.0}, 3, rank=1)
    assert np.allclose(estimates, [3.0, 6.0, 9.0], rtol=1e-6)


def test_estimate_row_errors():
    with pytest.raises(CompletionError):
        estimate_row([[1.0, 2.0]], {5: 1.0}, 2)
    with pytest.raises(CompletionError):
        estimate_row([], {1: 1.0}, 2)
    with pytest.raises(CompletionError):
        estimate_row([[1.0]], {1: 1.0}, 2)


def test_pick_mtl():
    estimates = [10.0, 20.0, 30.0, 40.0]
    assert pick_mtl(estimates, 25.0, 4) == 2
    assert pick_mtl(estimates, 100.0, 4) == 4
    assert pick_mtl(estimates, 5.0, 4) == 1
    # Strictly below the SLO
    assert pick_mtl(estimates, 20.0, 4) == 1
    with pytest.raises(CompletionError):
        pick_mtl(estimates, 25.0, 5)
