"""
Low-rank completion of the (DNN x MTL) latency matrix.

A new DNN is observed at two MTLs during profiling; the fully swept rows of
other DNNs supply the column structure. The matrix is factored as U @ V.T
by alternating least squares over the observed entries only.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence
import logging

import numpy as np

from dnn_scaler.errors import CompletionError

logger = logging.getLogger(__name__)


@dataclass
class LatencyMatrix:
    """
    Partially observed latency matrix.

    values: n1 x n2 latencies in ms; entries where ``mask`` is False are ignored.
    mask: True where the entry was observed.
    row_ids: optional labels for the rows.
    """
    values: np.ndarray
    mask: np.ndarray
    row_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise CompletionError(f"values {self.values.shape} and mask {self.mask.shape} must be equal 2-D shapes",
                                  error_type="invalid_argument")
        if np.any(self.values[self.mask] <= 0) or not np.all(np.isfinite(self.values[self.mask])):
            raise CompletionError("observed latencies must be positive and finite", error_type="invalid_argument")
        empty = np.flatnonzero(~self.mask.any(axis=1))
        if empty.size:
            raise CompletionError(f"rows {empty.tolist()} have no observed entry", error_type="empty_row")
        if not self.mask.all(axis=1).any():
            raise CompletionError("at least one row must be fully observed", error_type="empty_row")

    @property
    def cols(self) -> List[int]:
        return list(range(1, self.values.shape[1] + 1))


@dataclass
class CompletionResult:
    estimates: np.ndarray
    rank_used: int
    iterations: int
    converged: bool
    residual: float


def _solve(design: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    if ridge > 0:
        gram = design.T @ design + ridge * np.eye(design.shape[1])
        return np.linalg.solve(gram, design.T @ target)
    return np.linalg.lstsq(design, target, rcond=None)[0]


def _initial_factor(x: np.ndarray, mask: np.ndarray, rank: int, rng: np.random.Generator) -> np.ndarray:
    full = x[mask.all(axis=1)]
    if full.shape[0] >= rank:
        _, s, vt = np.linalg.svd(full, full_matrices=False)
        if np.sum(s > s[0] * 1e-10) >= rank:
            return vt[:rank].T.copy()
    # Column-mean imputation for the remaining cases
    counts = mask.sum(axis=0)
    col_mean = np.where(counts > 0, (x * mask).sum(axis=0) / np.maximum(counts, 1), x[mask].mean())
    imputed = np.where(mask, x, col_mean)
    _, _, vt = np.linalg.svd(imputed, full_matrices=False)
    v = vt[:rank].T + 1e-3 * rng.standard_normal((x.shape[1], rank))
    q, _ = np.linalg.qr(v)
    return q


def complete(m: LatencyMatrix, rank: int = 2, max_iters: int = 200, tol: float = 1e-8,
             ridge: float = 1e-6, seed: int = 0) -> CompletionResult:
    """
    Fill the unobserved entries of ``m`` from a rank-``rank`` factorization.

    Observed entries are normalized by their RMS before fitting. Ridge-regularized
    sweeps run until the observed residual stalls; the ridge is then dropped so the
    final sweeps fit the observed entries without bias.

    Args:
        m: The partially observed matrix.
        rank: Factorization rank, 1 <= rank <= min(n1, n2).
        max_iters: Maximum alternating sweeps.
        tol: Relative observed-entry residual declaring convergence.
        ridge: Regularization weight of the first phase.
        seed: Seed for the fallback initialization.

    Returns:
        CompletionResult; estimates are clamped positive per row.
    """
    n1, n2 = m.values.shape
    if not 1 <= rank <= min(n1, n2):
        raise CompletionError(f"rank {rank} is infeasible for a {n1}x{n2} matrix")

    mask = m.mask
    scale = float(np.sqrt(np.mean(m.values[mask] ** 2)))
    x = np.where(mask, m.values / scale, 0.0)
    observed_norm = float(np.linalg.norm(x[mask]))

    v = _initial_factor(x, mask, rank, np.random.default_rng(seed))
    u = np.zeros((n1, rank))
    lam = ridge
    previous = np.inf
    residual = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        for i in range(n1):
            cols = mask[i]
            u[i] = _solve(v[cols], x[i, cols], lam)
        for j in range(n2):
            rows = mask[:, j]
            v[j] = _solve(u[rows], x[rows, j], lam)
        residual = float(np.linalg.norm((x - u @ v.T)[mask])) / observed_norm
        if residual < tol:
            converged = True
            break
        if lam > 0 and np.isclose(residual, previous, rtol=1e-3):
            lam = 0.0
        previous = residual

    estimates = (u @ v.T) * scale
    for i in range(n1):
        floor = m.values[i, mask[i]].min()
        estimates[i] = np.where(estimates[i] <= 0, floor, estimates[i])
    if not converged:
        logger.warning(f"complete: no convergence after {iterations} sweeps (residual {residual:.3e}, tol {tol:.1e})")
    else:
        logger.debug(f"complete: converged in {iterations} sweeps (residual {residual:.3e})")
    return CompletionResult(estimates=estimates, rank_used=rank, iterations=iterations,
                            converged=converged, residual=residual)


def estimate_row(catalog_rows: Sequence[Sequence[float]], observed: Dict[int, float], n: int,
                 rank: int = 2, max_iters: int = 200, tol: float = 1e-8, ridge: float = 1e-6) -> List[float]:
    """
    Latency estimates for MTL 1..n of a DNN observed at a few MTLs.

    Args:
        catalog_rows: Fully observed rows, each covering at least MTL 1..n.
        observed: Measured latencies keyed by MTL; keys outside 1..n are ignored.
        n: Number of MTL columns.

    Returns:
        n latencies in ms; observed entries are returned unchanged.
    """
    inside = {k: float(v) for k, v in observed.items() if 1 <= k <= n}
    if not inside:
        raise CompletionError(f"no observation within MTL 1..{n}", error_type="empty_row")
    if any(v <= 0 for v in inside.values()):
        raise CompletionError("observed latencies must be positive", error_type="invalid_argument")
    if n == 1:
        return [inside[1]]
    if not catalog_rows:
        raise CompletionError("need at least one catalog row", error_type="empty_row")
    if any(len(row) < n for row in catalog_rows):
        raise CompletionError(f"catalog rows must cover MTL 1..{n}", error_type="invalid_argument")

    values = np.zeros((len(catalog_rows) + 1, n))
    values[:-1] = [list(row[:n]) for row in catalog_rows]
    mask = np.ones_like(values, dtype=bool)
    mask[-1] = False
    for k, latency in inside.items():
        values[-1, k - 1] = latency
        mask[-1, k - 1] = True

    effective = min(rank, len(catalog_rows), n)
    result = complete(LatencyMatrix(values, mask), rank=effective, max_iters=max_iters, tol=tol, ridge=ridge)
    row = [float(e) for e in result.estimates[-1]]
    for k, latency in inside.items():
        row[k - 1] = latency
    return row


def pick_mtl(estimates: Sequence[float], slo: float, max_mtl: int) -> int:
    """Largest k <= max_mtl whose estimated latency is below the SLO; 1 when none is."""
    if len(estimates) < max_mtl:
        raise CompletionError(f"need estimates for MTL 1..{max_mtl}, got {len(estimates)}",
                              error_type="invalid_argument")
    if slo <= 0:
        raise CompletionError(f"slo must be > 0, got {slo}", error_type="invalid_argument")
    feasible = [k for k in range(1, max_mtl + 1) if estimates[k - 1] < slo]
    return max(feasible) if feasible else 1
