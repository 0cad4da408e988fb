"""Sparse recovery baselines: plain CoSaMP and a block-structured variant."""
from __future__ import annotations

import numpy as np

from ..errors import ModelError
from ..linop import solve_least_squares
from ..model_approx import best_approx_greedy
from ..signal_model import Domain, pulse_indices, pulse_side
from .common import RecoveryConfig, check_inputs, measure_or_identity, phi_entries

__all__ = ["cosamp", "block_cosamp", "block_energy", "select_blocks"]


def _columns(phi, idx, N: int) -> np.ndarray:
    if phi_entries(phi) is None:
        out = np.zeros((N, idx.size))
        out[idx, np.arange(idx.size)] = 1.0
        return out
    return phi.entries[:, idx]


def _correlate(phi, r) -> np.ndarray:
    return np.asarray(r, dtype=float) if phi_entries(phi) is None else phi.entries.T @ r


def _stagnated(cfg: RecoveryConfig, prev: float | None, res: float) -> bool:
    if res <= cfg.eps:
        return True
    return prev is not None and abs(prev - res) <= cfg.rel_change_tol * prev


def _top(v: np.ndarray, k: int) -> np.ndarray:
    k = min(k, v.size)
    # stable ordering: larger magnitude first, lower index on ties
    order = np.lexsort((np.arange(v.size), -np.abs(v)))
    return np.sort(order[:k])


def cosamp(y, phi, K: int, cfg: RecoveryConfig, N: int | None = None, full_output: bool = False):
    """Compressive sampling matching pursuit.

    Parameters
    ----------
    y : array_like
        Measurements.
    phi : SamplingMatrix or None
        ``None`` stands for the identity (then ``N = len(y)``).
    K : int
        Target sparsity.
    cfg : RecoveryConfig
        ``max_outer_iters``, ``eps``, ``rel_change_tol`` and ``rank_tol``
        are used.

    Returns
    -------
    ndarray
        The K-sparse iterate with the smallest residual, of length ``N``.  With ``full_output`` a
        tuple ``(x, residual_history)`` is returned instead.
    """
    if K < 1:
        raise ModelError("K must be >= 1")
    y = np.asarray(y, dtype=float).reshape(-1)
    N = (y.size if phi is None else phi.N) if N is None else N
    best = np.zeros(N)
    best_res = float(np.linalg.norm(y))
    support = np.zeros(0, dtype=np.int64)
    r = y.copy()
    prev = None
    history: list[float] = []
    for _ in range(cfg.max_outer_iters):
        omega = _top(_correlate(phi, r), 2 * K)
        merged = np.union1d(omega, support)
        rep = solve_least_squares(_columns(phi, merged, N), y, cfg.rank_tol)
        b = np.zeros(N)
        b[merged] = rep.coefficients
        support = _top(b, K)
        x_new = np.zeros(N)
        x_new[support] = b[support]
        r_new = y - measure_or_identity(phi, x_new)
        res = float(np.linalg.norm(r_new))
        history.append(res)
        if res < best_res:
            best, best_res = x_new, res
        r = r_new
        if _stagnated(cfg, prev, res):
            break
        prev = res
    return (best, tuple(history)) if full_output else best


def block_energy(v, F: int, domain: Domain) -> np.ndarray:
    """``E[j]`` = energy of ``v`` on the pulse-shaped block anchored at ``j``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    table = domain.shift_table(pulse_indices(F, domain), np.arange(domain.size))
    return (v * v)[table].sum(axis=0)


def select_blocks(v, S: int, F: int, domain: Domain) -> np.ndarray:
    """Flat indices covered by ``S`` disjoint blocks picked greedily by energy."""
    side = pulse_side(F, domain.ndim)
    starts = best_approx_greedy(block_energy(v, F, domain), S, side, domain).support.array()
    if starts.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(domain.shift_table(pulse_indices(F, domain), starts))


def block_cosamp(
    y, phi, S: int, F: int, cfg: RecoveryConfig, domain: Domain | None = None,
    full_output: bool = False,
):
    """CoSaMP whose selection and pruning keep ``S`` disjoint length-``F`` blocks.

    The proxy step keeps ``2S`` blocks, the pruning step ``S`` blocks;
    blocks are chosen greedily by energy with circular wrap (squares of
    side ``sqrt(F)`` in 2D).  ``full_output`` works as in :func:`cosamp`.
    """
    if domain is None:
        domain = Domain(((y.size if phi is None else phi.N),))
    if S < 1 or S * F > domain.size:
        raise ModelError("block CoSaMP needs S >= 1 and S*F <= N")
    y = check_inputs(y, phi, domain)
    N = domain.size
    best = np.zeros(N)
    best_res = float(np.linalg.norm(y))
    support = np.zeros(0, dtype=np.int64)
    r = y.copy()
    prev = None
    history: list[float] = []
    for _ in range(cfg.max_outer_iters):
        omega = select_blocks(_correlate(phi, r), 2 * S, F, domain)
        merged = np.union1d(omega, support)
        rep = solve_least_squares(_columns(phi, merged, N), y, cfg.rank_tol)
        b = np.zeros(N)
        b[merged] = rep.coefficients
        support = select_blocks(b, S, F, domain)
        x_new = np.zeros(N)
        x_new[support] = b[support]
        r_new = y - measure_or_identity(phi, x_new)
        res = float(np.linalg.norm(r_new))
        history.append(res)
        if res < best_res:
            best, best_res = x_new, res
        r = r_new
        if _stagnated(cfg, prev, res):
            break
        prev = res
    return (best, tuple(history)) if full_output else best
