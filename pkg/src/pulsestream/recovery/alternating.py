"""Alternating minimization on a fixed spike support, and its exhaustive driver."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import ModelError
from ..linop import solve_least_squares
from ..signal_model import (
    ImpulseResponse,
    PulseModel,
    SpikeStream,
    Support,
    count_circular_supports,
    enumerate_supports,
    is_in_model,
)
from .common import (
    MONOTONE_SLACK,
    RecoveryConfig,
    RecoveryResult,
    assemble,
    check_inputs,
    normalize_pair,
    phi_entries,
    residual_norm,
)

DEFAULT_SUPPORT_CAP = 10**6


def _shifted_columns(phi, domain, offsets, cols) -> np.ndarray:
    table = domain.shift_table(offsets, cols)
    entries = phi_entries(phi)
    if entries is None:
        out = np.zeros((domain.size,) + table.shape)
        f_idx, k_idx = np.indices(table.shape)
        out[table, f_idx, k_idx] = 1.0
        return out
    return entries[:, table]


class InnerResult(NamedTuple):
    x_hat: SpikeStream
    h_hat: ImpulseResponse
    residual: float
    history: tuple
    iterations: int
    rank_deficient: bool
    rejected: bool


def am_inner(y, phi, sigma: Support, h_init: ImpulseResponse, cfg: RecoveryConfig) -> InnerResult:
    """Alternate spike and pulse least-squares updates on the support ``sigma``.

    Each pass solves for the amplitudes with the pulse fixed, then for the
    pulse with the amplitudes fixed, renormalizes the pulse and records
    ``||y - Phi z||``.  A pass that raises the residual beyond rounding
    slack is discarded and the loop stops, so the history never increases.
    """
    domain = h_init.domain
    y = check_inputs(y, phi, domain)
    if sigma.domain != domain:
        raise ModelError("support and pulse live on different domains")
    F = h_init.F
    cols = sigma.array()
    # T[:, t, k] is column (sigma_k + t) of Phi; both dictionaries are contractions of T
    T = _shifted_columns(phi, domain, h_init.indices, cols)
    x_vals = np.zeros(cols.size)
    h = h_init
    history: list[float] = []
    deficient = False
    rejected = False
    prev = None
    it = 0
    for it in range(1, cfg.max_inner_iters + 1):
        rep_x = solve_least_squares(np.tensordot(T, h.coefficients, axes=([1], [0])), y, cfg.rank_tol)
        A_h = T @ rep_x.coefficients
        rep_h = solve_least_squares(A_h, y, cfg.rank_tol)
        h_coef = rep_h.coefficients
        if not np.any(h_coef):
            # amplitudes vanished: the pulse is undetermined, keep the current one
            h_coef = h.coefficients
        xv, hv = normalize_pair(rep_x.coefficients, h_coef)
        # A_h @ h_coef = Phi (x * h) and normalization leaves the product unchanged
        res = float(np.linalg.norm(y - A_h @ h_coef))
        if prev is not None and res > prev * (1.0 + MONOTONE_SLACK):
            rejected = True
            it -= 1
            break
        deficient |= rep_x.rank_deficient or rep_h.rank_deficient
        x_vals, h = xv, ImpulseResponse(hv, domain)
        history.append(res)
        if res <= cfg.eps:
            break
        if prev is not None and prev - res <= cfg.rel_change_tol * prev:
            break
        prev = res
    x_hat = SpikeStream(sigma, x_vals)
    residual = history[-1] if history else residual_norm(y, phi, np.zeros(domain.size))
    return InnerResult(x_hat, h, residual, tuple(history), it, deficient, rejected)


def am_exhaustive(
    y, phi, model: PulseModel, cfg: RecoveryConfig, support_cap: int = DEFAULT_SUPPORT_CAP
) -> RecoveryResult:
    """Run :func:`am_inner` on every admissible support (1D only).

    Returns the first candidate whose residual drops below ``cfg.eps``,
    otherwise the one with the smallest residual.  Each candidate starts
    from the flat pulse ``(1, ..., 1) / sqrt(F)``.
    """
    if model.domain.ndim != 1:
        raise ModelError("exhaustive search is implemented for 1D domains only")
    y = check_inputs(y, phi, model.domain)
    total = count_circular_supports(model.N, model.S, model.delta)
    if total > support_cap:
        raise ModelError(
            f"{total} candidate supports exceed the cap of {support_cap}; "
            "use iterative_support_estimation instead"
        )
    h0 = ImpulseResponse.flat(model.F, model.domain)
    best = None
    tried = 0
    for sigma in enumerate_supports(model.N, model.S, model.delta):
        tried += 1
        inner = am_inner(y, phi, sigma, h0, cfg)
        if best is None or inner.residual < best.residual:
            best = inner
        if inner.residual < cfg.eps:
            break
    assert best is not None
    converged = best.residual < cfg.eps
    z_hat = assemble(best.x_hat, best.h_hat)
    assert is_in_model(best.x_hat.support, model)
    return RecoveryResult(
        z_hat,
        best.x_hat,
        best.h_hat,
        best.history,
        tried,
        "converged" if converged else "max_iters",
        best.rank_deficient,
        {"candidates": tried, "total_supports": total, "inner_iterations": best.iterations},
    )
