"""Circulant operators, column-restricted dictionaries and least squares.

The dictionaries ``(Phi C(g))_cols`` used by the alternating updates are
assembled column by column from shifted copies of the sampling matrix, so
the ``N x N`` circulant is never formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainMismatchError, ModelError
from .signal_model import (
    Domain,
    ImpulseResponse,
    Support,
    _as_domain,
    circular_convolve,
    circular_separation,
)

__all__ = [
    "CirculantOperator",
    "ColumnRestriction",
    "LeastSquaresReport",
    "apply_restricted",
    "apply_restricted_transpose",
    "least_squares",
    "solve_least_squares",
    "quasi_toeplitz_pinv_apply",
    "DEFAULT_RANK_TOL",
]

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CirculantOperator:
    """``C(g)``: column ``j`` is ``g`` circularly shifted by ``j``."""

    generator: np.ndarray
    domain: Domain

    def __post_init__(self):
        domain = _as_domain(self.domain)
        g = np.array(self.generator, dtype=float).reshape(-1)
        if g.shape[0] != domain.size:
            raise DomainMismatchError(f"generator length {g.shape[0]} != domain size {domain.size}")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "domain", domain)

    def apply(self, x) -> np.ndarray:
        return circular_convolve(self.generator, x, self.domain)

    def column(self, j: int) -> np.ndarray:
        e = np.zeros(self.domain.size)
        e[j] = 1.0
        return self.apply(e)

    def restrict(self, columns, phi=None) -> "ColumnRestriction":
        return ColumnRestriction(self, columns, phi)


@dataclass(frozen=True, eq=False)
class ColumnRestriction:
    """Columns ``columns`` of ``phi @ C(g)``; ``phi=None`` means the identity."""

    operator: CirculantOperator
    columns: np.ndarray
    phi: np.ndarray | None = None

    def __post_init__(self):
        cols = self.columns.array() if isinstance(self.columns, Support) else self.columns
        cols = np.array(cols, dtype=np.int64).reshape(-1)
        N = self.operator.domain.size
        if cols.size and (cols.min() < 0 or cols.max() >= N):
            raise ModelError("restriction columns out of range")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        if self.phi is not None:
            phi = np.asarray(self.phi, dtype=float)
            if phi.ndim != 2 or phi.shape[1] != N:
                raise DomainMismatchError(f"sampling matrix of shape {phi.shape} for N={N}")
            object.__setattr__(self, "phi", phi)

    @property
    def shape(self) -> tuple[int, int]:
        rows = self.operator.domain.size if self.phi is None else self.phi.shape[0]
        return rows, self.columns.size

    def _terms(self):
        g = self.operator.generator
        nz = np.flatnonzero(g)
        table = self.operator.domain.shift_table(nz, self.columns)
        return g[nz], table

    def matrix(self) -> np.ndarray:
        """Materialize the ``rows x len(columns)`` dictionary."""
        weights, table = self._terms()
        rows, ncols = self.shape
        out = np.zeros((rows, ncols))
        if self.phi is None:
            col_ids = np.arange(ncols)
            for w, shifted in zip(weights, table):
                out[shifted, col_ids] += w
        else:
            for w, shifted in zip(weights, table):
                out += w * self.phi[:, shifted]
        return out


def apply_restricted(r: ColumnRestriction, coeffs) -> np.ndarray:
    """``phi @ C(g)[:, columns] @ coeffs`` without forming the circulant."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.shape[0] != r.columns.size:
        raise DomainMismatchError(f"{coeffs.shape[0]} coefficients for {r.columns.size} columns")
    spikes = np.zeros(r.operator.domain.size)
    np.add.at(spikes, r.columns, coeffs)
    v = circular_convolve(r.operator.generator, spikes, r.operator.domain)
    return v if r.phi is None else r.phi @ v


def apply_restricted_transpose(r: ColumnRestriction, y) -> np.ndarray:
    """Adjoint of :func:`apply_restricted`."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != r.shape[0]:
        raise DomainMismatchError(f"vector of length {y.shape[0]} for {r.shape[0]} rows")
    w = y if r.phi is None else r.phi.T @ y
    weights, table = r._terms()
    out = np.zeros(r.columns.size)
    for wt, shifted in zip(weights, table):
        out += wt * w[shifted]
    return out


@dataclass(frozen=True, eq=False)
class LeastSquaresReport:
    coefficients: np.ndarray
    residual_norm: float
    rank_deficient: bool
    rank: int


def solve_least_squares(A, y, tol: float = DEFAULT_RANK_TOL) -> LeastSquaresReport:
    """Least squares by column-pivoted QR.

    The rank is the number of pivots with ``|R_kk| >= tol * |R_00|``; since
    pivoting puts the largest column norm first, the threshold is relative
    to it.  Rank-deficient (or underdetermined) systems fall back to the
    minimum-norm solution.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    m, n = A.shape
    if y.shape[0] != m:
        raise DomainMismatchError(f"right-hand side of length {y.shape[0]} for {m} rows")
    if n == 0:
        return LeastSquaresReport(np.zeros(0), float(np.linalg.norm(y)), False, 0)
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag >= tol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank == n:
        coef = np.empty(n)
        coef[piv] = scipy.linalg.solve_triangular(R, Q.T @ y, check_finite=False)
        deficient = False
    else:
        smax = diag[0] if diag.size else 0.0
        cond = tol if smax > 0 else None
        coef = scipy.linalg.lstsq(A, y, cond=cond)[0] if smax > 0 else np.zeros(n)
        deficient = True
    resid = float(np.linalg.norm(y - A @ coef))
    return LeastSquaresReport(coef, resid, deficient, rank)


def least_squares(r: ColumnRestriction, y, tol: float = DEFAULT_RANK_TOL) -> LeastSquaresReport:
    """Minimize ``||y - A c||`` over coefficients on the restricted columns."""
    return solve_least_squares(r.matrix(), y, tol)


def quasi_toeplitz_pinv_apply(h: ImpulseResponse, support: Support, y) -> np.ndarray:
    """Closed-form ``H_sigma^+ y = H_sigma^T y / ||h||^2`` for non-overlapping shifts.

    Valid only when the shifted pulses in ``support`` are disjoint (spacing at
    least the pulse extent), which makes the columns orthogonal with equal
    norm.  Measurements are Nyquist-rate (no sampling matrix).
    """
    domain = h.domain
    if support.domain != domain:
        raise DomainMismatchError("support and pulse live on different domains")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != domain.size:
        raise DomainMismatchError(f"vector of length {y.shape[0]} on domain {domain.shape}")
    side = h.F if domain.ndim == 1 else int(round(h.F ** 0.5))
    idx = support.indices
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            if circular_separation(domain, idx[a], idx[b]) < side:
                raise ModelError(
                    f"spikes {idx[a]} and {idx[b]} closer than the pulse extent {side}; "
                    "closed-form pseudo-inverse does not apply"
                )
    hn2 = float(h.coefficients @ h.coefficients)
    if hn2 == 0.0:
        raise ModelError("zero impulse response")
    if not idx:
        return np.zeros(0)
    table = domain.shift_table(support.indices, h.indices)
    return (y[table] @ h.coefficients) / hn2
