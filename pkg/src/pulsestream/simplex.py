"""Dense tableau simplex for small ``max c^T s, A s <= b, s >= 0`` with ``b >= 0``."""
from __future__ import annotations

import numpy as np

from .errors import PulseStreamError

__all__ = ["simplex_max", "UnboundedLPError"]


class UnboundedLPError(PulseStreamError):
    pass


def simplex_max(c, A, b, tol: float = 1e-12, max_pivots: int | None = None):
    """Solve the LP from the all-slack basis using Bland's rule.

    ``b >= 0`` makes the origin feasible, so no phase one is needed.
    Bland's rule avoids cycling on the highly degenerate window systems.

    Returns
    -------
    s : ndarray
        Optimal vertex.
    value : float
        ``c @ s``.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise PulseStreamError("simplex_max needs b >= 0 (origin must be feasible)")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    if max_pivots is None:
        max_pivots = 50 * (n + m) ** 2
    for _ in range(max_pivots):
        reduced = T[m, :-1]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            break
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise UnboundedLPError("LP is unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the basic variable with smallest index
        row = int(min(ties, key=lambda r: basis[r]))
        T[row] /= T[row, col]
        for r in range(m + 1):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col
    else:
        raise PulseStreamError("simplex did not terminate within the pivot limit")
    s = np.zeros(n + m)
    s[basis] = T[:m, -1]
    x = s[:n]
    return x, float(c @ x)
