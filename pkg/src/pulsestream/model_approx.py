"""Best approximation within the separated-spike model.

Given energies ``c_i = x_i**2`` the task is to pick a support ``s`` with at
most ``S`` entries and at most one entry in every circular window of
``delta`` consecutive indices, maximizing ``sum(c[s])``.  Three solvers are
provided: an exact dynamic program (the production path), the LP relaxation
solved by a dense simplex (a diagnostic of LP integrality), and exhaustive
search (test oracle).

Ties are broken towards the lexicographically smallest support among optimal
supports made of positive-energy indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import chain

import numba
import numpy as np

from .errors import ModelError
from .signal_model import Domain, SpikeStream, Support, _as_domain, _separated_tuples
from .simplex import simplex_max

__all__ = [
    "ApproxProblem",
    "ApproxSolution",
    "best_approx_dp",
    "best_approx_lp",
    "best_approx_brute",
    "best_approx_greedy",
    "constraint_system",
    "prune_to_model",
    "EPS_INT",
    "BRUTE_MAX_N",
]

EPS_INT = 1e-6
BRUTE_MAX_N = 24


@dataclass(frozen=True, eq=False)
class ApproxProblem:
    c: np.ndarray
    S: int
    delta: int
    circular: bool = True

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ModelError("energies must be finite and nonnegative")
        if self.S < 0 or self.delta < 1:
            raise ModelError("need S >= 0 and delta >= 1")
        if not self.circular:
            raise ModelError("only the circular constraint set is implemented")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def N(self) -> int:
        return self.c.shape[0]

    @classmethod
    def from_signal(cls, x, S: int, delta: int) -> "ApproxProblem":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(x * x, S, delta)


@dataclass(frozen=True, eq=False)
class ApproxSolution:
    """Selected support and captured energy.

    For the LP solver ``integral`` reports whether the simplex vertex was
    integral within ``EPS_INT``; ``relaxed_objective`` is the LP value.
    """

    support: Support
    objective: float
    method: str
    integral: bool = True
    relaxed_objective: float | None = None
    lp_values: np.ndarray | None = None


def _objective(c: np.ndarray, idx) -> float:
    return math.fsum(float(c[i]) for i in idx)


def _solution(p: ApproxProblem, idx, method: str, **kw) -> ApproxSolution:
    idx = tuple(sorted(int(i) for i in idx))
    return ApproxSolution(Support(idx, Domain((p.N,))), _objective(p.c, idx), method, **kw)


@numba.njit(cache=True)
def _suffix_table(c, lo, hi, budget, delta):
    # g[i, k]: best energy from indices in [i, hi] with at most k picks
    N = c.shape[0]
    g = np.zeros((N + delta + 2, budget + 1))
    if budget == 0:
        return g
    for i in range(hi, lo - 1, -1):
        for k in range(budget + 1):
            best = g[i + 1, k]
            if k >= 1 and c[i] > 0.0:
                take = c[i] + g[i + delta, k - 1] if i + delta <= hi else c[i]
                if take > best:
                    best = take
            g[i, k] = best
    return g


@numba.njit(cache=True)
def _trace(c, g, lo, hi, budget, delta, out, n_out):
    i = lo
    k = budget
    while i <= hi and k > 0:
        if c[i] > 0.0:
            take = c[i] + g[i + delta, k - 1] if i + delta <= hi else c[i]
            if take == g[i, k]:
                out[n_out] = i
                n_out += 1
                i += delta
                k -= 1
                continue
        i += 1
    return n_out


@numba.njit(cache=True)
def _circular_dp(c, S, delta):
    N = c.shape[0]
    out = np.empty(max(S, 1), dtype=np.int64)
    if S == 0:
        return out[:0]
    d = min(delta, N)
    best_val = -1.0
    best_row = -1
    # rows 0..d-1: first pick is p; row d: nothing picked in [0, d)
    for p in range(d + 1):
        if p < d:
            if c[p] <= 0.0:
                continue
            lo = p + delta
            hi = p + N - delta
            g = _suffix_table(c, lo, hi, S - 1, delta)
            val = c[p] + (g[lo, S - 1] if lo <= hi else 0.0)
        else:
            lo = d
            hi = N - 1
            g = _suffix_table(c, lo, hi, S, delta)
            val = g[lo, S] if lo <= hi else 0.0
        if val > best_val:
            best_val = val
            best_row = p
    n = 0
    if best_row < 0:
        return out[:0]
    if best_row < d:
        p = best_row
        out[0] = p
        n = 1
        lo = p + delta
        hi = p + N - delta
        if lo <= hi and S > 1:
            g = _suffix_table(c, lo, hi, S - 1, delta)
            n = _trace(c, g, lo, hi, S - 1, delta, out, n)
    else:
        lo = d
        hi = N - 1
        if lo <= hi:
            g = _suffix_table(c, lo, hi, S, delta)
            n = _trace(c, g, lo, hi, S, delta, out, n)
    return out[:n]


def best_approx_dp(p: ApproxProblem) -> ApproxSolution:
    """Exact maximizer by dynamic programming, ``O(delta * N * S)``.

    The circular constraint is handled by conditioning on the first selected
    index ``q < delta`` (the rest then lives on the linear range
    ``[q + delta, q + N - delta]``) plus one extra chain for supports with no
    index below ``delta``.
    """
    idx = _circular_dp(p.c, int(p.S), int(p.delta))
    return _solution(p, idx, "dp")


def best_approx_brute(p: ApproxProblem) -> ApproxSolution:
    """Exhaustive search over every admissible support of size ``0..S``."""
    if p.N > BRUTE_MAX_N:
        raise ModelError(f"brute force limited to N <= {BRUTE_MAX_N}, got N={p.N}")
    positive = p.c > 0
    best_idx: tuple[int, ...] = ()
    best_val = 0.0
    candidates = chain.from_iterable(
        _separated_tuples(p.N, k, p.delta) for k in range(1, p.S + 1)
    )
    for idx in candidates:
        if not all(positive[i] for i in idx):
            continue
        val = _objective(p.c, idx)
        if val > best_val or (val == best_val and idx < best_idx):
            best_val, best_idx = val, idx
    return _solution(p, best_idx, "brute")


def constraint_system(N: int, S: int, delta: int) -> tuple[np.ndarray, np.ndarray]:
    """``W`` ((N+1) x N) and ``u`` encoding the cardinality and window constraints."""
    W = np.zeros((N + 1, N))
    W[0, :] = 1.0
    for j in range(N):
        W[1 + j, (j + np.arange(delta)) % N] = 1.0
    u = np.ones(N + 1)
    u[0] = S
    return W, u


def best_approx_lp(p: ApproxProblem, eps_int: float = EPS_INT) -> ApproxSolution:
    """LP relaxation ``max c^T s, W s <= u, 0 <= s <= 1`` solved by dense simplex.

    The vertex is rounded only where it is within ``eps_int`` of 0 or 1; any
    other entry leaves ``integral=False`` on the returned solution, whose
    support then holds just the entries that rounded to one.
    """
    W, u = constraint_system(p.N, p.S, p.delta)
    # s <= 1 is implied by the window rows (each s_j sits in one of them)
    s, value = simplex_max(p.c, W, u)
    ones = s >= 1.0 - eps_int
    zeros = s <= eps_int
    integral = bool(np.all(ones | zeros))
    idx = np.flatnonzero(ones & (p.c > 0))
    return _solution(p, idx, "lp", integral=integral, relaxed_objective=value, lp_values=s)


def best_approx_greedy(c, S: int, delta: int, domain) -> ApproxSolution:
    """Greedy separated selection on any domain (exact D(.) is 1D only).

    Repeatedly keeps the largest remaining energy (lowest index on ties) and
    discards every index within separation ``delta`` of it (per-axis circular
    distance below ``delta`` on all axes).
    """
    domain = _as_domain(domain)
    c = np.asarray(c, dtype=float).reshape(-1)
    order = np.lexsort((np.arange(c.size), -c))
    coords = domain.unravel(np.arange(domain.size))
    blocked = np.zeros(c.size, dtype=bool)
    chosen: list[int] = []
    for i in order:
        if len(chosen) >= S or c[i] <= 0:
            break
        if blocked[i]:
            continue
        chosen.append(int(i))
        near = np.ones(c.size, dtype=bool)
        for ax, n in enumerate(domain.shape):
            diff = np.abs(coords[:, ax] - coords[i, ax]) % n
            near &= np.minimum(diff, n - diff) < delta
        blocked |= near
    idx = tuple(sorted(chosen))
    return ApproxSolution(Support(idx, domain), _objective(c, idx), "greedy")


def prune_to_model(x, S: int, delta: int, domain=None) -> SpikeStream:
    """Keep the entries of ``x`` on its best separated support, zero elsewhere.

    1D uses the exact dynamic program; 2D uses :func:`best_approx_greedy`.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    domain = Domain((x.size,)) if domain is None else _as_domain(domain)
    c = x * x
    if domain.ndim == 1:
        sol = best_approx_dp(ApproxProblem(c, S, delta))
        support = Support(sol.support.indices, domain)
    else:
        support = best_approx_greedy(c, S, delta, domain).support
    return SpikeStream(support, x[support.array()])
