import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from pulsestream.errors import ModelError
from pulsestream.model_approx import (
    ApproxProblem,
    best_approx_brute,
    best_approx_dp,
    best_approx_greedy,
    best_approx_lp,
    constraint_system,
    prune_to_model,
)
from pulsestream.signal_model import Domain, PulseModel, Support, enumerate_supports, is_in_model
from pulsestream.simplex import UnboundedLPError, simplex_max


def feasible(idx, N, S, delta):
    if len(idx) > S:
        return False
    for a, b in itertools.combinations(idx, 2):
        d = abs(a - b) % N
        if min(d, N - d) < delta:
            return False
    return True


def test_dp_hand_example():
    sol = best_approx_dp(ApproxProblem([9, 1, 16, 1, 25], 2, 2))
    assert sol.support.indices == (2, 4) and sol.objective == 41


def test_dp_single_selection_ties_low():
    sol = best_approx_dp(ApproxProblem([1, 5, 3, 5, 0], 1, 1))
    assert sol.support.indices == (1,)


def test_dp_zero_energy_gives_empty_support():
    sol = best_approx_dp(ApproxProblem(np.zeros(8), 3, 2))
    assert sol.support.indices == () and sol.objective == 0


def test_dp_handles_wraparound():
    # the two largest entries are adjacent across the seam
    c = np.array([10.0, 0, 0, 0, 0, 9.0])
    sol = best_approx_dp(ApproxProblem(c, 2, 2))
    assert sol.objective == 10.0
    assert sol.support.indices == (0,)


def test_problem_validation():
    with pytest.raises(ModelError):
        ApproxProblem([1.0, -1.0], 1, 1)
    with pytest.raises(ModelError):
        ApproxProblem([1.0, np.nan], 1, 1)


def test_brute_examples():
    c = np.random.default_rng(0).random(10)
    assert best_approx_brute(ApproxProblem(c, 0, 3)).support.indices == ()
    top = best_approx_brute(ApproxProblem(c, 3, 1)).support.indices
    assert set(top) == set(np.argsort(-c)[:3])
    with pytest.raises(ModelError):
        best_approx_brute(ApproxProblem(np.ones(30), 2, 2))


instances = st.integers(1, 16).flatmap(
    lambda N: st.tuples(
        st.just(N),
        st.integers(1, 3),
        st.integers(1, N),
        st.lists(st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.0, 7.25]) | st.floats(0, 10),
                 min_size=N, max_size=N),
    )
)


@given(instances)
def test_dp_matches_brute(inst):
    N, S, delta, c = inst
    if S * delta > N:
        return
    p = ApproxProblem(c, S, delta)
    dp, brute = best_approx_dp(p), best_approx_brute(p)
    assert dp.objective == brute.objective
    if dp.support.indices != brute.support.indices:
        # only possible on an exact floating-point tie
        assert math.fsum(p.c[list(dp.support.indices)]) == math.fsum(p.c[list(brute.support.indices)])
    assert feasible(dp.support.indices, N, S, delta)


@given(instances)
def test_lp_upper_bounds_dp_and_flags_fractional(inst):
    N, S, delta, c = inst
    if S * delta > N:
        return
    p = ApproxProblem(c, S, delta)
    lp, dp = best_approx_lp(p), best_approx_dp(p)
    assert lp.relaxed_objective >= dp.objective - 1e-9
    if lp.integral:
        assert math.isclose(lp.objective, dp.objective, rel_tol=1e-9, abs_tol=1e-9)
        assert feasible(lp.support.indices, N, S, delta)
    else:
        assert lp.relaxed_objective > dp.objective - 1e-9


def test_lp_hand_example_and_seeded_case():
    lp = best_approx_lp(ApproxProblem([9, 1, 16, 1, 25], 2, 2))
    assert lp.integral and lp.support.indices == (2, 4)
    c = np.random.default_rng(7).random(12)
    p = ApproxProblem(c, 3, 4)
    assert math.isclose(best_approx_lp(p).objective, best_approx_dp(p).objective, abs_tol=1e-9)


def test_lp_unique_dominant_configuration_is_integral():
    c = np.zeros(12)
    c[[1, 5, 9]] = [10.0, 11.0, 12.0]
    sol = best_approx_lp(ApproxProblem(c, 3, 4))
    assert sol.integral and sol.support.indices == (1, 5, 9)


def test_lp_fractional_vertex_is_flagged():
    # tight rings (S*delta == N) admit half-integral optima of the circular windows
    found = False
    rng = np.random.default_rng(0)
    for _ in range(400):
        N, S, delta = 12, 2, 6
        p = ApproxProblem(rng.random(N), S, delta)
        sol = best_approx_lp(p)
        if not sol.integral:
            found = True
            assert sol.relaxed_objective > best_approx_dp(p).objective
            break
    assert found


def test_constraint_system_shape():
    W, u = constraint_system(6, 2, 3)
    assert W.shape == (7, 6) and u[0] == 2 and np.all(u[1:] == 1)
    assert np.all(W[0] == 1)
    # row 1 + k covers the window starting at k
    assert list(np.flatnonzero(W[1 + 4])) == [0, 4, 5]


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_simplex_matches_scipy(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((m, n)) + 0.05
    b = rng.random(m) * 5
    c = rng.standard_normal(n)
    x, val = simplex_max(c, A, b)
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    assert ref.status == 0
    assert math.isclose(val, -ref.fun, rel_tol=1e-8, abs_tol=1e-9)
    assert np.all(A @ x <= b + 1e-9) and np.all(x >= -1e-12)


def test_simplex_unbounded_and_infeasible_start():
    with pytest.raises(UnboundedLPError):
        simplex_max([1.0, 0.0], [[0.0, 1.0]], [1.0])
    with pytest.raises(Exception):
        simplex_max([1.0], [[1.0]], [-1.0])


@given(st.integers(2, 40), st.integers(1, 4), st.integers(1, 10), st.integers(0, 2**31))
def test_prune_feasible_and_idempotent(N, S, delta, seed):
    if S * delta > N:
        return
    x = np.random.default_rng(seed).standard_normal(N)
    p1 = prune_to_model(x, S, delta)
    m = PulseModel(Domain((N,)), S, 1, delta)
    assert is_in_model(p1.support, m)
    p2 = prune_to_model(p1.dense(), S, delta)
    assert np.array_equal(p1.dense(), p2.dense())


def test_prune_examples():
    p = prune_to_model(np.array([3.0, 1, 4, 1, 5]), 2, 2)
    assert p.support.indices == (2, 4) and list(p.values) == [4.0, 5.0]
    x = np.zeros(20)
    x[[2, 9, 15]] = [1.0, -2.0, 0.5]
    assert np.array_equal(prune_to_model(x, 3, 5).dense(), x)


@pytest.mark.parametrize("seed", range(5))
def test_prune_is_best_projection(seed):
    N, S, delta = 12, 3, 3
    x = np.random.default_rng(seed).standard_normal(N)
    err = np.linalg.norm(x - prune_to_model(x, S, delta).dense())
    for k in range(1, S + 1):
        for sup in enumerate_supports(N, k, delta):
            xs = np.zeros(N)
            xs[list(sup.indices)] = x[list(sup.indices)]
            assert err <= np.linalg.norm(x - xs) + 1e-12


def test_greedy_2d_respects_separation():
    dom = Domain((16, 16))
    c = np.random.default_rng(3).random(256)
    sol = best_approx_greedy(c, 5, 4, dom)
    assert len(sol.support) == 5
    assert is_in_model(sol.support, PulseModel(dom, 5, 4, 4))
    assert sol.support.indices[0] in sol.support.indices
    assert int(np.argmax(c)) in sol.support.indices


def test_prune_2d_uses_greedy():
    dom = Domain((8, 8))
    x = np.zeros(64)
    x[dom.ravel([[0, 0], [0, 1], [5, 5]])] = [3.0, 2.0, 1.0]
    p = prune_to_model(x, 2, 2, dom)
    assert set(p.support.indices) == set(dom.ravel([[0, 0], [5, 5]]).tolist())
    assert isinstance(p.support, Support)
