import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsestream.errors import DomainMismatchError, InstanceGenerationError, ModelError
from pulsestream.signal_model import (
    Domain,
    ImpulseResponse,
    PulseModel,
    SpikeStream,
    Support,
    circular_convolve,
    count_circular_supports,
    count_supports,
    enumerate_supports,
    is_in_model,
    random_instance,
)


def naive_convolve(x, h):
    """Textbook definition z[k] = sum_j x[j] h[(k - j) mod N]."""
    N = len(x)
    return np.array([sum(x[j] * h[(k - j) % N] for j in range(N)) for k in range(N)])


def separated(idx, N, delta):
    for a, b in itertools.combinations(idx, 2):
        d = abs(a - b) % N
        if min(d, N - d) < delta:
            return False
    return True


# convolution


def test_unit_impulse_is_identity():
    h = np.array([0.3, -1.0, 2.0, 0, 0, 0, 0, 0.5])
    x = np.zeros(8)
    x[0] = 1.0
    assert np.array_equal(circular_convolve(x, h), h)


def test_convolution_hand_example():
    z = circular_convolve([1, 0, 0, 2, 0, 0], [1, 1, 0, 0, 0, 0])
    assert np.array_equal(z, [1, 1, 0, 2, 2, 0])


def test_convolution_wraparound():
    x = np.zeros(6)
    x[5] = 1.0
    z = circular_convolve(x, [1, 2, 0, 0, 0, 0])
    assert np.array_equal(z, [2, 0, 0, 0, 0, 1])


def test_convolution_domain_mismatch():
    with pytest.raises(DomainMismatchError):
        circular_convolve(np.zeros(6), np.zeros(7))


def test_convolution_2d_matches_per_axis_definition():
    rng = np.random.default_rng(3)
    dom = Domain((4, 5))
    x = rng.standard_normal(20)
    h = rng.standard_normal(20)
    X, H = x.reshape(4, 5), h.reshape(4, 5)
    want = np.zeros((4, 5))
    for k1, k2, j1, j2 in itertools.product(range(4), range(5), range(4), range(5)):
        want[k1, k2] += X[j1, j2] * H[(k1 - j1) % 4, (k2 - j2) % 5]
    assert np.allclose(circular_convolve(x, h, dom), want.ravel(), atol=1e-12)


vec = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=24)


@given(vec, st.data())
def test_convolution_commutes_exactly(xs, data):
    x = np.array(xs)
    h = np.array(data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(xs), max_size=len(xs))))
    assert np.array_equal(circular_convolve(x, h), circular_convolve(h, x))


@given(vec, st.data())
def test_convolution_matches_definition(xs, data):
    x = np.array(xs)
    h = np.array(data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(xs), max_size=len(xs))))
    want = naive_convolve(x, h)
    assert np.allclose(circular_convolve(x, h), want, rtol=1e-9, atol=1e-6)


# model membership and counting


def test_is_in_model_examples():
    dom = Domain((10,))
    m = PulseModel(dom, 2, 1, 5)
    assert is_in_model(Support((0, 5), dom), m)
    assert not is_in_model(Support((0, 9), dom), m)
    assert is_in_model(Support((3,), dom), m)


def test_is_in_model_rejects_too_many_spikes():
    dom = Domain((20,))
    m = PulseModel(dom, 2, 2, 3)
    assert not is_in_model(Support((0, 5, 10), dom), m)


def test_is_in_model_2d_uses_per_axis_distance():
    dom = Domain((8, 8))
    m = PulseModel(dom, 2, 4, 3)
    a = dom.ravel([[0, 0]])[0]
    near = dom.ravel([[2, 7]])[0]  # row distance 2, column distance 1
    far = dom.ravel([[3, 7]])[0]  # row distance 3
    assert not is_in_model(Support.from_indices([a, near], dom), m)
    assert is_in_model(Support.from_indices([a, far], dom), m)


@pytest.mark.parametrize("N,S,delta,want", [(10, 2, 3, 5), (10, 1, 10, 1), (12, 3, 4, 1)])
def test_count_supports_examples(N, S, delta, want):
    assert count_supports(N, S, delta) == want


def test_count_supports_infeasible_is_zero():
    assert count_supports(10, 3, 4) == 0


def test_enumerate_examples():
    got = [s.indices for s in enumerate_supports(5, 2, 2)]
    assert got == [(0, 2), (0, 3), (1, 3), (1, 4), (2, 4)]
    assert [s.indices for s in enumerate_supports(4, 1, 1)] == [(0,), (1,), (2,), (3,)]
    assert [s.indices for s in enumerate_supports(6, 3, 2)] == [(0, 2, 4), (1, 3, 5)]


@pytest.mark.parametrize("N", range(1, 17))
def test_enumeration_is_exhaustive_and_counts_agree(N):
    for S in range(1, 4):
        for delta in range(1, N + 1):
            if S * delta > N:
                continue
            got = [s.indices for s in enumerate_supports(N, S, delta)]
            brute = [c for c in itertools.combinations(range(N), S) if separated(c, N, delta)]
            assert got == brute
            assert len(got) == count_circular_supports(N, S, delta)
            # the closed form counts arrangements up to rotation of the first gap
            assert len(got) * S == N * count_supports(N, S, delta)
            m = PulseModel(Domain((N,)), S, 1, delta)
            assert all(is_in_model(s, m) for s in enumerate_supports(N, S, delta))


# types


def test_support_rejects_out_of_range_and_duplicates():
    dom = Domain((5,))
    with pytest.raises(ModelError):
        Support((0, 5), dom)
    with pytest.raises(ModelError):
        Support((1, 1), dom)


def test_spike_stream_dense():
    dom = Domain((6,))
    x = SpikeStream(Support((1, 4), dom), np.array([2.0, -1.0]))
    assert np.array_equal(x.dense(), [0, 2, 0, 0, -1, 0])
    with pytest.raises(ModelError):
        SpikeStream(Support((1,), dom), np.array([np.nan]))


def test_impulse_response_2d_occupies_origin_square():
    dom = Domain((5, 5))
    h = ImpulseResponse(np.arange(1.0, 5.0), dom)
    d = h.dense().reshape(5, 5)
    assert np.array_equal(d[:2, :2], [[1, 2], [3, 4]])
    assert d.sum() == 10


def test_pulse_model_validation():
    with pytest.raises(ModelError):
        PulseModel(Domain((100,)), 2, 11, 10)  # delta < F
    with pytest.raises(ModelError):
        PulseModel(Domain((100,)), 10, 11, 11)  # S * delta > N
    PulseModel(Domain((100,)), 2, 11, 11)  # delta == F is allowed


# random instances


def test_random_instance_full_scale_configuration():
    m = PulseModel(Domain((1024,)), 8, 11, 64)
    x, h, z = random_instance(m, seed=1)
    assert is_in_model(x.support, m)
    assert math.isclose(h.norm, 1.0, rel_tol=0, abs_tol=1e-14)
    assert np.count_nonzero(z) <= m.K == 88
    assert np.array_equal(z, circular_convolve(x.dense(), h.dense()))


def test_random_instance_is_deterministic():
    m = PulseModel(Domain((256,)), 4, 5, 20)
    a = random_instance(m, seed=11)
    b = random_instance(m, seed=11)
    assert np.array_equal(a.z, b.z) and a.x.support == b.x.support


def test_random_instance_fallback_for_tight_packing():
    m = PulseModel(Domain((60,)), 6, 5, 10)
    inst = random_instance(m, seed=0)
    assert is_in_model(inst.x.support, m)
    if not inst.uniform:
        assert inst.sampling == "sequential_gap"


def test_random_instance_without_fallback_fails_loudly():
    m = PulseModel(Domain((200,)), 20, 5, 10)  # exact packing, almost never hit by rejection
    with pytest.raises(InstanceGenerationError, match="sequential gap"):
        random_instance(m, seed=0, fallback=False)
    inst = random_instance(m, seed=0)
    assert inst.sampling == "sequential_gap" and is_in_model(inst.x.support, m)


@given(st.integers(8, 200), st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**32))
def test_random_instance_sparsity_bound(N, S, F, seed):
    delta = max(F, N // (2 * S))
    if S * delta > N:
        return
    m = PulseModel(Domain((N,)), S, F, delta)
    inst = random_instance(m, seed=seed)
    assert np.count_nonzero(inst.z) <= S * F
    assert is_in_model(inst.x.support, m)


def test_random_instance_2d():
    m = PulseModel(Domain((64, 64)), 7, 25, 10)
    inst = random_instance(m, seed=2)
    assert is_in_model(inst.x.support, m)
    assert np.count_nonzero(inst.z) <= 175
