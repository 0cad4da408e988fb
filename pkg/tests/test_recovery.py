import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsestream.errors import ModelError
from pulsestream.linop import CirculantOperator
from pulsestream.recovery import (
    RecoveryConfig,
    am_exhaustive,
    am_inner,
    anchor_pulse_closed_form,
    anchor_pulse_fixed_point,
    anchor_residual,
    block_cosamp,
    block_energy,
    cosamp,
    iterative_support_estimation,
    oracle_decoder,
    select_blocks,
)
from pulsestream.sampling import empirical_isometry, gaussian_matrix, identity_matrix, measure
from pulsestream.signal_model import (
    Domain,
    ImpulseResponse,
    PulseModel,
    Support,
    circular_convolve,
    is_in_model,
    random_instance,
)

CFG = RecoveryConfig()


def rel_err(z, z_hat):
    return np.linalg.norm(z - z_hat) / np.linalg.norm(z)


def nonincreasing(history, slack=1e-12):
    return all(b <= a * (1 + slack) for a, b in zip(history, history[1:]))


def check_result(res, model):
    assert is_in_model(res.x_hat.support, model)
    assert math.isclose(np.linalg.norm(res.h_hat.coefficients), 1.0, abs_tol=1e-12) or not np.any(
        res.z_hat
    )
    nz = np.flatnonzero(res.h_hat.coefficients)
    assert res.h_hat.coefficients[nz[0]] > 0
    assert np.array_equal(res.z_hat, circular_convolve(res.x_hat.dense(), res.h_hat.dense(), model.domain))
    Hx = CirculantOperator(res.h_hat.dense(), model.domain).apply(res.x_hat.dense())
    Xh = CirculantOperator(res.x_hat.dense(), model.domain).apply(res.h_hat.dense())
    assert np.allclose(Hx, Xh, rtol=0, atol=1e-12)


# configuration


def test_config_validation():
    with pytest.raises(ModelError):
        RecoveryConfig(eps=-1.0)
    with pytest.raises(ModelError):
        RecoveryConfig(max_outer_iters=0)
    with pytest.raises(ModelError):
        RecoveryConfig(halting="sometimes")
    with pytest.raises(ModelError):
        RecoveryConfig(restarts=-1)


# alternating minimization on a fixed support


def test_am_inner_fixed_point_at_truth():
    m = PulseModel(Domain((64,)), 3, 4, 16)
    x, h, z = random_instance(m, seed=2)
    r = am_inner(z, identity_matrix(64), x.support, h, CFG)
    assert r.residual <= 1e-12 * np.linalg.norm(z)
    assert r.iterations <= 2
    assert rel_err(z, circular_convolve(r.x_hat.dense(), r.h_hat.dense())) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_am_inner_flat_start_converges_on_true_support(seed):
    m = PulseModel(Domain((64,)), 2, 3, 8)
    x, h, z = random_instance(m, seed=seed)
    phi = gaussian_matrix(32, 64, seed)
    r = am_inner(measure(phi, z), phi, x.support, ImpulseResponse.flat(3, m.domain), CFG)
    assert r.residual <= 1e-8
    assert r.iterations <= 20
    assert nonincreasing(r.history)


def test_am_inner_wrong_support_has_residual_floor():
    m = PulseModel(Domain((64,)), 2, 3, 8)
    x, h, z = random_instance(m, seed=4)
    wrong = Support(tuple((i + 32) % 64 for i in x.support.indices), m.domain)
    assert not set(wrong.indices) & set(x.support.indices)
    phi = gaussian_matrix(32, 64, 4)
    r = am_inner(measure(phi, z), phi, wrong, ImpulseResponse.flat(3, m.domain), CFG)
    assert r.residual > 1e-3 * np.linalg.norm(measure(phi, z))
    assert nonincreasing(r.history)


@given(st.integers(0, 2**31), st.booleans())
def test_am_inner_history_is_monotone(seed, correct):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(24, 129))
    S = int(rng.integers(1, 4))
    F = int(rng.integers(1, 6))
    delta = max(F, N // (2 * S))
    m = PulseModel(Domain((N,)), S, F, delta)
    inst = random_instance(m, seed=seed)
    phi = gaussian_matrix(int(rng.integers(S + F, N + 1)), N, seed + 1)
    sigma = inst.x.support if correct else random_instance(m, seed=seed + 7).x.support
    r = am_inner(measure(phi, inst.z), phi, sigma, ImpulseResponse.flat(F, m.domain), CFG)
    assert nonincreasing(r.history)


# exhaustive search


def test_am_exhaustive_tiny_instance():
    m = PulseModel(Domain((32,)), 2, 3, 6)
    x, h, z = random_instance(m, seed=3)
    phi = gaussian_matrix(20, 32, 3)
    res = am_exhaustive(measure(phi, z), phi, m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-6
    assert res.x_hat.support == x.support
    check_result(res, m)


def test_am_exhaustive_infinite_eps_returns_first_support():
    m = PulseModel(Domain((32,)), 2, 3, 6)
    _, _, z = random_instance(m, seed=3)
    phi = gaussian_matrix(20, 32, 3)
    res = am_exhaustive(measure(phi, z), phi, m, RecoveryConfig(eps=math.inf))
    assert res.info["candidates"] == 1
    assert res.x_hat.support.indices == (0, 6)


def test_am_exhaustive_zero_measurements():
    m = PulseModel(Domain((24,)), 2, 2, 6)
    phi = gaussian_matrix(10, 24, 0)
    res = am_exhaustive(np.zeros(10), phi, m, CFG)
    assert not np.any(res.z_hat) and res.residual == 0.0


def test_am_exhaustive_cap_and_2d_rejected():
    m = PulseModel(Domain((1024,)), 8, 11, 64)
    with pytest.raises(ModelError, match="iterative_support_estimation"):
        am_exhaustive(np.zeros(10), gaussian_matrix(10, 1024, 0), m, CFG)
    m2 = PulseModel(Domain((8, 8)), 1, 4, 2)
    with pytest.raises(ModelError):
        am_exhaustive(np.zeros(64), None, m2, CFG)


def test_am_exhaustive_monotone_history():
    m = PulseModel(Domain((32,)), 2, 3, 6)
    _, _, z = random_instance(m, seed=5)
    phi = gaussian_matrix(20, 32, 5)
    res = am_exhaustive(measure(phi, z), phi, m, CFG)
    assert nonincreasing(res.residual_history)


# iterative support estimation


def test_alg2_nyquist_rate_exact():
    m = PulseModel(Domain((1024,)), 8, 11, 64)
    _, _, z = random_instance(m, seed=0)
    res = iterative_support_estimation(z, identity_matrix(1024), m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-8
    assert res.iterations <= 3
    check_result(res, m)


def test_alg2_zero_measurements():
    m = PulseModel(Domain((256,)), 4, 5, 32)
    phi = gaussian_matrix(40, 256, 1)
    res = iterative_support_estimation(np.zeros(40), phi, m, CFG)
    assert not np.any(res.z_hat) and not np.any(res.x_hat.values)
    assert np.allclose(res.h_hat.coefficients, ImpulseResponse.flat(5, m.domain).coefficients)


def test_alg2_compressive_small():
    m = PulseModel(Domain((256,)), 3, 6, 40)
    x, h, z = random_instance(m, seed=8)
    phi = gaussian_matrix(60, 256, 8)
    res = iterative_support_estimation(measure(phi, z), phi, m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-6
    check_result(res, m)
    assert res.status == "converged"


def test_alg2_single_start_matches_unrestarted_run():
    m = PulseModel(Domain((256,)), 3, 6, 40)
    _, _, z = random_instance(m, seed=8)
    phi = gaussian_matrix(60, 256, 8)
    res = iterative_support_estimation(measure(phi, z), phi, m, RecoveryConfig(restarts=0))
    assert res.info["runs"] == 1 and res.info["restart"] == 0


def test_alg2_lp_path_runs():
    m = PulseModel(Domain((64,)), 2, 3, 16)
    _, _, z = random_instance(m, seed=1)
    phi = gaussian_matrix(30, 64, 1)
    res = iterative_support_estimation(measure(phi, z), phi, m, RecoveryConfig(approx="lp", restarts=3))
    assert res.status in ("converged", "max_iters", "integrality_flag")
    check_result(res, m)


def test_alg2_full_scale_m90():
    """Accurate recovery of N=1024, S=8, F=11 from 90 measurements on >= 80% of 50 seeds."""
    m = PulseModel(Domain((1024,)), 8, 11, 64)
    ok = 0
    for seed in range(50):
        _, _, z = random_instance(m, seed=seed)
        phi = gaussian_matrix(90, 1024, 10_000 + seed)
        res = iterative_support_estimation(measure(phi, z), phi, m, CFG)
        ok += rel_err(z, res.z_hat) <= 1e-2
    assert ok >= 40


def test_alg2_2d_small():
    dom = Domain((24, 24))
    m = PulseModel(dom, 3, 9, 6)
    _, _, z = random_instance(m, seed=0)
    phi = gaussian_matrix(90, 576, 0)
    res = iterative_support_estimation(measure(phi, z), phi, m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-6
    check_result(res, m)


@pytest.mark.parametrize("seed", range(4))
def test_residual_to_error_bound(seed):
    m = PulseModel(Domain((128,)), 2, 4, 32)
    phi = gaussian_matrix(64, 128, seed)
    delta_hat = empirical_isometry(phi, m, 300, seed).delta_hat
    if delta_hat >= 1:
        pytest.skip("sampled distortion too large for the bound")
    _, _, z = random_instance(m, seed=100 + seed)
    y = measure(phi, z)
    res = iterative_support_estimation(y, phi, m, CFG)
    eps = res.residual
    # the sampled distortion underestimates the true constant, hence the slack
    assert np.linalg.norm(z - res.z_hat) <= eps / math.sqrt(1 - delta_hat) + 1e-8 * np.linalg.norm(z)


# oracle decoder


def test_oracle_exact_with_true_pulse():
    m = PulseModel(Domain((512,)), 4, 8, 64)
    x, h, z = random_instance(m, seed=5)
    M = int(4 * m.S * math.log(m.N))
    phi = gaussian_matrix(M, 512, 5)
    res = oracle_decoder(measure(phi, z), phi, h, m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-6
    assert np.array_equal(res.h_hat.coefficients, h.coefficients)


def test_oracle_mismatched_pulse_leaves_residual():
    m = PulseModel(Domain((256,)), 3, 6, 40)
    x, h, z = random_instance(m, seed=5)
    other = random_instance(m, seed=6).h
    phi = gaussian_matrix(80, 256, 5)
    y = measure(phi, z)
    res = oracle_decoder(y, phi, other, m, CFG)
    assert res.residual > 1e-3 * np.linalg.norm(y)


def test_oracle_identity_one_step():
    m = PulseModel(Domain((256,)), 3, 6, 40)
    x, h, z = random_instance(m, seed=2)
    res = oracle_decoder(z, None, h, m, CFG)
    assert rel_err(z, res.z_hat) <= 1e-12
    assert res.residual_history[0] <= 1e-12 * np.linalg.norm(z)


# baselines


def test_cosamp_identity_is_hard_thresholding():
    rng = np.random.default_rng(0)
    z = np.zeros(50)
    z[[3, 17, 40]] = rng.standard_normal(3)
    assert np.allclose(cosamp(z, identity_matrix(50), 3, CFG), z, atol=1e-14)
    noisy = z + 1e-3 * rng.standard_normal(50)
    got = cosamp(noisy, identity_matrix(50), 3, CFG)
    assert set(np.flatnonzero(got)) == {3, 17, 40}


def test_cosamp_exact_sparse_recovery():
    rng = np.random.default_rng(1)
    z = np.zeros(64)
    z[rng.choice(64, 4, replace=False)] = rng.standard_normal(4)
    phi = gaussian_matrix(32, 64, 1)
    assert rel_err(z, cosamp(measure(phi, z), phi, 4, CFG)) <= 1e-8


def test_cosamp_rejects_bad_k():
    with pytest.raises(ModelError):
        cosamp(np.zeros(4), None, 0, CFG)


def test_block_cosamp_identity_exact():
    m = PulseModel(Domain((120,)), 4, 6, 20)
    _, _, z = random_instance(m, seed=3)
    got = block_cosamp(z, identity_matrix(120), 4, 6, CFG)
    assert np.allclose(got, z, atol=1e-14)


def test_block_selection_hand_example():
    # blocks of 3 on a ring of 12; block energies E[4]=9, E[5]=12, E[8..10]=2.25
    v = np.zeros(12)
    v[4], v[5], v[6], v[7] = 1.0, 2.0, 2.0, 2.0
    v[10] = 1.5
    E = block_energy(v, 3, Domain((12,)))
    assert E[5] == 12.0 and E[4] == 9.0 and E[8] == E[9] == E[10] == 2.25
    # [5..7] wins; the overlapping [4..6] is excluded; the tie among 8, 9, 10 goes to 8
    got = select_blocks(v, 2, 3, Domain((12,)))
    assert got.tolist() == [5, 6, 7, 8, 9, 10]


def test_block_cosamp_2d_identity():
    dom = Domain((20, 20))
    m = PulseModel(dom, 3, 9, 6)
    _, _, z = random_instance(m, seed=1)
    got = block_cosamp(z, identity_matrix(400), 3, 9, CFG, dom)
    assert np.allclose(got, z, atol=1e-14)


# anchor pulse


def test_anchor_identical_pulses():
    h = np.array([0.6, 0.8, 0.0])
    out = anchor_pulse_closed_form([h, h, h], [1.0, -2.0, 0.5], h)
    assert np.allclose(out, h, atol=1e-15)


def test_anchor_single_pulse():
    h1 = np.array([1.0, 2.0, 2.0])
    g = h1 / 3.0
    out = anchor_pulse_closed_form([h1], [4.0], g)
    assert np.allclose(out / np.linalg.norm(out), g, atol=1e-15)


def test_anchor_orthogonal_pulses_term_by_term():
    h1 = np.array([1.0, 0.0, 0.0])
    h2 = np.array([0.0, 1.0, 0.0])
    g = (h1 + h2) / math.sqrt(2)
    c1 = c2 = 1 / math.sqrt(2)
    num = c1 * 1 * h1 + c2 * 1 * h2
    den = c1**2 + c2**2
    assert np.allclose(anchor_pulse_closed_form([h1, h2], [1.0, 1.0], g), num / den, atol=1e-15)


def test_anchor_zero_denominator_rejected():
    with pytest.raises(ModelError):
        anchor_pulse_closed_form([np.array([1.0, 0.0])], [1.0], np.array([0.0, 1.0]))


def _anchor_case(seed, F=5, S=4, N=80):
    rng = np.random.default_rng(seed)
    dom = Domain((N,))
    base = rng.standard_normal(F)
    base /= np.linalg.norm(base)
    pulses = [base + 0.05 * rng.standard_normal(F) for _ in range(S)]
    alpha = rng.uniform(0.5, 2.0, S) * rng.choice([-1, 1], S)
    shifts = Support(tuple(int(i) for i in np.arange(S) * (N // S) + rng.integers(0, N // S - F)), dom)
    return pulses, alpha, shifts, ImpulseResponse.flat(F, dom)


def test_anchor_fixed_point_identical_pulses_fast():
    dom = Domain((40,))
    h = np.array([0.5, 0.5, 0.5, 0.5])
    res = anchor_pulse_fixed_point([h] * 3, [1.0, 2.0, -1.0], Support((0, 10, 25), dom),
                                   ImpulseResponse(h, dom), CFG)
    assert res.converged and res.iterations <= 2
    assert np.allclose(res.pulse.coefficients, h)


def test_anchor_fixed_point_self_consistent():
    pulses, alpha, shifts, h0 = _anchor_case(5)
    res = anchor_pulse_fixed_point(pulses, alpha, shifts, h0, RecoveryConfig(max_inner_iters=500))
    assert res.converged
    assert anchor_residual(pulses, alpha, res.pulse) <= 1e-8


def test_anchor_iterates_are_scale_invariant():
    pulses, alpha, shifts, h0 = _anchor_case(6)
    cfg = RecoveryConfig(max_inner_iters=500)
    a = anchor_pulse_fixed_point(pulses, alpha, shifts, h0, cfg)
    b = anchor_pulse_fixed_point(pulses, 7.3 * alpha, shifts, h0, cfg)
    assert a.iterations == b.iterations
    assert np.allclose(a.pulse.coefficients, b.pulse.coefficients, rtol=0, atol=1e-12)


def test_anchor_fixed_point_flags_nonconvergence():
    pulses, alpha, shifts, h0 = _anchor_case(7)
    res = anchor_pulse_fixed_point(pulses, alpha, shifts, h0, RecoveryConfig(max_inner_iters=1))
    assert not res.converged and res.iterations == 1


def test_anchor_matches_am_at_nyquist_rate():
    pulses, alpha, shifts, h0 = _anchor_case(8)
    from pulsestream.recovery import pulse_stream_from_shapes

    y = pulse_stream_from_shapes(pulses, alpha, shifts)
    cfg = RecoveryConfig(max_inner_iters=500, rel_change_tol=0.0)
    am = am_inner(y, None, shifts, h0, cfg)
    fp = anchor_pulse_fixed_point(pulses, alpha, shifts, h0, cfg)
    assert np.allclose(am.h_hat.coefficients, fp.pulse.coefficients, atol=1e-8)
