import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from helpers import colocated_pair, observation_like, small_cf_instance
from isacnet.channels import complex_normal
from isacnet.detector import (StackedSensingResponse, detection_probability_mc,
                              glrt_statistic_cf, glrt_statistic_mc, glrt_statistics_cf,
                              ml_reflectivity, projection_energy_explicit, rcs_covariance,
                              run_glrt_cf, sensing_snr_cf, sensing_snr_mc,
                              simulate_observation, threshold_from_pfa)
from isacnet.errors import UndefinedTestError

seeds = st.integers(0, 2**32 - 1)


def cn(rng, *shape):
    return complex_normal(rng, shape)


def test_random_6x2_against_normal_equations():
    rng = np.random.default_rng(0)
    d, y = cn(rng, 6, 2), cn(rng, 6)
    proj = d @ np.linalg.solve(d.conj().T @ d, d.conj().T @ y)
    want = np.vdot(proj, proj).real
    got = glrt_statistic_cf(StackedSensingResponse.from_matrix([d]), [y])
    assert got == pytest.approx(want, rel=1e-10)


def test_range_and_orthogonal_complement():
    rng = np.random.default_rng(1)
    d = cn(rng, 8, 3)
    resp = StackedSensingResponse.from_matrix([d])
    inside = d @ cn(rng, 3)
    assert glrt_statistic_cf(resp, [inside]) == pytest.approx(np.vdot(inside, inside).real, rel=1e-12)
    q, _ = np.linalg.qr(np.column_stack([d, cn(rng, 8)]))
    perp = q[:, 3]
    assert glrt_statistic_cf(resp, [perp]) < 1e-24


def test_rank_deficient_columns():
    rng = np.random.default_rng(2)
    a = cn(rng, 6, 1)
    d = np.column_stack([a, 2 * a, cn(rng, 6)])
    resp = StackedSensingResponse.from_matrix([d])
    assert resp.ranks() == [2]
    y = cn(rng, 6)
    assert glrt_statistic_cf(resp, [y]) == pytest.approx(projection_energy_explicit(d, y), rel=1e-10)


def test_zero_response():
    resp = StackedSensingResponse.from_matrix([np.zeros((4, 2))])
    assert resp.ranks() == [0]
    with pytest.raises(UndefinedTestError):
        glrt_statistic_cf(resp, [np.ones(4)])
    with pytest.raises(UndefinedTestError):
        sensing_snr_cf(resp, 10.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_gram_path_matches_explicit(seed):
    rng = np.random.default_rng(seed)
    resp, _ = small_cf_instance(rng)
    y = observation_like(resp, rng)
    want = sum(projection_energy_explicit(resp.explicit(l), y[l]) for l in range(len(resp)))
    assert glrt_statistic_cf(resp, y) == pytest.approx(want, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_statistic_bounds_and_idempotence(seed):
    rng = np.random.default_rng(seed)
    resp, _ = small_cf_instance(rng)
    y = observation_like(resp, rng)
    stat = glrt_statistic_cf(resp, y)
    energy = sum(np.vdot(v, v).real for v in y)
    assert -1e-12 <= stat <= energy * (1 + 1e-12)
    # projecting the projection changes nothing; the residual is orthogonal to D
    alphas = ml_reflectivity(resp, y)
    fitted = [resp.block(l) @ alphas[l] for l in range(len(resp))]
    assert glrt_statistic_cf(resp, fitted) == pytest.approx(stat, rel=1e-9)
    for l in range(len(resp)):
        resid = y[l] - fitted[l]
        g = resp.explicit(l).conj().T @ resid.reshape(-1)
        scale = np.linalg.norm(resp.explicit(l)) * np.linalg.norm(y[l])
        assert np.linalg.norm(g) <= 1e-9 * scale


def test_batched_equals_single():
    rng = np.random.default_rng(3)
    resp, _ = small_cf_instance(rng, max_tx=3, max_rx=3)
    batch = [complex_normal(rng, (5,) + resp.block_shape(l)[:-1]) for l in range(len(resp))]
    many = glrt_statistics_cf(resp, batch)
    for t in range(5):
        assert many[t] == pytest.approx(glrt_statistic_cf(resp, [b[t] for b in batch]), rel=1e-12)


def test_mc_statistic():
    rng = np.random.default_rng(4)
    d = cn(rng, 10)
    assert glrt_statistic_mc(d, d) == pytest.approx(np.vdot(d, d).real)
    perp = cn(rng, 10)
    perp -= d * np.vdot(d, perp) / np.vdot(d, d)
    assert glrt_statistic_mc(d, perp) < 1e-20
    with pytest.raises(UndefinedTestError):
        glrt_statistic_mc(np.zeros(3), np.ones(3))


def test_threshold_examples():
    assert threshold_from_pfa(1, 2.5, np.exp(-1)) == pytest.approx(2.5, rel=1e-12)
    assert threshold_from_pfa(4, 1.0, 1 - 1e-12) < 1e-2
    with pytest.raises(UndefinedTestError):
        threshold_from_pfa(0, 1.0, 0.1)


def test_h0_shape3_calibration():
    # 10^6 Gamma(3) draws through the real statistic: three unit-rank rAPs
    rng = np.random.default_rng(5)
    resp = StackedSensingResponse.from_matrix([cn(rng, 4, 1) for _ in range(3)])
    noise = 0.7
    thr = threshold_from_pfa(3, noise, 0.01)
    hits = 0
    for _ in range(4):
        batch = [complex_normal(rng, (250_000, 1, 1, 4), noise) for _ in range(3)]
        hits += int(np.sum(glrt_statistics_cf(resp, batch) > thr))
    assert abs(hits / 1e6 - 0.01) <= 0.001


def test_h0_observation_variance():
    rng = np.random.default_rng(6)
    resp = StackedSensingResponse.from_matrix([np.ones((100_000, 1))])
    y = simulate_observation(resp, 3.0, rng)[0]
    assert np.mean(np.abs(y) ** 2) == pytest.approx(3.0, rel=0.02)
    resp2 = StackedSensingResponse.from_matrix([cn(rng, 5, 2)])
    y0 = simulate_observation(resp2, 0.0, rng, alphas=[cn(rng, 2)])[0]
    assert glrt_statistic_cf(resp2, [y0]) == pytest.approx(np.vdot(y0, y0).real, rel=1e-10)


def test_reduction_to_monostatic():
    rng = np.random.default_rng(7)
    for _ in range(20):
        cf, mc = colocated_pair(rng)
        a = sensing_snr_cf(cf, 10.0, 1e-12)
        b = sensing_snr_mc(mc.mc_vector, 10.0, 1e-12)
        assert a == pytest.approx(b, rel=1e-12)


def test_snr_linearity_and_zero_rcs():
    rng = np.random.default_rng(8)
    resp, _ = small_cf_instance(rng)
    base = sensing_snr_cf(resp, 10.0, 1e-13)
    scaled = StackedSensingResponse(coef=resp.coef * np.sqrt(7.0), rx_steering=resp.rx_steering)
    assert sensing_snr_cf(scaled, 10.0, 1e-13) == pytest.approx(7 * base, rel=1e-12)
    assert sensing_snr_cf(resp, 10.0, 2e-13) * 2e-13 == pytest.approx(base * 1e-13, rel=1e-12)
    assert sensing_snr_cf(resp, np.zeros((resp.n_columns,) * 2), 1e-13) == 0.0
    assert sensing_snr_mc(np.zeros(4), 10.0, 1.0) == 0.0


def test_snr_with_full_covariance():
    rng = np.random.default_rng(9)
    d = cn(rng, 6, 3)
    b = cn(rng, 3, 3)
    r = b @ b.conj().T
    resp = StackedSensingResponse.from_matrix([d])
    want = np.trace(d @ r @ d.conj().T).real / (2.0 * 3)
    assert sensing_snr_cf(resp, r, 2.0) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        rcs_covariance(-r, 3)


def test_detection_closed_form_single_rank():
    # rank-1 Swerling-I: Pd = pfa ** (1 / (1 + gamma))
    rng = np.random.default_rng(10)
    d = cn(rng, 8, 1)
    resp = StackedSensingResponse.from_matrix([d])
    noise, rcs, pfa = 1.0, 0.5, 0.01
    gamma = sensing_snr_cf(resp, rcs, noise)
    est = detection_probability_mc(resp, rcs, noise, pfa, 20_000, rng)
    want = pfa ** (1 / (1 + gamma))
    assert est.ci_low <= want <= est.ci_high
    assert abs(est.pd - want) < 0.02


def test_detection_limits():
    rng = np.random.default_rng(11)
    resp = StackedSensingResponse.from_matrix([cn(rng, 6, 2)])
    h0 = detection_probability_mc(resp, 0.0, 1.0, 0.05, 20_000, rng)
    assert h0.ci_low - 0.005 <= 0.05 <= h0.ci_high + 0.005
    strong = detection_probability_mc(resp, 1.0, 1e-9, 0.05, 2000, rng)
    assert strong.pd > 0.99
    ci = stats.binomtest(int(h0.pd * 20_000), 20_000).proportion_ci(0.95, method="wilson")
    assert (h0.ci_low, h0.ci_high) == pytest.approx((ci.low, ci.high))


def test_run_glrt_decision():
    rng = np.random.default_rng(12)
    d = cn(rng, 10, 2)
    resp = StackedSensingResponse.from_matrix([d])
    out = run_glrt_cf(resp, [d @ np.array([5.0, -3.0])], 1e-6, 0.01)
    assert out.decision == "H1"
    assert np.allclose(out.alpha_estimate[0], [5.0, -3.0])
