import math

import numpy as np
import pytest
import scipy.integrate

from secmimo.channel import (
    AngularProfile,
    CorrelationSet,
    SystemConfig,
    build_scenario,
    correlation_matrix,
    laplacian_pas,
    load_scenario,
    sample_channel_draw,
    save_scenario,
    steering_vector,
)
from secmimo.errors import ValidationError
from secmimo.rng import substream


def test_config_validation():
    with pytest.raises(ValidationError):
        SystemConfig(tau=3, K=5)
    with pytest.raises(ValidationError):
        SystemConfig(m=6, K=5)
    with pytest.raises(ValidationError):
        SystemConfig(rho=0.0)
    with pytest.raises(ValidationError):
        SystemConfig(P_ul=[[1.0] * 5] * 3)  # needs L+1 = 4 rows
    with pytest.raises(ValidationError):
        SystemConfig.from_dict({"L": 1, "bogus": 2})


def test_config_roundtrip():
    cfg = SystemConfig(L=1, K=2, tau=4, P_ul=[[1.0, 2.0], [0.5, 1.0]], eve_cross_gain=0.3)
    assert SystemConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.powers.shape == (2, 2) and cfg.eve_gain == 0.3
    assert SystemConfig().eve_gain == SystemConfig().rho


def test_pas_peak_symmetry_and_support():
    p = AngularProfile(0.2, math.pi / 2)
    peak = 1.0 / (math.sqrt(2) * (math.pi / 2) * (1 - math.exp(-2 * math.sqrt(2))))
    assert laplacian_pas(0.2, p) == pytest.approx(peak, rel=1e-14)
    assert laplacian_pas(0.5, p) == pytest.approx(laplacian_pas(-0.1, p), rel=1e-14)
    assert laplacian_pas(0.2 + math.pi + 1e-9, p) == 0.0


def test_pas_normalization():
    p = AngularProfile(0.0, math.pi / 2)
    x = np.linspace(-math.pi, math.pi, 10_001)
    assert scipy.integrate.simpson(laplacian_pas(x, p), x=x) == pytest.approx(1.0, abs=1e-6)
    val, _ = scipy.integrate.quad(lambda t: laplacian_pas(t, AngularProfile(1.0, 0.05)), 1 - math.pi, 1 + math.pi,
                                  points=[1.0], limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_steering_vector():
    np.testing.assert_allclose(steering_vector(0.0, 5), np.ones(5))
    np.testing.assert_allclose(steering_vector(math.pi / 2, 2), [1, -1], atol=1e-15)
    for th in (0.3, -1.2, 2.0):
        assert np.linalg.norm(steering_vector(th, 17)) ** 2 == pytest.approx(17)


def test_correlation_point_source_is_rank_one():
    R = correlation_matrix(AngularProfile(0.3, 1e-6), 8, 8.0, 4096)
    a = steering_vector(0.3, 8)
    np.testing.assert_allclose(R, np.outer(a, a.conj()), atol=1e-8)
    lam = np.linalg.eigvalsh(R)
    assert lam[-2] < 1e-8 * lam[-1]


def test_correlation_refinement_and_diagonal():
    p = AngularProfile(0.0, math.pi / 2)
    a = correlation_matrix(p, 4, 4.0, 4096)
    b = correlation_matrix(p, 4, 4.0, 8192)
    assert np.abs(a - b).max() < 1e-8
    np.testing.assert_allclose(np.diag(a).real, np.ones(4), atol=1e-12)


def test_correlation_matches_adaptive_quadrature():
    # independent oracle: entry (n, 0) as a real/imag adaptive integral
    p = AngularProfile(0.4, 0.3)
    R = correlation_matrix(p, 6, 6.0, 4096)
    for n in range(6):
        f = lambda t, part: part(laplacian_pas(t, p) * np.exp(-1j * math.pi * n * math.sin(t)))
        re = scipy.integrate.quad(f, 0.4 - math.pi, 0.4 + math.pi, args=(np.real,), points=[0.4], limit=400)[0]
        im = scipy.integrate.quad(f, 0.4 - math.pi, 0.4 + math.pi, args=(np.imag,), points=[0.4], limit=400)[0]
        assert abs(R[n, 0] - (re + 1j * im)) < 1e-8


@pytest.mark.parametrize("sigma", [0.05, 0.3, math.pi / 2])
def test_correlation_refinement_beyond_4096(sigma):
    p = AngularProfile(-0.7, sigma)
    a = correlation_matrix(p, 64, 64.0, 4096)
    b = correlation_matrix(p, 64, 64.0, 8192)
    assert np.abs(a - b).max() < 1e-8


def test_correlation_validation():
    with pytest.raises(ValidationError):
        correlation_matrix(AngularProfile(0, 1), 4, 0.0)
    with pytest.raises(ValidationError):
        correlation_matrix(AngularProfile(0, 1), 4, 4.0, 100)
    with pytest.raises(ValidationError):
        AngularProfile(0, 0.0)


def _check_invariants(corr, cfg):
    N = cfg.N_t
    for l in range(cfg.L + 1):
        for k in range(cfg.K):
            for p in corr.observers:
                R = corr.user(l, k, p)
                assert np.trace(R).real == pytest.approx(N if l == p else cfg.rho * N, abs=1e-6)
                np.testing.assert_allclose(R, R.conj().T, atol=1e-12 * N)
                assert np.linalg.eigvalsh(R).min() >= -1e-10 * np.linalg.eigvalsh(R).max()
    for p in corr.observers:
        assert np.trace(corr.eve(p)).real == pytest.approx(N if p == 0 else cfg.eve_gain * N, abs=1e-6)


def test_reference_scenario_shape_and_traces(ref_config, ref_corr):
    assert ref_corr.R_user.shape[:3] == (4, 5, 4)  # 80 user matrices
    assert ref_corr.R_eve.shape[0] == 4
    _check_invariants(ref_corr, ref_config)


def test_downscaled_scenario_invariants():
    cfg = SystemConfig(N_t=8, seed=3)
    _check_invariants(build_scenario(cfg), cfg)


def test_build_scenario_deterministic(small_config):
    a, b = build_scenario(small_config), build_scenario(small_config)
    assert np.array_equal(a.R_user, b.R_user) and np.array_equal(a.R_eve, b.R_eve)
    c = build_scenario(small_config, repetition=1)
    assert not np.array_equal(a.R_user, c.R_user)
    assert np.all(np.abs(a.aoa_user) <= math.pi / 2) and np.all(np.abs(a.aoa_eve) <= math.pi / 2)


def test_partial_observers_match_full(small_config, small_corr):
    part = build_scenario(small_config, observers=(1,))
    np.testing.assert_array_equal(part.user(0, 1, 1), small_corr.user(0, 1, 1))
    with pytest.raises(ValidationError):
        part.user(0, 0, 0)


def _single(R):
    N = R.shape[0]
    return CorrelationSet(R.reshape(1, 1, 1, N, N).astype(complex), np.zeros((1, N, N), complex))


def test_draw_zero_and_rank_one():
    N = 4
    d = sample_channel_draw(_single(np.zeros((N, N))), substream(0, "trial", 0))
    assert np.all(d.h_user == 0) and np.all(d.h_eve == 0)
    u = np.array([1, 1j, -1, 0]) / math.sqrt(3)
    corr = _single(np.outer(u, u.conj()))
    for i in range(5):
        h = sample_channel_draw(corr, substream(0, "trial", i)).user(0, 0, 0)
        assert np.linalg.norm(h - u * np.vdot(u, h)) < 1e-12


def test_draw_covariance_identity():
    N, T = 4, 100_000
    corr = _single(np.eye(N))
    rng = substream(1, "covariance", 0)
    H = np.stack([sample_channel_draw(corr, rng).user(0, 0, 0) for _ in range(T)])
    S = H.T @ H.conj() / T
    assert np.linalg.norm(S - np.eye(N)) / np.linalg.norm(np.eye(N)) < 0.05


def test_draw_covariance_correlated(small_corr):
    T = 100_000
    R = small_corr.user(0, 0, 0)
    rng = substream(2, "covariance", 0)
    from secmimo.rng import complex_normal

    H = complex_normal(rng, (T, R.shape[0])) @ small_corr.sqrt_user[0, 0, 0].T
    S = H.T @ H.conj() / T
    assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.05


def test_draw_deterministic_per_substream(small_corr):
    a = sample_channel_draw(small_corr, substream(5, "trial", 3))
    b = sample_channel_draw(small_corr, substream(5, "trial", 3))
    c = sample_channel_draw(small_corr, substream(5, "trial", 4))
    assert np.array_equal(a.h_user, b.h_user)
    assert not np.array_equal(a.h_user, c.h_user)


def test_scenario_file_roundtrip(tmp_path, small_config, small_corr):
    path = tmp_path / "s.json"
    save_scenario(path, small_corr, small_config)
    corr, cfg = load_scenario(path)
    assert cfg == small_config
    assert np.abs(corr.R_user - small_corr.R_user).max() <= 1e-15
    assert np.abs(corr.R_eve - small_corr.R_eve).max() <= 1e-15
    assert corr.observers == small_corr.observers


def test_substream_validation():
    with pytest.raises(ValidationError):
        substream(-1, "trial", 0)
    with pytest.raises(ValidationError):
        substream(0, "nope", 0)
