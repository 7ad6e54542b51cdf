import math

import numpy as np
import pytest
from scipy import integrate as spi
from scipy import special

from uavcorridor import analysis, geometry, montecarlo
from uavcorridor.model import NetworkConfig, inv_gamma_pdf, path_loss
from uavcorridor.numerics import EULER, TALBOT


@pytest.fixture(scope="module")
def harvest_samples():
    c = NetworkConfig()
    return montecarlo.sample_harvest_distribution(c, 400_000, seed=7)


# -------------------------------------------------------------- exact energy

def test_energy_laplace_at_zero_is_one(cfg):
    assert complex(analysis.energy_laplace(cfg, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_energy_laplace_vectorized_shape(cfg):
    s = np.array([[1e8, 2e8], [3e8, 4e8]], dtype=complex)
    assert analysis.energy_laplace(cfg, s).shape == (2, 2)


def test_energy_laplace_matches_empirical(cfg, harvest_samples):
    mean = harvest_samples.mean()
    for s in (0.3 / mean, 1.0 / mean, 3.0 / mean):
        emp = np.exp(-s * harvest_samples)
        hw = 4 * emp.std() / math.sqrt(len(emp))
        assert complex(analysis.energy_laplace(cfg, s)).real == pytest.approx(emp.mean(), abs=hw)


def test_energy_laplace_single_uav_against_double_quadrature():
    c = NetworkConfig(n_uavs=1)
    s = 1.0 / (c.harvest_scale * c.path_loss_const * c.altitude_m ** -c.alpha)
    m, q, g = c.nakagami_m, c.shadow_q, c.shadow_gamma

    def inner(x):
        lg = path_loss(c, math.hypot(c.altitude_m, x))
        # E_h[exp(-s c S h l)] = (1 + s c S l / m)^-m
        return spi.quad(lambda S: (1 + s * c.harvest_scale * S * lg / m) ** -m
                        * inv_gamma_pdf(q, g, S) if S > 0 else 0.0,
                        0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)[0] / c.radius_m

    ref = spi.quad(inner, 0, c.radius_m, epsabs=1e-13, epsrel=1e-12)[0]
    assert complex(analysis.energy_laplace(c, s)).real == pytest.approx(ref, rel=1e-9)


def test_exact_coverage_trivial_cases(cfg):
    assert analysis.energy_coverage_exact(cfg.replace(energy_threshold_j=0.0)).value == 1.0
    assert analysis.energy_coverage_exact(cfg.replace(tau=0.0)).value == 0.0


def test_exact_coverage_methods_agree_and_monotone(cfg):
    gs = cfg.energy_threshold_j * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    vals = []
    for g in gs:
        c = cfg.replace(energy_threshold_j=float(g))
        t = analysis.energy_coverage_exact(c, TALBOT)
        e = analysis.energy_coverage_exact(c, EULER)
        assert t.value == pytest.approx(e.value, abs=1e-6)
        assert t.method is analysis.Method.EXACT_LAPLACE
        vals.append(t.value)
    assert np.all(np.diff(vals) < 0)


def test_exact_coverage_matches_empirical_cdf(cfg, harvest_samples):
    p = np.mean(harvest_samples >= cfg.energy_threshold_j)
    hw = montecarlo.halfwidth(p, len(harvest_samples))
    assert analysis.energy_coverage_exact(cfg).value == pytest.approx(p, abs=max(3 * hw, 0.005))


# --------------------------------------------------------- moment matching

def test_single_term_moments_against_quadrature(cfg):
    r = 130.0
    ex, ex2 = analysis.single_term_moments(cfg, r)
    x_r = geometry.horizontal_offset(cfg, r)

    def lpow(p):
        f = lambda x: path_loss(cfg, math.hypot(cfg.altitude_m, x)) ** p
        return spi.quad(f, x_r, cfg.radius_m, epsrel=1e-13)[0] / (cfg.radius_m - x_r)

    c, m = cfg.harvest_scale, cfg.nakagami_m
    assert ex == pytest.approx(c * cfg.shadow_mean * lpow(1), rel=1e-12)
    assert ex2 == pytest.approx(c * c * cfg.shadow_second_moment * (m + 1) / m * lpow(2),
                                rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_multinomial_second_moment_identity(cfg, n):
    c = cfg.replace(n_uavs=n)
    for r in (105.0, 150.0, 200.0):
        mp = analysis.mom_params(c, r)
        assert analysis.multinomial_moment(c, r) == pytest.approx(
            float(mp.cond_second_moment), rel=1e-12)
        # Gamma(k, theta) reproduces mean and variance
        assert mp.k_mom * mp.theta_mom == pytest.approx(mp.cond_mean, rel=1e-12)
        assert mp.k_mom * mp.theta_mom ** 2 == pytest.approx(mp.variance, rel=1e-10)


def test_conditional_mean_and_variance_match_simulation(cfg):
    r = 120.0
    samples = montecarlo.sample_slots(cfg, 400_000, seed=3, r_pin=r)
    # the simulator only exposes totals: add the serving term's mean
    serving_mean = cfg.harvest_scale * cfg.shadow_mean * path_loss(cfg, r)
    mp = analysis.mom_params(cfg, r)
    total_mean = serving_mean + float(mp.cond_mean)
    sem = samples.harvested_j.std() / math.sqrt(len(samples))
    assert samples.harvested_j.mean() == pytest.approx(total_mean, abs=4 * sem)


def test_mom_params_degenerate_cases(cfg):
    with pytest.raises(analysis.DegenerateModelError):
        analysis.mom_params(cfg.replace(n_uavs=1), 120.0)
    with pytest.raises(analysis.DegenerateModelError):
        analysis.mom_params(cfg.replace(shadow_q=2.0), 120.0)
    with pytest.raises(ValueError):
        analysis.mom_params(cfg, 50.0)


def _cond_energy_reference(c, r):
    """P(serving + Gamma(k, theta) >= gamma_h | r) by nested adaptive quadrature
    over the serving shadowing S and fading h."""
    g_h = c.energy_threshold_j
    m, q, g = c.nakagami_m, c.shadow_q, c.shadow_gamma
    a = c.harvest_scale * path_loss(c, r)
    mp = analysis.mom_params(c, r)
    k, th = float(mp.k_mom), float(mp.theta_mom)

    def given_s(S):
        if S <= 0:
            return 0.0
        h0 = g_h / (a * S)        # serving alone suffices beyond h0
        alone = special.gammaincc(m, m * h0)
        part = spi.quad(lambda h: special.gammaincc(k, (g_h - a * S * h) / th)
                        * m ** m * h ** (m - 1) * math.exp(-m * h) / math.gamma(m),
                        0, h0, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        return (alone + part) * inv_gamma_pdf(q, g, S)

    return spi.quad(given_s, 0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)[0]


@pytest.mark.parametrize("factor", [1.05, 1.5])
def test_cond_energy_coverage_against_nested_quadrature(cfg, factor):
    r = factor * cfg.altitude_m
    assert analysis.cond_energy_coverage(cfg, r) == pytest.approx(
        _cond_energy_reference(cfg, r), abs=1e-8)


def test_cond_energy_single_uav_is_exact(cfg):
    c = cfg.replace(n_uavs=1)
    r = 130.0
    a = c.harvest_scale * path_loss(c, r)
    m, q, g = c.nakagami_m, c.shadow_q, c.shadow_gamma
    ref = spi.quad(lambda S: special.gammaincc(m, m * c.energy_threshold_j / (a * S))
                   * inv_gamma_pdf(q, g, S) if S > 0 else 0.0,
                   0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    assert analysis.cond_energy_coverage(c, r) == pytest.approx(ref, abs=1e-10)
    est = montecarlo.simulate_conditioned(c, r, 200_000, seed=1)
    assert ref == pytest.approx(est.p_h, abs=3 * est.halfwidth_h)


def test_cond_energy_vectorized_and_trivial(cfg):
    r = np.array([105.0, 150.0, 200.0])
    v = analysis.cond_energy_coverage(cfg, r)
    assert v.shape == (3,)
    assert np.all(np.diff(v) < 0)
    np.testing.assert_array_equal(
        analysis.cond_energy_coverage(cfg.replace(energy_threshold_j=0.0), r), 1.0)
    np.testing.assert_array_equal(analysis.cond_energy_coverage(cfg.replace(tau=0.0), r), 0.0)


def test_energy_coverage_approx_trivial(cfg):
    assert analysis.energy_coverage_approx(cfg.replace(energy_threshold_j=0.0)).value == 1.0
    assert analysis.energy_coverage_approx(cfg.replace(tau=0.0)).value == 0.0
    res = analysis.energy_coverage_approx(cfg)
    assert res.method is analysis.Method.GAMMA_APPROX and 0 < res.value < 1


# --------------------------------------------------------------------- SINR

def _fd(f, s0, k, rel_step=0.02, extra=3):
    if k == 0:
        return f(np.array([s0]))[0]
    half = k + extra
    nodes = np.arange(-half, half + 1)
    coef = np.polynomial.polynomial.polyfit(nodes * rel_step, f(s0 * (1 + rel_step * nodes)),
                                            2 * half)
    return coef[k] * math.factorial(k) / s0 ** k


@pytest.mark.parametrize("m", [1, 2, 3])
def test_interference_jet_matches_finite_differences(cfg, m):
    c = cfg.replace(nakagami_m=m)
    r = 130.0
    s0 = m * c.sinr_threshold / (c.tx_power_w * path_loss(c, r))
    d = analysis.interference_laplace_jet(c, r, s0).derivatives()
    for k in range(m):
        fd = _fd(lambda s: analysis.interference_laplace(c, r, s), s0, k)
        assert d[k] == pytest.approx(fd, rel=1e-6)


def test_interference_jet_single_uav_and_order(cfg):
    j = analysis.interference_laplace_jet(cfg.replace(n_uavs=1), 130.0, 1e9, order=3)
    np.testing.assert_array_equal(j.coeffs, [1.0, 0.0, 0.0, 0.0])
    assert analysis.interference_laplace_jet(cfg, 130.0, 1e9).order == cfg.nakagami_m - 1


def test_interference_laplace_against_simulation(cfg):
    r = 140.0
    rng = np.random.default_rng(5)
    n = 200_000
    v = geometry.sample_interferer_distances(cfg, r, rng, (n, cfg.n_uavs - 1))
    h = rng.gamma(cfg.interferer_m, 1.0 / cfg.interferer_m, v.shape)
    S = 1.0 / rng.gamma(cfg.shadow_q, 1.0 / cfg.shadow_gamma, v.shape)
    interference = (cfg.tx_power_w * h * S * path_loss(cfg, v)).sum(axis=1)
    s = 1.0 / np.median(interference)
    emp = np.exp(-s * interference)
    got = analysis.interference_laplace(cfg, r, s)[0]
    assert got == pytest.approx(emp.mean(), abs=4 * emp.std() / math.sqrt(n))


def test_shadow_rule_jets_match_adaptive(cfg):
    r = np.array([120.0])
    s0 = 2.0e9
    fast = analysis._total_interference_jets(cfg, r, np.array([[s0]]), 1)
    slow = analysis.interference_laplace_jet(cfg, 120.0, s0)
    noise = analysis._noise_jet(cfg, np.array([[s0]]), 1)
    ref = (noise * analysis.Jet(slow.coeffs.reshape(2, 1, 1))).coeffs
    np.testing.assert_allclose(fast.coeffs, ref, rtol=1e-9)


def test_cond_comm_single_uav_closed_form(cfg):
    c = cfg.replace(n_uavs=1)
    r = 150.0
    m, q, g = c.nakagami_m, c.shadow_q, c.shadow_gamma
    snr_scale = c.tx_power_w * path_loss(c, r) / c.noise_w
    ref = spi.quad(lambda S: special.gammaincc(m, m * c.sinr_threshold / (snr_scale * S))
                   * inv_gamma_pdf(q, g, S) if S > 0 else 0.0,
                   0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    assert analysis.cond_comm_coverage(c, r) == pytest.approx(ref, abs=1e-9)


def test_cond_comm_matches_pinned_simulation(cfg):
    r = 1.1 * cfg.altitude_m
    est = montecarlo.simulate_conditioned(cfg, r, 400_000, seed=11)
    assert analysis.cond_comm_coverage(cfg, r) == pytest.approx(est.p_c, abs=3 * est.halfwidth_c)


def test_cond_comm_properties(cfg):
    r = np.array([105.0, 150.0, 210.0])
    with_i = analysis.cond_comm_coverage(cfg, r)
    without = analysis.cond_comm_coverage(cfg, r, with_interference=False)
    assert np.all(without >= with_i)
    assert np.all(np.diff(with_i) < 0)
    tiny = analysis.cond_comm_coverage(cfg.replace(sinr_threshold=1e-9), r)
    np.testing.assert_allclose(tiny, 1.0, atol=1e-6)
    with pytest.raises(ValueError):
        analysis.cond_comm_coverage(cfg, 99.0)


def test_comm_coverage_matches_simulation(cfg):
    est = montecarlo.simulate(cfg, 400_000, seed=21)
    res = analysis.comm_coverage(cfg)
    assert res.method is analysis.Method.ANALYTIC
    assert res.value == pytest.approx(est.p_c, abs=max(3 * est.halfwidth_c, 0.005))


# -------------------------------------------------------------------- joint

@pytest.mark.parametrize("overrides", [{}, {"n_uavs": 1}, {"tau": 0.6},
                                       {"sinr_threshold": 2.0}, {"altitude_m": 150.0}])
def test_joint_bounded_by_marginals(cfg, overrides):
    c = cfg.replace(**overrides)
    j = analysis.joint_coverage(c)
    assert j.value <= min(analysis.energy_coverage_approx(c).value,
                          analysis.comm_coverage(c).value) + 1e-8
    assert j.diagnostics["p_h_approx"] == pytest.approx(
        analysis.energy_coverage_approx(c).value, abs=1e-14)


def test_joint_trivial_thresholds(cfg):
    c = cfg.replace(energy_threshold_j=0.0)
    j = analysis.joint_coverage(c)
    assert j.value == pytest.approx(analysis.comm_coverage(c).value, abs=1e-14)
    assert analysis.joint_coverage(cfg.replace(tau=0.0)).value == 0.0


def test_coverage_result_validation():
    with pytest.raises(ValueError):
        analysis.CoverageResult(1.5, analysis.Method.ANALYTIC)
    assert float(analysis.CoverageResult(0.25, analysis.Method.ANALYTIC)) == 0.25


# -------------------------------------------------------- grid invariants

def test_coverages_monotone_in_own_threshold(cfg):
    gh = cfg.energy_threshold_j * np.logspace(-1, 1, 20)
    gc = cfg.sinr_threshold * np.logspace(-1.5, 1.5, 20)
    exact = [analysis.energy_coverage_exact(cfg.replace(energy_threshold_j=float(g))).value
             for g in gh]
    approx = [analysis.energy_coverage_approx(cfg.replace(energy_threshold_j=float(g))).value
              for g in gh]
    comm = [analysis.comm_coverage(cfg.replace(sinr_threshold=float(g))).value for g in gc]
    for seq in (exact, approx, comm):
        assert all(0.0 <= v <= 1.0 for v in seq)
        assert np.all(np.diff(seq) <= 1e-12)


@pytest.mark.parametrize("field,values", [
    ("tau", [0.05, 0.1, 0.2, 0.3, 0.5, 0.8]),
    ("n_uavs", [1, 2, 5, 10, 20, 30]),
    ("tx_power_w", [0.5, 1.0, 1.585, 3.0, 6.0]),
])
def test_exact_energy_monotone_in_resources(cfg, field, values):
    vals = [analysis.energy_coverage_exact(cfg.replace(**{field: v})).value for v in values]
    assert np.all(np.diff(vals) >= -1e-9)


def test_joint_integrand_bounded_on_grid(cfg):
    r = np.linspace(cfg.altitude_m * 1.001, cfg.max_distance * 0.999, 20)
    p_h = analysis.cond_energy_coverage(cfg, r)
    p_c = analysis.cond_comm_coverage(cfg, r)
    assert np.all((0 <= p_h) & (p_h <= 1) & (0 <= p_c) & (p_c <= 1))
    assert np.all(p_h * p_c <= np.minimum(p_h, p_c) + 1e-15)


def test_joint_with_vanishing_sinr_threshold(cfg):
    c = cfg.replace(sinr_threshold=1e-12)
    assert analysis.joint_coverage(c).value == pytest.approx(
        analysis.energy_coverage_approx(c).value, abs=1e-8)


def test_no_interference_no_noise_is_full_coverage(cfg):
    c = cfg.replace(noise_w=0.0)
    r = np.array([105.0, 160.0, 220.0])
    np.testing.assert_allclose(analysis.cond_comm_coverage(c, r, with_interference=False),
                               1.0, atol=1e-12)


def test_recovered_cdf_monotone_with_limits(cfg):
    mean = (cfg.n_uavs * cfg.harvest_scale * cfg.shadow_mean
            * cfg.path_loss_const * cfg.altitude_m ** -cfg.alpha)
    t = mean * np.logspace(-2, 2, 50)
    cdf = [1.0 - analysis.energy_coverage_exact(cfg.replace(energy_threshold_j=float(g))).value
           for g in t]
    assert np.all(np.diff(cdf) >= -1e-4)
    assert cdf[0] < 1e-4 and cdf[-1] > 1 - 1e-3


def test_mom_moments_match_simulated_non_serving_energy(cfg):
    r = 130.0
    n = 2 * 10 ** 6
    rng = np.random.default_rng(17)
    v = geometry.sample_interferer_distances(cfg, r, rng, (n, cfg.n_uavs - 1))
    h = rng.gamma(cfg.nakagami_m, 1.0 / cfg.nakagami_m, v.shape)
    S = 1.0 / rng.gamma(cfg.shadow_q, 1.0 / cfg.shadow_gamma, v.shape)
    extra = (cfg.harvest_scale * h * S * path_loss(cfg, v)).sum(axis=1)
    mp = analysis.mom_params(cfg, r)
    assert extra.mean() == pytest.approx(float(mp.cond_mean), rel=0.01)
    assert np.mean(extra ** 2) == pytest.approx(float(mp.cond_second_moment), rel=0.01)
