import csv
import math

import numpy as np
import pytest
from scipy import stats

from uavcorridor import geometry, montecarlo
from uavcorridor.model import NetworkConfig, path_loss


def test_deterministic_and_thread_invariant(cfg):
    a = montecarlo.sample_slots(cfg, 150_000, seed=9, threads=1)
    b = montecarlo.sample_slots(cfg, 150_000, seed=9, threads=4)
    np.testing.assert_array_equal(a.harvested_j, b.harvested_j)
    np.testing.assert_array_equal(a.sinr, b.sinr)
    c = montecarlo.sample_slots(cfg, 150_000, seed=10)
    assert not np.array_equal(a.sinr, c.sinr)
    assert montecarlo.simulate(cfg, 10_000, seed=9) == montecarlo.simulate(cfg, 10_000, seed=9)


def test_zero_tau_gives_no_energy(cfg):
    est = montecarlo.simulate(cfg.replace(tau=0.0, energy_threshold_j=1e-9), 20_000)
    assert est.p_h == 0.0 and est.p_jc == 0.0


def test_zero_thresholds_give_full_coverage(cfg):
    est = montecarlo.simulate(cfg.replace(energy_threshold_j=0.0, sinr_threshold=1e-300),
                              20_000)
    assert (est.p_h, est.p_c, est.p_jc) == (1.0, 1.0, 1.0)


def test_harvest_positive_and_linear_in_power(cfg):
    a = montecarlo.sample_harvest_distribution(cfg, 50_000, seed=4)
    b = montecarlo.sample_harvest_distribution(cfg.replace(tx_power_w=2 * cfg.tx_power_w),
                                               50_000, seed=4)
    assert np.all(a > 0)
    np.testing.assert_array_equal(b, 2 * a)


def test_harvest_mean_matches_closed_form(cfg):
    e = montecarlo.sample_harvest_distribution(cfg, 10 ** 6, seed=8)
    x = np.linspace(0, cfg.radius_m, 20001)
    mean_l = np.trapezoid(path_loss(cfg, geometry.distance_from_offset(cfg, x)), x) / cfg.radius_m
    expected = cfg.n_uavs * cfg.harvest_scale * cfg.shadow_mean * mean_l
    assert e.mean() == pytest.approx(expected, rel=0.01)


def test_joint_never_exceeds_marginals(cfg):
    for overrides in ({}, {"tau": 0.6}, {"n_uavs": 25}, {"sinr_threshold": 3.0}):
        est = montecarlo.simulate(cfg.replace(**overrides), 50_000, seed=1)
        assert est.p_jc <= min(est.p_h, est.p_c)


def test_halfwidths(cfg):
    est = montecarlo.simulate(cfg, 40_000, seed=3)
    assert est.halfwidth_h == pytest.approx(1.96 * math.sqrt(est.p_h * (1 - est.p_h) / 40_000),
                                            rel=1e-3)
    assert set(est.halfwidth_95) == {"p_h", "p_c", "p_jc"}
    assert est.n_slots == 40_000 and est.seed == 3
    assert montecarlo.halfwidth(0.0, 100) == 0.0


def test_harvest_and_comm_phases_independent():
    # one UAV at a pinned distance: the two quantities depend only on the
    # harvest-phase and comm-phase channel draws respectively
    c = NetworkConfig(n_uavs=1)
    s = montecarlo.sample_slots(c, 10 ** 6, seed=5, r_pin=130.0)
    rho = stats.spearmanr(s.harvested_j, s.sinr).statistic
    assert abs(rho) < 0.01


def test_single_uav_pinned_sinr_is_snr():
    c = NetworkConfig(n_uavs=1)
    r = 150.0
    s = montecarlo.sample_slots(c, 50_000, seed=6, r_pin=r)
    # SNR / (p l / sigma^2) = h S, a positive draw with unit mean
    ratio = s.sinr / (c.tx_power_w * path_loss(c, r) / c.noise_w)
    assert np.all(ratio > 0)
    assert ratio.mean() == pytest.approx(1.0, abs=0.05)


def test_conditioned_energy_at_zero_threshold(cfg):
    est = montecarlo.simulate_conditioned(cfg.replace(energy_threshold_j=0.0), 120.0, 5000)
    assert est.p_h == 1.0


def test_r_pin_out_of_support(cfg):
    with pytest.raises(ValueError):
        montecarlo.simulate_conditioned(cfg, 50.0, 100)
    with pytest.raises(ValueError):
        montecarlo.sample_slots(cfg, 0)


def test_serving_distance_law_of_simulator(cfg):
    # reproduce the simulator's corridor draw for chunk 0 and check its law
    rng = montecarlo._chunk_rng(0, 0)
    u = rng.uniform(-cfg.radius_m, cfg.radius_m, (montecarlo.CHUNK_SLOTS, cfg.n_uavs))
    r = geometry.distance_from_offset(cfg, u).min(axis=1)
    assert stats.kstest(r, lambda t: geometry.serving_cdf(cfg, t)).pvalue > 0.01


def test_simulate_slot_consistency(cfg, rng):
    outcomes = [montecarlo.simulate_slot(cfg, rng) for _ in range(3000)]
    for o in outcomes[:50]:
        assert o.joint_covered == (o.energy_covered and o.comm_covered)
        assert o.harvested_j > 0 and o.sinr > 0
    p_c = np.mean([o.comm_covered for o in outcomes])
    # slow path agrees with the vectorized simulator
    est = montecarlo.simulate(cfg, 200_000, seed=0)
    assert p_c == pytest.approx(est.p_c, abs=4 * math.sqrt(0.25 / 3000))


def test_write_samples_csv(cfg, tmp_path):
    s = montecarlo.sample_slots(cfg, 100, seed=1)
    path = tmp_path / "s.csv"
    montecarlo.write_samples_csv(path, s, cfg)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["harvested_j", "sinr", "energy_covered", "comm_covered",
                       "joint_covered"]
    assert len(rows) == 101
    for row in rows[1:]:
        assert int(row[4]) == (int(row[2]) & int(row[3]))
