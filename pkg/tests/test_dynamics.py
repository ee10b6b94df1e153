"""Exact one-step Gaussian moments against arithmetic and Monte Carlo."""

import dataclasses
import math

import numpy as np
import pytest

import microgrid_dp as m
from microgrid_dp.config import eta_discharge
from microgrid_dp.dynamics import NoiseVector

STATE = m.State(1.0, 0.8, 0.9)
FIELDS = ("m_Z", "var_Z", "m_Q", "var_Q", "m_G", "var_G",
          "cov_ZQ", "rho_Q", "cov_ZG", "rho_G")


def _with_dt(cfg, dt):
    disc = dataclasses.replace(cfg.discretization, horizon_T=dt, steps_N=1)
    return dataclasses.replace(cfg, discretization=disc)


def test_z_moments_frozen_values(cfg_table1):
    m_Z, var_Z = m.z_moments(0, 2.13, cfg_table1)
    assert m_Z == pytest.approx(1.7438965040561012, abs=1e-12)
    assert var_Z == pytest.approx(0.16690047669445762, abs=1e-12)


def test_z_mean_linear_in_z(cfg_table1):
    decay = math.exp(-cfg_table1.demand.beta_R)
    for z in (-2.0, -0.5, 0.0, 1.3):
        m_Z, var_Z = m.z_moments(0, z, cfg_table1)
        assert m_Z == pytest.approx(z * decay, abs=1e-14)
        assert var_Z == pytest.approx(0.16690047669445762, abs=1e-12)


def test_efficiency_branch_switch(cfg_table1):
    assert m.efficiency(0.0, -5.0, 1.0 / 3.0, cfg_table1) == pytest.approx(
        0.9955555555555556, abs=1e-13)
    expected = 1.0 / eta_discharge(1.0 / 3.0, cfg_table1.battery)
    assert m.efficiency(0.0, 5.0, 1.0 / 3.0, cfg_table1) == pytest.approx(
        expected, abs=1e-13)
    mu0 = m.seasonality(0.0, cfg_table1.demand)
    assert m.efficiency(0.0, -mu0, 0.5, cfg_table1) == pytest.approx(
        m.efficiency(0.0, -10.0, 0.5, cfg_table1), abs=1e-14)


def test_idle_battery_decays_exponentially(cfg_table1):
    m_Q, var_Q = m.q_moments(0, 0.0, 1.0, m.Action.WAIT, cfg_table1)
    assert m_Q == pytest.approx(0.9997895821409437, abs=1e-12)
    assert var_Q == 0.0
    for a in (m.Action.OVERSPILL, m.Action.FUEL_FULL, m.Action.FUEL_LIMITED):
        got = m.q_moments(0, 0.3, 0.6, a, cfg_table1)
        assert got == (pytest.approx(0.6 * math.exp(-cfg_table1.battery.eta0)), 0.0)


def test_charge_and_discharge_full_share_one_law(cfg_table1):
    for z in (-1.5, -0.2, 0.4, 2.0):
        a = m.q_moments(3, z, 0.45, m.Action.CHARGE, cfg_table1)
        b = m.q_moments(3, z, 0.45, m.Action.DISCHARGE_FULL, cfg_table1)
        assert a == b
        ca = m.cross_moments(3, z, 0.45, m.Action.CHARGE, cfg_table1)
        cb = m.cross_moments(3, z, 0.45, m.Action.DISCHARGE_FULL, cfg_table1)
        assert ca == cb


def test_discharge_limited_is_deterministic_drain(cfg_table1):
    bat = cfg_table1.battery
    q, z = 0.7, 1.0
    m_Q, var_Q = m.q_moments(0, z, q, m.Action.DISCHARGE_LIMITED, cfg_table1)
    phi = -math.expm1(-bat.eta0) / bat.eta0
    expect = q * math.exp(-bat.eta0) - bat.R_Q0 * phi / (
        bat.capacity_CQ * eta_discharge(q, bat))
    assert m_Q == pytest.approx(expect, abs=1e-14)
    assert var_Q == 0.0
    assert m_Q == pytest.approx(
        m.q_moments(0, -2.0, q, m.Action.DISCHARGE_LIMITED, cfg_table1)[0], abs=1e-14)


def test_fuel_limited_mean_frozen(cfg_table1):
    m_G, var_G = m.g_moments(0, 0.0, 1.0, m.Action.FUEL_LIMITED, cfg_table1)
    assert m_G == pytest.approx(0.9502935, abs=1e-12)
    assert var_G == 0.0


def test_fuel_idle_is_exact_identity(cfg_table1):
    for a in (m.Action.OVERSPILL, m.Action.CHARGE, m.Action.WAIT,
              m.Action.DISCHARGE_LIMITED, m.Action.DISCHARGE_FULL):
        m_G, var_G = m.g_moments(0, 1.2, 0.37, a, cfg_table1)
        assert m_G == 0.37
        assert var_G == 0.0


def test_fuel_full_burn_arithmetic(cfg_table1):
    gen, p = cfg_table1.generator, cfg_table1.demand
    z, g = 0.5, 0.9
    m_G, var_G = m.g_moments(0, z, g, m.Action.FUEL_FULL, cfg_table1)
    phi_beta = -math.expm1(-p.beta_R) / p.beta_R
    mu = m.seasonality(0.0, p)
    expect = g - (gen.c0 + gen.c1 * (mu + z * phi_beta)) / gen.capacity_CG
    assert m_G == pytest.approx(expect, abs=1e-14)
    assert var_G > 0.0


def test_correlations_state_free_and_frozen(cfg_table1):
    rho_qs = set()
    for z, q in ((-1.5, 0.1), (0.3, 0.5), (2.0, 0.9)):
        mom = m.transition_moments(0, m.State(z, q, 0.5), m.Action.CHARGE, cfg_table1)
        rho_qs.add(round(mom.rho_Q, 13))
    assert len(rho_qs) == 1
    assert rho_qs.pop() == pytest.approx(-0.8435046872971607, abs=1e-11)
    mom = m.transition_moments(0, STATE, m.Action.FUEL_FULL, cfg_table1)
    assert mom.rho_G == pytest.approx(-0.843496129329308, abs=1e-11)


def test_correlation_product_vanishes_for_all_actions(cfg_table1):
    for a in m.Action:
        mom = m.transition_moments(0, STATE, a, cfg_table1)
        assert mom.rho_Q * mom.rho_G == 0.0
        if a in (m.Action.CHARGE, m.Action.DISCHARGE_FULL):
            assert -1.0 < mom.rho_Q < 0.0
            assert mom.cov_ZQ < 0.0
        if a is m.Action.FUEL_FULL:
            assert -1.0 < mom.rho_G < 0.0
            assert mom.cov_ZG < 0.0


def test_variances_increase_with_step_size(cfg_table1):
    prev = None
    for dt in (0.125, 0.25, 0.5, 1.0):
        cfg = _with_dt(cfg_table1, dt)
        mom = m.transition_moments(0, STATE, m.Action.DISCHARGE_FULL, cfg)
        momf = m.transition_moments(0, STATE, m.Action.FUEL_FULL, cfg)
        triple = (mom.var_Z, mom.var_Q, momf.var_G)
        if prev is not None:
            assert all(b > a > 0.0 for a, b in zip(prev, triple))
        prev = triple


def test_moments_euler_consistent_at_small_steps(cfg_table1):
    """Closed-form means approach the one-step Euler drift at rate O(dt^2)."""
    p, bat = cfg_table1.demand, cfg_table1.battery
    z, q = STATE.z, STATE.q

    def errors(dt):
        cfg = _with_dt(cfg_table1, dt)
        mu = m.seasonality(0.0, p)
        eta = m.efficiency(0.0, z, q, cfg)
        mom = m.transition_moments(0, m.State(z, q, 0.9), m.Action.DISCHARGE_FULL, cfg)
        e_z = abs(mom.m_Z - (z - p.beta_R * z * dt))
        euler_q = q - bat.eta0 * q * dt - (eta / bat.capacity_CQ) * (mu + z) * dt
        e_q = abs(mom.m_Q - euler_q)
        e_var = abs(mom.var_Z - p.sigma_R**2 * dt)
        return e_z, e_q, e_var

    coarse, mid, fine = errors(1.0), errors(0.5), errors(0.25)
    for idx in range(3):
        assert coarse[idx] / mid[idx] > 3.0
        assert mid[idx] / fine[idx] > 3.0


def test_transition_operator_reproduces_moments(cfg_table1):
    a = m.Action.DISCHARGE_FULL
    mom = m.transition_moments(0, STATE, a, cfg_table1)
    at_zero = m.transition_operator(0, STATE, a, NoiseVector(0.0, 0.0, 0.0), cfg_table1)
    assert at_zero.z == pytest.approx(mom.m_Z, abs=1e-14)
    assert at_zero.q == pytest.approx(mom.m_Q, abs=1e-14)
    assert at_zero.g == pytest.approx(mom.m_G, abs=1e-14)
    kicked = m.transition_operator(0, STATE, a, NoiseVector(1.0, 0.0, 0.0), cfg_table1)
    assert kicked.z - at_zero.z == pytest.approx(math.sqrt(mom.var_Z), abs=1e-12)
    assert kicked.q - at_zero.q == pytest.approx(
        math.sqrt(mom.var_Q) * mom.rho_Q, abs=1e-12)
    lifted = m.transition_operator(0, STATE, a, NoiseVector(0.0, 1.0, 0.0), cfg_table1)
    assert lifted.q - at_zero.q == pytest.approx(
        math.sqrt(mom.var_Q) * math.sqrt(1.0 - mom.rho_Q**2), abs=1e-12)
    assert lifted.z == at_zero.z


def test_operator_sample_covariance_matches(cfg_table1):
    rng = np.random.default_rng(77)
    a = m.Action.DISCHARGE_FULL
    mom = m.transition_moments(0, STATE, a, cfg_table1)
    draws = rng.standard_normal((20_000, 3))
    zs = np.empty(len(draws))
    qs = np.empty(len(draws))
    for idx, eps in enumerate(draws):
        nxt = m.transition_operator(0, STATE, a, NoiseVector(*eps), cfg_table1)
        zs[idx], qs[idx] = nxt.z, nxt.q
    cov = float(np.cov(zs, qs, ddof=1)[0, 1])
    se = math.sqrt((zs.var(ddof=1) * qs.var(ddof=1) + cov * cov) / (len(draws) - 1))
    assert abs(cov - mom.cov_ZQ) < 3.0 * se
    assert cov < 0.0


@pytest.mark.parametrize("action,state", [
    (m.Action.DISCHARGE_FULL, m.State(1.0, 0.8, 0.9)),
    (m.Action.CHARGE, m.State(-1.5, 0.3, 1.0)),
    (m.Action.FUEL_FULL, m.State(0.5, 0.5, 0.9)),
    (m.Action.DISCHARGE_LIMITED, m.State(2.0, 0.9, 0.5)),
    (m.Action.WAIT, m.State(0.0, 0.4, 0.2)),
])
def test_moments_match_euler_monte_carlo(cfg_table1, action, state):
    est = m.euler_oracle(0, state, action, paths=20_000, inner_step=1e-3,
                         cfg=cfg_table1)
    mom = m.transition_moments(0, state, action, cfg_table1)
    for field in FIELDS:
        sample = getattr(est, field)
        closed = getattr(mom, field)
        if sample.se == 0.0:
            assert abs(closed - sample.value) < 1e-6
        else:
            assert abs(closed - sample.value) < 3.0 * sample.se


def test_correlation_bias_shrinks_with_inner_step(cfg_table1):
    """The EM correlation estimate converges to the closed form as the
    integration step is refined; at 2.5e-4 h the bias is inside one SE."""
    est = m.euler_oracle(0, STATE, m.Action.DISCHARGE_FULL, paths=20_000,
                         inner_step=2.5e-4, cfg=cfg_table1)
    mom = m.transition_moments(0, STATE, m.Action.DISCHARGE_FULL, cfg_table1)
    assert abs(mom.rho_Q - est.rho_Q.value) < 3.0 * est.rho_Q.se


def test_euler_oracle_guards_inner_step(cfg_table1):
    with pytest.raises(ValueError):
        m.euler_oracle(0, STATE, m.Action.WAIT, paths=10, inner_step=0.5,
                       cfg=cfg_table1)


def test_noise_vector_fields():
    eps = NoiseVector(0.1, -0.2, 0.3)
    assert (eps.eps_Z, eps.eps_Q, eps.eps_G) == (0.1, -0.2, 0.3)
