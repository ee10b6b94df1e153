"""Scenario-controlled path simulation and the Euler-Maruyama moment oracle.

Paths are sampled from the exact one-step Gaussian laws (no time-stepping
error); scenarios tilt the weather by adding a bounded per-day offset to
the mean of the Z innovation (negative = favorable surplus, positive =
adverse demand). Every path owns an independent, reproducible generator
stream: default_rng(SeedSequence(entropy=base_seed, spawn_key=(scenario id,
path index))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import Action, ModelConfig, State, seasonality
from .cost import expected_stage_cost
from .dynamics import NoiseVector, transition_operator
from .grid import StateGrid, cell_of
from .solver import PolicyTable

__all__ = [
    "EmpiricalMoments",
    "MomentEstimate",
    "PathRecord",
    "SCENARIOS",
    "Scenario",
    "baseline_wait_policy",
    "euler_oracle",
    "sample_transition",
    "simulate_path",
]

_MAX_OFFSET = 1.5  # bound on |per-day innovation-mean offset|


@dataclass(frozen=True)
class Scenario:
    """Named weather tilt: one innovation-mean offset per day of the horizon."""

    name: str
    sid: int
    day_offsets: tuple[float, ...]
    base_seed: int = 0

    def __post_init__(self):
        if any(not math.isfinite(o) or abs(o) > _MAX_OFFSET for o in self.day_offsets):
            raise ValueError(f"scenario offsets must be finite with |offset| <= {_MAX_OFFSET}")

    def offset_at(self, t_hours: float) -> float:
        if not self.day_offsets:
            return 0.0
        day = min(int(t_hours // 24.0), len(self.day_offsets) - 1)
        return self.day_offsets[day]

    def with_seed(self, base_seed: int) -> "Scenario":
        return replace(self, base_seed=base_seed)


SCENARIOS = {
    s.name: s
    for s in (
        Scenario("neutral", 0, (0.0,) * 7),
        Scenario("sunny-start", 1, (-0.75, -0.75, -0.75, 0.75, 0.75, 0.75, 0.75)),
        Scenario("overcast-break", 2, (0.75, 0.75, -0.75, 0.75, 0.75, -0.75, 0.75)),
        Scenario("sunny-finish", 3, (0.75, 0.75, 0.75, 0.75, -0.75, -0.75, -0.75)),
        Scenario("overcast-week", 4, (0.75, 0.75, 0.75, 0.75, 0.75, 0.75, -0.75)),
    )
}


@dataclass(frozen=True)
class PathRecord:
    """One simulated step: state seen, action taken, and its cost."""

    step: int
    time_h: float
    z: float
    r: float
    q: float
    g: float
    action: Action
    stage_cost_eur: float  # conditional expected discounted cost of this step
    cum_cost_eur: float    # running total, discounted to time 0


def sample_transition(n: int, x: State, a: Action, rng: np.random.Generator,
                      cfg: ModelConfig, z_offset: float = 0.0) -> State:
    """Draw one exact-distribution transition; z_offset tilts the Z innovation mean."""
    draws = rng.standard_normal(3)
    eps = NoiseVector(float(draws[0]) + z_offset, float(draws[1]), float(draws[2]))
    return transition_operator(n, x, a, eps, cfg)


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def default_initial_state(grid: StateGrid) -> State:
    """Full tank, 80% charge, demand residual at the grid maximum."""
    return State(float(grid.z.points[-1]), 0.8, 1.0)


def simulate_path(policy: PolicyTable, scenario: Scenario, cfg: ModelConfig,
                  grid: StateGrid, path_index: int = 0,
                  initial_state: State | None = None,
                  discrete: bool = False) -> list[PathRecord]:
    """Simulate one 0..N path under the policy; reproducible per (scenario, index).

    The policy is read at the cell of the current continuous state. In
    discrete mode the state snaps to its cell's grid point after every
    transition, which turns the simulation into a path of the finite chain.
    """
    seq = np.random.SeedSequence(entropy=scenario.base_seed,
                                 spawn_key=(scenario.sid, path_index))
    rng = np.random.default_rng(seq)
    x = initial_state if initial_state is not None else default_initial_state(grid)
    records: list[PathRecord] = []
    cum = 0.0
    for n in range(cfg.discretization.steps_N):
        cell = grid.lin(cell_of(x.z, grid.z), cell_of(x.q, grid.q), cell_of(x.g, grid.g))
        a = policy.action_at(n, cell)
        t = cfg.t_of(n)
        stage = expected_stage_cost(n, x, a, cfg)
        cum += math.exp(-cfg.costs.rho * t) * stage
        records.append(PathRecord(
            step=n, time_h=t, z=x.z, r=seasonality(t, cfg.demand) + x.z,
            q=x.q, g=x.g, action=a, stage_cost_eur=stage, cum_cost_eur=cum,
        ))
        nxt = sample_transition(n, x, a, rng, cfg, z_offset=scenario.offset_at(t))
        x = State(nxt.z, _clamp01(nxt.q), _clamp01(nxt.g))
        if discrete:
            x = grid.state_of(grid.lin(
                cell_of(x.z, grid.z), cell_of(x.q, grid.q), cell_of(x.g, grid.g)))
    return records


def baseline_wait_policy(cfg: ModelConfig, grid: StateGrid) -> PolicyTable:
    """Do-nothing reference policy: overspill under surplus, wait otherwise."""
    from .constraints import near_zero_halfwidth

    steps = cfg.discretization.steps_N
    actions = np.full((steps, grid.n_states), int(Action.WAIT), dtype=np.int8)
    half = near_zero_halfwidth(cfg)
    for n in range(steps):
        mu = seasonality(cfg.t_of(n), cfg.demand)
        for i, z in enumerate(grid.z.points):
            if mu + z <= -half:
                base = grid.lin(i, 0, 0)
                actions[n, base:base + grid.q.n_points * grid.g.n_points] = int(Action.OVERSPILL)
    return PolicyTable(actions)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float


@dataclass(frozen=True)
class EmpiricalMoments:
    """Monte-Carlo moment estimates with standard errors."""

    m_Z: MomentEstimate
    var_Z: MomentEstimate
    m_Q: MomentEstimate
    var_Q: MomentEstimate
    m_G: MomentEstimate
    var_G: MomentEstimate
    cov_ZQ: MomentEstimate
    rho_Q: MomentEstimate
    cov_ZG: MomentEstimate
    rho_G: MomentEstimate


def _is_degenerate(samples: np.ndarray) -> bool:
    """True when the sample spread is pure floating-point roundoff.

    Deterministic axes (for example the fuel level under a battery action)
    accumulate spreads of order 1e-13 over many Euler substeps; genuinely
    stochastic axes have standard deviations above 1e-2.  The relative
    threshold separates the two regimes by several orders of magnitude.
    """
    return float(samples.std()) < 1e-9 * (1.0 + abs(float(samples.mean())))


def _mean_est(samples: np.ndarray) -> MomentEstimate:
    n = samples.size
    if _is_degenerate(samples):
        return MomentEstimate(float(samples.mean()), 0.0)
    return MomentEstimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n)))


def _var_est(samples: np.ndarray) -> MomentEstimate:
    n = samples.size
    if _is_degenerate(samples):
        return MomentEstimate(0.0, 0.0)
    v = float(samples.var(ddof=1))
    return MomentEstimate(v, v * math.sqrt(2.0 / (n - 1)))


def _cov_est(a: np.ndarray, b: np.ndarray) -> MomentEstimate:
    n = a.size
    if _is_degenerate(a) or _is_degenerate(b):
        return MomentEstimate(0.0, 0.0)
    c = float(np.cov(a, b, ddof=1)[0, 1])
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    return MomentEstimate(c, math.sqrt((va * vb + c * c) / (n - 1)))


def _corr_est(a: np.ndarray, b: np.ndarray) -> MomentEstimate:
    n = a.size
    if _is_degenerate(a) or _is_degenerate(b):
        return MomentEstimate(0.0, 0.0)
    r = float(np.corrcoef(a, b)[0, 1])
    return MomentEstimate(r, (1.0 - r * r) / math.sqrt(n - 3))


def euler_oracle(n: int, x: State, a: Action, paths: int, inner_step: float,
                 cfg: ModelConfig, seed: int = 12345) -> EmpiricalMoments:
    """Euler-Maruyama integration of the continuous dynamics over one step.

    Integrates the coupled (Z, Q, G) equations with the seasonal mean and
    the efficiency factor frozen at the step's left endpoint, exactly as
    the closed-form laws assume, and returns empirical one-step moments.
    This is a verification oracle, not a production sampler.
    """
    dt = cfg.dt
    if inner_step > dt / 100.0:
        raise ValueError("inner_step must be <= Delta/100 for a meaningful oracle")
    p, bat, gen = cfg.demand, cfg.battery, cfg.generator
    t0 = cfg.t_of(n)
    mu = seasonality(t0, p)

    from .dynamics import efficiency

    eta = efficiency(t0, x.z, x.q, cfg)
    battery_active = a in (Action.CHARGE, Action.DISCHARGE_FULL)
    limited_batt = a is Action.DISCHARGE_LIMITED
    fuel_active = a is Action.FUEL_FULL
    limited_fuel = a is Action.FUEL_LIMITED
    eta_lim = 1.0 / (bat.C0_D + bat.C1_D * x.q**bat.l_D * (1.0 - x.q) ** bat.m_D)

    rng = np.random.default_rng(seed)
    n_steps = int(round(dt / inner_step))
    h = dt / n_steps
    sqrt_h = math.sqrt(h)
    z = np.full(paths, x.z)
    q = np.full(paths, x.q)
    g = np.full(paths, x.g)
    for _ in range(n_steps):
        dq = -bat.eta0 * q * h
        if battery_active:
            dq -= (eta / bat.capacity_CQ) * (mu + z) * h
        elif limited_batt:
            dq -= (eta_lim * bat.R_Q0 / bat.capacity_CQ) * h
        if fuel_active:
            g = g - (gen.c0 + gen.c1 * (mu + z)) / gen.capacity_CG * h
        elif limited_fuel:
            g = g - (gen.c0 + gen.c1 * gen.R_G0) / gen.capacity_CG * h
        q = q + dq
        z = z - p.beta_R * z * h + p.sigma_R * sqrt_h * rng.standard_normal(paths)

    return EmpiricalMoments(
        m_Z=_mean_est(z), var_Z=_var_est(z),
        m_Q=_mean_est(q), var_Q=_var_est(q),
        m_G=_mean_est(g), var_G=_var_est(g),
        cov_ZQ=_cov_est(z, q), rho_Q=_corr_est(z, q),
        cov_ZG=_cov_est(z, g), rho_G=_corr_est(z, g),
    )
