"""Transition probability rows of the discretized chain.

For each (step, source state, action) the next continuous state is
Gaussian on the stochastic axes and deterministic (Dirac) on the others,
so the probability of landing in a grid cell is a normal rectangle mass:

- charge / full discharge: bivariate (Z, Q) rectangle x Dirac on G;
- full generator: bivariate (Z, G) rectangle x Dirac on Q;
- limited modes, wait, overspill: univariate Z mass x two Diracs.

Mass overshooting the physical q/g box accumulates in the boundary cells;
the z boundary cells own the (-inf, .] and (., +inf) tails. Two
independent evaluation routes are provided: a scalar per-row builder whose
rectangle masses come from adaptive quadrature (transition_row /
bvn_rect_prob), and vectorized per-step blocks using a Gauss-Legendre
bivariate-normal algorithm (TransitionKernel.*_block) consumed by the
solver.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .config import Action, ModelConfig, State, eta_charge, eta_discharge, seasonality
from .dynamics import _ig, _iq, _jg, _jq, _phi, _psi, transition_moments, z_moments
from .grid import StateGrid, cell_of

__all__ = ["NumericalError", "TransitionKernel", "TransitionRow", "bvn_rect_prob"]

# Row mass may deviate from 1 by quadrature dust up to this bound; it is
# then renormalized once. Larger deviations indicate a logic bug.
_ROW_SUM_TOL = 1e-6


class NumericalError(RuntimeError):
    """A numerical invariant failed (non-normalizing row, non-finite value)."""


@dataclass(frozen=True)
class TransitionRow:
    """Sparse probability row: aligned target ids and probabilities."""

    targets: np.ndarray
    probs: np.ndarray

    def as_dense(self, n_states: int) -> np.ndarray:
        dense = np.zeros(n_states)
        dense[self.targets] = self.probs
        return dense


def _norm_cdf(x: float) -> float:
    if x == -math.inf:
        return 0.0
    if x == math.inf:
        return 1.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bvn_rect_prob(mean2, cov2, rect) -> float:
    """P((X, Y) in rect) for a bivariate normal, via a single adaptive integral.

    The rectangle probability reduces to integrating, against the marginal
    density of X, the conditional normal CDF difference of Y given X.
    Absolute error <= 1e-7 (quadrature driven well below that).
    """
    m1, m2 = float(mean2[0]), float(mean2[1])
    (v1, c12), (c21, v2) = cov2
    v1, v2, c12, c21 = float(v1), float(v2), float(c12), float(c21)
    if abs(c12 - c21) > 1e-12 * max(1.0, abs(c12)):
        raise ValueError("covariance matrix must be symmetric")
    if v1 <= 0.0 or v2 <= 0.0 or v1 * v2 - c12 * c12 < -1e-12 * v1 * v2:
        raise ValueError("covariance matrix must be positive definite")
    rho = c12 / math.sqrt(v1 * v2)
    if abs(rho) >= 1.0:
        raise ValueError("degenerate correlation; use a univariate mass instead")

    (a1, b1), (a2, b2) = rect
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    lo1, hi1 = (a1 - m1) / s1, (b1 - m1) / s1
    lo2, hi2 = (a2 - m2) / s2, (b2 - m2) / s2
    if hi1 <= lo1 or hi2 <= lo2:
        return 0.0
    tail = math.sqrt(1.0 - rho * rho)

    def integrand(x: float) -> float:
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        upper = _norm_cdf((hi2 - rho * x) / tail) if hi2 < math.inf else 1.0
        lower = _norm_cdf((lo2 - rho * x) / tail) if lo2 > -math.inf else 0.0
        return pdf * (upper - lower)

    value, _ = quad(integrand, lo1, hi1, epsabs=1e-10, epsrel=1e-10, limit=200)
    return min(1.0, max(0.0, value))


# Gauss-Legendre nodes/weights (half rules; mirrored around the midpoint).
_GL_RULES = (
    (0.3, np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
     np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])),
    (0.75, np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                     0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
     np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
               0.2031674267230659, 0.2334925365383547, 0.2491470458134029])),
    (1.0, np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                    0.07652652113349733]),
     np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
               0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
               0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
               0.1527533871307259])),
)


def _gl_rule(abs_rho: float) -> tuple[np.ndarray, np.ndarray]:
    for bound, x_half, w_half in _GL_RULES:
        if abs_rho < bound or bound == 1.0:
            x = np.concatenate((1.0 - x_half, 1.0 + x_half))
            w = np.concatenate((w_half, w_half))
            return x, w
    raise AssertionError("unreachable")


def _bvn_upper(h: np.ndarray, k: np.ndarray, rho: float) -> np.ndarray:
    """P(X > h, Y > k) for standard bivariate normals with scalar correlation.

    Vectorized port of the Drezner-Wesolowsky / Genz Gauss-Legendre scheme
    (6/12/20 nodes by correlation band, with the high-|rho| tail expansion).
    Inputs must be finite; callers clip +-inf bounds to +-37 beforehand.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if rho == 0.0:
        return ndtr(-h) * ndtr(-k)
    twopi = 2.0 * math.pi
    x, w = _gl_rule(abs(rho))

    if abs(rho) < 0.925:
        hk = h * k
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(rho)
        sn = np.sin(asr * x)  # (nodes,)
        expo = (sn * hk[..., None] - hs[..., None]) / (1.0 - sn**2)
        bvn = np.exp(expo) @ w
        return np.clip(bvn * asr / twopi + ndtr(-h) * ndtr(-k), 0.0, 1.0)

    # high-correlation branch
    if rho < 0.0:
        k = -k
    hk = h * k
    ass = 1.0 - rho * rho
    a = math.sqrt(ass)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 80.0
    asr0 = -0.5 * (bs / ass + hk)
    bvn = np.where(
        asr0 > -100.0,
        a * np.exp(asr0) * (1.0 - c * (bs - ass) * (1.0 - d * bs) / 3.0 + c * d * ass * ass),
        0.0,
    )
    b = np.sqrt(bs)
    sp = math.sqrt(twopi) * ndtr(-b / a)
    hk_ok = hk > -100.0  # exp(-hk/2) overflows where the term is dropped anyway
    exp_hk = np.exp(np.where(hk_ok, -0.5 * hk, 0.0))
    bvn = bvn - np.where(hk_ok, exp_hk * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0), 0.0)
    a_half = 0.5 * a
    xs = (a_half * x) ** 2  # (nodes,)
    asr1 = -0.5 * (bs[..., None] / xs + hk[..., None])
    sp1 = 1.0 + c[..., None] * xs * (1.0 + 5.0 * d[..., None] * xs)
    rs = np.sqrt(1.0 - xs)
    ep = np.exp(-0.5 * hk[..., None] * xs / (1.0 + rs) ** 2) / rs
    terms = np.where(asr1 > -100.0, np.exp(asr1) * (sp1 - ep), 0.0)
    bvn = (a_half * (terms @ w) - bvn) / twopi
    if rho > 0.0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        low_mass = np.where(h < 0.0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
        bvn = np.where(h >= k, -bvn, low_mass - bvn)
    return np.clip(bvn, 0.0, 1.0)


def _bvn_cdf(x: np.ndarray, y: np.ndarray, rho: float) -> np.ndarray:
    """P(X <= x, Y <= y) for standard bivariate normals, scalar correlation."""
    return _bvn_upper(-x, -y, rho)


_CLIP = 37.0  # |z| beyond which the standard normal CDF is exactly 0/1 in float64


def _tail_edges(axis_edges: np.ndarray) -> np.ndarray:
    """Interior cell edges extended with infinite tails (boundary absorption)."""
    return np.concatenate(([-np.inf], axis_edges, [np.inf]))


def _std_edges(edges: np.ndarray, mean, sd) -> np.ndarray:
    """Standardize cell edges against broadcast means/sds, clipping the tails."""
    return np.clip((edges - np.asarray(mean)[..., None]) / np.asarray(sd)[..., None], -_CLIP, _CLIP)


def _rect_masses(std_a: np.ndarray, std_b: np.ndarray, rho: float) -> np.ndarray:
    """Cell masses on a 2-D grid from standardized edges (..., NA+1), (..., NB+1).

    Inclusion-exclusion of the bivariate CDF over the edge lattice; returns
    shape (..., NA, NB).
    """
    cdf = _bvn_cdf(std_a[..., :, None], std_b[..., None, :], rho)
    return np.clip(np.diff(np.diff(cdf, axis=-1), axis=-2), 0.0, None)


def _normalize_rows(mass: np.ndarray, axes: tuple[int, ...], what: str) -> np.ndarray:
    total = mass.sum(axis=axes, keepdims=True)
    worst = float(np.abs(1.0 - total).max())
    if worst > _ROW_SUM_TOL:
        raise NumericalError(f"{what}: row mass deviates from 1 by {worst:.3e} (> {_ROW_SUM_TOL})")
    return mass / total


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


class TransitionKernel:
    """Lazy, memoized access to transition rows and vectorized step blocks.

    Scalar rows are built on demand per (n, source, action) and cached
    (the seasonal mean varies per step, so there is no single stationary
    matrix). Blocks are recomputed per call; the solver uses them once per
    backward step.
    """

    def __init__(self, cfg: ModelConfig, grid: StateGrid):
        self.cfg = cfg
        self.grid = grid
        self._rows: dict[tuple[int, int, Action], TransitionRow] = {}
        self._lock = threading.Lock()
        self._z_block: np.ndarray | None = None

    # -- Dirac target maps (step-independent) --------------------------------

    def q_idle_targets(self) -> np.ndarray:
        """Target q-cell for the self-discharge-only move, per source q index."""
        decay = math.exp(-self.cfg.battery.eta0 * self.cfg.dt)
        return np.array([cell_of(_clamp01(q * decay), self.grid.q) for q in self.grid.q.points])

    def q_limited_targets(self) -> np.ndarray:
        """Target q-cell under limited discharge, per source q index."""
        bat = self.cfg.battery
        dt = self.cfg.dt
        decay = math.exp(-bat.eta0 * dt)
        draw = bat.R_Q0 * _phi(bat.eta0, dt) / bat.capacity_CQ
        return np.array([
            cell_of(_clamp01(q * decay - draw / eta_discharge(q, bat)), self.grid.q)
            for q in self.grid.q.points
        ])

    def g_limited_targets(self) -> np.ndarray:
        """Target g-cell under the limited generator mode, per source g index."""
        gen = self.cfg.generator
        burn = (gen.c0 + gen.c1 * gen.R_G0) * self.cfg.dt / gen.capacity_CG
        return np.array([cell_of(_clamp01(g - burn), self.grid.g) for g in self.grid.g.points])

    # -- Vectorized blocks ----------------------------------------------------

    def z_block(self) -> np.ndarray:
        """Univariate Z cell masses, shape (z sources, z cells); step-free."""
        if self._z_block is None:
            p = self.cfg.demand
            m = self.grid.z.points * math.exp(-p.beta_R * self.cfg.dt)
            sd = math.sqrt(p.sigma_R**2 * _phi(2.0 * p.beta_R, self.cfg.dt))
            std = _std_edges(_tail_edges(self.grid.z.edges), m, sd)
            mass = np.clip(np.diff(ndtr(std), axis=-1), 0.0, None)
            self._z_block = _normalize_rows(mass, (-1,), "z rows")
        return self._z_block

    def _battery_moment_arrays(self, n: int):
        cfg = self.cfg
        bat, p = cfg.battery, cfg.demand
        dt = cfg.dt
        z = self.grid.z.points[:, None]
        q = self.grid.q.points[None, :]
        mu = seasonality(cfg.t_of(n), p)
        eta = np.where(mu + z <= 0.0, eta_charge(q, bat), 1.0 / eta_discharge(q, bat))
        h = z * _psi(bat.eta0, p.beta_R, dt) + mu * _phi(bat.eta0, dt)
        m_q = q * math.exp(-bat.eta0 * dt) - (eta / bat.capacity_CQ) * h
        sd_q = eta * (p.sigma_R / bat.capacity_CQ) * math.sqrt(_iq(bat.eta0, p.beta_R, dt))
        return m_q, sd_q

    def battery_rho(self) -> float:
        """State-free corr(Z', Q') under charge / full discharge."""
        cfg = self.cfg
        bat, p = cfg.battery, cfg.demand
        dt = cfg.dt
        return -_jq(bat.eta0, p.beta_R, dt) / math.sqrt(_phi(2.0 * p.beta_R, dt) * _iq(bat.eta0, p.beta_R, dt))

    def generator_rho(self) -> float:
        """State-free corr(Z', G') under the full generator mode."""
        beta = self.cfg.demand.beta_R
        dt = self.cfg.dt
        return -_jg(beta, dt) / math.sqrt(_phi(2.0 * beta, dt) * _ig(beta, dt))

    def battery_block(self, n: int) -> np.ndarray:
        """Joint (Z, Q) cell masses for charge / full discharge at step n.

        Shape (z src, q src, z cell, q cell); rows sum to 1 over the last
        two axes. The law is shared by both actions (costs and feasibility
        differ, the transition does not).
        """
        cfg = self.cfg
        p = cfg.demand
        m_z = self.grid.z.points * math.exp(-p.beta_R * cfg.dt)
        sd_z = math.sqrt(p.sigma_R**2 * _phi(2.0 * p.beta_R, cfg.dt))
        m_q, sd_q = self._battery_moment_arrays(n)
        std_z = _std_edges(_tail_edges(self.grid.z.edges), m_z, sd_z)[:, None, :]
        std_q = _std_edges(_tail_edges(self.grid.q.edges), m_q, sd_q)
        mass = _rect_masses(std_z, std_q, self.battery_rho())
        return _normalize_rows(mass, (-2, -1), f"battery block n={n}")

    def generator_block(self, n: int) -> np.ndarray:
        """Joint (Z, G) cell masses for the full generator mode at step n.

        Shape (z src, g src, z cell, g cell); rows sum to 1 over the last
        two axes.
        """
        cfg = self.cfg
        gen, p = cfg.generator, cfg.demand
        dt = cfg.dt
        z = self.grid.z.points[:, None]
        g = self.grid.g.points[None, :]
        mu = seasonality(cfg.t_of(n), p)
        m_z = self.grid.z.points * math.exp(-p.beta_R * dt)
        sd_z = math.sqrt(p.sigma_R**2 * _phi(2.0 * p.beta_R, dt))
        m_g = g - (gen.c0 * dt + gen.c1 * (mu * dt + z * _phi(p.beta_R, dt))) / gen.capacity_CG
        sd_g = (gen.c1 * p.sigma_R / gen.capacity_CG) * math.sqrt(_ig(p.beta_R, dt))
        std_z = _std_edges(_tail_edges(self.grid.z.edges), m_z, sd_z)[:, None, :]
        std_g = _std_edges(_tail_edges(self.grid.g.edges), m_g, np.full_like(m_g, sd_g))
        mass = _rect_masses(std_z, std_g, self.generator_rho())
        return _normalize_rows(mass, (-2, -1), f"generator block n={n}")

    # -- Scalar reference route ----------------------------------------------

    def row(self, n: int, source: int, a: Action) -> TransitionRow:
        """Memoized transition row for (step, source state id, action)."""
        key = (n, source, a)
        with self._lock:
            cached = self._rows.get(key)
        if cached is not None:
            return cached
        fresh = transition_row(n, source, a, self.grid, self.cfg)
        with self._lock:
            return self._rows.setdefault(key, fresh)

    def dump_rows(self, n: int, a: Action, path: str) -> None:
        """Write all rows of (step n, action a) as CSV triplets source,target,prob."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("source,target,prob\n")
            for source in range(self.grid.n_states):
                row = self.row(n, source, a)
                for target, prob in zip(row.targets, row.probs):
                    fh.write(f"{source},{int(target)},{float(prob)!r}\n")


def _z_cell_masses_scalar(m: float, sd: float, grid: StateGrid) -> np.ndarray:
    std = np.clip((_tail_edges(grid.z.edges) - m) / sd, -_CLIP, _CLIP)
    return np.clip(np.diff(ndtr(std)), 0.0, None)


def transition_row(n: int, source: int, a: Action, grid: StateGrid, cfg: ModelConfig,
                   rect_prob=bvn_rect_prob) -> TransitionRow:
    """Reference (scalar) transition row; rectangle masses by adaptive quadrature.

    The feasibility of `a` at the source state is the caller's contract;
    rows are well-defined Gaussian masses for any action.
    """
    x = grid.state_of(source)
    _, j_src, k_src = grid.ijk(source)
    mom = transition_moments(n, x, a, cfg)
    sd_z = math.sqrt(mom.var_Z)

    z_edges = _tail_edges(grid.z.edges)
    n_z = grid.z.n_points

    if a in (Action.CHARGE, Action.DISCHARGE_FULL) or a is Action.FUEL_FULL:
        if a is Action.FUEL_FULL:
            other_axis, mean_o, var_o, cov = grid.g, mom.m_G, mom.var_G, mom.cov_ZG
            dirac = ("q", cell_of(_clamp01(mom.m_Q), grid.q))
        else:
            other_axis, mean_o, var_o, cov = grid.q, mom.m_Q, mom.var_Q, mom.cov_ZQ
            dirac = ("g", k_src)
        o_edges = _tail_edges(other_axis.edges)
        mass = np.empty((n_z, other_axis.n_points))
        cov2 = ((mom.var_Z, cov), (cov, var_o))
        for zi in range(n_z):
            for oi in range(other_axis.n_points):
                rect = ((z_edges[zi], z_edges[zi + 1]), (o_edges[oi], o_edges[oi + 1]))
                mass[zi, oi] = rect_prob((mom.m_Z, mean_o), cov2, rect)
        mass = _normalize_rows(mass, (-2, -1), f"row n={n} src={source} a={a.label}")
        targets = []
        probs = []
        for zi in range(n_z):
            for oi in range(other_axis.n_points):
                if mass[zi, oi] > 0.0:
                    if dirac[0] == "q":
                        targets.append(grid.lin(zi, dirac[1], oi))
                    else:
                        targets.append(grid.lin(zi, oi, dirac[1]))
                    probs.append(mass[zi, oi])
        return TransitionRow(np.array(targets, dtype=np.intp), np.array(probs))

    # univariate Z times two Dirac axes
    z_mass = _z_cell_masses_scalar(mom.m_Z, sd_z, grid)
    z_mass = _normalize_rows(z_mass, (-1,), f"row n={n} src={source} a={a.label}")
    j_tgt = cell_of(_clamp01(mom.m_Q), grid.q)
    k_tgt = cell_of(_clamp01(mom.m_G), grid.g)
    keep = z_mass > 0.0
    targets = np.array([grid.lin(zi, j_tgt, k_tgt) for zi in range(n_z) if keep[zi]], dtype=np.intp)
    return TransitionRow(targets, z_mass[keep])
