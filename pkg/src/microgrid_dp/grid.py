"""Truncated, discretized state space and cell (neighborhood) geometry.

Each axis carries N+1 equidistant grid points; every point owns a half-open
cell (left-open, right-closed] bounded by the midpoints to its neighbors.
On the z axis the outer cells extend to -inf / +inf (3-sigma truncation of
an unbounded residual); on the q and g axes the outer cells clamp at the
physical bounds 0 and 1, and any overshoot is attributed to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, State

__all__ = ["Axis", "StateGrid", "build_grid", "cell_of", "neighborhood"]


@dataclass(frozen=True)
class Axis:
    """One grid axis: points, interior cell boundaries, and outer bounds."""

    name: str
    points: np.ndarray  # shape (n_points,), strictly increasing, equidistant
    edges: np.ndarray   # shape (n_points - 1,), midpoints between adjacent points
    lo: float           # lower bound of the bottom cell (-inf on z, 0.0 on q/g)
    hi: float           # upper bound of the top cell (+inf on z, 1.0 on q/g)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def step(self) -> float:
        return float(self.points[1] - self.points[0])


def _make_axis(name: str, lo_point: float, hi_point: float, n_intervals: int,
               lo: float, hi: float) -> Axis:
    points = np.linspace(lo_point, hi_point, n_intervals + 1)
    edges = 0.5 * (points[:-1] + points[1:])
    return Axis(name=name, points=points, edges=edges, lo=lo, hi=hi)


@dataclass(frozen=True)
class StateGrid:
    """Product grid over (z, q, g) with a flattened index map."""

    z: Axis
    q: Axis
    g: Axis

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.z.n_points, self.q.n_points, self.g.n_points)

    @property
    def n_states(self) -> int:
        ni, nj, nk = self.shape
        return ni * nj * nk

    def lin(self, i: int, j: int, k: int) -> int:
        """Linear state id of multi-index (i, j, k)."""
        _, nj, nk = self.shape
        return (i * nj + j) * nk + k

    def ijk(self, m: int) -> tuple[int, int, int]:
        """Multi-index of linear state id m."""
        _, nj, nk = self.shape
        i, rem = divmod(m, nj * nk)
        j, k = divmod(rem, nk)
        return i, j, k

    def state_of(self, m: int) -> State:
        """Continuous representative (grid point) of linear state id m."""
        i, j, k = self.ijk(m)
        return State(float(self.z.points[i]), float(self.q.points[j]), float(self.g.points[k]))

    def axis(self, name: str) -> Axis:
        return {"z": self.z, "q": self.q, "g": self.g}[name]


def build_grid(cfg: ModelConfig) -> StateGrid:
    """Construct the truncated state grid for a validated config.

    The z axis spans [-zbar, zbar] with zbar = 3 sigma_R / sqrt(2 beta_R),
    the 3-sigma band of the stationary residual-demand law. N_Z is odd, so
    z = 0 falls exactly between the two central grid points.
    """
    d = cfg.discretization
    zbar = 3.0 * cfg.demand.sigma_R / math.sqrt(2.0 * cfg.demand.beta_R)
    return StateGrid(
        z=_make_axis("z", -zbar, zbar, d.N_Z, -math.inf, math.inf),
        q=_make_axis("q", 0.0, 1.0, d.N_Q, 0.0, 1.0),
        g=_make_axis("g", 0.0, 1.0, d.N_G, 0.0, 1.0),
    )


def _resolve_axis(axis: Axis | str, grid: StateGrid | None) -> Axis:
    if isinstance(axis, Axis):
        return axis
    if grid is None:
        raise TypeError("axis given by name requires the grid argument")
    return grid.axis(axis)


def neighborhood(axis: Axis | str, i: int, grid: StateGrid | None = None) -> tuple[float, float]:
    """Half-open cell (lo, hi] owned by grid point i on the given axis."""
    ax = _resolve_axis(axis, grid)
    if not 0 <= i < ax.n_points:
        raise IndexError(f"point index {i} out of range for axis {ax.name!r}")
    lo = ax.lo if i == 0 else float(ax.edges[i - 1])
    hi = ax.hi if i == ax.n_points - 1 else float(ax.edges[i])
    return lo, hi


def cell_of(value: float, axis: Axis | str, grid: StateGrid | None = None) -> int:
    """Index of the cell containing value (right-closed ownership at boundaries).

    On the q/g axes values below 0 map to index 0 and values above 1 map to
    the top index; the boundary cells represent the clamped physical states.
    """
    ax = _resolve_axis(axis, grid)
    if math.isnan(value):
        raise ValueError(f"cannot locate NaN on axis {ax.name!r}")
    # first interior edge >= value owns it, since cells are (lo, hi]
    return int(np.searchsorted(ax.edges, value, side="left"))
