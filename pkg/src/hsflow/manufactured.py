"""Closed-form Newtonian flow used for convergence studies.

With tangential period 2*pi the stream field

    u = (sin(x1) h'(x2), -cos(x1) h(x2)) e^{-t},    h(x2) = exp(-x2),
    p = cos(x1) exp(-x2 - t),

solves the homogeneous Stokes system (u_t - Lap u + grad p = 0, div u = 0)
on the half plane, so the solver sees pure initial/boundary data and zero
forcing.  The wall data have a nonzero normal component with zero tangential
mean, exercising the normal-data and boundary-layer parts of the assembly.
"""

from __future__ import annotations

import numpy as np

from .fields import BoundaryField, Grid, SpaceTimeField, SpatialField
from .stokes import StokesProblem

__all__ = ["manufactured_grid", "exact_velocity", "exact_pressure",
           "manufactured_problem", "exact_field"]


def manufactured_grid(N_xp: int = 64, N_xn: int = 48, N_t: int = 64,
                      H: float = 16.0, T: float = 1.0) -> Grid:
    return Grid(n=2, L=2.0 * np.pi, N_xp=N_xp, H=H, N_xn=N_xn, T=T, N_t=N_t)


def exact_velocity(t, x2, x1):
    u1 = -np.sin(x1) * np.exp(-x2 - t)
    u2 = -np.cos(x1) * np.exp(-x2 - t)
    return u1, u2


def exact_pressure(t, x2, x1):
    return np.cos(x1) * np.exp(-x2 - t)


def exact_field(grid: Grid, amplitude: float = 1.0) -> SpaceTimeField:
    def fn(t, x2, x1):
        u1, u2 = exact_velocity(t, x2, x1)
        return amplitude * u1, amplitude * u2

    return SpaceTimeField.sample(grid, 1, fn)


def manufactured_problem(grid: Grid | None = None, amplitude: float = 1.0,
                         p: float = 8.0, q: float = 8.0, alpha: float = 1.6) -> StokesProblem:
    grid = grid or manufactured_grid()
    if grid.n != 2 or abs(grid.L - 2.0 * np.pi) > 1e-12:
        raise ValueError("the closed-form flow needs n = 2 and L = 2*pi")

    def u0_fn(x2, x1):
        u1, u2 = exact_velocity(0.0, x2, x1)
        return amplitude * u1, amplitude * u2

    u0 = SpatialField.sample(grid, 1, u0_fn)
    tt, xx = np.meshgrid(grid.t_nodes, grid.x_tangential, indexing="ij")
    u1b, u2b = exact_velocity(tt, 0.0, xx)
    g = BoundaryField(grid, 1,
                      tangential=amplitude * u1b[..., None],
                      normal=amplitude * u2b)
    return StokesProblem(u0=u0, g=g, F=None, p=p, q=q, alpha=alpha)
