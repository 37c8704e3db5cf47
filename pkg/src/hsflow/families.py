"""Seeded families of smooth test fields.

Everything here is deterministic given (grid, seed): randomized inequality
checks are reproducible by construction.  Packets are evaluated analytically,
so parabolic dilations f(x, t) -> f(lam x, lam^2 t) are sampled exactly
rather than resampled from the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fields import Grid, SpaceTimeField, SpatialField

__all__ = ["Packet", "packet_field", "random_packets", "random_spatial",
           "dilate", "mode_atom"]


@dataclass(frozen=True)
class Packet:
    """Gaussian-enveloped wave packet on the half space times the window.

    Effectively compactly supported; the envelope keeps it away from the
    wall, the truncation height and the time endpoints, so dilations by
    lam in {1, 2, 4} stay inside the box.
    """

    amplitude: float
    k_tang: tuple[float, ...]
    k_norm: float
    omega: float
    center: tuple[float, ...]   # (x_n0, x'0...)
    t0: float
    width: float
    t_width: float
    phase: float

    def __call__(self, t, xn, *xs):
        arg = 2 * np.pi * (self.k_norm * xn + self.omega * t) + self.phase
        gauss = ((xn - self.center[0]) / self.width) ** 2
        for d, x in enumerate(xs):
            arg = arg + 2 * np.pi * self.k_tang[d] * x
            gauss = gauss + ((x - self.center[1 + d]) / self.width) ** 2
        gauss = gauss + ((t - self.t0) / self.t_width) ** 2
        return self.amplitude * np.cos(arg) * np.exp(-gauss)

    def dilated(self, lam: float) -> "Packet":
        return replace(
            self,
            k_tang=tuple(lam * k for k in self.k_tang),
            k_norm=lam * self.k_norm,
            omega=lam * lam * self.omega,
            center=tuple(c / lam for c in self.center),
            t0=self.t0 / lam**2,
            width=self.width / lam,
            t_width=self.t_width / lam**2,
        )


def packet_field(grid: Grid, packets: list[Packet], rank: int = 0) -> SpaceTimeField:
    mesh = grid.meshgrid()
    if rank == 0:
        vals = sum(p(*mesh) for p in packets)
        return SpaceTimeField(grid, 0, vals)
    raise ValueError("packet fields are scalar; build vectors componentwise")


def random_packets(grid: Grid, count: int, seed: int, amplitude: float = 1.0,
                   lam_max: float = 1.0,
                   width_frac: tuple[float, float] = (0.05, 0.12),
                   t_width_frac: tuple[float, float] = (0.08, 0.15)) -> list[Packet]:
    """Packets resolvable on the grid after dilation by up to lam_max.

    Carrier frequencies are capped at half the dilated Nyquist; envelope
    widths must also stay a few grid cells wide after dilation, which the
    caller controls through the width fractions.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        width = rng.uniform(*width_frac) * grid.H
        xn0 = rng.uniform(3.2 * width, max(min(0.55 * grid.H, 8 * width), 3.3 * width))
        cent = (xn0,) + tuple(rng.uniform(0.0, grid.L, size=grid.n - 1))
        t_width = rng.uniform(*t_width_frac) * grid.T
        t0 = rng.uniform(3.2 * t_width, max(min(0.6 * grid.T, 8 * t_width), 3.3 * t_width))
        k_lim_x = grid.N_xp / (2.0 * grid.L) / (2.0 * lam_max)
        k_lim_n = grid.N_xn / (2.0 * grid.H) / (2.0 * lam_max)
        om_lim = grid.N_t / (2.0 * grid.T) / (2.0 * lam_max**2)
        out.append(Packet(
            amplitude=amplitude * rng.uniform(0.5, 1.5),
            k_tang=tuple(rng.uniform(0.2, 1.0) * k_lim_x for _ in range(grid.n - 1)),
            k_norm=rng.uniform(0.2, 1.0) * k_lim_n,
            omega=rng.uniform(0.2, 1.0) * om_lim,
            center=cent, t0=t0, width=width, t_width=t_width,
            phase=rng.uniform(0, 2 * np.pi),
        ))
    return out


def dilate(grid: Grid, packets: list[Packet], lam: float) -> SpaceTimeField:
    return packet_field(grid, [p.dilated(lam) for p in packets])


def random_spatial(grid: Grid, seed: int, modes: int = 5,
                   amplitude: float = 1.0) -> SpatialField:
    """Smooth decaying spatial field: random tangential modes times decaying
    wall-normal bumps (vanishing at the wall and at the truncation height)."""
    rng = np.random.default_rng(seed)

    def fn(xn, *xs):
        total = np.zeros(np.broadcast_shapes(xn.shape, xs[0].shape))
        for _ in range(modes):
            k = rng.integers(1, max(2, grid.N_xp // 8))
            phase = rng.uniform(0, 2 * np.pi)
            c = rng.uniform(0.15, 0.5) * grid.H
            w = rng.uniform(0.06, 0.15) * grid.H
            amp = amplitude * rng.uniform(0.3, 1.0)
            total = total + amp * np.cos(2 * np.pi * k * xs[0] / grid.L + phase) \
                * np.exp(-((xn - c) / w) ** 2)
        return total

    return SpatialField.sample(grid, 0, fn)


def mode_atom(grid: Grid, j: int = 0):
    """Full-lattice atom whose dyadic radius is exactly 2^j (one block).

    A pure tangential mode, constant in x_n and t, built directly on the
    periodic lattice so no extension is involved.  Needs the frequency 2^j
    on the tangential lattice (k = 2^j L an integer below Nyquist).
    """
    from .spectral import FullField

    k = (2.0**j) * grid.L
    k_int = round(k)
    if abs(k - k_int) > 1e-9 or not (1 <= k_int < grid.N_xp // 2):
        raise ValueError(f"dyadic radius 2^{j} is not on this tangential lattice")
    shape = (2 * grid.N_t, 2 * grid.N_xn) + grid.tangential_shape
    x1 = grid.x_tangential.reshape((1, 1, -1) + (1,) * (grid.n - 2))
    vals = np.broadcast_to(np.cos(2 * np.pi * k_int * x1 / grid.L), shape).copy()
    return FullField(grid, vals, rank=0, has_time=True, has_normal=True,
                     time_extended=True, space_extended=True)
