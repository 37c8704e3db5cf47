"""Fourier-side machinery on the discretised domain.

Everything here acts on a ``FullField``: samples on a fully periodic lattice
(the half-space / half-time fields are brought there by the extension
operators in :mod:`hsflow.besov`).  Conventions:

* Fourier transform pairs use the ``exp(-2*pi*i*x*xi)`` convention, so a
  lattice mode ``exp(2*pi*i*k*x/L)`` carries frequency ``xi = k/L`` and the
  heat multiplier reads ``exp(-4*pi^2*|xi|^2*t)``.
* All homogeneous multipliers send the zero-frequency mode to zero unless the
  ``MultiplierSpec`` says otherwise; homogeneous norms are mean-blind.
* Parabolic (anisotropic) scaling pairs ``xi ~ 2^j`` with ``tau ~ 2^(2j)``;
  the dyadic radius is ``rho = |xi| + sqrt(|tau|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .fields import BoundaryField, Grid, SpaceTimeField

__all__ = [
    "FullField",
    "MultiplierSpec",
    "apply_multiplier",
    "riesz_transform",
    "riesz_tangential",
    "helmholtz_project",
    "half_time_derivative",
    "fractional_halfintegral",
    "LPFamily",
    "build_lp_family",
    "lp_block",
    "lp_partition_values",
]


# ---------------------------------------------------------------------------
# the periodic lattice container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullField:
    """Samples on a fully periodic space(-time) lattice.

    Axis order: ``[t][x_n][x' ...][components...]``.  The time / normal axes
    may be absent (boundary data, spatial-only data) or extended to twice the
    physical window when produced by a reflection extension.
    """

    grid: Grid
    values: np.ndarray
    rank: int = 0
    has_time: bool = True
    has_normal: bool = True
    time_extended: bool = False
    space_extended: bool = False

    def __post_init__(self):
        if self.values.shape != self.shape():
            raise ValueError(f"values shape {self.values.shape}, expected {self.shape()}")

    # -- geometry ----------------------------------------------------------
    def shape(self) -> tuple[int, ...]:
        g = self.grid
        shp: tuple[int, ...] = ()
        if self.has_time:
            shp += (2 * g.N_t if self.time_extended else g.N_t,)
        if self.has_normal:
            shp += (2 * g.N_xn if self.space_extended else g.N_xn,)
        shp += g.tangential_shape
        return shp + (g.n,) * self.rank

    def lattice_axes(self) -> list[int]:
        n_lattice = self.values.ndim - self.rank
        return list(range(n_lattice))

    @property
    def n_spatial_axes(self) -> int:
        return (1 if self.has_normal else 0) + (self.grid.n - 1)

    def cell_measure(self) -> float:
        g = self.grid
        meas = g.dx_tangential ** (g.n - 1)
        if self.has_time:
            meas *= g.dt
        if self.has_normal:
            meas *= g.H / g.N_xn
        return meas

    # -- frequency lattices -------------------------------------------------
    def tau(self, zero_nyquist: bool = False) -> np.ndarray | None:
        if not self.has_time:
            return None
        M = 2 * self.grid.N_t if self.time_extended else self.grid.N_t
        return _freqs(M, self.grid.dt, zero_nyquist)

    def xi_axes(self, zero_nyquist: bool = False) -> list[np.ndarray]:
        """Spatial frequency array per lattice spatial axis (normal first).

        Odd frequency symbols must use ``zero_nyquist=True``: the unpaired
        Nyquist bin has no sign partner on the lattice, so odd multipliers
        there would break conjugate symmetry; it is mapped to zero like the
        mean mode.
        """
        g = self.grid
        out = []
        if self.has_normal:
            if g.spacing != "uniform":
                raise ValueError("spectral work on the normal axis needs a uniform grid")
            M = 2 * g.N_xn if self.space_extended else g.N_xn
            out.append(_freqs(M, g.H / g.N_xn, zero_nyquist))
        for _ in range(g.n - 1):
            out.append(_freqs(g.N_xp, g.dx_tangential, zero_nyquist))
        return out

    def _bcast(self, arr: np.ndarray, axis: int) -> np.ndarray:
        # frequency meshes are lattice-shaped; component axes are appended
        # by the consumers that need them
        shape = [1] * len(self.lattice_axes())
        shape[axis] = len(arr)
        return arr.reshape(shape)

    def xi_mesh(self, zero_nyquist: bool = False) -> list[np.ndarray]:
        offset = 1 if self.has_time else 0
        return [self._bcast(a, offset + i)
                for i, a in enumerate(self.xi_axes(zero_nyquist))]

    def tau_mesh(self, zero_nyquist: bool = False) -> np.ndarray | None:
        t = self.tau(zero_nyquist)
        return None if t is None else self._bcast(t, 0)

    def xi_abs(self) -> np.ndarray:
        xs = self.xi_mesh()
        s = sum(x**2 for x in xs)
        return np.sqrt(s)

    def rho_parabolic(self) -> np.ndarray:
        rho = self.xi_abs()
        tau = self.tau_mesh()
        if tau is not None:
            rho = rho + np.sqrt(np.abs(tau))
        return rho

    # -- transforms ----------------------------------------------------------
    def fft(self) -> np.ndarray:
        return np.fft.fftn(self.values, axes=self.lattice_axes())

    def with_values(self, values: np.ndarray, rank: int | None = None) -> "FullField":
        return FullField(
            self.grid, values, self.rank if rank is None else rank,
            self.has_time, self.has_normal, self.time_extended, self.space_extended,
        )

    def ifft(self, coeffs: np.ndarray, rank: int | None = None) -> "FullField":
        vals = np.real(np.fft.ifftn(coeffs, axes=self.lattice_axes()))
        return self.with_values(vals, rank)

    def lp_norm(self, p: float) -> float:
        v = self.values
        if self.rank > 0:
            v = np.sqrt(np.sum(v**2, axis=tuple(range(-self.rank, 0))))
        if np.isinf(p):
            return float(np.max(np.abs(v)))
        return float((np.sum(np.abs(v) ** p) * self.cell_measure()) ** (1.0 / p))

    def restrict_physical(self) -> np.ndarray:
        """Values on the physical (t >= 0, x_n >= 0) part of the lattice.

        Extended axes are stored in wrap order: indices 0..N-1 hold the
        physical window, indices N..2N-1 the reflected negative part.
        """
        v = self.values
        if self.has_time and self.time_extended:
            v = v[: self.grid.N_t]
        if self.has_normal and self.space_extended:
            sl = (slice(None),) if self.has_time else ()
            v = v[sl + (slice(0, self.grid.N_xn),)]
        return v


def _freqs(M: int, d: float, zero_nyquist: bool) -> np.ndarray:
    out = np.fft.fftfreq(M, d=d)
    if zero_nyquist and M % 2 == 0:
        out = out.copy()
        out[M // 2] = 0.0
    return out


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierSpec:
    """Frequency symbol with an explicit zero-frequency convention.

    ``odd=True`` marks symbols that are odd (or carry nonreal phases) in the
    frequency, which must see the unpaired Nyquist bin as zero frequency.
    """

    symbol: Callable[[list[np.ndarray], np.ndarray | None], np.ndarray]
    anisotropic: bool = False
    zero_value: complex = 0.0
    name: str = ""
    odd: bool = False


def apply_multiplier(f: FullField, spec: MultiplierSpec) -> FullField:
    xi = f.xi_mesh(zero_nyquist=spec.odd)
    tau = f.tau_mesh(zero_nyquist=spec.odd)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = spec.symbol(xi, tau)
    mag2 = sum(x**2 for x in xi)
    if tau is not None:
        mag2 = mag2 + tau**2
    m = np.where(mag2 == 0.0, spec.zero_value, m)
    if not np.all(np.isfinite(np.broadcast_to(m, f.shape()[: len(f.lattice_axes())]))):
        raise ValueError(f"multiplier {spec.name or '<anon>'} not finite on the lattice")
    coeffs = f.fft()
    if f.rank > 0:
        m = m.reshape(m.shape + (1,) * f.rank)
    return f.ifft(m * coeffs)


# ---------------------------------------------------------------------------
# Riesz transforms and the Helmholtz projection
# ---------------------------------------------------------------------------

def _riesz_symbol(xi_i: np.ndarray, xi_all: list[np.ndarray]) -> np.ndarray:
    mag = np.sqrt(sum(x**2 for x in xi_all))
    with np.errstate(divide="ignore", invalid="ignore"):
        m = -1j * xi_i / mag
    return np.where(mag == 0.0, 0.0, m)


def riesz_tangential(grid: Grid, values: np.ndarray, i: int,
                     first_tangential_axis: int) -> np.ndarray:
    """(n-1)-dimensional Riesz transform R'_i along the tangential axes."""
    if not 0 <= i < grid.n - 1:
        raise ValueError(f"tangential axis {i} out of range")
    axes = [first_tangential_axis + d for d in range(grid.n - 1)]
    k = _freqs(grid.N_xp, grid.dx_tangential, zero_nyquist=True)
    mesh = []
    for ax in axes:
        shape = [1] * values.ndim
        shape[ax] = grid.N_xp
        mesh.append(k.reshape(shape))
    m = _riesz_symbol(mesh[i], mesh)
    fhat = np.fft.fftn(values, axes=axes)
    out = np.fft.ifftn(m * fhat, axes=axes)
    return np.real(out) if np.isrealobj(values) else out


def riesz_transform(f, i: int, dims: str = "tangential"):
    """Riesz transform with symbol -i*xi_i/|xi|; zero mode mapped to 0.

    ``dims='tangential'`` acts in x' only (SpaceTimeField / BoundaryField /
    ndarray-with-grid); ``dims='full-space'`` needs a space-extended
    ``FullField`` and acts in all n spatial frequencies.
    """
    if dims == "tangential":
        if isinstance(f, SpaceTimeField):
            if f.rank != 0:
                raise ValueError("riesz_transform expects a scalar field")
            out = riesz_tangential(f.grid, f.values, i, first_tangential_axis=2)
            return SpaceTimeField(f.grid, 0, out)
        if isinstance(f, BoundaryField):
            if f.rank != 0:
                raise ValueError("riesz_transform expects a scalar field")
            out = riesz_tangential(f.grid, f.values, i, first_tangential_axis=1)
            return BoundaryField(f.grid, 0, values=out)
        raise TypeError("tangential Riesz transform needs a grid-aware field")
    if dims == "full-space":
        if not isinstance(f, FullField) or not f.has_normal:
            raise ValueError("full-space Riesz transform needs a space-extended FullField")
        if f.rank != 0:
            raise ValueError("riesz_transform expects a scalar field")
        if not 0 <= i < f.grid.n:
            raise ValueError(f"axis {i} out of range")
        # component i = n-1 is the normal direction = spatial lattice axis 0
        axis_order = list(range(1, f.grid.n)) + [0]
        spec = MultiplierSpec(
            symbol=lambda xi, tau, _i=axis_order[i]: _riesz_symbol(xi[_i], xi),
            name=f"R_{i}",
            odd=True,
        )
        return apply_multiplier(f, spec)
    raise ValueError(f"unknown dims {dims!r}")


def helmholtz_project(f: FullField) -> FullField:
    """(P f)_i = f_i - sum_j R_i R_j f_j on the full-space lattice.

    The zero mode passes through unchanged (mean fields are divergence-free).
    """
    if f.rank != 1:
        raise ValueError("helmholtz_project expects a vector FullField")
    if not f.has_normal or not f.space_extended:
        raise ValueError("input must be extended to the full space first")
    n = f.grid.n
    xi = f.xi_mesh(zero_nyquist=True)
    # map component index (tangential..., normal) -> spatial lattice axis
    comp_xi = [xi[1 + d] for d in range(n - 1)] + [xi[0]]
    mag2 = sum(x**2 for x in xi)
    coeffs = f.fft()
    div_hat = sum(comp_xi[j] * coeffs[..., j] for j in range(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag2 == 0.0, 0.0, 1.0 / np.where(mag2 == 0.0, 1.0, mag2))
    out = np.empty_like(coeffs)
    for i_ in range(n):
        out[..., i_] = coeffs[..., i_] - comp_xi[i_] * div_hat * scale
    return f.ifft(out, rank=1)


# ---------------------------------------------------------------------------
# half-order time derivative (one-sided, zero history)
# ---------------------------------------------------------------------------

def _halfint_weights(n_steps: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Product-integration weights, kernel (t-s)^(-1/2) exact on linear data."""
    m = np.arange(n_steps, dtype=float)
    r0 = m * dt
    r1 = (m + 1) * dt
    q0 = 2.0 * (np.sqrt(r1) - np.sqrt(r0))
    q1 = (2.0 / 3.0) * (r1**1.5 - r0**1.5)
    w_near = (r1 * q0 - q1) / dt   # weight on f(t_i - r_m)
    w_far = (q1 - r0 * q0) / dt    # weight on f(t_i - r_{m+1})
    return w_near, w_far


def _convolve_time(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    w = weights.reshape((len(weights),) + (1,) * (values.ndim - 1))
    full = fftconvolve(values, w, axes=0)
    return full[: values.shape[0]]


def fractional_halfintegral(values: np.ndarray, dt: float) -> np.ndarray:
    """(1/sqrt(pi)) * int_0^t (t-s)^(-1/2) f(s) ds along axis 0, f(0) = 0."""
    nt = values.shape[0]
    w_near, w_far = _halfint_weights(nt, dt)
    near = _convolve_time(w_near, values)
    far = _convolve_time(w_far, values)
    out = near.copy()
    out[1:] += far[:-1]
    return out / np.sqrt(np.pi)


def half_time_derivative(f, zero_tol: float = 1e-8):
    """D_t^(1/2): product integration of the (t-s)^(-1/2) kernel, then a
    backward difference in t.  First-order accurate; requires zero history."""
    if isinstance(f, SpaceTimeField):
        grid, values, wrap = f.grid, f.values, ("field", f)
    elif isinstance(f, BoundaryField):
        if f.rank != 0:
            raise ValueError("half_time_derivative expects scalar boundary data")
        grid, values, wrap = f.grid, f.values, ("boundary", f)
    else:
        raise TypeError("half_time_derivative needs a SpaceTimeField or BoundaryField")
    scale = np.max(np.abs(values))
    if scale > 0 and np.max(np.abs(values[0])) > zero_tol * scale:
        raise ValueError(
            "zero-history precondition violated: |f(t=0)| = "
            f"{np.max(np.abs(values[0])):.3e} exceeds tolerance"
        )
    I = fractional_halfintegral(values, grid.dt)
    out = np.zeros_like(values)
    out[1:] = (I[1:] - I[:-1]) / grid.dt
    kind, orig = wrap
    if kind == "field":
        return SpaceTimeField(grid, orig.rank, out, symmetric=orig.symmetric)
    return BoundaryField(grid, 0, values=out)


def half_time_derivative_array(values: np.ndarray, dt: float) -> np.ndarray:
    """Raw-array variant used by the norm machinery (caller checks history)."""
    I = fractional_halfintegral(values, dt)
    out = np.zeros_like(values)
    out[1:] = (I[1:] - I[:-1]) / dt
    return out


# ---------------------------------------------------------------------------
# Littlewood-Paley family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LPFamily:
    """Dyadic partition built from a smooth monotone cutoff chi.

    ``psi(r) = chi(r) - chi(2 r)`` is supported in (1/2, 2), nonnegative, and
    the shifted sum telescopes to exactly 1 on the covered dyadic range.
    """

    j_min: int
    j_max: int
    r_table: np.ndarray = dc_field(repr=False)
    chi_table: np.ndarray = dc_field(repr=False)

    def chi(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r_table, self.chi_table, left=1.0, right=0.0)
        return out

    def bump(self, j: int, rho: np.ndarray) -> np.ndarray:
        """phi_hat_j evaluated at the dyadic radius rho."""
        s = np.ldexp(1.0, -j)  # 2^-j
        return self.chi(s * rho) - self.chi(2.0 * s * rho)

    @property
    def j_range(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def metadata(self) -> dict:
        return {"j_min": self.j_min, "j_max": self.j_max, "profile": "exp(1/(r^2-1)) cutoff"}


def _chi_table(samples: int = 4097) -> tuple[np.ndarray, np.ndarray]:
    r = np.linspace(1.0, 2.0, samples)
    s = 2.0 * r - 3.0  # map (1,2) -> (-1,1)
    with np.errstate(divide="ignore", over="ignore"):
        bump = np.where(np.abs(s) < 1.0, np.exp(1.0 / np.clip(s**2 - 1.0, -1.0, -1e-300)), 0.0)
    # cumulative integral from r to 2, normalised to chi(1)=1, chi(2)=0
    dr = r[1] - r[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (bump[1:] + bump[:-1]) * dr)])
    chi = (cum[-1] - cum) / cum[-1]
    return r, chi


def build_lp_family(rho_max: float, rho_min: float) -> LPFamily:
    """Family whose telescoping sum is exactly 1 on rho in [2^j_min, 2^j_max]."""
    if rho_max <= 0 or rho_min <= 0:
        raise ValueError("dyadic radii must be positive")
    j_max = int(np.ceil(np.log2(rho_max)))
    j_min = int(np.floor(np.log2(rho_min)))
    r_table, chi_table = _chi_table()
    return LPFamily(j_min=j_min, j_max=j_max, r_table=r_table, chi_table=chi_table)


def family_for(f: FullField, anisotropic: bool = True) -> LPFamily:
    rho = f.rho_parabolic() if anisotropic else f.xi_abs()
    rho = np.broadcast_to(rho, tuple(f.shape()[: len(f.lattice_axes())]))
    pos = rho[rho > 0]
    return build_lp_family(float(np.max(rho)), float(np.min(pos)))


def lp_block(f: FullField, j: int, family: LPFamily, anisotropic: bool = True) -> FullField:
    """Frequency-localised piece f * phi_j."""
    if not family.j_min <= j <= family.j_max:
        raise ValueError(f"block index {j} outside family range "
                         f"[{family.j_min}, {family.j_max}]")
    rho = f.rho_parabolic() if anisotropic else f.xi_abs()
    m = family.bump(j, rho)
    coeffs = f.fft()
    if f.rank > 0:
        m = m.reshape(m.shape + (1,) * f.rank)
    return f.ifft(m * coeffs)


def lp_partition_values(family: LPFamily, rho: np.ndarray) -> np.ndarray:
    """Sum of phi_hat_j over the family, evaluated at dyadic radii rho."""
    total = np.zeros_like(np.asarray(rho, dtype=float))
    for j in family.j_range:
        total += family.bump(j, rho)
    return total
