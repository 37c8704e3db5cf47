"""Fundamental-solution operators: Poisson-type extension, half-space
Newtonian potentials, heat semigroup, Duhamel forcing and the boundary heat
layer potential.

Tangential convolutions are exact on the periodic lattice; only the x_n and
time integrals are quadrature.  The singular time kernels are handled by
product integration: piecewise-linear data against exact kernel moments, the
(t-s)^(-3/2) Gaussian factor integrated in closed form through (scaled)
complementary error functions.  Near-wall panels whose kernel mass falls
below ~1e-13 underflow to zero through erfcx, which implements the drop
policy for x_n^2/(4 r) beyond ~30.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erfc, erfcx

from .besov import extend_halfspace
from .fields import BoundaryField, Grid, SpaceTimeField
from .spectral import FullField, helmholtz_project

__all__ = [
    "KernelQuadrature",
    "heat_evolve",
    "heat_evolve_series",
    "poisson_extend",
    "newton_potential",
    "layer_potential_U",
    "duhamel_forcing",
    "exp_panel_weights",
    "heat_wall_moments",
    "causal_exponential_smoothing",
]


# ---------------------------------------------------------------------------
# quadrature building blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelQuadrature:
    """Product-integration policy for the singular time kernels.

    ``drop_exponent``: panels with x_n^2/(4 r) + a^2 r above this threshold
    carry kernel mass below double-precision noise and contribute zeros.
    """

    drop_exponent: float = 30.0

    def weight_sum_check(self, r_edges: np.ndarray, xn: float, a: float,
                         tol: float = 1e-12) -> float:
        """|sum of panel masses - exact integral| over the given window."""
        M0, _ = heat_wall_moments(r_edges, xn, a)
        total = float(np.sum(M0))
        exact = _heat_wall_antiderivative(np.asarray([r_edges[-1]]), xn / 2.0, a)[0][0] \
            - _heat_wall_antiderivative(np.asarray([max(r_edges[0], 1e-300)]), xn / 2.0, a)[0][0]
        return abs(total - exact)


def exp_panel_weights(lam: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact weights for int_0^dt exp(-lam (dt - r)) * linear(r) dr.

    Returns (A, B): the weights of the panel's left and right data values.
    """
    lam = np.asarray(lam, dtype=float)
    out_A = np.empty_like(lam)
    out_B = np.empty_like(lam)
    small = lam * dt < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        E = np.exp(-lam * dt)
        I0 = np.where(small, dt, -np.expm1(-lam * dt) / np.where(small, 1.0, lam))
        I1 = np.where(small, dt / 2.0,
                      1.0 / np.where(small, 1.0, lam)
                      + np.expm1(-lam * dt) / np.where(small, 1.0, lam**2 * dt))
    out_B[:] = I1
    out_A[:] = I0 - I1
    return out_A, out_B


def _heat_wall_antiderivative(r, c, a):
    """Antiderivatives (F0, F1) of the layer-potential kernel moments.

    Kernel k(r) = exp(-a^2 r) * d/dx_n Gamma_1(x_n, r) with c = x_n / 2:
    F0' = k, F1' = r k.  Broadcasts over (r, c, a); evaluated through erfcx
    so large arguments underflow to zero instead of overflowing.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    c_b, a_b, r_b = np.broadcast_arrays(c, a, r)
    safe_c = np.where(c_b > 0, c_b, 1.0)
    safe_a = np.where(a_b > 0, a_b, 1.0)
    sq = np.sqrt(r_b)
    # a = 0 branch
    ec = erfc(safe_c / sq)
    gauss = np.exp(-safe_c**2 / r_b)
    F0_a0 = -0.5 * ec
    F1_a0 = safe_c**2 * ec - (safe_c / np.sqrt(np.pi)) * sq * gauss
    # a > 0 branch
    zm = safe_c / sq - safe_a * sq
    zp = safe_c / sq + safe_a * sq
    damp = np.exp(-safe_c**2 / r_b - safe_a**2 * r_b)
    Em = np.where(zm >= 0, damp * erfcx(np.abs(zm)),
                  np.exp(-2.0 * safe_a * safe_c) * erfc(zm))
    Ep = damp * erfcx(zp)
    F0_ap = -0.25 * (Em + Ep)
    F1_ap = -(safe_c / (4.0 * safe_a)) * (Em - Ep)
    F0 = np.where(a_b == 0.0, F0_a0, F0_ap)
    F1 = np.where(a_b == 0.0, F1_a0, F1_ap)
    zero = c_b == 0.0
    return np.where(zero, 0.0, F0), np.where(zero, 0.0, F1)


def heat_wall_moments(r_edges: np.ndarray, xn, a):
    """Panel moments (M0, M1) of the layer-potential kernel on [r_m, r_{m+1}].

    Broadcasts: returns arrays shaped (len(r_edges) - 1,) + broadcast(xn, a).
    """
    r = np.asarray(r_edges, dtype=float).copy()
    if r[0] == 0.0:
        r[0] = 1e-300  # antiderivatives vanish in the r -> 0+ limit
    xn = np.asarray(xn, dtype=float)
    a = np.asarray(a, dtype=float)
    extra = (1,) * max(xn.ndim, a.ndim)
    r = r.reshape(r.shape + extra)
    F0, F1 = _heat_wall_antiderivative(r, xn / 2.0, a)
    return np.diff(F0, axis=0), np.diff(F1, axis=0)


def causal_exponential_smoothing(values: np.ndarray, x_nodes: np.ndarray,
                                 a: float, factor: float = 0.5) -> np.ndarray:
    """S(x) = factor * int_0^x V(y) exp(-a (x - y)) dy along axis 0.

    Exact on piecewise-linear V; O(N) recursion per column.
    """
    out = np.zeros_like(values)
    for m in range(len(x_nodes) - 1):
        h = x_nodes[m + 1] - x_nodes[m]
        A, B = exp_panel_weights(np.asarray([a]), h)
        decay = np.exp(-a * h)
        out[m + 1] = decay * out[m] + factor * (A[0] * values[m] + B[0] * values[m + 1])
    return out


# ---------------------------------------------------------------------------
# heat semigroup
# ---------------------------------------------------------------------------

def heat_evolve(f: FullField, t: float) -> FullField:
    """Multiplication by exp(-4 pi^2 |xi|^2 t) on the full-space lattice."""
    if t < 0:
        raise ValueError("heat_evolve needs t >= 0")
    if f.has_normal and not f.space_extended:
        raise ValueError("extend the field to the full space first")
    lam = 4.0 * np.pi**2 * sum(x**2 for x in f.xi_mesh())
    m = np.exp(-lam * t)
    coeffs = f.fft()
    if f.rank > 0:
        m = m.reshape(m.shape + (1,) * f.rank)
    return f.ifft(m * coeffs)


def heat_evolve_series(f: FullField, grid: Grid | None = None) -> SpaceTimeField:
    """Heat evolution sampled on the grid's time nodes, restricted to x_n >= 0."""
    if f.has_time:
        raise ValueError("heat_evolve_series expects spatial-only data")
    grid = grid or f.grid
    lam = 4.0 * np.pi**2 * sum(x**2 for x in f.xi_mesh())
    coeffs = f.fft()
    t_nodes = grid.t_nodes
    out = np.empty((grid.N_t,) + f.values.shape)
    for i, t in enumerate(t_nodes):
        m = np.exp(-lam * t)
        if f.rank > 0:
            m = m.reshape(m.shape + (1,) * f.rank)
        out[i] = np.real(np.fft.ifftn(m * coeffs, axes=f.lattice_axes()))
    phys = out[:, : grid.N_xn]
    return SpaceTimeField(grid, f.rank, phys)


# ---------------------------------------------------------------------------
# Poisson-type extension of wall data (tangential convolution with N)
# ---------------------------------------------------------------------------

def _tangential_freq_mesh(grid: Grid, ndim: int, first_axis: int):
    k = np.fft.fftfreq(grid.N_xp, d=grid.dx_tangential)
    mesh = []
    for d in range(grid.n - 1):
        shape = [1] * ndim
        shape[first_axis + d] = grid.N_xp
        mesh.append(k.reshape(shape))
    return mesh


def poisson_extend(h: BoundaryField, derivative: str = "none",
                   scale: float = 1.0) -> SpaceTimeField:
    """Harmonic extension phi with tangential transform
    phi_hat(xi', x_n) = -exp(-2 pi |xi'| x_n) / (4 pi |xi'|) * h_hat(xi').

    The zero tangential mode uses the homogeneous convention value 0.
    ``derivative='grad'`` returns the full gradient (a divergence-free,
    per-slice harmonic velocity).  ``scale`` multiplies the data.
    """
    if h.rank != 0:
        raise ValueError("poisson_extend expects scalar wall data")
    grid = h.grid
    hhat = np.fft.fftn(h.values * scale, axes=list(range(1, grid.n)))
    mesh = _tangential_freq_mesh(grid, hhat.ndim, first_axis=1)
    amag = 2.0 * np.pi * np.sqrt(sum(m**2 for m in mesh))  # 2 pi |xi'|
    xn = grid.x_normal
    # shape (Nt, Nxn, Nx'...)
    decay = np.exp(-amag[:, None] * xn.reshape((1, -1) + (1,) * (grid.n - 1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(amag == 0.0, 0.0, -1.0 / np.where(amag == 0.0, 1.0, 2.0 * amag))
    phi_hat = coef[:, None] * decay * hhat[:, None]
    if derivative == "none":
        phi = np.real(np.fft.ifftn(phi_hat, axes=list(range(2, grid.n + 1))))
        return SpaceTimeField(grid, 0, phi)
    if derivative != "grad":
        raise ValueError(f"unknown derivative request {derivative!r}")
    n = grid.n
    out_hat = np.empty(phi_hat.shape + (n,), dtype=complex)
    for d in range(n - 1):
        out_hat[..., d] = 2j * np.pi * mesh[d][:, None] * phi_hat
    out_hat[..., n - 1] = -amag[:, None] * phi_hat
    grad = np.real(np.fft.ifftn(out_hat, axes=list(range(2, grid.n + 1))))
    return SpaceTimeField(grid, 1, grad)


# ---------------------------------------------------------------------------
# half-space Newtonian potentials
# ---------------------------------------------------------------------------

def _exp_segment_integrals(values: np.ndarray, x_nodes: np.ndarray, a: np.ndarray):
    """Causal/anticausal exponential integrals of piecewise-linear data.

    Returns (C, A) with C(x) = int_0^x e^{-a(x-y)} v dy and
    A(x) = int_x^H e^{-a(y-x)} v dy, vectorised over leading mode axes of
    ``a`` (values shaped (modes..., N_xn, ...)).
    """
    N = len(x_nodes)
    C = np.zeros_like(values)
    A = np.zeros_like(values)
    for m in range(N - 1):
        h = x_nodes[m + 1] - x_nodes[m]
        wA, wB = exp_panel_weights(a.ravel(), h)
        wA = wA.reshape(a.shape)
        wB = wB.reshape(a.shape)
        decay = np.exp(-a * h)
        C[..., m + 1, :] = decay[..., None] * C[..., m, :] + (
            wA[..., None] * values[..., m, :] + wB[..., None] * values[..., m + 1, :]
        )
    for m in range(N - 2, -1, -1):
        h = x_nodes[m + 1] - x_nodes[m]
        # int_{x_m}^{x_{m+1}} e^{-a(y - x_m)} v dy: weights mirror the causal panel
        wA, wB = exp_panel_weights(a.ravel(), h)
        wA = wA.reshape(a.shape)
        wB = wB.reshape(a.shape)
        decay = np.exp(-a * h)
        A[..., m, :] = decay[..., None] * A[..., m + 1, :] + (
            wB[..., None] * values[..., m, :] + wA[..., None] * values[..., m + 1, :]
        )
    return C, A


def newton_potential(g: SpaceTimeField, variant: str = "direct",
                     normal_derivative_order: int = 0) -> SpaceTimeField:
    """Half-space Newtonian potential with direct or image-point kernel.

    Per tangential mode (a = 2 pi |xi'|) the x_n kernel is
    ``-exp(-a |x_n - y_n|) / (2 a)`` (direct) or ``-exp(-a (x_n + y_n)) / (2 a)``
    (image source reflected across the wall), integrated by product
    quadrature against piecewise-linear data.  The zero tangential mode maps
    to 0 (homogeneous convention).  Normal derivatives up to order 2 are
    evaluated analytically from the recursion, so ``(d_nn - a^2)`` applied to
    the direct potential reproduces the data up to quadrature error.
    """
    if variant not in ("direct", "image"):
        raise ValueError(f"unknown variant {variant!r}")
    if g.rank != 0:
        raise ValueError("newton_potential expects a scalar field")
    if normal_derivative_order not in (0, 1, 2):
        raise ValueError("normal_derivative_order must be 0, 1 or 2")
    grid = g.grid
    ghat = np.fft.fftn(g.values, axes=list(range(2, grid.n + 1)))
    # reorder to (modes..., xn, t) for the recursion helpers
    ghat = np.moveaxis(ghat, (0, 1), (-1, -2))  # (x'..., xn, t)
    mesh = _tangential_freq_mesh(grid, grid.n - 1, first_axis=0)
    a = 2.0 * np.pi * np.sqrt(sum(m**2 for m in mesh))
    a = np.broadcast_to(a, ghat.shape[: grid.n - 1]).copy()
    xn = grid.x_normal
    nonzero = a > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv2a = np.where(nonzero, -0.5 / np.where(nonzero, a, 1.0), 0.0)
    C, Aint = _exp_segment_integrals(ghat, xn, a)
    if variant == "direct":
        if normal_derivative_order == 0:
            pot = inv2a[..., None, None] * (C + Aint)
        elif normal_derivative_order == 1:
            pot = inv2a[..., None, None] * (a[..., None, None] * (Aint - C))
        else:
            pot = inv2a[..., None, None] * (a[..., None, None] ** 2 * (C + Aint)) + ghat
    else:
        # image kernel: e^{-a(x+y)} = e^{-a x} e^{-a y}; one weighted integral
        Iimg = (C + Aint)[..., 0, :]  # int_0^H e^{-a y} v dy evaluated at x = 0
        decay = np.exp(-a[..., None] * xn)  # (modes..., xn)
        sign = {0: 1.0, 1: -1.0, 2: 1.0}[normal_derivative_order]
        apow = a[..., None] ** normal_derivative_order
        pot = (inv2a[..., None] * sign * apow * decay)[..., None] * Iimg[..., None, :]
    pot = np.where(nonzero[..., None, None], pot, 0.0)
    pot = np.moveaxis(pot, (-1, -2), (0, 1))
    out = np.real(np.fft.ifftn(pot, axes=list(range(2, grid.n + 1))))
    return SpaceTimeField(grid, 0, out)


# ---------------------------------------------------------------------------
# boundary heat layer potential
# ---------------------------------------------------------------------------

def layer_potential_U(f: BoundaryField, quad: KernelQuadrature | None = None,
                      zero_tol: float = 1e-8) -> SpaceTimeField:
    """U f(x, t) = int_0^t int D_{x_n} Gamma(x'-y', x_n, t-s) f(y', s) dy' ds.

    Tangential directions are exact multipliers; the time integral is product
    integration on the (t-s)^(-3/2) Gaussian kernel.  The wall row carries
    the jump limit -f/2 (the integral itself vanishes at x_n = 0).
    """
    if f.rank != 0:
        raise ValueError("layer_potential_U expects scalar wall data")
    grid = f.grid
    scale = np.max(np.abs(f.values))
    if scale > 0 and np.max(np.abs(f.values[0])) > zero_tol * scale:
        raise ValueError("layer potential needs zero initial trace (f(., 0) = 0)")
    fhat = np.fft.fftn(f.values, axes=list(range(1, grid.n)))  # (t, x'modes...)
    U_hat = _layer_potential_modes(fhat, grid)
    out = np.real(np.fft.ifftn(U_hat, axes=list(range(2, grid.n + 1))))
    return SpaceTimeField(grid, 0, out)


def _layer_potential_modes(fhat: np.ndarray, grid: Grid,
                           mode_chunk: int = 512) -> np.ndarray:
    """Apply the layer potential per tangential mode; fhat (Nt, modes...)."""
    mesh = _tangential_freq_mesh(grid, fhat.ndim - 1, first_axis=0)
    amag = 2.0 * np.pi * np.sqrt(sum(m**2 for m in mesh))
    amag = np.broadcast_to(amag, fhat.shape[1:])
    xn = grid.x_normal
    nt = grid.N_t
    r_edges = grid.dt * np.arange(nt + 1)
    flat_a = amag.ravel()
    fflat = fhat.reshape(nt, -1)
    Uflat = np.empty((nt, len(xn), fflat.shape[1]), dtype=complex)
    Uflat[:, 0] = -0.5 * fflat  # jump relation at the wall
    interior = xn[1:].reshape(-1, 1)
    for lo in range(0, fflat.shape[1], mode_chunk):
        hi = min(lo + mode_chunk, fflat.shape[1])
        M0, M1 = heat_wall_moments(r_edges, interior, flat_a[lo:hi])
        Wn = (r_edges[1:, None, None] * M0 - M1) / grid.dt
        Wf = (M1 - r_edges[:-1, None, None] * M0) / grid.dt
        f = fflat[:, None, lo:hi]
        near = fftconvolve(f, Wn, axes=0)[:nt]
        far = fftconvolve(f, Wf, axes=0)[:nt]
        near[1:] += far[:-1]
        Uflat[:, 1:, lo:hi] = near
    return Uflat.reshape((nt, len(xn)) + fhat.shape[1:])


# ---------------------------------------------------------------------------
# Duhamel forcing term
# ---------------------------------------------------------------------------

def duhamel_heat_recursion(data: np.ndarray, lam: np.ndarray, dt: float) -> np.ndarray:
    """w(t_i) = int_0^{t_i} exp(-lam (t_i - s)) data(s) ds along axis 0.

    One exact exponential panel per step on piecewise-linear data; for data
    constant or linear in time the result is the closed-form integral.
    """
    lam = np.asarray(lam, dtype=float)
    A, B = exp_panel_weights(lam.ravel(), dt)
    A = A.reshape(lam.shape)
    B = B.reshape(lam.shape)
    decay = np.exp(-lam * dt)
    out = np.empty(data.shape, dtype=data.dtype if data.dtype.kind == "c" else float)
    out[0] = 0.0
    for i in range(1, data.shape[0]):
        out[i] = decay * out[i - 1] + A * data[i - 1] + B * data[i]
    return out


def duhamel_forcing(F: SpaceTimeField, report: dict | None = None) -> SpaceTimeField:
    """w1 = int_0^t Gamma(t-s) * P div F~ ds with F~ the E1 (k=1) extension.

    Frequency-domain Duhamel recursion with exact exp(-4 pi^2 |xi|^2 (t-s))
    panels on piecewise-linear data; divergence and Helmholtz projection are
    spectral on the extended lattice, so div w1 = 0 on the lattice.  When a
    ``report`` dict is supplied, the mode-space divergence residual of the
    result (a round-off check of the representation) is recorded in it.
    """
    if F.rank != 2:
        raise ValueError("duhamel_forcing expects a rank-2 forcing field")
    grid = F.grid
    ext = extend_halfspace(F, k=1)
    spatial_axes = list(range(1, 1 + ext.n_spatial_axes))
    # a time series of spatial coefficients: transform spatial axes only
    coeffs = np.fft.fftn(ext.values, axes=spatial_axes)
    xi = ext.xi_mesh(zero_nyquist=True)  # odd (derivative) use
    n = grid.n
    comp_xi = [xi[1 + d] for d in range(n - 1)] + [xi[0]]
    div_hat = np.empty(coeffs.shape[:-1], dtype=complex)
    for i in range(n):
        div_hat[..., i] = sum(2j * np.pi * comp_xi[j] * coeffs[..., i, j]
                              for j in range(n))
    # Helmholtz projection of the divergence vector, mode by mode
    mag2 = sum(x**2 for x in comp_xi)
    dot = sum(comp_xi[j] * div_hat[..., j] for j in range(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag2 == 0.0, 0.0, 1.0 / np.where(mag2 == 0.0, 1.0, mag2))
    proj = np.empty_like(div_hat)
    for i in range(n):
        proj[..., i] = div_hat[..., i] - comp_xi[i] * dot * scale
    # heat decay is an even symbol: use the true frequencies
    xi_full = ext.xi_mesh()
    lam = (4.0 * np.pi**2 * sum(x**2 for x in xi_full))[0]  # drop the time axis
    out = duhamel_heat_recursion(proj, lam[..., None], grid.dt)
    if report is not None:
        div_out = sum(2j * np.pi * comp_xi[i] * out[..., i] for i in range(n))
        scale = max(float(np.max(np.abs(out))), 1e-300)
        report["representation_div"] = float(np.max(np.abs(div_out))) / scale
    w = np.real(np.fft.ifftn(out, axes=spatial_axes))
    return SpaceTimeField(grid, 1, w[:, : grid.N_xn])
