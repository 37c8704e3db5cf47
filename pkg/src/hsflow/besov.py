"""Anisotropic Besov/Sobolev norms and the space-manipulating operators.

Half-domain norms are canonical-extension norms: a field on the half space /
half time line is pushed to the fully periodic lattice by the reflection
extensions ``E1`` (space) and ``E2`` (time) and the dyadic analysis runs
there.  This gives an upper bound for (and an equivalent of) the restriction
norm; the infimum itself is not computable.

Extended axes use wrap order: indices ``0..N-1`` carry the physical window,
``N..2N-1`` the reflected part (node ``2N - m`` sits at coordinate ``-m h``).
Reflections that reach past the truncation height read zeros; the fields this
package works with are assumed negligible there (checked by diagnostics, not
enforced).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fields import BoundaryField, Grid, SpaceTimeField, SpatialField
from .spectral import (
    FullField,
    LPFamily,
    family_for,
    half_time_derivative_array,
    lp_block,
)
from .fields import time_derivative

__all__ = [
    "ExtensionCoefficients",
    "extension_coefficients",
    "extend_halfspace",
    "extend_time",
    "canonical_extension",
    "BesovProfile",
    "besov_norm",
    "block_lp_magnitudes",
    "assemble_profile",
    "sobolev_aniso_norm",
    "besov_norm_integral",
    "besov_integral_ratio",
    "spatial_besov_norm",
    "spatial_besov_per_slice",
    "trace_time0",
    "trace_boundary",
    "a_norm_endpoints",
]


# ---------------------------------------------------------------------------
# extension operators E1 / E2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionCoefficients:
    """Reflection weights lambda_1..lambda_m with exact moment conditions."""

    order: int
    kind: str  # "spatial" (m = 2k+1, moments l <= 2k) | "temporal" (m = k+1, l <= k)
    lam: tuple[float, ...]

    @property
    def moments_satisfied(self) -> int:
        return 2 * self.order if self.kind == "spatial" else self.order

    def moment_residuals(self) -> np.ndarray:
        out = []
        for l in range(self.moments_satisfied + 1):
            out.append(sum(((-j) ** l) * lam for j, lam in enumerate(self.lam, start=1)) - 1.0)
        return np.asarray(out)


def _solve_vandermonde_exact(m: int, lmax: int) -> tuple[float, ...]:
    """Exact rational solve of sum_j (-j)^l lam_j = 1 for l = 0..lmax."""
    if m != lmax + 1:
        raise ValueError("square system expected")
    A = [[Fraction((-j) ** l) for j in range(1, m + 1)] for l in range(lmax + 1)]
    b = [Fraction(1) for _ in range(lmax + 1)]
    # Gaussian elimination over Q
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        inv = 1 / A[col][col]
        A[col] = [a * inv for a in A[col]]
        b[col] *= inv
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * p for a, p in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return tuple(float(x) for x in b)


def extension_coefficients(k: int, kind: str = "spatial") -> ExtensionCoefficients:
    if k < 0:
        raise ValueError("extension order k must be nonnegative")
    if kind == "spatial":
        lam = _solve_vandermonde_exact(2 * k + 1, 2 * k)
    elif kind == "temporal":
        lam = _solve_vandermonde_exact(k + 1, k)
    else:
        raise ValueError(f"unknown extension kind {kind!r}")
    coeffs = ExtensionCoefficients(order=k, kind=kind, lam=lam)
    res = np.max(np.abs(coeffs.moment_residuals()))
    if res > 1e-10:
        raise AssertionError(f"moment conditions violated after solve: {res}")
    return coeffs


def _reflect_axis(values: np.ndarray, axis: int, lam: tuple[float, ...]) -> np.ndarray:
    """Append the reflected half along ``axis`` in wrap order."""
    N = values.shape[axis]
    v = np.moveaxis(values, axis, 0)
    ext = np.zeros((2 * N,) + v.shape[1:], dtype=values.dtype)
    ext[:N] = v
    # node index 2N - m has coordinate -m*h for m = 1..N
    for m in range(1, N + 1):
        acc = np.zeros(v.shape[1:], dtype=values.dtype)
        for j, lam_j in enumerate(lam, start=1):
            src = j * m
            if src < N:
                acc = acc + lam_j * v[src]
        ext[2 * N - m] = acc
    return np.moveaxis(ext, 0, axis)


def _require_uniform(grid: Grid) -> None:
    if grid.spacing != "uniform":
        raise ValueError(
            "reflection extensions need a uniform normal grid; resample graded "
            "fields first"
        )


def extend_halfspace(f, k: int = 1) -> FullField:
    """E1: reflection extension across the wall, C^(2k) matching at x_n = 0."""
    lam = extension_coefficients(k, "spatial").lam
    if isinstance(f, SpaceTimeField):
        _require_uniform(f.grid)
        vals = _reflect_axis(f.values, 1, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=True, has_normal=True,
                         time_extended=False, space_extended=True)
    if isinstance(f, SpatialField):
        _require_uniform(f.grid)
        vals = _reflect_axis(f.values, 0, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=False, has_normal=True,
                         space_extended=True)
    if isinstance(f, FullField):
        if f.space_extended or not f.has_normal:
            raise ValueError("field already extended or has no normal axis")
        ax = 1 if f.has_time else 0
        vals = _reflect_axis(f.values, ax, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=f.has_time, has_normal=True,
                         time_extended=f.time_extended, space_extended=True)
    raise TypeError("extend_halfspace: unsupported input type")


def extend_time(f, k: int = 1) -> FullField:
    """E2: reflection extension to negative times, C^k matching at t = 0."""
    lam = extension_coefficients(k, "temporal").lam
    if isinstance(f, BoundaryField):
        vals = f.values if f.rank == 0 else f.stacked()
        vals = _reflect_axis(vals, 0, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=True, has_normal=False,
                         time_extended=True, space_extended=False)
    if isinstance(f, SpaceTimeField):
        vals = _reflect_axis(f.values, 0, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=True, has_normal=True,
                         time_extended=True, space_extended=False)
    if isinstance(f, FullField):
        if f.time_extended or not f.has_time:
            raise ValueError("field already extended in time or has no time axis")
        vals = _reflect_axis(f.values, 0, lam)
        return FullField(f.grid, vals, rank=f.rank, has_time=True, has_normal=f.has_normal,
                         time_extended=True, space_extended=f.space_extended)
    raise TypeError("extend_time: unsupported input type")


def canonical_extension(f: SpaceTimeField, k_space: int = 1, k_time: int = 1) -> FullField:
    """E = E2 . E1, the canonical embedding into the periodic lattice."""
    return extend_time(extend_halfspace(f, k_space), k_time)


def _to_full(f, k_space: int = 1, k_time: int = 1) -> FullField:
    if isinstance(f, FullField):
        return f
    if isinstance(f, SpaceTimeField):
        return canonical_extension(f, k_space, k_time)
    if isinstance(f, SpatialField):
        return extend_halfspace(f, k_space)
    if isinstance(f, BoundaryField):
        return extend_time(f, k_time)
    raise TypeError(f"cannot take {type(f).__name__} to the periodic lattice")


# ---------------------------------------------------------------------------
# Littlewood-Paley profiles and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BesovProfile:
    """Per-block magnitudes 2^(s j) ||f * phi_j||_p and their l^q aggregation."""

    s: float
    p: float
    q: float
    j_values: tuple[int, ...]
    block_values: tuple[float, ...]
    value: float
    truncated: bool
    family_meta: dict

    def to_rows(self):
        return list(zip(self.j_values, self.block_values))


def block_lp_magnitudes(ff: FullField, p: float, anisotropic: bool = True,
                        family: LPFamily | None = None):
    """Raw block magnitudes ||f * phi_j||_p over the family range."""
    if family is None:
        family = family_for(ff, anisotropic=anisotropic)
    rho = ff.rho_parabolic() if anisotropic else ff.xi_abs()
    coeffs = ff.fft()
    mags = []
    for j in family.j_range:
        m = family.bump(j, rho)
        if ff.rank > 0:
            m = m.reshape(m.shape + (1,) * ff.rank)
        block = ff.ifft(m * coeffs, rank=ff.rank)
        mags.append(block.lp_norm(p))
    return family, np.asarray(mags)


def assemble_profile(family: LPFamily, raw: np.ndarray, s: float, p: float, q: float,
                     edge_share_tol: float = 1e-2) -> BesovProfile:
    js = np.asarray(list(family.j_range))
    weighted = (2.0 ** (s * js)) * raw
    if np.isinf(q):
        value = float(np.max(weighted)) if len(weighted) else 0.0
    else:
        value = float(np.sum(weighted**q) ** (1.0 / q))
    if value > 0:
        share = (weighted[0] + weighted[-1]) / np.sum(weighted)
        truncated = bool(share > edge_share_tol)
    else:
        truncated = False
    return BesovProfile(
        s=s, p=p, q=q, j_values=tuple(int(j) for j in js),
        block_values=tuple(float(b) for b in weighted), value=value,
        truncated=truncated, family_meta=family.metadata(),
    )


def besov_norm(f, s: float, p: float, q: float, domain: str = "auto",
               k_space: int = 1, k_time: int = 1,
               family: LPFamily | None = None) -> BesovProfile:
    """Homogeneous anisotropic Besov norm via parabolic dyadic blocks.

    ``domain='auto'`` infers the right lattice: half-domain fields go through
    the canonical extension; ``FullField`` inputs are analysed as given.
    Spatial-only inputs get the isotropic (non-parabolic) block family.
    """
    if domain not in ("auto", "full", "halfspace-halftime", "boundary-halftime", "spatial"):
        raise ValueError(f"unknown domain {domain!r}")
    ff = _to_full(f, k_space, k_time)
    anisotropic = ff.has_time
    family, raw = block_lp_magnitudes(ff, p, anisotropic=anisotropic, family=family)
    return assemble_profile(family, raw, s, p, q)


def spatial_besov_norm(f, s: float, p: float, q: float, k_space: int = 1) -> float:
    """Isotropic Besov norm of a spatial field on the half space."""
    ff = _to_full(f, k_space=k_space)
    if ff.has_time:
        raise ValueError("spatial_besov_norm expects time-independent data")
    return besov_norm(ff, s, p, q).value


# ---------------------------------------------------------------------------
# anisotropic Sobolev norm via multipliers on the canonical extension
# ---------------------------------------------------------------------------

def _multiindices(n: int, total: int):
    for combo in itertools.combinations_with_replacement(range(n), total):
        beta = [0] * n
        for c in combo:
            beta[c] += 1
        yield tuple(beta)


def sobolev_aniso_norm(f, k: int, p: float, k_space: int = 1, k_time: int = 1,
                       return_terms: bool = False):
    """|f|_{W^(k, k/2)_p} as the sum of mixed-derivative L^p norms.

    Derivatives are evaluated spectrally on the canonical extension with the
    one-sided symbols (2 pi i xi)^beta (2 pi i tau)^(l/2).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    ff = _to_full(f, k_space, k_time)
    if not ff.has_time:
        raise ValueError("anisotropic Sobolev norm needs a space-time field")
    n = ff.n_spatial_axes
    coeffs = ff.fft()
    xi = ff.xi_mesh(zero_nyquist=True)   # odd derivative symbols
    tau = ff.tau_mesh(zero_nyquist=True)
    terms = {}
    total = 0.0
    for l in range(k + 1):
        for beta in _multiindices(n, k - l):
            m = np.ones_like(tau, dtype=complex)
            for d, bd in enumerate(beta):
                if bd:
                    m = m * (2j * np.pi * xi[d]) ** bd
            if l:
                m = m * (2j * np.pi * tau) ** (l / 2.0)
            if ff.rank > 0:
                m = m.reshape(m.shape + (1,) * ff.rank)
            piece = ff.ifft(m * coeffs, rank=ff.rank).lp_norm(p)
            terms[(beta, l)] = piece
            total += piece
    if return_terms:
        return total, terms
    return total


# ---------------------------------------------------------------------------
# double-integral (Gagliardo-type) norm, Monte Carlo with stratified panels
# ---------------------------------------------------------------------------

def _physical_values(f) -> tuple[np.ndarray, Grid]:
    if isinstance(f, SpaceTimeField):
        return f.values, f.grid
    if isinstance(f, FullField) and f.has_time and f.has_normal:
        return f.restrict_physical(), f.grid
    raise TypeError("double-integral norm expects a half-domain space-time field")


def _pair_samples(grid: Grid, shape: tuple[int, ...], n_outer: int, n_inner: int,
                  seed: int):
    """Stratified lattice pair sample: outer points stratified over time panels."""
    rng = np.random.default_rng(seed)
    n_strata = 8
    per = n_outer // n_strata
    nt = shape[0]
    outer = []
    for s_ in range(n_strata):
        lo = (s_ * nt) // n_strata
        hi = ((s_ + 1) * nt) // n_strata
        ts = rng.integers(lo, hi, size=per)
        rest = [rng.integers(0, dim, size=per) for dim in shape[1:]]
        outer.append(np.stack([ts, *rest], axis=-1))
    outer = np.concatenate(outer, axis=0)
    inner = np.stack(
        [rng.integers(0, dim, size=(len(outer), n_inner)) for dim in shape], axis=-1
    )
    return outer, inner


def _parabolic_distance(grid: Grid, a_idx: np.ndarray, b_idx: np.ndarray) -> np.ndarray:
    dt = grid.dt
    hn = grid.H / grid.N_xn
    ht = grid.dx_tangential
    tdiff = np.abs(a_idx[..., 0] - b_idx[..., 0]) * dt
    xn = np.abs(a_idx[..., 1] - b_idx[..., 1]) * hn
    sq = xn**2
    for d in range(grid.n - 1):
        raw = np.abs(a_idx[..., 2 + d] - b_idx[..., 2 + d]).astype(float)
        per = np.minimum(raw, grid.N_xp - raw) * ht
        sq = sq + per**2
    return np.sqrt(sq) + np.sqrt(tdiff)


def _point_magnitude(values: np.ndarray, idx: np.ndarray, lattice_ndim: int) -> np.ndarray:
    gathered = values[tuple(np.moveaxis(idx, -1, 0))]
    if gathered.ndim > idx.ndim - 1:
        comp_axes = tuple(range(idx.ndim - 1, gathered.ndim))
        return gathered, comp_axes
    return gathered, ()


def _offset_distance_lattice(grid: Grid, shape: tuple[int, ...]):
    """Parabolic distances over the signed offset lattice (t, x_n signed,
    tangential periodic)."""
    nt, nn = shape[0], shape[1]
    dt_off = np.arange(-(nt - 1), nt)
    dn_off = np.arange(-(nn - 1), nn)
    dx_offs = [np.arange(grid.N_xp)] * (grid.n - 1)
    hn = grid.H / grid.N_xn
    hx = grid.dx_tangential
    mesh = np.meshgrid(dt_off, dn_off, *dx_offs, indexing="ij")
    sq = (mesh[1] * hn) ** 2
    for d in range(grid.n - 1):
        raw = mesh[2 + d]
        per = np.minimum(raw, grid.N_xp - raw) * hx
        sq = sq + per**2
    D = np.sqrt(sq) + np.sqrt(np.abs(mesh[0]) * grid.dt)
    return (dt_off, dn_off, dx_offs), D


def _structure_function(vals: np.ndarray, offset: tuple[int, ...], p: float,
                        ncomp_axes: int) -> float:
    """sum over valid x of |f(x + offset) - f(x)|^p (tangential wrap)."""
    dt, dn = offset[0], offset[1]
    nt, nn = vals.shape[0], vals.shape[1]
    a = vals[max(dt, 0): nt + min(dt, 0), max(dn, 0): nn + min(dn, 0)]
    b = vals[max(-dt, 0): nt + min(-dt, 0), max(-dn, 0): nn + min(-dn, 0)]
    for d, dx in enumerate(offset[2:]):
        if dx:
            a = np.roll(a, -dx, axis=2 + d)
    diff = a - b
    if ncomp_axes:
        mag2 = np.sum(diff**2, axis=tuple(range(-ncomp_axes, 0)))
        return float(np.sum(mag2 ** (p / 2.0)))
    return float(np.sum(np.abs(diff) ** p))


def besov_norm_integral(f, s: float, p: float, q: float, n_outer: int = 2048,
                        n_inner: int = 256, seed: int = 0,
                        shell_samples: int = 32):
    """Equivalent double-integral form of the B^(s, s/2)_{p,q} norm, 0 < s < 1.

    For q = p the double integral collapses to an offset sum, evaluated by
    stratified panels over dyadic parabolic-distance shells: thin shells are
    enumerated exactly, wide ones are sampled (the structure function per
    offset is always an exact lattice sum).  For q != p a nested Monte Carlo
    over point pairs runs instead.  Returns ``(value, standard_error)``.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("double-integral norm needs s in (0, 1)")
    vals, grid = _physical_values(f)
    lattice_shape = vals.shape[: 2 + (grid.n - 1)]
    ncomp_axes = vals.ndim - len(lattice_shape)
    cell = grid.cell_volume
    if q != p:
        return _integral_norm_pairs(vals, grid, lattice_shape, ncomp_axes,
                                    s, p, q, n_outer, n_inner, seed)
    exponent = (grid.n + 2) + p * s
    (dt_off, dn_off, dx_offs), D = _offset_distance_lattice(grid, lattice_shape)
    flatD = D.ravel()
    pos = flatD > 0
    dmin = flatD[pos].min()
    dmax = flatD.max()
    n_shells = int(np.ceil(np.log2(dmax / dmin))) + 1
    rng = np.random.default_rng(seed)
    total = 0.0
    var = 0.0
    idx_all = np.arange(flatD.size)
    for shell in range(n_shells):
        lo = dmin * 2.0**shell
        hi = dmin * 2.0 ** (shell + 1)
        members = idx_all[(flatD >= lo) & (flatD < hi) & pos]
        if len(members) == 0:
            continue
        if len(members) <= shell_samples:
            chosen, weight, exact = members, 1.0, True
        else:
            chosen = rng.choice(members, size=shell_samples, replace=False)
            weight, exact = len(members) / shell_samples, False
        contrib = []
        for flat in chosen:
            ii = np.unravel_index(flat, D.shape)
            off = (dt_off[ii[0]], dn_off[ii[1]]) + tuple(
                int(dx_offs[d][ii[2 + d]]) for d in range(grid.n - 1))
            S = _structure_function(vals, off, p, ncomp_axes)
            contrib.append(S / flatD[flat] ** exponent)
        contrib = np.asarray(contrib)
        total += weight * float(np.sum(contrib))
        if not exact and len(contrib) > 1:
            var += (len(members) ** 2) * contrib.var(ddof=1) / len(contrib)
    value_p = total * cell**2
    value = float(value_p ** (1.0 / p)) if value_p > 0 else 0.0
    stderr = float(value / p * np.sqrt(var) / total) if total > 0 else 0.0
    return value, stderr


def _integral_norm_pairs(vals, grid, lattice_shape, ncomp_axes, s, p, q,
                         n_outer, n_inner, seed):
    exponent = (grid.n + 2) * p / q + p * s
    cell = grid.cell_volume
    volume = cell * np.prod(lattice_shape)
    outer, inner = _pair_samples(grid, lattice_shape, n_outer, n_inner, seed)
    fa = vals[tuple(np.moveaxis(outer, -1, 0))]
    fb = vals[tuple(np.moveaxis(inner, -1, 0))]
    diff = fb - fa[:, None]
    if ncomp_axes:
        mag = np.sqrt(np.sum(diff**2, axis=tuple(range(-ncomp_axes, 0))))
    else:
        mag = np.abs(diff)
    D = _parabolic_distance(grid, outer[:, None, :], inner)
    ok = D > 0
    ratio = np.where(ok, mag**p / np.where(ok, D, 1.0) ** exponent, 0.0)
    inner_mean = ratio.mean(axis=1) * volume
    outer_vals = inner_mean ** (q / p)
    value = float((volume * outer_vals.mean()) ** (1.0 / q))
    varm = outer_vals.var(ddof=1) / len(outer_vals)
    mean = outer_vals.mean()
    stderr = value / q * np.sqrt(varm) / mean if (mean > 0 and value > 0) else 0.0
    return value, float(stderr)


def besov_integral_ratio(f_num, f_den, s: float, p: float, q: float,
                         n_outer: int = 2048, n_inner: int = 256, seed: int = 0):
    """Both double-integral norms on one shared pair sample, plus their ratio.

    Sharing the sample makes a pointwise modulus bound transfer to the ratio
    exactly, independent of Monte Carlo noise.
    """
    va, _ = besov_norm_integral(f_num, s, p, q, n_outer, n_inner, seed)
    vb, _ = besov_norm_integral(f_den, s, p, q, n_outer, n_inner, seed)
    return va, vb, (va / vb if vb > 0 else np.inf if va > 0 else 0.0)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceReport:
    bulk_norm: float
    trace_norm: float
    ratio: float
    certified: bool
    threshold: float


def trace_time0(f: SpaceTimeField, s: float, p: float, q: float):
    """Restriction to t = 0 with a trace/bulk norm report (threshold s > 2/p)."""
    trace = f.time_zero()
    bulk = besov_norm(f, s, p, q).value
    tnorm = spatial_besov_norm(trace, s - 2.0 / p, p, q)
    certified = s > 2.0 / p
    ratio = tnorm / bulk if bulk > 0 else 0.0
    return trace, TraceReport(bulk, tnorm, ratio, certified, threshold=2.0 / p)


def trace_boundary(f: SpaceTimeField, s: float, p: float, q: float):
    """Restriction to x_n = 0 with a trace/bulk norm report (threshold s > 1/p)."""
    trace = f.boundary_trace()
    bulk = besov_norm(f, s, p, q).value
    s_tr = s - 1.0 / p
    tnorm = besov_norm(trace, s_tr, p, q).value
    certified = s > 1.0 / p
    ratio = tnorm / bulk if bulk > 0 else 0.0
    return trace, TraceReport(bulk, tnorm, ratio, certified, threshold=1.0 / p)


# ---------------------------------------------------------------------------
# boundary-data endpoint norms (interpolation-couple surrogate)
# ---------------------------------------------------------------------------

def _tangential_besov_per_slice(grid: Grid, values: np.ndarray, s: float, p: float) -> np.ndarray:
    """B^s_{p,p}(tangential plane) norm of each time slice; values (Nt, Nx'...)."""
    axes = list(range(1, 1 + (grid.n - 1)))
    k = np.fft.fftfreq(grid.N_xp, d=grid.dx_tangential)
    mesh = []
    for ax in axes:
        shape = [1] * values.ndim
        shape[ax] = grid.N_xp
        mesh.append(k.reshape(shape))
    rho = np.sqrt(sum(m**2 for m in mesh))
    pos = rho[rho > 0]
    from .spectral import build_lp_family

    family = build_lp_family(float(np.max(rho)), float(np.min(pos)))
    coeffs = np.fft.fftn(values, axes=axes)
    meas = grid.dx_tangential ** (grid.n - 1)
    out = np.zeros((values.shape[0], len(list(family.j_range))))
    for col, j in enumerate(family.j_range):
        block = np.real(np.fft.ifftn(family.bump(j, rho) * coeffs, axes=axes))
        lp = (np.sum(np.abs(block) ** p, axis=tuple(axes)) * meas) ** (1.0 / p)
        out[:, col] = (2.0 ** (s * j)) * lp
    return np.sum(out**p, axis=1) ** (1.0 / p)


def _dt_halfpower(grid: Grid, values: np.ndarray, level: int) -> np.ndarray:
    """D_t^(level/2) with zero history: integer part by FD, half part one-sided."""
    out = values
    for _ in range(level // 2):
        out = time_derivative(grid, out)
    if level % 2:
        out = half_time_derivative_array(out, grid.dt)
    return out


def _dt_halfpower_extension(grid: Grid, values: np.ndarray, level: int) -> np.ndarray:
    """D_t^(level/2) through the canonical time extension and the one-sided
    symbol (2 pi i tau)^(level/2); tolerates a nonzero value at t = 0."""
    if level == 0:
        return values
    lam = extension_coefficients(1, "temporal").lam
    ext = _reflect_axis(values, 0, lam)
    tau = np.fft.fftfreq(2 * grid.N_t, d=grid.dt)
    tau[grid.N_t] = 0.0  # unpaired Nyquist bin treated like the mean
    mult = np.zeros(2 * grid.N_t, dtype=complex)
    nz = tau != 0.0
    mult[nz] = (2j * np.pi * tau[nz]) ** (level / 2.0)
    shape = (2 * grid.N_t,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(mult.reshape(shape) * np.fft.fft(ext, axis=0), axis=0)
    return np.real(out[: grid.N_t])


def a_norm_endpoints(gn: BoundaryField, k: int, p: float,
                     allow_history: bool = False) -> dict:
    """Endpoint-couple norms at levels k and k+1 for wall-normal data.

    Level m combines the tangential B^(m - 1/p)_{p,p} norm per slice in
    L^p(0, T) with the B^(-1/p)_{p,p} norm of D_t^(m/2).  The pair brackets
    the interpolation norm and feeds the smallness gate as a surrogate; it is
    a diagnostic, not a certified interpolation norm.

    With ``allow_history=True`` the half-derivatives run through the
    canonical time extension (spectral one-sided symbol) so data with a
    nonzero t = 0 trace, as the compatibility condition permits, is accepted.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if gn.rank != 0:
        raise ValueError("a_norm_endpoints expects scalar wall data")
    grid = gn.grid
    scale = np.max(np.abs(gn.values))
    if not allow_history and scale > 0 \
            and np.max(np.abs(gn.values[0])) > 1e-8 * scale:
        raise ValueError("wall data must have zero history (g_n(t=0) = 0)")
    halfpower = _dt_halfpower_extension if allow_history else _dt_halfpower
    out = {}
    for level in (k, k + 1):
        slice_norms = _tangential_besov_per_slice(grid, gn.values, level - 1.0 / p, p)
        part_space = float((np.sum(slice_norms**p) * grid.dt) ** (1.0 / p))
        dvals = halfpower(grid, gn.values, level)
        dnorms = _tangential_besov_per_slice(grid, dvals, -1.0 / p, p)
        part_time = float((np.sum(dnorms**p) * grid.dt) ** (1.0 / p))
        out[level] = {"space": part_space, "time": part_time,
                      "total": part_space + part_time}
    return {
        "k": k, "p": p,
        "endpoint_low": out[k]["total"],
        "endpoint_high": out[k + 1]["total"],
        "detail": out,
    }


def spatial_besov_per_slice(f: SpaceTimeField, s: float, p: float, q: float,
                            k_space: int = 1) -> np.ndarray:
    """Isotropic B^s_{p,q}(half space) norm of every time slice."""
    ff = extend_halfspace(f, k_space)  # (Nt, 2 N_xn, Nx'...)
    g = f.grid
    axes = list(range(1, 2 + (g.n - 1)))
    freqs = [np.fft.fftfreq(2 * g.N_xn, d=g.H / g.N_xn)]
    freqs += [np.fft.fftfreq(g.N_xp, d=g.dx_tangential)] * (g.n - 1)
    mesh = []
    for ax, fr in zip(axes, freqs):
        shape = [1] * ff.values.ndim
        shape[ax] = len(fr)
        mesh.append(fr.reshape(shape))
    rho = np.sqrt(sum(m**2 for m in mesh))
    pos = rho[rho > 0]
    from .spectral import build_lp_family

    family = build_lp_family(float(np.max(rho)), float(np.min(pos)))
    coeffs = np.fft.fftn(ff.values, axes=axes)
    meas = (g.H / g.N_xn) * g.dx_tangential ** (g.n - 1)
    sum_axes = tuple(axes) + tuple(range(-f.rank, 0)) if f.rank else tuple(axes)
    blocks = []
    for j in family.j_range:
        m = family.bump(j, rho)
        if f.rank:
            m = m.reshape(m.shape + (1,) * f.rank)
        block = np.real(np.fft.ifftn(m * coeffs, axes=axes))
        lp = (np.sum(np.abs(block) ** p, axis=sum_axes) * meas) ** (1.0 / p)
        blocks.append((2.0 ** (s * j)) * lp)
    B = np.stack(blocks, axis=-1)
    if np.isinf(q):
        return np.max(B, axis=-1)
    return np.sum(B**q, axis=-1) ** (1.0 / q)
