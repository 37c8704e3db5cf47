import numpy as np
import pytest

from hsflow.besov import extend_halfspace, extend_time
from hsflow.fields import BoundaryField, Grid, SpaceTimeField
from hsflow.spectral import (
    FullField,
    build_lp_family,
    family_for,
    half_time_derivative,
    half_time_derivative_array,
    helmholtz_project,
    lp_block,
    lp_partition_values,
    riesz_transform,
)


def _scalar_field(grid, fn):
    return SpaceTimeField.sample(grid, 0, fn)


# ---------------------------------------------------------------------------
# Riesz transforms
# ---------------------------------------------------------------------------

def test_riesz_single_mode_sign(grid2d):
    g = grid2d
    f = _scalar_field(g, lambda t, xn, x1: np.cos(2 * np.pi * x1 / g.L) + 0 * xn)
    got = riesz_transform(f, 0, dims="tangential")
    mesh = g.meshgrid()
    expect = np.sin(2 * np.pi * mesh[2] / g.L)
    assert np.max(np.abs(got.values - expect)) < 1e-12


def _band_limited(grid, rng, rank=0):
    """Random field with zero tangential mean and no Nyquist content: the
    exact odd-symbol identities live on resolvable (paired) frequencies."""
    vals = rng.standard_normal(grid.field_shape(rank))
    coeffs = np.fft.fft(vals, axis=2)
    coeffs[:, :, 0] = 0.0
    coeffs[:, :, grid.N_xp // 2] = 0.0
    return SpaceTimeField(grid, rank, np.real(np.fft.ifft(coeffs, axis=2)))


def test_riesz_sum_of_squares_is_minus_identity(grid2d, rng):
    f = _band_limited(grid2d, rng)
    rr = riesz_transform(riesz_transform(f, 0), 0)
    rel = np.max(np.abs(rr.values + f.values)) / np.max(np.abs(f.values))
    assert rel < 1e-10


def test_riesz_skewness(grid2d, rng):
    g = grid2d
    f = SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0)))
    h = SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0)))
    lhs = np.sum(riesz_transform(f, 0).values * h.values)
    rhs = -np.sum(f.values * riesz_transform(h, 0).values)
    assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)


def test_riesz_against_direct_dft_loop():
    # quadratic-cost DFT oracle on a tiny lattice
    g = Grid(n=2, L=4.0, N_xp=8, H=4.0, N_xn=4, T=1.0, N_t=4)
    rng = np.random.default_rng(7)
    f = SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0)))
    got = riesz_transform(f, 0).values
    N = g.N_xp
    x = np.arange(N)
    expect = np.zeros_like(f.values)
    for k in range(N):
        xi = (k if k <= N // 2 else k - N) / g.L
        if k == N // 2 or xi == 0.0:
            sym = 0.0 if xi == 0.0 else -1j * np.sign(xi)
        else:
            sym = -1j * np.sign(xi)
        coeff = np.tensordot(f.values, np.exp(-2j * np.pi * k * x / N), axes=([2], [0])) / N
        expect = expect + np.real(sym * coeff[..., None] * np.exp(2j * np.pi * k * x / N))
    assert np.max(np.abs(got - expect)) < 1e-12


def test_riesz_errors(grid2d):
    with pytest.raises(ValueError):
        riesz_transform(SpaceTimeField.zeros(grid2d, 0), 3, dims="tangential")
    with pytest.raises(ValueError):
        riesz_transform(SpaceTimeField.zeros(grid2d, 1), 0, dims="tangential")


# ---------------------------------------------------------------------------
# Helmholtz projection
# ---------------------------------------------------------------------------

def _extended_vector(grid, rng):
    u = SpaceTimeField(grid, 1, rng.standard_normal(grid.field_shape(1)))
    return extend_halfspace(u, k=1)


def test_helmholtz_annihilates_gradients(grid2d, rng):
    g = grid2d
    q = extend_halfspace(_band_limited(g, rng), 1)
    # drop Nyquist/zero bins on every lattice axis so the synthetic gradient
    # is a true spectral gradient of a real field
    coeffs = q.fft()
    for ax in q.lattice_axes():
        sl = [slice(None)] * coeffs.ndim
        sl[ax] = coeffs.shape[ax] // 2
        coeffs[tuple(sl)] = 0.0
    xi = q.xi_mesh()
    comp = [xi[1], xi[0]]  # tangential, normal ordering of components
    grad = np.stack([np.real(np.fft.ifftn(2j * np.pi * comp[i] * coeffs,
                                          axes=q.lattice_axes())) for i in range(2)],
                    axis=-1)
    gf = q.with_values(grad, rank=1)
    proj = helmholtz_project(gf)
    assert np.max(np.abs(proj.values)) < 1e-10 * max(np.max(np.abs(grad)), 1.0)


def test_helmholtz_divfree_passthrough_and_idempotence(grid2d, rng):
    ff = extend_halfspace(_band_limited(grid2d, rng, rank=1), 1)
    p1 = helmholtz_project(ff)
    p2 = helmholtz_project(p1)
    scale = np.max(np.abs(p1.values))
    assert np.max(np.abs(p2.values - p1.values)) < 1e-10 * scale
    # spectral divergence of the projection vanishes (odd-symbol convention:
    # the unpaired Nyquist bin counts as zero frequency)
    coeffs = p1.fft()
    xi = p1.xi_mesh(zero_nyquist=True)
    comp = [xi[1], xi[0]]
    div = sum(2j * np.pi * comp[i] * coeffs[..., i] for i in range(2))
    assert np.max(np.abs(div)) < 1e-10 * np.max(np.abs(coeffs))


def test_helmholtz_needs_extension(grid2d, rng):
    u = FullField(grid2d, rng.standard_normal(grid2d.field_shape(1)), rank=1,
                  has_time=True, has_normal=True, space_extended=False)
    with pytest.raises(ValueError):
        helmholtz_project(u)


# ---------------------------------------------------------------------------
# half-order time derivative
# ---------------------------------------------------------------------------

def test_half_derivative_sqrt_t(grid2d):
    # f = sqrt(t): D^(1/2) f = sqrt(pi)/2, from the Beta integral
    # int_0^t s^(1/2) (t-s)^(-1/2) ds = pi t / 2
    g = grid2d
    f = SpaceTimeField.sample(g, 0, lambda t, xn, x1: np.sqrt(t) + 0 * xn + 0 * x1)
    got = half_time_derivative(f)
    interior = got.values[4:, 0, 0]
    assert np.max(np.abs(interior - np.sqrt(np.pi) / 2.0)) < 0.08


def test_half_derivative_step(grid2d):
    # step sampled with f(0) = 0 then ones: D^(1/2) -> 1/sqrt(pi t)
    g = grid2d
    vals = np.ones(g.field_shape(0))
    vals[0] = 0.0
    got = half_time_derivative(SpaceTimeField(g, 0, vals))
    t = g.t_nodes[6:]
    expect = 1.0 / np.sqrt(np.pi * t)
    rel = np.abs(got.values[6:, 0, 0] - expect) / expect
    assert np.max(rel) < 0.25


def test_half_derivative_zero_and_rejection(grid2d):
    assert half_time_derivative(SpaceTimeField.zeros(grid2d, 0)).linf() == 0.0
    bad = np.ones(grid2d.field_shape(0))
    with pytest.raises(ValueError):
        half_time_derivative(SpaceTimeField(grid2d, 0, bad))


def test_half_derivative_semigroup_order():
    errs = []
    for nt in (128, 256, 512):
        t = np.arange(nt) / nt
        dt = 1.0 / nt
        f = np.sin(np.pi * t) ** 3
        df = 3 * np.pi * np.sin(np.pi * t) ** 2 * np.cos(np.pi * t)
        dd = half_time_derivative_array(half_time_derivative_array(f, dt), dt)
        errs.append(np.max(np.abs(dd[2:] - df[2:])))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) >= 0.9


def test_half_derivative_linear_exact(grid2d):
    # product integration is exact on piecewise-linear data: the fractional
    # integral of f = t is (4 / 3 sqrt(pi)) t^(3/2) exactly at the nodes
    g = grid2d
    from hsflow.spectral import fractional_halfintegral

    t = g.t_nodes
    I = fractional_halfintegral(t.reshape(-1, 1), g.dt)[:, 0]
    expect = (4.0 / (3.0 * np.sqrt(np.pi))) * t**1.5
    assert np.max(np.abs(I - expect)) < 1e-12


# ---------------------------------------------------------------------------
# dyadic family
# ---------------------------------------------------------------------------

def test_lp_partition_of_unity_and_positivity(grid2d, rng):
    g = grid2d
    f = extend_time(extend_halfspace(
        SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0))), 1), 1)
    fam = family_for(f)
    rho = f.rho_parabolic()
    covered = (rho >= 2.0 ** fam.j_min) & (rho <= 2.0 ** fam.j_max)
    s = lp_partition_values(fam, rho)
    assert np.max(np.abs(s[covered] - 1.0)) < 1e-12
    r = np.linspace(2.0 ** fam.j_min, 2.0 ** fam.j_max, 2000)
    for j in fam.j_range:
        assert np.min(fam.bump(j, r)) >= 0.0


def test_lp_block_single_mode_locality(grid2d):
    # a full-lattice mode with dyadic radius exactly 2^0 = 1 lives in block
    # j = 0 alone (the telescoping bump is 1 exactly on the dyadic circle)
    from hsflow.families import mode_atom

    ff = mode_atom(grid2d, j=0)
    fam = family_for(ff)
    norms = {}
    for j in fam.j_range:
        norms[j] = lp_block(ff, j, fam).lp_norm(2)
    peak = norms[0]
    for j, v in norms.items():
        if j != 0:
            assert v < 1e-10 * peak
    with pytest.raises(ValueError):
        lp_block(ff, fam.j_max + 1, fam)


def test_lp_reconstruction(grid2d, rng):
    g = grid2d
    f = extend_time(extend_halfspace(
        SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0))), 1), 1)
    fam = family_for(f)
    total = np.zeros_like(f.values)
    for j in fam.j_range:
        total += lp_block(f, j, fam).values
    # reconstruction captures everything except the mean mode
    mean = np.mean(f.values)
    assert np.max(np.abs(total - (f.values - mean))) < 1e-9 * np.max(np.abs(f.values))


def test_lp_block_energy_vs_sharp_annulus_oracle(grid2d, rng):
    # smooth block energies are equivalent to sharp-cutoff annulus energies:
    # phi_j^2 <= (indicator of the support annulus), and the three blocks
    # j-1, j, j+1 cover the annulus of block j with total value 1
    g = grid2d
    f = extend_time(extend_halfspace(
        SpaceTimeField(g, 0, rng.standard_normal(g.field_shape(0))), 1), 1)
    fam = family_for(f)
    rho = f.rho_parabolic()
    coeffs = f.fft()
    j = 0
    mask = (rho > 2.0 ** (j - 1)) & (rho < 2.0 ** (j + 1))
    sharp = np.sqrt(np.sum(np.abs(coeffs) ** 2 * mask))
    smooth = np.sqrt(np.sum(np.abs(fam.bump(j, rho) * coeffs) ** 2))
    near = 0.0
    for jj in (j - 1, j, j + 1):
        near += np.sum(np.abs(fam.bump(jj, rho) * coeffs) ** 2 * mask)
    assert smooth <= sharp * (1.0 + 1e-12)
    assert sharp <= np.sqrt(3.0 * near) * (1.0 + 1e-12)
