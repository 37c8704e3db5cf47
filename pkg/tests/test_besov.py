import numpy as np
import pytest

from hsflow import besov
from hsflow.besov import (
    a_norm_endpoints,
    besov_norm,
    besov_norm_integral,
    canonical_extension,
    extend_halfspace,
    extension_coefficients,
    sobolev_aniso_norm,
    spatial_besov_norm,
    trace_boundary,
    trace_time0,
)
from hsflow.families import dilate, mode_atom, packet_field, random_packets
from hsflow.fields import BoundaryField, Grid, SpaceTimeField, SpatialField
from hsflow.kernels import heat_evolve, heat_evolve_series
from hsflow.spectral import FullField


# ---------------------------------------------------------------------------
# extension operators
# ---------------------------------------------------------------------------

def test_extension_coefficients_spatial_k1_exact():
    coeffs = extension_coefficients(1, "spatial")
    assert coeffs.lam == (6.0, -8.0, 3.0)
    assert np.max(np.abs(coeffs.moment_residuals())) <= 1e-10


def test_extension_coefficients_temporal_k1_exact():
    coeffs = extension_coefficients(1, "temporal")
    assert coeffs.lam == (3.0, -2.0)
    assert np.max(np.abs(coeffs.moment_residuals())) <= 1e-10


def test_extension_coefficients_k0_single_reflection():
    assert extension_coefficients(0, "spatial").lam == (1.0,)
    assert extension_coefficients(0, "temporal").lam == (1.0,)


def test_extension_polynomial_reproduction(grid2d):
    # f = x_n^2 with k = 1 extends to exactly x_n^2 wherever the reflection
    # stays inside the box (3 x_n < H); beyond that the zero-padding policy
    # applies and reproduction is not claimed
    g = grid2d
    f = SpatialField.sample(g, 0, lambda xn, x1: xn**2 + 0 * x1)
    ext = extend_halfspace(f, k=1)
    N = g.N_xn
    h = g.H / g.N_xn
    for m in range(1, N // 3):
        x = -m * h
        got = ext.values[2 * N - m, 0]
        assert abs(got - x**2) < 1e-12 * max(x**2, 1.0)


def test_extension_interface_smoothness():
    # C^2 matching at the wall for k = 1: the gap between one-sided
    # derivatives from each side vanishes under refinement (the value
    # itself matches identically because sum(lambda) = 1)
    from hsflow.fields import fd_weights

    gaps = {0: [], 1: [], 2: []}
    for N in (24, 48):
        g = Grid(n=2, L=8.0, N_xp=8, H=8.0, N_xn=N, T=1.0, N_t=4)
        f = SpatialField.sample(g, 0, lambda xn, x1: np.exp(-xn) * (1 + 0 * x1))
        ext = extend_halfspace(f, k=1)
        asc = np.roll(ext.values[:, 0], g.N_xn)
        h = g.H / g.N_xn
        i0 = g.N_xn
        xs = h * np.arange(5)
        for order in (0, 1, 2):
            w_right = fd_weights(xs, 0.0, order)
            w_left = fd_weights(-xs[::-1], 0.0, order)
            right = np.dot(w_right, asc[i0:i0 + 5])
            left = np.dot(w_left, asc[i0 - 4:i0 + 1])
            gaps[order].append(abs(right - left))
    assert gaps[0][0] < 1e-12  # continuity is exact
    for order in (1, 2):
        assert gaps[order][1] < gaps[order][0] / 3.0  # refinement shrinks the gap


def test_extension_reach_truncation_is_zero(grid2d):
    # reflections past the truncation height read zeros
    g = grid2d
    f = SpatialField.sample(g, 0, lambda xn, x1: np.ones_like(xn) + 0 * x1)
    ext = extend_halfspace(f, k=1)
    # deepest row: all three reflections 1*(N-1), 2*(N-1), 3*(N-1) >= N except j=1
    got = ext.values[g.N_xn + 1, 0]  # row index 2N - (N-1) = N + 1
    assert got == 6.0  # only the lambda_1 = 6 term survives


# ---------------------------------------------------------------------------
# Besov profiles
# ---------------------------------------------------------------------------

def test_atom_norm_is_one_for_every_s(grid2d):
    atom = mode_atom(grid2d, j=0)
    scale = atom.lp_norm(8.0)
    atom = atom.with_values(atom.values / scale)
    for s in (-0.5, 0.0, 0.7, 1.3):
        prof = besov_norm(atom, s, 8.0, 8.0)
        assert abs(prof.value - 1.0) < 1e-10
        live = [b for b in prof.block_values if b > 1e-12]
        assert len(live) == 1


def test_parabolic_scaling_law(grid2d_fine):
    g = grid2d_fine
    packets = random_packets(g, 3, seed=42, lam_max=2.0,
                             width_frac=(0.14, 0.18), t_width_frac=(0.12, 0.15))
    s, p, q = 0.8, 8.0, 8.0
    n0 = besov_norm(packet_field(g, packets), s, p, q).value
    n1 = besov_norm(dilate(g, packets, 2.0), s, p, q).value
    expect = 2.0 ** (s - (g.n + 2) / p)
    assert abs(n1 / n0 - expect) / expect < 0.05


def test_q_monotonicity(grid2d, rng):
    f = packet_field(grid2d, random_packets(grid2d, 3, seed=5))
    vals = [besov_norm(f, 0.8, 8.0, q).value for q in (1.0, 2.0, 8.0, np.inf)]
    assert all(vals[i] >= vals[i + 1] - 1e-12 for i in range(len(vals) - 1))


def test_truncation_flag():
    # content carried by an edge block is flagged as truncated, interior
    # content is not
    from hsflow.besov import assemble_profile
    from hsflow.spectral import build_lp_family

    fam = build_lp_family(rho_max=16.0, rho_min=0.25)
    raw = np.zeros(fam.j_max - fam.j_min + 1)
    raw[-1] = 1.0
    assert assemble_profile(fam, raw, 0.5, 8.0, 8.0).truncated
    raw2 = np.zeros_like(raw)
    raw2[len(raw2) // 2] = 1.0
    assert not assemble_profile(fam, raw2, 0.5, 8.0, 8.0).truncated


# ---------------------------------------------------------------------------
# anisotropic Sobolev norms
# ---------------------------------------------------------------------------

def test_sobolev_k0_is_lp(grid2d, rng):
    f = packet_field(grid2d, random_packets(grid2d, 2, seed=11))
    got = sobolev_aniso_norm(f, 0, 8.0)
    expect = canonical_extension(f).lp_norm(8.0)
    assert abs(got - expect) < 1e-12 * expect


def test_sobolev_k1_structure(grid2d):
    # |f|_{W^{1,1/2}_p} = |D_t^(1/2) f|_p + sum_d |d_d f|_p
    f = packet_field(grid2d, random_packets(grid2d, 2, seed=12))
    total, terms = sobolev_aniso_norm(f, 1, 4.0, return_terms=True)
    assert len(terms) == 3  # two spatial directions + one half-derivative
    assert abs(total - sum(terms.values())) < 1e-12 * total
    keys = set(terms)
    assert ((0, 0), 1) in keys  # pure half time derivative
    assert ((1, 0), 0) in keys and ((0, 1), 0) in keys


def test_sobolev_k2_single_mode_symbol_value(grid2d):
    # single space-time mode: every mixed-derivative term has L^p norm
    # |symbol| * |f|_p (phase shifts do not change even-p lattice norms)
    g = grid2d
    kx, mt = 2, 3
    x1 = g.x_tangential.reshape(1, 1, -1)
    tt = (np.arange(2 * g.N_t) * g.dt).reshape(-1, 1, 1)
    vals = np.cos(2 * np.pi * (kx * x1 / g.L + mt * tt / (2 * g.T)))
    vals = np.broadcast_to(vals, (2 * g.N_t, 2 * g.N_xn, g.N_xp)).copy()
    f = FullField(g, vals, rank=0, has_time=True, has_normal=True,
                  time_extended=True, space_extended=True)
    p = 4.0
    base = f.lp_norm(p)
    xi1 = kx / g.L
    tau = mt / (2.0 * g.T)
    sym = {
        ((0, 2), 0): (2 * np.pi * xi1) ** 2,
        ((0, 0), 2): 2 * np.pi * tau,
        ((0, 1), 1): (2 * np.pi * xi1) * np.sqrt(2 * np.pi * tau),
        ((2, 0), 0): 0.0,   # no normal-direction content
        ((1, 1), 0): 0.0,
        ((1, 0), 1): 0.0,
    }
    total, terms = sobolev_aniso_norm(f, 2, p, return_terms=True)
    for key, mag in sym.items():
        assert abs(terms[key] - mag * base) < 1e-8 * max(mag * base, 1.0)
    expect = sum(m * base for m in sym.values())
    assert abs(total - expect) < 1e-8 * expect


# ---------------------------------------------------------------------------
# double-integral norm
# ---------------------------------------------------------------------------

def test_integral_norm_zero(grid2d):
    val, err = besov_norm_integral(SpaceTimeField.zeros(grid2d, 0), 0.5, 8.0, 8.0,
                                   n_outer=256, n_inner=64)
    assert val == 0.0


def test_integral_vs_block_equivalence_stable():
    # dual-method ratio: stable within +-20% under one refinement and one
    # box rescaling (the ratio is scale-free; the same relative field is
    # sampled on each lattice)
    s, p, q = 0.6, 8.0, 8.0
    grids = {
        "base": Grid(n=2, L=8.0, N_xp=32, H=8.0, N_xn=24, T=1.0, N_t=32),
        "refined": Grid(n=2, L=8.0, N_xp=64, H=8.0, N_xn=48, T=1.0, N_t=64),
        "rescaled": Grid(n=2, L=16.0, N_xp=32, H=16.0, N_xn=24, T=4.0, N_t=32),
    }
    ratios = {}
    for name, g in grids.items():
        f = packet_field(g, random_packets(g, 3, seed=3))
        mc, err = besov_norm_integral(f, s, p, q, n_outer=4096, n_inner=256, seed=8)
        lp = besov_norm(f, s, p, q).value
        ratios[name] = mc / lp
        assert err < 0.15 * mc
    base = ratios["base"]
    assert abs(ratios["refined"] / base - 1.0) < 0.20
    assert abs(ratios["rescaled"] / base - 1.0) < 0.20


def test_integral_norm_decreases_under_mollification(grid2d):
    g = grid2d
    # sharp-edged data: indicator-like profile smoothed by the heat flow
    def fn(t, xn, x1):
        return np.where((xn > 2.0) & (xn < 5.0), 1.0, 0.0) \
            * np.where((t > 0.25) & (t < 0.7), 1.0, 0.0)

    rough = SpaceTimeField.sample(g, 0, fn)
    ext = canonical_extension(rough)
    smooth_vals = heat_evolve(ext, 0.05).restrict_physical()
    smooth = SpaceTimeField(g, 0, smooth_vals)
    v_rough, _ = besov_norm_integral(rough, 0.5, 8.0, 8.0, seed=4)
    v_smooth, _ = besov_norm_integral(smooth, 0.5, 8.0, 8.0, seed=4)
    assert v_smooth < v_rough


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def test_trace_time0_time_independent(grid2d):
    g = grid2d
    f = SpaceTimeField.sample(
        g, 0, lambda t, xn, x1: np.sin(2 * np.pi * x1 / g.L) * np.exp(-xn) + 0 * t)
    trace, report = trace_time0(f, 1.2, 8.0, 8.0)
    assert np.array_equal(trace.values, f.values[0])
    assert report.certified


def test_trace_time0_heat_family(grid2d):
    from hsflow.families import random_spatial

    g = grid2d
    u0 = random_spatial(g, seed=17)
    F = heat_evolve_series(extend_halfspace(u0, 1), g)
    trace, report = trace_time0(F, 1.2, 8.0, 8.0)
    gap = np.max(np.abs(trace.values - u0.values)) / np.max(np.abs(u0.values))
    assert gap < 1e-10  # semigroup at t = 0 is the identity on the lattice
    assert report.ratio > 0


def test_trace_certification_refused_below_threshold(grid2d):
    f = packet_field(grid2d, random_packets(grid2d, 2, seed=23))
    _, report = trace_time0(f, 0.2, 8.0, 8.0)   # s < 2/p
    assert not report.certified
    _, report2 = trace_boundary(f, 0.1, 8.0, 8.0)  # s < 1/p
    assert not report2.certified


def test_trace_constant_stability(grid2d):
    from hsflow.families import random_spatial

    g = grid2d
    ratios = []
    for seed in range(4):
        u0 = random_spatial(g, seed=31 + seed)
        F = heat_evolve_series(extend_halfspace(u0, 1), g)
        _, rep = trace_time0(F, 1.2, 8.0, 8.0)
        ratios.append(rep.ratio)
    spread = max(ratios) / min(ratios)
    assert spread < 3.0  # sampled constants of one family stay comparable


# ---------------------------------------------------------------------------
# wall-data endpoint norms
# ---------------------------------------------------------------------------

def test_a_norm_zero(grid2d):
    gn = BoundaryField.zeros(grid2d, 0)
    out = a_norm_endpoints(gn, 1, 8.0)
    assert out["endpoint_low"] == 0.0 and out["endpoint_high"] == 0.0


def test_a_norm_single_mode_closed_form(grid2d):
    # g_n = cos(2 pi x1 / L) * t on L = 8: the tangential radius is exactly
    # 2^-3, so per-slice norms live in one block; D_t^(1/2) t and D_t t have
    # closed forms (product integration is exact on linear data)
    g = grid2d
    p = 8.0
    tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
    gn = BoundaryField(g, 0, values=np.cos(2 * np.pi * xx / g.L) * tt)
    out = a_norm_endpoints(gn, 1, p)

    cos_lp = (np.sum(np.abs(np.cos(2 * np.pi * g.x_tangential / g.L)) ** p)
              * g.dx_tangential) ** (1 / p)
    t = g.t_nodes

    def lp_t(vals):
        return (np.sum(np.abs(vals) ** p) * g.dt) ** (1 / p)

    j = -3
    for level, rec in out["detail"].items():
        expect_space = 2.0 ** ((level - 1 / p) * j) * cos_lp * lp_t(t)
        assert abs(rec["space"] - expect_space) < 1e-10 * expect_space
    # level-1 time part: backward-differenced exact fractional integral of t
    I = (4.0 / (3.0 * np.sqrt(np.pi))) * t**1.5
    D = np.zeros_like(t)
    D[1:] = (I[1:] - I[:-1]) / g.dt
    expect_t1 = 2.0 ** ((-1 / p) * j) * cos_lp * lp_t(D)
    assert abs(out["detail"][1]["time"] - expect_t1) < 1e-10 * expect_t1
    # level-2 time part: D_t t = 1 exactly
    expect_t2 = 2.0 ** ((-1 / p) * j) * cos_lp * lp_t(np.ones_like(t))
    assert abs(out["detail"][2]["time"] - expect_t2) < 1e-10 * expect_t2


def test_a_norm_scaling_exponents():
    # endpoint level m scales like lam^(m - (n+2)/p) under parabolic dilation
    g = Grid(n=2, L=8.0, N_xp=64, H=8.0, N_xn=8, T=1.0, N_t=256)
    p = 8.0

    def boundary_packet(lam):
        tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
        tw, t0 = 0.08, 0.45
        vals = np.cos(2 * np.pi * 2 * lam * xx / g.L) \
            * np.exp(-((xx * lam - 3.2) / (1.2)) ** 2) \
            * np.exp(-((tt * lam**2 - t0) / tw) ** 2)
        return BoundaryField(g, 0, values=vals)

    outs = {lam: a_norm_endpoints(boundary_packet(lam), 1, p, allow_history=True)
            for lam in (1.0, 2.0)}
    for level in (1, 2):
        got = outs[2.0]["detail"][level]["total"] / outs[1.0]["detail"][level]["total"]
        expect = 2.0 ** (level - (g.n + 2) / p)
        assert abs(np.log2(got) - np.log2(expect)) < 0.35


def test_a_norm_zero_history_enforced(grid2d):
    vals = np.ones(grid2d.boundary_shape(0))
    gn = BoundaryField(grid2d, 0, values=vals)
    with pytest.raises(ValueError):
        a_norm_endpoints(gn, 1, 8.0)
    out = a_norm_endpoints(gn, 1, 8.0, allow_history=True)
    assert np.isfinite(out["endpoint_low"])


# ---------------------------------------------------------------------------
# extension boundedness
# ---------------------------------------------------------------------------

def test_extension_boundedness_stable_under_refinement():
    # |E f| over the full lattice vs discrete half-domain Sobolev norms,
    # k in {0, 1, 2}: the ratio is a fitted constant, stable under one
    # refinement within +-20%
    from hsflow.fields import normal_derivative, tangential_derivative, time_derivative
    from hsflow.spectral import half_time_derivative_array

    def half_domain_norm(f, k, p):
        g = f.grid
        meas = g.cell_volume

        def lp(v):
            return (np.sum(np.abs(v) ** p) * meas) ** (1 / p)

        if k == 0:
            return lp(f.values)
        if k == 1:
            return (lp(half_time_derivative_array(f.values, g.dt))
                    + lp(tangential_derivative(g, f.values, 0))
                    + lp(normal_derivative(g, f.values)))
        dt_part = lp(time_derivative(g, f.values))
        dxx = lp(tangential_derivative(g, tangential_derivative(g, f.values, 0), 0))
        dnn = lp(normal_derivative(g, normal_derivative(g, f.values)))
        dxn = lp(normal_derivative(g, tangential_derivative(g, f.values, 0)))
        dhalf = lp(half_time_derivative_array(
            normal_derivative(g, f.values) + tangential_derivative(g, f.values, 0), g.dt))
        return dt_part + dxx + dnn + dxn + dhalf

    p = 4.0
    for k in (0, 1, 2):
        ratios = []
        for scale in (1, 2):
            g = Grid(n=2, L=8.0, N_xp=16 * scale, H=8.0, N_xn=16 * scale,
                     T=1.0, N_t=16 * scale)
            f = packet_field(g, random_packets(g, 2, seed=77))
            full = sobolev_aniso_norm(f, k, p)
            half = half_domain_norm(f, k, p)
            ratios.append(full / half)
        assert abs(ratios[1] / ratios[0] - 1.0) < 0.20, f"k={k}: {ratios}"
