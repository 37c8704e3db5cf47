import numpy as np
import pytest

from hsflow.fields import (
    BoundaryField,
    Grid,
    SpaceTimeField,
    SpatialField,
    divergence,
)
from hsflow.kernels import heat_evolve_series
from hsflow.manufactured import exact_field, manufactured_grid, manufactured_problem
from hsflow.stokes import (
    StokesProblem,
    extend_initial_divfree,
    solve_stokes,
    solve_w3,
    solve_w4,
    weak_residual,
    weak_test_family,
)


def _mgrid(nx=32, nn=32, nt=32, H=12.0):
    return manufactured_grid(N_xp=nx, N_xn=nn, N_t=nt, H=H)


def _stream_data(grid):
    """Initial data built from a stream function, discretely divergence-free."""
    from hsflow.stokes import stream_initial_data

    g = grid
    psi = np.sin(2 * np.pi * g.x_tangential / g.L)[None, :] \
        * np.exp(-g.x_normal)[:, None]
    return stream_initial_data(g, psi)


# ---------------------------------------------------------------------------
# divergence-free extension
# ---------------------------------------------------------------------------

def test_extension_stream_field_divfree_to_1e10():
    g = _mgrid()
    u0 = _stream_data(g)
    ext, info = extend_initial_divfree(u0)
    # mixed discrete divergence on the extended lattice (spectral tangential,
    # banded FD normal in ascending order)
    from hsflow.fields import derivative_matrix

    N = g.N_xn
    asc = np.roll(ext.values, N, axis=0)
    D = derivative_matrix(g.dx_normal * (np.arange(2 * N) - N))
    dn = np.einsum("ij,j...->i...", D, asc[..., 1])
    k = np.fft.fftfreq(g.N_xp, d=g.dx_tangential)
    dt_ = np.real(np.fft.ifft(2j * np.pi * k[None, :]
                              * np.fft.fft(asc[..., 0], axis=1), axis=1))
    div = dt_ + dn
    assert np.max(np.abs(div)) < 1e-10 * max(np.max(np.abs(ext.values)), 1.0)
    assert info["method"] == "stream"
    assert info["restriction_gap"] == 0.0


def test_extension_zero_and_tangential_shear():
    g = _mgrid(nn=24)
    z, info = extend_initial_divfree(SpatialField.zeros(g, 1))
    assert np.max(np.abs(z.values)) == 0.0

    def shear(xn, x1):
        return np.exp(-xn) * (1.0 + 0.0 * x1), 0.0 * xn

    u0 = SpatialField.sample(g, 1, shear)
    ext, info = extend_initial_divfree(u0)
    assert info["method"] == "mirror"
    # x1-independent tangential field: divergence identically zero
    from hsflow.fields import derivative_matrix

    N = g.N_xn
    asc = np.roll(ext.values, N, axis=0)
    D = derivative_matrix(g.dx_normal * (np.arange(2 * N) - N))
    dn = np.einsum("ij,j...->i...", D, asc[..., 1])
    assert np.max(np.abs(dn)) == 0.0


def test_extension_restriction_is_exact():
    g = _mgrid()
    prob = manufactured_problem(g)
    ext, info = extend_initial_divfree(prob.u0)
    assert np.max(np.abs(ext.values[: g.N_xn] - prob.u0.values)) < 1e-14


# ---------------------------------------------------------------------------
# parts
# ---------------------------------------------------------------------------

def test_w3_zero_when_no_normal_mismatch():
    g = _mgrid(nn=24)
    zero_w = SpaceTimeField.zeros(g, 1)
    gb = BoundaryField.zeros(g, 1)
    w3, p3, info = solve_w3(gb, zero_w, zero_w)
    assert w3.linf() == 0.0 and p3.linf() == 0.0


def test_w3_single_mode_closed_form():
    g = _mgrid(nn=24)
    tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
    h = np.sin(np.pi * tt / g.T) ** 2 * np.cos(xx)
    gb = BoundaryField(g, 1, tangential=np.zeros(g.boundary_shape(0) + (1,)),
                       normal=h)
    zero_w = SpaceTimeField.zeros(g, 1)
    w3, p3, info = solve_w3(gb, zero_w, zero_w)
    mesh = g.meshgrid()
    a = 1.0  # mode k=1 on L = 2 pi
    decay = np.exp(-a * mesh[1])
    expect_n = np.sin(np.pi * mesh[0] / g.T) ** 2 * np.cos(mesh[2]) * decay
    expect_t = np.sin(np.pi * mesh[0] / g.T) ** 2 * np.sin(mesh[2]) * decay
    assert np.max(np.abs(w3.values[..., 1] - expect_n)) < 1e-12
    assert np.max(np.abs(w3.values[..., 0] - expect_t)) < 1e-12
    # boundary row is exactly (R' h, h)
    assert np.max(np.abs(w3.values[:, 0, :, 1] - h)) < 1e-12


def test_w3_rejects_initial_mismatch():
    g = _mgrid(nn=24)
    tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
    gb = BoundaryField(g, 1, tangential=np.zeros(g.boundary_shape(0) + (1,)),
                       normal=np.cos(xx) * (1.0 + 0 * tt))
    zero_w = SpaceTimeField.zeros(g, 1)
    with pytest.raises(ValueError):
        solve_w3(gb, zero_w, zero_w)


def test_w4_zero_and_validation():
    g = _mgrid(nn=24)
    w4, info = solve_w4(BoundaryField.zeros(g, 1))
    assert w4.linf() == 0.0
    tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
    bad = BoundaryField(g, 1, tangential=np.zeros(g.boundary_shape(0) + (1,)),
                        normal=np.sin(np.pi * tt / g.T) * np.cos(xx))
    with pytest.raises(ValueError):
        solve_w4(bad)


def test_w4_wall_row_and_refinement_recovery():
    resid = []
    for nn in (16, 32, 64):
        g = _mgrid(nn=nn, nt=48)
        tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
        Gt = (np.sin(np.pi * tt / g.T) ** 2 * np.cos(xx))[..., None]
        G = BoundaryField(g, 1, tangential=Gt, normal=np.zeros_like(tt))
        w4, info = solve_w4(G)
        # wall row carries G exactly; first interior node approaches it
        assert np.max(np.abs(w4.values[:, 0, :, 0] - Gt[..., 0])) < 1e-12
        assert np.max(np.abs(w4.values[:, 0, :, 1])) < 1e-12
        assert info["representation_div"] < 1e-12
        it = g.N_t - 1
        resid.append(abs(w4.values[it, 1, 0, 0] - Gt[it, 0, 0]))
    assert resid[1] < resid[0] and resid[2] < resid[1]


def test_w4_divergence_decays_under_refinement():
    divs = []
    for nn in (24, 48):
        g = _mgrid(nn=nn, nt=32)
        tt, xx = np.meshgrid(g.t_nodes, g.x_tangential, indexing="ij")
        Gt = (np.sin(np.pi * tt / g.T) ** 2 * np.cos(xx))[..., None]
        G = BoundaryField(g, 1, tangential=Gt, normal=np.zeros_like(tt))
        w4, _ = solve_w4(G)
        divs.append(divergence(w4).linf() / w4.linf())
    assert divs[1] < divs[0]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_zero_data_zero_solution():
    g = _mgrid(nn=24)
    prob = StokesProblem(SpatialField.zeros(g, 1), BoundaryField.zeros(g, 1), None)
    sol = solve_stokes(prob, certify=False)
    assert sol.w.linf() == 0.0


def test_manufactured_recovery():
    g = _mgrid(nn=48, nt=48)
    sol = solve_stokes(manufactured_problem(g), certify=False)
    ex = exact_field(g)
    err = (sol.w - ex).linf() / ex.linf()
    assert err < 5e-3
    led = sol.certificates["ledgers"]
    assert led["wall_trace_residual"] < 1e-12
    assert led["initial_w2_vs_u0"] < 1e-12
    for part in ("w1", "w3", "w4"):
        assert led[f"representation_div_{part}"] < 1e-10


def test_heat_flow_data_collapses_to_w2():
    # g = trace of the heat evolution of u0, F = 0: w3 and w4 vanish
    g = _mgrid(nn=32)
    u0 = _stream_data(g)
    ext, _ = extend_initial_divfree(u0)
    w2 = heat_evolve_series(ext, g)
    trace = w2.boundary_trace()
    prob = StokesProblem(u0, trace, None)
    sol = solve_stokes(prob, certify=False)
    scale = sol.w.linf()
    assert sol.w3.linf() < 1e-10 * scale
    assert sol.w4.linf() < 1e-10 * scale


def test_superposition_linearity():
    g = _mgrid(nn=24, nt=24)
    p1 = manufactured_problem(g, amplitude=1.0)
    p2_u0 = _stream_data(g)
    ext, _ = extend_initial_divfree(p2_u0)
    w2 = heat_evolve_series(ext, g)
    p2 = StokesProblem(p2_u0, w2.boundary_trace(), None)
    a, b = 0.7, -1.3
    combo = StokesProblem(
        SpatialField(g, 1, a * p1.u0.values + b * p2.u0.values),
        BoundaryField(g, 1,
                      tangential=a * p1.g.tangential + b * p2.g.tangential,
                      normal=a * p1.g.normal + b * p2.g.normal),
        None,
    )
    s1 = solve_stokes(p1, certify=False)
    s2 = solve_stokes(p2, certify=False)
    sc = solve_stokes(combo, certify=False)
    expect = a * s1.w.values + b * s2.w.values
    scale = np.max(np.abs(expect))
    assert np.max(np.abs(sc.w.values - expect)) < 1e-10 * scale


def test_compatibility_validation():
    g = _mgrid(nn=24)
    prob = manufactured_problem(g)
    bad_g = BoundaryField(g, 1, tangential=prob.g.tangential + 0.1,
                          normal=prob.g.normal)
    with pytest.raises(ValueError):
        StokesProblem(prob.u0, bad_g, None).validate()


def test_norm_certificates_present():
    g = _mgrid(nn=24, nt=24)
    sol = solve_stokes(manufactured_problem(g))
    certs = sol.certificates["norms"]
    for part in ("w1", "w2", "w3", "w4", "w_total"):
        assert part in certs
    assert certs["empirical_constant"] > 0
    assert certs["data"]["gn_endpoint_high"] > 0


# ---------------------------------------------------------------------------
# weak formulation
# ---------------------------------------------------------------------------

def test_weak_residual_exact_solution(grid2d):
    g = _mgrid(nn=32, nt=48, H=16.0)
    prob = manufactured_problem(g)
    res = weak_residual(exact_field(g), prob)
    assert res["max_relative_residual"] <= 1e-6
    assert res["divergence_pairing"] <= 1e-8
    assert len(res["cases"]) >= 12


def test_weak_residual_zero(grid2d):
    g = _mgrid(nn=24, nt=24)
    prob = StokesProblem(SpatialField.zeros(g, 1), BoundaryField.zeros(g, 1), None)
    res = weak_residual(SpaceTimeField.zeros(g, 1), prob)
    assert res["max_relative_residual"] == 0.0


def test_weak_residual_perturbation_sensitivity():
    g = _mgrid(nn=24, nt=24)
    prob = manufactured_problem(g)
    ex = exact_field(g)
    rng = np.random.default_rng(8)
    suite = weak_test_family(g, count=4)
    base = weak_residual(ex, prob, suite=suite)["max_relative_residual"]
    noise = SpaceTimeField(g, 1, 0.01 * ex.linf() * rng.standard_normal(ex.values.shape))
    pert = weak_residual(ex + noise, prob, suite=suite)["max_relative_residual"]
    pert2 = weak_residual(ex + 2.0 * noise, prob, suite=suite)["max_relative_residual"]
    assert pert > 100 * base  # noise dominates the clean quadrature
    assert abs(pert2 / pert - 2.0) < 0.2  # residual grows linearly in the noise
