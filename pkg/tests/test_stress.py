import numpy as np
import pytest

from hsflow.families import packet_field, random_packets
from hsflow.fields import SpaceTimeField
from hsflow.stress import (
    StressModel,
    besov_smallness_check,
    eval_stress,
    modulus_estimate,
    sample_symmetric_pairs,
    sigma_times,
)


def test_model_validation():
    with pytest.raises(ValueError):
        StressModel("S9")
    with pytest.raises(ValueError):
        StressModel("S1", mu0=0.0)
    with pytest.raises(ValueError):
        StressModel("S3", d=1.5)  # shear-thinning S3 has no finite F(0)
    StressModel("S1", d=1.5)      # shear-thinning S1 is fine with mu0 > 0
    StressModel("S2", d=4.0)


def test_eval_stress_s2_d2_is_identity():
    model = StressModel("S2", mu0=0.7, mu1=1.3, d=2.0)
    A = np.array([[0.3, 0.1], [0.1, -0.2]])
    assert np.max(np.abs(eval_stress(model, A) - A)) < 1e-15


def test_eval_stress_zero_for_all_families():
    A = np.zeros((2, 2))
    for fam, d in (("S1", 3.0), ("S2", 4.0), ("S3", 3.0), ("newtonian", 2.0), ("log", 2.0)):
        model = StressModel(fam, 0.5, 1.0, d)
        assert np.max(np.abs(eval_stress(model, A))) == 0.0


def test_eval_stress_s3_direct_formula():
    # S3, d = 3, mu0 = mu1 = 1, |A| = 1: S(A) = (1 + 1) A = 2 A
    model = StressModel("S3", 1.0, 1.0, 3.0)
    A = np.diag([1.0, 0.0])  # Frobenius norm 1
    assert np.max(np.abs(eval_stress(model, A) - 2.0 * A)) < 1e-15


def test_sigma_newtonian_zero(grid2d, rng):
    model = StressModel("newtonian")
    A = rng.standard_normal(grid2d.field_shape(2))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    out = sigma_times(model, SpaceTimeField(grid2d, 2, A, symmetric=True))
    assert out.linf() == 0.0


def test_sigma_s3_formula():
    # after the 2 F(0) = I normalisation, S3 with mu0 = 1/2, mu1 = 1 gives
    # sigma(A) A = |A| A
    model = StressModel("S3", 0.5, 1.0, 3.0)
    rng = np.random.default_rng(2)
    A = rng.standard_normal((11, 2, 2))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    mag = np.sqrt(np.sum(A**2, axis=(-2, -1)))
    expect = mag[..., None, None] * A
    assert np.max(np.abs(sigma_times(model, A) - expect)) < 1e-14


def test_sigma_continuity_at_zero():
    # |sigma(A) A| <= eps(|A|) |A| with eps -> 0 along shrinking samples
    model = StressModel("S3", 0.5, 1.0, 3.0)
    rng = np.random.default_rng(3)
    for delta in (0.1, 0.01, 0.001):
        A = delta * rng.standard_normal((200, 2, 2))
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        mag = np.sqrt(np.sum(A**2, axis=(-2, -1)))
        out = np.sqrt(np.sum(sigma_times(model, A) ** 2, axis=(-2, -1)))
        ok = mag > 0
        assert np.max(out[ok] / mag[ok]) <= 2.0 * np.max(mag)


def test_modulus_newtonian_zero():
    est = modulus_estimate(StressModel("newtonian"), 0.3, samples=2000)
    assert est["epsilon"] == 0.0


def test_modulus_s3_in_analytic_band():
    # sigma(A) A = |A| A has Lipschitz defect exactly 2 delta on the ball
    est = modulus_estimate(StressModel("S3", 0.5, 1.0, 3.0), 0.1, samples=30_000)
    assert 0.1 <= est["epsilon"] <= 0.2 + 1e-9


def test_modulus_s2_quadratic_rate():
    # S2, d = 4, mu0 = mu1 = 1: sigma(A) A = |A|^2 A / 2, defect ~ 1.5 delta^2
    model = StressModel("S2", 1.0, 1.0, 4.0)
    deltas = (0.2, 0.1, 0.05, 0.025)
    eps = [modulus_estimate(model, d, samples=20_000, seed=5)["epsilon"] for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(eps), 1)[0]
    assert slope >= 1.5


def test_modulus_monotone_in_delta():
    model = StressModel("S3", 0.5, 1.0, 3.0)
    eps = [modulus_estimate(model, d, samples=10_000, seed=9)["epsilon"]
           for d in (0.05, 0.1, 0.2, 0.4)]
    assert all(eps[i] <= eps[i + 1] + 1e-12 for i in range(len(eps) - 1))


def test_modulus_large_delta_reported_not_rejected():
    est = modulus_estimate(StressModel("S3", 0.5, 1.0, 3.0), 0.8, samples=5000)
    assert est["epsilon_ge_one"]
    with pytest.raises(ValueError):
        modulus_estimate(StressModel("S3", 0.5, 1.0, 3.0), -1.0)


def test_isotropy():
    # S(Q^T A Q) = Q^T S(A) Q for random orthogonal Q
    rng = np.random.default_rng(11)
    model = StressModel("S2", 1.0, 1.0, 4.0)
    for _ in range(20):
        A = rng.standard_normal((2, 2))
        A = 0.5 * (A + A.T)
        Qr, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        lhs = eval_stress(model, Qr.T @ A @ Qr)
        rhs = Qr.T @ eval_stress(model, A) @ Qr
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(np.max(np.abs(rhs)), 1.0)


def test_pointwise_modulus_on_field_pairs():
    # the deviation-difference bound transfers to sampled space-time pairs
    model = StressModel("S3", 0.5, 1.0, 3.0)
    delta = 0.1
    rng = np.random.default_rng(21)
    A, B = sample_symmetric_pairs(2, delta, 10_000, rng)
    gA, gB = sigma_times(model, A), sigma_times(model, B)
    num = np.sqrt(np.sum((gA - gB) ** 2, axis=(-2, -1)))
    den = np.sqrt(np.sum((A - B) ** 2, axis=(-2, -1)))
    ok = den > 1e-13
    assert np.all(num[ok] <= 2.0 * delta * den[ok] * (1 + 1e-12))


def test_besov_smallness_check(grid2d):
    g = grid2d
    model = StressModel("S3", 0.5, 1.0, 3.0)
    delta = 0.1
    base = packet_field(g, random_packets(g, 2, seed=31))
    vals = np.zeros(g.field_shape(2))
    vals[..., 0, 1] = base.values
    vals[..., 1, 0] = base.values
    G = SpaceTimeField(g, 2, vals, symmetric=True)
    G = G * (0.5 * delta / G.linf())
    rep = besov_smallness_check(G, 0.6, 8.0, 8.0, model, delta, seed=2)
    assert rep["passed"]
    assert rep["ratio"] <= rep["epsilon"] * 1.10 + 1e-12
    # zero field: both sides zero
    rep0 = besov_smallness_check(SpaceTimeField.zeros(g, 2), 0.6, 8.0, 8.0,
                                 model, delta)
    assert rep0["lhs_norm"] == 0.0
    # Newtonian: left side identically zero
    repn = besov_smallness_check(G, 0.6, 8.0, 8.0, StressModel("newtonian"), delta)
    assert repn["lhs_norm"] == 0.0
    # sup-norm precondition enforced
    with pytest.raises(ValueError):
        besov_smallness_check(G * (3.0 / G.linf() * delta), 0.6, 8.0, 8.0,
                              model, delta)


def test_log_model_guard():
    model = StressModel("log", 1.0, 1.0, 2.0)
    small = np.diag([0.01, 0.0])
    out = sigma_times(model, small)
    assert np.all(np.isfinite(out))
    with pytest.raises(ValueError):
        eval_stress(model, np.diag([0.9, 0.0]))
