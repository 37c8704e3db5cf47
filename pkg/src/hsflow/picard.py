"""Successive-approximation iteration for the shear-dependent problem:
repeated linear Stokes solves with the previous iterate's nonlinear forcing,
uniform-bound tracking, contraction measurement and a uniqueness probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import besov
from .fields import SpaceTimeField, outer_product, symmetric_gradient
from .stokes import StokesProblem, StokesSolution, solve_stokes
from .stress import StressModel, modulus_estimate, sigma_times

__all__ = [
    "IterationTrace",
    "nonlinear_forcing",
    "iterate",
    "smallness_gate",
    "contraction_ratios",
    "uniqueness_probe",
    "write_trace_csv",
]

_RATIO_FLOOR = 10.0  # ratios need the denominator above this many eps-scales


@dataclass
class IterationTrace:
    """Append-only per-iterate record of the tracked norms and ratios."""

    records: list[dict] = dc_field(default_factory=list)
    params: dict = dc_field(default_factory=dict)
    aborted: str | None = None

    def append(self, rec: dict) -> None:
        self.records.append(rec)

    @property
    def ratios(self) -> list[float]:
        return [r["ratio"] for r in self.records if r.get("ratio") is not None]

    def norms(self, key: str) -> list[float]:
        return [r[key] for r in self.records if key in r]


def nonlinear_forcing(u: SpaceTimeField, model: StressModel,
                      delta: float | None = None) -> tuple[SpaceTimeField, dict]:
    """Forcing tensor sigma(Du) Du - u (x) u fed to the linear solver."""
    if u.rank != 1:
        raise ValueError("nonlinear_forcing expects a velocity field")
    Du = symmetric_gradient(u)
    sup_du = Du.linf()
    flag = bool(delta is not None and sup_du > delta)
    F = sigma_times(model, Du) - outer_product(u, u)
    return F, {"sup_Du": sup_du, "left_small_regime": flag}


def _tracked_norms(u: SpaceTimeField, p: float, q: float, alpha: float) -> dict:
    n = u.grid.n
    sob = besov.sobolev_aniso_norm(u, 1, (n + 2) / 2.0)
    ff = besov.canonical_extension(u)
    family, raw = besov.block_lp_magnitudes(ff, p)
    b_high = besov.assemble_profile(family, raw, 1.0 + (n + 2) / p, p, 1.0).value
    b_alpha = besov.assemble_profile(family, raw, alpha, p, q).value
    return {
        "sobolev_contraction": sob,
        "besov_high": b_high,
        "besov_alpha": b_alpha,
    }


def iterate(problem: StokesProblem, model: StressModel, m_max: int = 25,
            stop_tol: float = 1e-8, gate: dict | None = None,
            override_gate: bool = False, delta: float | None = None,
            start: SpaceTimeField | None = None,
            certify_parts: bool = False) -> tuple[IterationTrace, SpaceTimeField]:
    """u^0 = 0 (or a supplied admissible start), then repeated Stokes solves
    with forcing sigma(Du^m) Du^m - u^m (x) u^m.

    Stops on the relative Cauchy criterion in the contraction norm, aborts
    after three consecutive non-contracting steps.
    """
    if gate is None and not override_gate:
        gate = smallness_gate(problem, model, problem.alpha, problem.p, problem.q)
    if gate is not None and not gate["passed"] and not override_gate:
        raise ValueError(f"smallness gate failed: {gate['verdicts']}")

    trace = IterationTrace(params={
        "model": model.family, "d": model.d, "mu0": model.mu0, "mu1": model.mu1,
        "p": problem.p, "q": problem.q, "alpha": problem.alpha,
        "m_max": m_max, "stop_tol": stop_tol,
        "gate": {k: v for k, v in (gate or {}).items() if k != "verdicts"},
    })
    p, q, alpha = problem.p, problem.q, problem.alpha
    u_prev = start if start is not None else SpaceTimeField.zeros(problem.grid, 1)
    diff_prev: float | None = None
    u1_norm: float | None = None
    u = u_prev
    for m in range(1, m_max + 1):
        F, finfo = nonlinear_forcing(u_prev, model, delta=delta)
        sol = solve_stokes(
            StokesProblem(problem.u0, problem.g, F, p, q, alpha,
                          compat_tol=problem.compat_tol),
            certify=certify_parts,
        )
        u = sol.w
        norms = _tracked_norms(u, p, q, alpha)
        diff = besov.sobolev_aniso_norm(u - u_prev, 1, (problem.grid.n + 2) / 2.0)
        rec = {"m": m, **norms, "diff": diff, **finfo}
        eps_scale = _RATIO_FLOOR * np.finfo(float).eps * max(norms["sobolev_contraction"], 1.0)
        if diff_prev is not None and diff_prev > eps_scale:
            rec["ratio"] = diff / diff_prev
        else:
            rec["ratio"] = None
        trace.append(rec)
        if m == 1:
            u1_norm = norms["sobolev_contraction"]
        ratios = [r["ratio"] for r in trace.records[-3:]]
        if len(ratios) == 3 and all(r is not None and r >= 1.0 for r in ratios):
            trace.aborted = "divergence: three consecutive non-contracting steps"
            break
        if u1_norm and diff < stop_tol * u1_norm:
            break
        diff_prev = diff
        u_prev = u
    return trace, u


def smallness_gate(problem: StokesProblem, model: StressModel, alpha: float,
                   p: float, q: float, c_solver: float = 1.0,
                   M_bound: float | None = None,
                   delta_scan: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05, 0.02)) -> dict:
    """Data-norm smallness verdicts against the (delta_0, M) thresholds.

    delta is the largest scanned ball radius where c * epsilon(delta) <= 1/3;
    delta_0 = min(1/(5c), delta/c, 1).  A value exactly at a threshold passes
    (ties accept).  All numbers are returned for the certificate log.
    """
    n = problem.grid.n
    m = n + 2
    gn = problem.g.normal_scalar()
    has_gn = float(np.max(np.abs(gn.values))) > 0.0

    def data_norms(s_u0, s_g, p_, q_, a_level):
        out = besov.spatial_besov_norm(problem.u0, s_u0, p_, q_)
        out += besov.besov_norm(problem.g, s_g, p_, q_).value
        if has_gn:
            ends = besov.a_norm_endpoints(gn, a_level, p_, allow_history=True)
            out += ends["endpoint_high"]
        return out

    M01 = data_norms(1.0 - 4.0 / m, 1.0 - 2.0 / m, m / 2.0, m / 2.0, 0)
    M02 = data_norms(1.0 + n / p, 1.0 + (n + 1.0) / p, p, 1.0, 1)
    M03 = data_norms(alpha - 2.0 / p, alpha - 1.0 / p, p, q, 1)

    delta = None
    eps = None
    for d in delta_scan:
        est = modulus_estimate(model, d, n=n, samples=20_000)
        if c_solver * est["epsilon"] <= 1.0 / 3.0:
            delta, eps = d, est["epsilon"]
            break
    if delta is None:
        delta, eps = delta_scan[-1], modulus_estimate(model, delta_scan[-1], n=n,
                                                      samples=20_000)["epsilon"]
    delta0 = min(1.0 / (5.0 * c_solver), delta / c_solver, 1.0)
    M_bound = M_bound if M_bound is not None else max(1.0, 2.0 * c_solver * M03)
    verdicts = {
        "M01": bool(c_solver * M01 <= 0.5 * delta0),
        "M02": bool(c_solver * M02 <= 0.5 * delta0),
        "M03": bool(c_solver * M03 <= M_bound),
        "c_eps": bool(c_solver * (eps or 0.0) <= 1.0 / 3.0),
    }
    return {
        "M01": M01, "M02": M02, "M03": M03,
        "delta": delta, "delta0": delta0, "epsilon": eps,
        "M_bound": M_bound, "c_solver": c_solver,
        "bounds": {"sobolev_contraction": delta0, "besov_high": delta0,
                   "besov_alpha": M_bound},
        "verdicts": verdicts,
        "passed": all(verdicts.values()),
    }


def contraction_ratios(trace: IterationTrace, benchmark: float = 0.5) -> dict:
    """Geometric summary of the measured ratios against the 1/2 benchmark."""
    ratios = trace.ratios
    if not ratios:
        return {"count": 0, "ratios": [], "fitted": None, "max": None,
                "benchmark": benchmark, "below_benchmark": None}
    fitted = float(np.exp(np.mean(np.log(ratios))))
    mx = float(np.max(ratios))
    return {
        "count": len(ratios),
        "ratios": ratios,
        "fitted": fitted,
        "max": mx,
        "benchmark": benchmark,
        "below_benchmark": bool(mx < benchmark),
        "contracting": bool(mx < 1.0),
    }


def uniqueness_probe(problem: StokesProblem, model: StressModel,
                     perturbation: SpaceTimeField | None = None,
                     amplitude: float = 1e-3, m_max: int = 25,
                     stop_tol: float = 1e-8, seed: int = 3) -> dict:
    """Run the iteration from 0 and from a small admissible perturbation and
    compare the limits (they must agree within solver tolerance)."""
    grid = problem.grid
    if perturbation is None and amplitude != 0.0:
        rng = np.random.default_rng(seed)
        phase = rng.uniform(0, 2 * np.pi)
        c0, w0 = 0.35 * grid.H, 0.15 * grid.H

        def fn(t, xn, *xs):
            z = (xn - c0) / w0
            bump = np.where(np.abs(z) < 1, np.exp(1.0 / np.minimum(z**2 - 1, -1e-12)), 0.0)
            zt = np.cos(np.pi * t / grid.T / 2.0) ** 2
            u1 = np.sin(2 * np.pi * xs[0] / grid.L + phase) * bump * zt
            rest = [np.zeros_like(u1) for _ in range(grid.n - 1)]
            return (u1, *rest)

        perturbation = amplitude * SpaceTimeField.sample(grid, 1, fn)
    tr_a, u_a = iterate(problem, model, m_max, stop_tol, override_gate=True)
    start = perturbation if perturbation is not None else None
    tr_b, u_b = iterate(problem, model, m_max, stop_tol, override_gate=True,
                        start=start)
    gap = besov.sobolev_aniso_norm(u_a - u_b, 1, (grid.n + 2) / 2.0)
    scale = max(besov.sobolev_aniso_norm(u_a, 1, (grid.n + 2) / 2.0), 1e-300)
    return {
        "gap": gap,
        "relative_gap": gap / scale,
        "tolerance": 10.0 * stop_tol,
        "coincide": bool(gap <= 10.0 * stop_tol * scale),
        "iters": (len(tr_a.records), len(tr_b.records)),
    }


def write_trace_csv(trace: IterationTrace, path: str | Path) -> None:
    cols = ["m", "sobolev_contraction", "besov_high", "besov_alpha", "diff", "ratio"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in trace.records:
            row = []
            for c in cols:
                v = rec.get(c)
                row.append("" if v is None else repr(v))
            fh.write(",".join(row) + "\n")
