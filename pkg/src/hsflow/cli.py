"""Batch front door: experiment orchestration over one configuration file.

Subcommands:
  solve-stokes   linear boundary-value pipeline with certificates
  iterate        nonlinear successive-approximation pipeline
  verify SUITE   inequality / embedding suites (gn, product, embedding,
                 inclusion, stress)
  norms FIELD    Besov / Sobolev norms of a stored field snapshot
  manufactured   convergence-order study against the closed-form flow

Exit codes: 0 success, 2 invalid configuration, 3 precondition violation
(the violated invariant is named on stderr), 4 numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import besov, verify
from .fields import read_field, write_field
from .picard import contraction_ratios, iterate, smallness_gate, write_trace_csv
from .runio import ConfigError, RunConfig, RunWriter, default_config_text
from .stokes import solve_stokes, weak_residual

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hsflow", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=str, default=None, help="configuration file (INI)")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one configuration value (repeatable)")
    ap.add_argument("--out", type=str, default="runs/latest", help="run directory")
    ap.add_argument("--seed", type=int, default=None, help="override [run] seed")
    ap.add_argument("--reproducible", action="store_true",
                    help="force fixed-order reductions / single process")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-stokes")
    sub.add_parser("iterate")
    vp = sub.add_parser("verify")
    vp.add_argument("suite", choices=["gn", "product", "embedding", "inclusion", "stress"])
    np_ = sub.add_parser("norms")
    np_.add_argument("field", type=str, help="field snapshot (.bin with .meta sidecar)")
    mp = sub.add_parser("manufactured")
    mp.add_argument("--levels", type=str, default="16,32,64")
    pp = sub.add_parser("print-config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "print-config":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        if args.reproducible:
            overrides.append("run.reproducible=true")
        cfg = RunConfig.load(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    writer = RunWriter(args.out)
    try:
        if args.command == "solve-stokes":
            return _cmd_solve(cfg, writer)
        if args.command == "iterate":
            return _cmd_iterate(cfg, writer)
        if args.command == "verify":
            return _cmd_verify(cfg, writer, args.suite)
        if args.command == "norms":
            return _cmd_norms(cfg, writer, args.field)
        if args.command == "manufactured":
            levels = tuple(int(x) for x in args.levels.split(","))
            return _cmd_manufactured(cfg, writer, levels)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except FloatingPointError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _cmd_solve(cfg: RunConfig, writer: RunWriter) -> int:
    problem = cfg.problem()
    writer.metadata(cfg, {"command": "solve-stokes"})
    sol = solve_stokes(problem)
    for name, cert in sol.certificates.items():
        writer.certificate({"part": name, **_flatten(cert)})
    res = weak_residual(sol.w, problem)
    writer.certificate({"part": "weak_residual",
                        "max_relative_residual": res["max_relative_residual"],
                        "divergence_pairing": res["divergence_pairing"]})
    writer.csv("weak_residual.csv", ["case", "lhs", "rhs", "residual"], res["cases"])
    write_field(sol.w, writer.dir / "w.bin")
    for name, part in sol.parts().items():
        write_field(part, writer.dir / f"{name}.bin")
    norms = sol.certificates.get("norms", {})
    print(f"solve-stokes: wall residual "
          f"{sol.certificates['ledgers']['wall_trace_residual']:.3e}, "
          f"weak residual {res['max_relative_residual']:.3e}, "
          f"|w| = {norms.get('w_total', float('nan')):.6g}")
    return EXIT_OK


def _cmd_iterate(cfg: RunConfig, writer: RunWriter) -> int:
    problem = cfg.problem()
    model = cfg.model()
    writer.metadata(cfg, {"command": "iterate"})
    gate = smallness_gate(problem, model, problem.alpha, problem.p, problem.q,
                          c_solver=cfg.getfloat("gate", "c_solver"))
    writer.certificate({"part": "gate", **_flatten(gate)})
    override = cfg.getbool("iterate", "override_gate")
    if not gate["passed"] and not override:
        failed = [k for k, ok in gate["verdicts"].items() if not ok]
        print(f"precondition violated: smallness gate ({', '.join(failed)})",
              file=sys.stderr)
        return EXIT_PRECONDITION
    trace, u = iterate(problem, model,
                       m_max=cfg.getint("iterate", "m_max"),
                       stop_tol=cfg.getfloat("iterate", "stop_tol"),
                       gate=gate, override_gate=override)
    write_trace_csv(trace, writer.dir / "trace.csv")
    summary = contraction_ratios(trace)
    writer.certificate({"part": "contraction", **_flatten(summary)})
    write_field(u, writer.dir / "u_final.bin")
    if trace.aborted:
        print(f"numerical abort: {trace.aborted}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"iterate: {len(trace.records)} iterations, "
          f"max ratio {summary['max']}, fitted {summary['fitted']}")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, writer: RunWriter, suite: str) -> int:
    grid = cfg.grid()
    p = cfg.getfloat("exponents", "p")
    q = cfg.getfloat("exponents", "q")
    alpha = cfg.getfloat("exponents", "alpha")
    count = cfg.getint("verify", "count")
    seed = cfg.getint("verify", "suite_seed")
    writer.metadata(cfg, {"command": f"verify {suite}"})
    if suite == "gn":
        rep = verify.check_gn_inequality(grid, p, count=count, seed=seed)
        writer.csv("gn.csv", ["case", "lhs1", "rhs1", "ratio1", "lhs2", "rhs2", "ratio2"],
                   rep["cases"])
        verdict = rep["slope_gap_1"] <= 0.02 and rep["slope_gap_2"] <= 0.02
    elif suite == "product":
        rep = verify.check_product_inequality(grid, min(alpha - 1.0, 0.9), p,
                                              2 * p, 2 * p, 2 * p, 2 * p, q,
                                              count=count, seed=seed)
        writer.csv("product.csv", ["case", "lhs", "rhs", "ratio"], rep["cases"])
        verdict = np.isfinite(rep["fitted_constant"])
    elif suite == "embedding":
        rep = verify.check_embedding_Cb(grid, alpha, p, q, count=max(3, count // 3),
                                        seed=seed)
        writer.csv("embedding.csv", ["case", "sup_slice", "bulk", "ratio"], rep["cases"])
        verdict = rep["all_defects_decreasing"]
    elif suite == "inclusion":
        s1 = alpha - (grid.n + 2) * (1.0 / p - 1.0 / (2 * p))
        rep = verify.check_inclusion(grid, alpha, p, s1, 2 * p, q0=q, q1=q,
                                     count=count, seed=seed)
        writer.csv("inclusion.csv", ["case", "lhs", "rhs", "ratio"], rep["cases"])
        verdict = np.isfinite(rep["fitted_constant"])
    else:  # stress / deviation smallness suite
        from .families import packet_field, random_packets
        from .stress import besov_smallness_check

        model = cfg.model()
        delta = 0.1
        f = packet_field(grid, random_packets(grid, 3, seed))

        def tens(tfield):
            vals = np.zeros(grid.field_shape(2))
            vals[..., 0, 1] = tfield.values
            vals[..., 1, 0] = tfield.values
            return vals

        from .fields import SpaceTimeField

        G = SpaceTimeField(grid, 2, tens(f))
        G = G * (0.5 * delta / max(G.linf(), 1e-300))
        rep = besov_smallness_check(G, min(alpha - 1.0, 0.9), p, q, model, delta,
                                    seed=seed)
        writer.csv("stress.csv", ["case", "lhs", "rhs", "ratio"],
                   [{"case": 0, "lhs": rep["lhs_norm"], "rhs": rep["rhs_norm"],
                     "ratio": rep["ratio"]}])
        verdict = rep["passed"]
    writer.certificate({"part": f"verify/{suite}", **_flatten(rep)})
    print(f"verify {suite}: {'ok' if verdict else 'FAILED'}")
    return EXIT_OK if verdict else EXIT_NUMERICAL


def _cmd_norms(cfg: RunConfig, writer: RunWriter, field_path: str) -> int:
    if not Path(field_path).exists():
        raise ConfigError(f"field snapshot not found: {field_path}")
    f = read_field(field_path)
    p = cfg.getfloat("exponents", "p")
    q = cfg.getfloat("exponents", "q")
    alpha = cfg.getfloat("exponents", "alpha")
    writer.metadata(cfg, {"command": "norms", "field": field_path})
    prof = besov.besov_norm(f, alpha, p, q)
    sob = besov.sobolev_aniso_norm(f, 1, (f.grid.n + 2) / 2.0)
    writer.csv("profile.csv", ["j", "block_value"],
               [{"j": j, "block_value": b} for j, b in prof.to_rows()])
    writer.certificate({"part": "norms", "besov": prof.value, "sobolev_k1": sob,
                        "truncated": prof.truncated, **prof.family_meta})
    print(f"norms: besov({alpha},{p},{q}) = {prof.value:.6g}, "
          f"sobolev(1,{(f.grid.n + 2) / 2.0}) = {sob:.6g}")
    return EXIT_OK


def _cmd_manufactured(cfg: RunConfig, writer: RunWriter, levels) -> int:
    writer.metadata(cfg, {"command": "manufactured"})
    rep = verify.manufactured_convergence(spatial_levels=levels)
    writer.csv("convergence.csv", ["path", "level", "h", "l2", "linf"], rep["cases"])
    writer.certificate({"part": "manufactured", **_flatten(rep)})
    print(f"manufactured: spatial order {rep['spatial_order_l2']:.2f} (l2) / "
          f"{rep['spatial_order_linf']:.2f} (linf), temporal {rep['temporal_order_l2']:.2f}, "
          f"half-derivative {rep['half_derivative_order']:.2f}, "
          f"spectral subparts {rep['spectral_subparts_max']:.2e}")
    return EXIT_OK


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)) and len(v) > 24:
            out[key] = f"<{len(v)} values>"
        else:
            out[key] = v
    return out


if __name__ == "__main__":
    sys.exit(main())
