"""Command-line front end: solver pipelines, sweeps and plot-data emission.

Exit codes: 0 on success, 2 when a verification fails, 1 on usage or
configuration errors.  Every flag has a key of the same name (dashes
become underscores) in an INI config file, one section per subcommand;
command-line flags override the file.  Outputs carry no timestamps, so
identical configuration yields byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import SCHEMA_VERSION, __version__
from .core import PhaseCurve, RadialProfile, read_columns
from .errors import AffmaxError
from .negative_pair import (blowup_time, extend_global, fixed_point_solve,
                            growth_bounds_check)
from .phase_plane import bernstein_radial_check
from .positive_pair import PositivePairConfig, build_phi
from .reconstruct import rebuild_profile
from .verify import (assemble, bernstein_1d_check, completeness_check,
                     full_residual)

USAGE_ERROR, VERIFY_ERROR = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_ERROR)


_DEFAULTS = {
    "solve-positive": {"v0": 1.0, "theta": 0.55, "lambda": 1.0, "rmax": 10.0,
                       "nodes": 2001, "out": "profile.csv"},
    "solve-negative": {"n": 2, "theta": 0.55, "eta0": 1.05, "tol": 1e-10,
                       "max_iter": 200, "damping": 0.5, "eta_max": 1e3,
                       "eta_max_bounds": 1e5, "out": "curve.csv",
                       "report": "report.json"},
    "reconstruct": {"curve": "curve.csv", "v0": 1.0, "n": 2,
                    "out": "profile.csv"},
    "assemble": {"phi": "phi.csv", "psi": "psi.csv", "m": 0, "theta": 0.55,
                 "n": 2, "report": None, "curve": None, "psi_v0": 1.0,
                 "phi_v0": 1.0, "phi_lambda": 1.0, "out": "solution.json"},
    "verify": {"solution": "solution.json", "points": 1000, "seed": 0,
               "tol": 1e-4, "report": "verify.json"},
    "bernstein-radial": {"n": 3, "theta": 1.0, "lo": 1.001, "hi": 1.05,
                         "samples": 50, "out": None},
    "bernstein-1d": {"theta": 1.0, "out": None},
    "sweep": {"n": 2, "theta_min": 0.51, "theta_max": 0.65, "steps": 4,
              "jobs": 1, "eta0": 1.05, "eta_max": 1e3, "outdir": "sweep_out"},
    "emit-plot-data": {"artifact": None, "kind": "phase", "out": "plot.dat"},
}


def _merge(args: argparse.Namespace, command: str) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise FileNotFoundError(f"config file {args.config} not found")
        if parser.has_section(command):
            cfg = dict(parser.items(command))
    out = {}
    for key, default in _DEFAULTS[command].items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in cfg:
            out[key] = type(default)(cfg[key]) if default is not None else cfg[key]
        else:
            out[key] = default
    return out


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_solve_positive(o) -> int:
    cfg = PositivePairConfig(v0=o["v0"], lam=o["lambda"], theta=o["theta"])
    grid = np.linspace(0.0, o["rmax"], int(o["nodes"]))
    prof = build_phi(cfg, grid)
    prof.to_csv(o["out"])
    print(f"wrote {o['out']} ({len(grid)} rows, r <= {o['rmax']})")
    return 0


def _solve_negative_pipeline(n, theta, eta0, tol, max_iter, damping,
                             eta_max, eta_max_bounds):
    local = fixed_point_solve(n, theta, eta0, tol=tol, max_iter=max_iter,
                              damping=damping)
    span = max(eta_max, eta_max_bounds)
    curve = extend_global(local, eta_max=span)
    bounds_rep = growth_bounds_check(curve)
    # the blow-up estimate uses the full integration range: the curve (and
    # any profile rebuilt from it) reaches within ~1/(q eta_max) of the
    # boundary, so T_inf must be at least that accurate
    T_inf, tail = blowup_time(curve)
    report = {
        "n": n, "theta": theta, "eta0": eta0,
        "taylor": {"alpha": local.taylor_formula.alpha,
                   "beta": local.taylor_formula.beta,
                   "gamma": local.taylor_formula.gamma},
        "taylor_measured": {"alpha": local.taylor_measured.alpha,
                            "beta": local.taylor_measured.beta,
                            "gamma": local.taylor_measured.gamma},
        "lambda_cal": local.lambda_cal,
        "iterations": local.iterations,
        "bounds": {"rho": bounds_rep["rho"], "eps0": bounds_rep["eps0"],
                   "eta1": bounds_rep["eta1"], "eta2": bounds_rep["eta2"]},
        "bounds_detail": bounds_rep,
        "T_inf": T_inf, "tail_bound": tail, "R_inf": math.exp(T_inf),
        "upper_bound_claimed": bounds_rep["upper_claimed"],
    }
    return curve, report


def _cmd_solve_negative(o) -> int:
    curve, report = _solve_negative_pipeline(
        int(o["n"]), o["theta"], o["eta0"], o["tol"], int(o["max_iter"]),
        o["damping"], o["eta_max"], o["eta_max_bounds"])
    curve.to_csv(o["out"])
    _dump_json(report, o["report"])
    ok = (report["bounds_detail"]["rho_holds"]
          and report["bounds_detail"]["lower_quadratic_holds"]
          and (not report["upper_bound_claimed"]
               or report["bounds_detail"]["upper_holds"]))
    print(f"wrote {o['out']} and {o['report']}; lambda_cal = "
          f"{report['lambda_cal']:.6g}, T_inf = {report['T_inf']:.6g}")
    return 0 if ok else VERIFY_ERROR


def _cmd_reconstruct(o) -> int:
    curve = PhaseCurve.from_csv(o["curve"], n=int(o["n"]))
    prof = rebuild_profile(curve, v0=o["v0"])
    prof.to_csv(o["out"])
    print(f"wrote {o['out']} ({len(prof.r)} rows)")
    return 0


def _cmd_assemble(o) -> int:
    from .verify import DataEvaluator
    phi = RadialProfile.from_csv(o["phi"], n=1)
    psi = RadialProfile.from_csv(o["psi"], n=int(o["n"]))
    phi_ctor = psi_ctor = None
    if o["curve"]:
        # native reconstruction: the sampled columns only cross-check it
        curve = PhaseCurve.from_csv(o["curve"], n=int(o["n"]), theta=o["theta"])
        psi_native = rebuild_profile(curve, v0=o["psi_v0"])
        _check_columns_match(psi, psi_native, "psi")
        psi = psi_native
        cfg = PositivePairConfig(v0=o["phi_v0"], lam=o["phi_lambda"],
                                 theta=o["theta"])
        phi_native = build_phi(cfg, phi.r)
        _check_columns_match(phi, phi_native, "phi")
        phi = phi_native
        phi_ctor = {"kind": "positive-pair", "v0": o["phi_v0"],
                    "lambda": o["phi_lambda"], "rmax": float(phi.r[-1]),
                    "nodes": len(phi.r)}
        psi_ctor = {"kind": "phase-reconstruction", "v0": o["psi_v0"],
                    "eta": curve.eta.tolist(), "zeta": curve.zeta.tolist(),
                    "I": curve.I.tolist()}
    else:
        phi.evaluator = DataEvaluator(phi)
        psi.evaluator = DataEvaluator(psi)
    R_inf = None
    if o["report"]:
        with open(o["report"]) as fh:
            R_inf = json.load(fh).get("R_inf")
    sol = assemble(phi, psi, m_cylinder=int(o["m"]), theta=o["theta"],
                   R_inf=R_inf, spread_tol=5e-3)
    payload = {
        "schema": SCHEMA_VERSION, "theta": sol.theta, "kappa": sol.kappa,
        "m_cylinder": sol.m_cylinder, "n_psi": sol.psi.n, "N": sol.N,
        "R_inf": sol.R_inf if sol.R_inf is not None and np.isfinite(sol.R_inf) else None,
        "lambda_phi": sol.lambda_phi, "lambda_psi": sol.lambda_psi,
        "phi": {"r": sol.phi.r.tolist(), "v": sol.phi.v.tolist(),
                "u": sol.phi.u.tolist(), "constructor": phi_ctor},
        "psi": {"r": sol.psi.r.tolist(), "v": sol.psi.v.tolist(),
                "u": sol.psi.u.tolist(), "constructor": psi_ctor},
    }
    _dump_json(payload, o["out"])
    print(f"wrote {o['out']} (kappa = {sol.kappa:.6g}, N = {sol.N})")
    return 0


def _check_columns_match(stored: RadialProfile, rebuilt: RadialProfile,
                         name: str, tol: float = 1e-6):
    v_ref = np.array([rebuilt.v_at(r) for r in stored.r])
    scale = np.max(np.abs(v_ref))
    if np.max(np.abs(v_ref - stored.v)) > tol * scale:
        raise ValueError(
            f"{name} profile columns disagree with the reconstruction; "
            "wrong curve/v0/lambda for this CSV?")


def _solution_from_json(path):
    from .core import ModelParams, SeparableSolution, measure_taylor
    from .verify import DataEvaluator
    with open(path) as fh:
        data = json.load(fh)

    def factor(block, n):
        prof = RadialProfile(r=np.array(block["r"]), v=np.array(block["v"]),
                             u=np.array(block["u"]), n=n)
        ctor = block.get("constructor")
        if ctor and ctor["kind"] == "positive-pair":
            cfg = PositivePairConfig(v0=ctor["v0"], lam=ctor["lambda"],
                                     theta=data["theta"])
            # the stored columns are the kappa-scaled factor
            return build_phi(cfg, prof.r).scaled(data["kappa"])
        if ctor and ctor["kind"] == "phase-reconstruction":
            eta = np.array(ctor["eta"])
            zeta = np.array(ctor["zeta"])
            I = np.array(ctor["I"])
            eta0 = float(np.interp(0.0, I, eta))
            curve = PhaseCurve(
                params=ModelParams(n=n, theta=data["theta"], eta0=eta0),
                taylor=measure_taylor(eta, zeta, eta0), eta=eta, zeta=zeta, I=I)
            return rebuild_profile(curve, v0=ctor["v0"])
        prof.evaluator = DataEvaluator(prof)
        prof.meta["r_min"] = float(prof.r[0]) if prof.r[0] > 0 else float(prof.r[1])
        prof.meta["r_max"] = float(prof.r[-1])
        return prof

    phi = factor(data["phi"], 1)
    psi = factor(data["psi"], int(data["n_psi"]))
    R_inf = data["R_inf"] if data["R_inf"] is not None else math.inf
    return SeparableSolution(phi=phi, psi=psi, kappa=data["kappa"],
                             theta=data["theta"], R_inf=R_inf,
                             m_cylinder=int(data["m_cylinder"]),
                             lambda_phi=data["lambda_phi"],
                             lambda_psi=data["lambda_psi"])


def _cmd_verify(o) -> int:
    sol = _solution_from_json(o["solution"])
    rep = full_residual(sol, n_points=int(o["points"]), seed=int(o["seed"]))
    comp = completeness_check(sol)
    passed = (rep.residual_max < o["tol"] and rep.convexity_margin > 0
              and comp["pass"])
    payload = rep.as_dict()
    payload["residuals"] = getattr(rep, "residuals", [])
    payload["completeness"] = comp
    payload["bounds"] = [
        {"bound_id": "hessian-positive-definite",
         "holds": bool(rep.convexity_margin > 0),
         "witness": {"min_eigenvalue": rep.convexity_margin}},
        {"bound_id": "u-diverges-at-boundary",
         "holds": bool(comp["psi"]["pass"]),
         "witness": {k: comp["psi"].get(k) for k in
                     ("u_log_slope", "u_fit_residual")}},
        {"bound_id": "u-diverges-at-infinity",
         "holds": bool(comp["phi"]["increasing"] and comp["phi"]["slope"] > 0),
         "witness": comp["phi"]},
    ]
    payload["tolerance"] = o["tol"]
    payload["pass"] = bool(passed)
    _dump_json(payload, o["report"])
    print(f"residual max {rep.residual_max:.3e} (tol {o['tol']:.1e}), "
          f"convexity margin {rep.convexity_margin:.3e}, "
          f"completeness {'pass' if comp['pass'] else 'FAIL'}")
    return 0 if passed else VERIFY_ERROR


def _cmd_bernstein_radial(o) -> int:
    rep = bernstein_radial_check(int(o["n"]), o["theta"], (o["lo"], o["hi"]),
                                 samples=int(o["samples"]))
    if o["out"]:
        _dump_json(rep, o["out"])
    print(f"n={o['n']} theta={o['theta']} window=({o['lo']}, {o['hi']}): "
          f"{'pass' if rep['pass'] else 'FAIL'}")
    return 0 if rep["pass"] else VERIFY_ERROR


def _cmd_bernstein_1d(o) -> int:
    rep = bernstein_1d_check(o["theta"])
    if o["out"]:
        _dump_json(rep, o["out"])
    print(f"theta={o['theta']}: {'pass' if rep['pass'] else 'FAIL'}")
    return 0 if rep["pass"] else VERIFY_ERROR


def _sweep_worker(task):
    n, theta, eta0, eta_max = task
    lo, hi = 1.0 / n, n / (n + 1)
    row = {"theta": theta, "upper_bound_claimed": bool(lo <= theta < hi)}
    if not row["upper_bound_claimed"]:
        row["note"] = "upper-bound-not-claimed"
    try:
        _, report = _solve_negative_pipeline(n, theta, eta0, 1e-10, 200, 0.5,
                                             eta_max, eta_max)
        row.update({"lambda_cal": report["lambda_cal"],
                    "iterations": report["iterations"],
                    "T_inf": report["T_inf"], "R_inf": report["R_inf"],
                    "bounds": report["bounds"], "status": "ok"})
    except AffmaxError as exc:
        row.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
    return row


def _cmd_sweep(o) -> int:
    import os
    thetas = np.linspace(o["theta_min"], o["theta_max"], int(o["steps"]))
    tasks = [(int(o["n"]), float(t), o["eta0"], o["eta_max"]) for t in thetas]
    jobs = int(o["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(t) for t in tasks]
    os.makedirs(o["outdir"], exist_ok=True)
    out = os.path.join(o["outdir"], "sweep.json")
    _dump_json({"n": int(o["n"]), "rows": rows}, out)
    n_ok = sum(r["status"] == "ok" for r in rows)
    print(f"wrote {out}: {n_ok}/{len(rows)} solves succeeded")
    return 0 if n_ok == len(rows) else VERIFY_ERROR


def _cmd_emit_plot_data(o) -> int:
    from .errors import UnknownKind
    kind = o["kind"]
    if kind == "phase":
        names, cols = read_columns(o["artifact"])
        body = np.column_stack([cols[0], cols[1]])
        header = "# eta zeta"
    elif kind == "profile":
        names, cols = read_columns(o["artifact"])
        body = np.column_stack(cols[:3])
        header = "# r v u"
    elif kind == "bounds":
        curve = PhaseCurve.from_csv(o["artifact"])
        rep = growth_bounds_check(curve)
        body = np.column_stack([curve.eta, curve.zeta,
                                rep["rho"] * (curve.eta - 1.0),
                                rep["eps0"] * curve.eta**2])
        header = "# eta zeta rho*(eta-1) eps0*eta^2"
    elif kind == "residual-hist":
        with open(o["artifact"]) as fh:
            data = json.load(fh)
        res = np.abs(np.array(data["residuals"]))
        hist, edges = np.histogram(np.log10(np.maximum(res, 1e-300)), bins=40)
        body = np.column_stack([0.5 * (edges[:-1] + edges[1:]), hist])
        header = "# log10_abs_residual count"
    else:
        raise UnknownKind(f"unknown plot kind {kind!r}")
    with open(o["out"], "w") as fh:
        fh.write(header + "\n")
        for row in body:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {o['out']}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_opts(sub, command, specs):
    p = sub.add_parser(command)
    p.add_argument("--config", default=None, help="INI config file")
    for name, typ, hlp in specs:
        p.add_argument(f"--{name}", type=typ, default=None, help=hlp,
                       dest=name.replace("-", "_"))
    return p


def build_parser() -> _Parser:
    ap = _Parser(prog="affmax", description=__doc__)
    ap.add_argument("--version", action="store_true", help="print version and exit")
    sub = ap.add_subparsers(dest="command")
    f, i, s = float, int, str
    _add_opts(sub, "solve-positive", [
        ("v0", f, "initial curvature"), ("theta", f, "exponent"),
        ("lambda", f, "eigenvalue"), ("rmax", f, "largest radius"),
        ("nodes", i, "grid size"), ("out", s, "profile CSV")])
    _add_opts(sub, "solve-negative", [
        ("n", i, "factor dimension"), ("theta", f, "exponent"),
        ("eta0", f, "anchor eta0 > 1"), ("tol", f, "sup-norm tolerance"),
        ("max-iter", i, "iteration cap"), ("damping", f, "Picard damping"),
        ("eta-max", f, "blow-up integration range"),
        ("eta-max-bounds", f, "bound-scan range"),
        ("out", s, "curve CSV"), ("report", s, "report JSON")])
    _add_opts(sub, "reconstruct", [
        ("curve", s, "curve CSV"), ("v0", f, "anchor value v(1)"),
        ("n", i, "factor dimension"), ("out", s, "profile CSV")])
    _add_opts(sub, "assemble", [
        ("phi", s, "1-D factor CSV"), ("psi", s, "n-D factor CSV"),
        ("m", i, "cylinder factors"), ("theta", f, "exponent"),
        ("n", i, "psi dimension"), ("report", s, "solve-negative report (R_inf)"),
        ("curve", s, "phase-curve CSV (enables exact reconstruction)"),
        ("psi-v0", f, "anchor v(1) of the psi factor"),
        ("phi-v0", f, "initial curvature of the phi factor"),
        ("phi-lambda", f, "eigenvalue of the phi factor"),
        ("out", s, "solution JSON")])
    _add_opts(sub, "verify", [
        ("solution", s, "solution JSON"), ("points", i, "sample count"),
        ("seed", i, "sampling seed"), ("tol", f, "residual tolerance"),
        ("report", s, "report JSON")])
    _add_opts(sub, "bernstein-radial", [
        ("n", i, "dimension (>= 3)"), ("theta", f, "exponent"),
        ("lo", f, "window start"), ("hi", f, "window end"),
        ("samples", i, "sample count"), ("out", s, "report JSON")])
    _add_opts(sub, "bernstein-1d", [
        ("theta", f, "exponent"), ("out", s, "report JSON")])
    _add_opts(sub, "sweep", [
        ("n", i, "factor dimension"), ("theta-min", f, "first theta"),
        ("theta-max", f, "last theta"), ("steps", i, "grid size"),
        ("jobs", i, "parallel workers"), ("eta0", f, "anchor"),
        ("eta-max", f, "integration range"), ("outdir", s, "output directory")])
    _add_opts(sub, "emit-plot-data", [
        ("artifact", s, "input artifact"), ("kind", s,
         "phase | profile | bounds | residual-hist"), ("out", s, "output file")])
    return ap


_COMMANDS = {
    "solve-positive": _cmd_solve_positive,
    "solve-negative": _cmd_solve_negative,
    "reconstruct": _cmd_reconstruct,
    "assemble": _cmd_assemble,
    "verify": _cmd_verify,
    "bernstein-radial": _cmd_bernstein_radial,
    "bernstein-1d": _cmd_bernstein_1d,
    "sweep": _cmd_sweep,
    "emit-plot-data": _cmd_emit_plot_data,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    if args.version:
        print(f"affmax {__version__} (schema {SCHEMA_VERSION})")
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        opts = _merge(args, args.command)
        return _COMMANDS[args.command](opts)
    except (FileNotFoundError, OSError, KeyError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    except AffmaxError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
