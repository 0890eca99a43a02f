"""Command-line entry point: ``python -m cylbuckle <subcommand>`` or ``cylbuckle``.

Exit codes: 0 success, 2 usage/configuration, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import airy, calibrate, continuation, flows, mountain_pass, newton, yoshimura
from . import energy as en
from . import io as vio
from .energy import GradientMetric
from .grid import DomainSpec

log = logging.getLogger("cylbuckle")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

NUMERIC_ERRORS = (
    airy.AiryError,
    flows.FlowError,
    mountain_pass.MountainPassError,
    newton.NewtonError,
    yoshimura.UnderResolved,
    calibrate.RangeExhausted,
    FloatingPointError,
)
IO_ERRORS = (OSError, calibrate.ParseError, calibrate.EmptyData)


class UsageError(Exception):
    pass


# --- shared helpers ---------------------------------------------------------


_OVERRIDE_FLAGS = {
    "lam": "lambda", "domain_a": "domain_a", "domain_b": "domain_b", "nx": "nx", "ny": "ny",
    "tol": "tol", "metric": "metric", "n_path": "n_path", "seed_shape": "seed_shape",
    "symmetrize": "symmetrize", "max_iters": "max_iters", "out_dir": "out_dir",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value run configuration file")
    p.add_argument("--lambda", dest="lam", help="load parameter")
    p.add_argument("--domain", help="half-widths as AxB (overrides domain_a/domain_b)")
    p.add_argument("--domain-a", dest="domain_a")
    p.add_argument("--domain-b", dest="domain_b")
    p.add_argument("--nx")
    p.add_argument("--ny")
    p.add_argument("--tol")
    p.add_argument("--metric", choices=vio.METRICS)
    p.add_argument("--n-path", dest="n_path")
    p.add_argument("--seed-shape", dest="seed_shape", choices=vio.SEED_SHAPES)
    p.add_argument("--symmetrize", choices=("on", "off"))
    p.add_argument("--max-iters", dest="max_iters")
    p.add_argument("--out-dir", dest="out_dir")


def _config(args) -> vio.RunConfig:
    overrides = {key: getattr(args, attr, None) for attr, key in _OVERRIDE_FLAGS.items()}
    if getattr(args, "domain", None):
        try:
            a, b = vio.parse_domain(args.domain)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        overrides["domain_a"], overrides["domain_b"] = str(a), str(b)
    try:
        return vio.RunConfig.load(args.config, overrides)
    except vio.ConfigError as exc:
        raise UsageError(f"config: {exc}") from None
    except ValueError as exc:  # DomainSpec validation
        raise UsageError(f"config: {exc}") from None


def _out(path: str | None, cfg: vio.RunConfig | None, default: str) -> Path:
    p = Path(path) if path else Path(default)
    if not p.is_absolute() and cfg is not None and path is None:
        p = Path(cfg.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _metric(cfg: vio.RunConfig) -> GradientMetric:
    return GradientMetric(cfg.metric)


def _lam(text: str | None, tag: float) -> float:
    if text is not None:
        try:
            return float(text)
        except ValueError:
            raise UsageError(f"--lambda {text!r} is not a number") from None
    if math.isnan(tag):
        raise UsageError("snapshot carries no lambda; pass --lambda")
    return tag


# --- subcommands ------------------------------------------------------------


def cmd_energy(args) -> int:
    w, tag = vio.read_snapshot(args.input)
    lam = _lam(args.lam, tag)
    b = en.breakdown(w, lam)
    cols = ("e2", "e3", "e4", "e_total", "shortening_s", "f_lambda", "x_norm_sq")
    if args.header:
        print(",".join(cols))
    print(",".join(repr(float(getattr(b, c))) for c in cols))
    return EXIT_OK


def cmd_airy(args) -> int:
    t0 = time.perf_counter()
    w, tag = vio.read_snapshot(args.input)
    phi = airy.phi_of(w)
    out = _out(args.out, None, "phi.fld")
    vio.write_snapshot(out, phi, tag)
    vio.write_metadata(out, "airy", {"input": str(args.input)}, timings={"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_find_w2(args) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    spec = cfg.spec
    params = flows.FlowParams(metric=_metric(cfg), symmetrize=cfg.symmetrize, max_steps=cfg.max_iters)
    w0 = flows.seed_field(spec, cfg.seed_shape, symmetrize=cfg.symmetrize)
    w2 = flows.find_w2(cfg.lam, w0, params=params)
    out = _out(args.out, cfg, "w2.fld")
    vio.write_snapshot(out, w2, cfg.lam)
    vio.write_metadata(out, "find-w2", cfg.as_dict(), metric=cfg.metric,
                       f_lambda=en.f_lambda(w2, cfg.lam), timings={"total_s": time.perf_counter() - t0})
    print(f"F_lambda(w2) = {en.f_lambda(w2, cfg.lam):.10g}")
    return EXIT_OK


def _solve_mp(cfg: vio.RunConfig, w2=None, log_file=None) -> mountain_pass.MpResult:
    spec = cfg.spec
    if w2 is None:
        fp = flows.FlowParams(metric=_metric(cfg), symmetrize=cfg.symmetrize)
        w0 = flows.seed_field(spec, cfg.seed_shape, symmetrize=cfg.symmetrize)
        w2 = flows.find_w2(cfg.lam, w0, params=fp)
    mp = mountain_pass.MpParams(n_path=cfg.n_path, tol=cfg.tol, max_iters=cfg.max_iters,
                                metric=_metric(cfg), symmetrize=cfg.symmetrize, log_file=log_file)
    return mountain_pass.run_mountain_pass(cfg.lam, w2, mp)


def cmd_mp(args) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    w2 = None
    if args.w2:
        w2, _ = vio.read_snapshot(args.w2)
        if w2.spec != cfg.spec:
            raise UsageError(f"w2 grid {w2.spec.label()} does not match config grid {cfg.spec.label()}")
    out = _out(args.out, cfg, "wmp.fld")
    fh = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        if fh:
            fh.write("iteration,index,f_max,grad_norm,step\n")
        res = _solve_mp(cfg, w2, fh)
    finally:
        if fh:
            fh.close()
    vio.write_snapshot(out, res.w_mp, cfg.lam)
    vio.write_metadata(out, "mp", cfg.as_dict(), metric=cfg.metric, level=res.level_c,
                       path_max=res.path_max, grad_norm=res.grad_norm, iterations=res.iterations,
                       polished=res.polished, newton_steps=res.newton_steps,
                       timings={"total_s": time.perf_counter() - t0})
    print(f"level = {res.level_c:.10g}  |g| = {res.grad_norm:.3e}  iterations = {res.iterations}")
    return EXIT_OK


def cmd_verify_mp(args) -> int:
    w, tag = vio.read_snapshot(args.input)
    lam = _lam(args.lam, tag)
    level = en.f_lambda(w, lam)
    res = mountain_pass.MpResult(w, level, en.gradient_norm(w, lam), 0, GradientMetric.X_PRECONDITIONED)
    rep = mountain_pass.verify_mountain_pass(res, lam)
    print("side,outcome,final_f,final_x_norm")
    print(f"minus,{rep.minus_outcome},{rep.minus_final_f!r},{rep.minus_final_xnorm!r}")
    print(f"plus,{rep.plus_outcome},{rep.plus_final_f!r},{rep.plus_final_xnorm!r}")
    print(f"# lowest eigenvalue {rep.eigenvalue:.6g}, two-sided escape: {'yes' if rep.ok else 'no'}")
    return EXIT_OK if rep.ok else EXIT_NUMERIC


def cmd_refine(args) -> int:
    t0 = time.perf_counter()
    w, tag = vio.read_snapshot(args.input)
    lam = _lam(args.lam, tag)
    wr, steps = newton.newton_refine(w, lam, tol=args.tol, return_steps=True)
    out = _out(args.out, None, "refined.fld")
    vio.write_snapshot(out, wr, lam)
    vio.write_metadata(out, "refine", {"input": str(args.input), "lambda": lam, "tol": args.tol},
                       newton_steps=steps, level=en.f_lambda(wr, lam),
                       timings={"total_s": time.perf_counter() - t0})
    print(f"level = {en.f_lambda(wr, lam):.10g}  newton steps = {steps}")
    return EXIT_OK


def cmd_continue(args) -> int:
    t0 = time.perf_counter()
    w, tag = vio.read_snapshot(args.seed)
    lam0 = _lam(args.lam, tag)
    lo, hi = sorted((args.lambda_from, args.lambda_to))
    if not lo <= lam0 <= hi:
        raise UsageError(f"seed lambda {lam0:g} outside [{lo:g}, {hi:g}]")
    params = continuation.StepParams(ds=args.ds, max_steps=args.max_steps)
    branch = continuation.continue_branch((lam0, w), (lo, hi), params)
    out = _out(args.out, None, "branch.csv")
    snap_dir = Path(args.snapshots) if args.snapshots else None
    if snap_dir:
        snap_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, r in enumerate(branch.records):
        sp = ""
        if snap_dir:
            sp = str(snap_dir / f"rec{k:04d}.fld")
            vio.write_snapshot(sp, r.w, r.lam)
        rows.append((r.lam, r.level, r.x_norm_sq, int(r.is_fold_passed), sp))
    vio.write_csv(out, vio.BRANCH_COLUMNS, rows)
    seg = branch.mountain_pass_segment()
    extra = {}
    if len(seg) >= 2:
        fit = continuation.fit_v_curve([r.lam for r in seg], [r.level for r in seg])
        extra["v_fit"] = fit.as_dict()
        extra["v_fit_note"] = "fit form chosen here for extrapolation; not taken from a reference"
    vio.write_metadata(out, "continue", {"seed": str(args.seed), "lambda_range": [lo, hi],
                                         "ds": args.ds, "max_steps": args.max_steps},
                       folds=branch.folds, timings={"total_s": time.perf_counter() - t0}, **extra)
    print(f"{len(rows)} records, folds at {branch.folds}")
    return EXIT_OK


def cmd_domain_study(args) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    try:
        domains = [vio.parse_domain(d) for d in args.domains.split(",") if d.strip()]
        lams = vio.parse_float_list(args.lambdas) if args.lambdas else [cfg.lam]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    # keep the configured grid spacing on every domain
    hx, hy = 2 * cfg.domain_a / cfg.nx, 2 * cfg.domain_b / cfg.ny
    specs = []
    for a, b in domains:
        nx, ny = 2 * round(a / hx), 2 * round(b / hy)
        specs.append(DomainSpec(a, b, nx, ny))

    def solve(lam, spec):
        c = vio.RunConfig(**{**cfg.__dict__, "lam": lam, "domain_a": spec.a, "domain_b": spec.b,
                             "nx": spec.nx, "ny": spec.ny})
        return _solve_mp(c).w_mp

    rows = continuation.domain_study(lams, specs, solve)
    out = _out(args.out, cfg, "domain_study.csv")
    vio.write_csv(out, ("lambda", "a", "b", "nx", "ny", "level", "x_norm_sq", "d2_discrepancy"),
                  [(r.lam, r.a, r.b, r.nx, r.ny, r.level, r.x_norm_sq, r.d2_discrepancy) for r in rows])
    vio.write_metadata(out, "domain-study", cfg.as_dict(), domains=args.domains,
                       timings={"total_s": time.perf_counter() - t0})
    for r in rows:
        print(f"lambda={r.lam:g} {r.a:g}x{r.b:g}: V={r.level:.8g}")
    return EXIT_OK


def cmd_yoshimura(args) -> int:
    t0 = time.perf_counter()
    if not (args.deltas or args.q_eps):
        raise UsageError("give --deltas and/or --q-eps")
    out = _out(args.out, None, "yoshimura.csv")
    try:
        deltas = vio.parse_float_list(args.deltas) if args.deltas else None
        eps = vio.parse_float_list(args.q_eps) if args.q_eps else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    meta = {}
    if deltas:
        try:
            rows = yoshimura.scaling_report(deltas)
        except ValueError as exc:
            if isinstance(exc, yoshimura.UnderResolved):
                raise
            raise UsageError(str(exc)) from None
        vio.write_csv(out, ("delta", "int_wx2", "int_dw2", "int_dphi2", "slope_dw2", "slope_dphi2"),
                      [(r.delta, r.int_wx2, r.int_dw2, r.int_dphi2, r.slope_dw2, r.slope_dphi2) for r in rows])
        meta["scaling_csv"] = str(out)
    if eps:
        qout = out if not deltas else out.with_name(out.stem + "_q" + out.suffix)
        try:
            qrows = yoshimura.q_epsilon(eps)
        except ValueError as exc:
            if isinstance(exc, yoshimura.UnderResolved):
                raise
            raise UsageError(str(exc)) from None
        vio.write_csv(qout, ("eps", "delta", "q", "q_quadratic"),
                      [(r.eps, r.delta, r.q, r.q_quadratic) for r in qrows])
        meta["q_csv"] = str(qout)
    vio.write_metadata(out, "yoshimura", {"deltas": deltas, "q_eps": eps},
                       timings={"total_s": time.perf_counter() - t0}, **meta)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    t0 = time.perf_counter()
    try:
        rows = vio.read_branch_csv(args.vcurve)
    except ValueError as exc:
        raise calibrate.ParseError(str(exc), 0) from None
    seg = [r for r in rows if not r["fold_flag"]]
    if len(seg) < 2:
        raise calibrate.EmptyData(f"{args.vcurve}: fewer than two mountain-pass records")
    vc = calibrate.VCurve.with_fit([r["lambda"] for r in seg], [r["level"] for r in seg])
    lams = None
    if args.lambda_grid:
        try:
            lo, hi, n = args.lambda_grid.split(":")
            lams = np.linspace(float(lo), float(hi), int(n))
        except ValueError:
            raise UsageError("--lambda-grid expects lo:hi:n") from None
    try:
        curve = calibrate.iso_curve(vc, args.nu, args.target, args.value, args.plane, lams)
    except calibrate.CalibrationError as exc:
        if isinstance(exc, calibrate.RangeExhausted):
            raise
        raise UsageError(str(exc)) from None
    out = _out(args.out, None, "curve.csv")
    vio.write_csv(out, vio.CURVE_COLUMNS, [(p.lam, p.load_ratio, p.geom_ratio, p.target, p.value) for p in curve])
    extra = {"v_fit": vc.fit.as_dict(), "v_fit_note": "fit form chosen here for extrapolation",
             "provenance": [p.provenance for p in curve]}
    data = None
    if args.experiments:
        data = calibrate.ingest_experiments(args.experiments, args.plane)
        rep = calibrate.overlay(data, curve)
        ov = out.with_name(out.stem + "_overlay.csv")
        cols = ("geom_ratio", "load_ratio", "label", "curve_load_ratio", "below_curve")
        vio.write_csv(ov, cols, [tuple(r[c] for c in cols) for r in rep.rows])
        extra.update(overlay_csv=str(ov), fraction_below=rep.fraction_below, n_compared=rep.n_compared)
        print(f"fraction below curve: {rep.fraction_below:.4g} ({rep.n_below}/{rep.n_compared})")
    if args.svg:
        calibrate.write_svg(args.svg, {f"{args.target}={args.value:g}": curve}, data)
    vio.write_metadata(out, "calibrate", {"vcurve": str(args.vcurve), "nu": args.nu, "target": args.target,
                                          "value": args.value, "plane": args.plane},
                       timings={"total_s": time.perf_counter() - t0}, **extra)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cylbuckle", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("energy", help="print the energy breakdown of a field")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--lambda", dest="lam")
    s.add_argument("--header", action="store_true")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("airy", help="solve for the Airy stress function")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--out")
    s.set_defaults(func=cmd_airy)

    s = sub.add_parser("find-w2", help="gradient flow to a negative-energy endpoint")
    _add_config_flags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_find_w2)

    s = sub.add_parser("mp", help="mountain-pass point")
    _add_config_flags(s)
    s.add_argument("--w2", type=Path)
    s.add_argument("--out")
    s.add_argument("--log")
    s.set_defaults(func=cmd_mp)

    s = sub.add_parser("verify-mp", help="two-sided escape test at a saddle")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--lambda", dest="lam")
    s.set_defaults(func=cmd_verify_mp)

    s = sub.add_parser("refine", help="Newton refinement of a critical point")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--lambda", dest="lam")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("continue", help="pseudo-arclength continuation in lambda")
    s.add_argument("--seed", required=True, type=Path)
    s.add_argument("--lambda", dest="lam")
    s.add_argument("--lambda-from", dest="lambda_from", type=float, required=True)
    s.add_argument("--lambda-to", dest="lambda_to", type=float, required=True)
    s.add_argument("--ds", type=float, default=0.5)
    s.add_argument("--max-steps", dest="max_steps", type=int, default=200)
    s.add_argument("--out")
    s.add_argument("--snapshots")
    s.set_defaults(func=cmd_continue)

    s = sub.add_parser("domain-study", help="V(lambda) across domains")
    _add_config_flags(s)
    s.add_argument("--domains", required=True)
    s.add_argument("--lambdas")
    s.add_argument("--out")
    s.set_defaults(func=cmd_domain_study)

    s = sub.add_parser("yoshimura", help="Yoshimura scaling and Q_eps tables")
    s.add_argument("--deltas")
    s.add_argument("--q-eps", dest="q_eps")
    s.add_argument("--out")
    s.set_defaults(func=cmd_yoshimura)

    s = sub.add_parser("calibrate", help="constant-alpha/beta curves and data overlay")
    s.add_argument("--vcurve", required=True, type=Path)
    s.add_argument("--nu", type=float, required=True)
    s.add_argument("--target", choices=[t.value for t in calibrate.Target], required=True)
    s.add_argument("--value", type=float, required=True)
    s.add_argument("--plane", choices=[p.value for p in calibrate.Plane], required=True)
    s.add_argument("--experiments", type=Path)
    s.add_argument("--lambda-grid", dest="lambda_grid")
    s.add_argument("--out")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure ({type(exc).__module__}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except IO_ERRORS as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
