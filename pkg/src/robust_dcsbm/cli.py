"""Command line entry point: ``robust-dcsbm <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from .baselines import Method, caili_cluster, caili_parameters, score_cluster, spectral_cluster
from .certificate import certify, concentration_audit
from .experiment import ExperimentConfig, preset, read_results, run_experiment, summarize, write_summary
from .model import ModelParams, generate
from .quantities import (DEFAULT_C0, DEFAULT_C1, aggregates, choose_tuning, default_delta,
                         degrees, penalty_vector, theorem_feasibility)
from .rounding import KMeansConfig, kmeans_rows, misclassification
from .sdp import SolverConfig, Variant, assemble_objective, solve


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc: dict, out) -> None:
    text = json.dumps(_jsonable(doc), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(tol_primal=args.tol, tol_dual=args.tol, max_iter=args.max_iter,
                        adapt_rho=args.adapt_rho)


def _tuning(inst, args):
    """(lambda, alpha) from the flags, falling back to oracle midpoint tuning."""
    lam, alpha = args.lam, args.alpha
    if lam is None or alpha is None:
        rep = theorem_feasibility(inst.params, inst.theta, default_delta(inst.params), c1=args.c1)
        lam0, alpha0 = choose_tuning(rep, "auto", A=inst.A, m_hat=inst.params.m, c1=args.c1)
        lam = lam0 if lam is None else lam
        alpha = alpha0 if alpha is None else alpha
    return lam, alpha


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    with open(args.config) as fh:
        params = ModelParams.from_dict(json.load(fh))
    if args.seed is not None:
        params = params.with_seed(args.seed)
    inst = generate(params)
    rio.save_instance(inst, args.out)
    if args.mtx:
        rio.save_matrix_market(inst.A, args.mtx)
    print(f"wrote {args.out}: N={params.N}, edges={int(np.triu(inst.A, 1).sum())}")
    return 0


def cmd_check(args) -> int:
    inst = rio.load_instance(args.instance)
    delta = default_delta(inst.params) if args.delta is None else args.delta
    rep = theorem_feasibility(inst.params, inst.theta, delta, c0=args.c0, c1=args.c1)
    _emit(rep.to_dict(), args.out)
    return 0


def cmd_solve(args) -> int:
    inst = rio.load_instance(args.instance)
    variant = Variant(args.variant)
    d = degrees(inst.A)
    H_plus = aggregates(inst.params, inst.theta).H_plus
    d_star = penalty_vector(d, H_plus) if variant is Variant.DSTAR else None
    E = assemble_objective(inst.A, d, d_star, args.lam, args.alpha, variant)
    res = solve(E, _solver_cfg(args))
    out = Path(args.out)
    rio.save_matrix_bin(res.X_hat, out.with_suffix(".bin"))
    _emit({"variant": variant.value, "lambda": args.lam, "alpha": args.alpha, "N": int(inst.A.shape[0]),
           **res.diagnostics()}, out.with_suffix(".json"))
    return 0


def _write_labels(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, int(lab)])


def cmd_cluster(args) -> int:
    km = KMeansConfig(restarts=args.restarts, seed=args.seed)
    truth = None
    notes = {}
    if args.xhat:
        if args.r is None:
            raise SystemExit("cluster --xhat needs --r")
        labels = kmeans_rows(rio.load_matrix_bin(args.xhat), args.r, km).labels
        if args.truth:
            truth = rio.load_instance(args.truth).truth
    elif args.instance:
        inst = rio.load_instance(args.instance)
        truth = inst.truth
        r = inst.params.r if args.r is None else args.r
        method = Method(args.method)
        if method is Method.SPECTRAL:
            labels = spectral_cluster(inst.A, r, args.regularizer, km).labels
        elif method is Method.SCORE:
            res = score_cluster(inst.A, r, args.ratio_cap, km)
            labels, notes = res.labels, res.notes
        else:
            lam, alpha = _tuning(inst, args)
            agg = aggregates(inst.params, inst.theta)
            if method is Method.DSTAR:
                d = degrees(inst.A)
                E = assemble_objective(inst.A, d, penalty_vector(d, agg.H_plus), lam, alpha)
                sol = solve(E, _solver_cfg(args))
                labels, notes = kmeans_rows(sol.X_hat, r, km).labels, {"solve": sol.diagnostics()}
            else:
                lc, ac = caili_parameters(lam, alpha, agg.H_plus, agg.H_minus)
                res = caili_cluster(inst.A, r, ac, lc, _solver_cfg(args), km)
                labels, notes = res.labels, res.notes
            notes.update({"lambda": lam, "alpha": alpha})
    else:
        raise SystemExit("cluster needs --xhat or --instance")
    out = Path(args.out)
    _write_labels(out.with_suffix(".csv"), labels)
    doc = {"notes": notes}
    if truth is not None:
        doc.update(misclassification(labels, truth).to_dict())
    _emit(doc, out.with_suffix(".json"))
    return 0


def cmd_certify(args) -> int:
    inst = rio.load_instance(args.instance)
    delta = default_delta(inst.params) if args.delta is None else args.delta
    lam, alpha = _tuning(inst, args)
    rep, _ = certify(inst, delta, lam, alpha, trials=args.trials, seed=args.seed)
    _emit({"delta": delta, "lambda": lam, "alpha": alpha, **rep.to_dict()}, args.out)
    return 0 if rep.valid else 1


def cmd_audit(args) -> int:
    with open(args.config) as fh:
        params = ModelParams.from_dict(json.load(fh))
    rep = concentration_audit(params, args.trials, base_seed=args.seed)
    _emit(rep.to_dict(), args.out)
    return 0


def _report(results_path, out_dir) -> None:
    from .plotting import plot_summary  # matplotlib only when figures are requested

    Path(out_dir).mkdir(parents=True, exist_ok=True)
    summary = summarize(read_results(results_path))
    write_summary(Path(out_dir) / "summary.csv", summary)
    for path in plot_summary(summary, out_dir):
        print(f"wrote {path}")


def cmd_experiment(args) -> int:
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        raise SystemExit("experiment needs --config or --preset")
    overrides = {k: v for k, v in (("tuning", args.tuning), ("trials", args.trials)) if v is not None}
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    rows = run_experiment(cfg, args.out, resume=args.resume, workers=args.workers)
    n_err = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows in {Path(args.out) / 'results.csv'} ({n_err} errors)")
    if not args.no_plots:
        _report(Path(args.out) / "results.csv", args.out)
    return 0


def cmd_report(args) -> int:
    out = args.out or str(Path(args.results).parent)
    _report(args.results, out)
    return 0


# ---------------------------------------------------------------------------


def _add_solver_flags(p) -> None:
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--adapt-rho", action="store_true", help="residual-balancing penalty updates")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-dcsbm", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an instance")
    p.add_argument("--config", required=True, help="JSON model parameters")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--mtx", help="also write the adjacency in Matrix Market format")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="evaluate the recovery conditions")
    p.add_argument("--instance", required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--c0", type=float, default=DEFAULT_C0)
    p.add_argument("--c1", type=float, default=DEFAULT_C1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="solve the SDP with ADMM")
    p.add_argument("--instance", required=True)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="dstar")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True, help="output prefix (.bin and .json)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cluster", help="round a solution or run a method end to end")
    p.add_argument("--xhat")
    p.add_argument("--r", type=int)
    p.add_argument("--truth", help="instance file holding the planted labels")
    p.add_argument("--instance")
    p.add_argument("--method", choices=[m.value for m in Method], default="dstar")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c1", type=float, default=0.25)
    p.add_argument("--regularizer", type=float)
    p.add_argument("--ratio-cap", type=float)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix (.csv labels and .json report)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("certify", help="build and check the optimality witness")
    p.add_argument("--instance", required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c1", type=float, default=DEFAULT_C1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("audit", help="concentration-bound violation frequencies")
    p.add_argument("--config", required=True, help="JSON model parameters")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="run a parameter sweep")
    p.add_argument("--config")
    p.add_argument("--preset", help="built-in sweep, e.g. fig4-shape")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int)
    p.add_argument("--tuning", choices=["oracle", "heuristic"])
    p.add_argument("--trials", type=int)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="summary table and figures from results.csv")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
