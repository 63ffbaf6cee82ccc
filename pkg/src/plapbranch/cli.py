"""Command line entry point: solve, eig, torsion, trace, verify.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 numerical failure.
"""
import argparse
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import config, io, verify
from .branch import BranchError, QuadratureError, predict_case, trace_branch
from .localmap import LARGE, SMALL, T, barriers
from .plap import SolverError
from .spectral import InstructingCallerToUseTorsionOnly, first_eigenpair, torsion

log = logging.getLogger("plapbranch")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("PLAPBRANCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise config.ConfigError(f"PLAPBRANCH_THREADS must be an integer, got {env!r}")
    return 1


def _out_dir(args, cfg):
    out = Path(args.out) if args.out else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pick_barriers(cfg, alpha):
    """Barrier pair for the solve output: the valid regime if any, else by alpha."""
    try:
        eig = first_eigenpair(cfg.spec, cfg.mesh)
    except InstructingCallerToUseTorsionOnly:
        return None
    tor = torsion(cfg.spec, cfg.mesh)
    sets = [barriers(cfg.spec, cfg.mesh, eig, tor, alpha, reg, invert=cfg.invert_barriers)
            for reg in (SMALL, LARGE)]
    valid = [b for b in sets if b.valid]
    if valid:
        return valid[0]
    return sets[0] if alpha <= 1 else sets[1]


def cmd_solve(cfg, args):
    alpha = args.alpha if args.alpha is not None else cfg.alpha
    if not alpha > 0:
        raise config.ConfigError(f"--alpha must be positive, got {alpha}")
    u, rep = T(cfg.spec, cfg.mesh, alpha, ladder_tol=cfg.ladder_tol, newton_tol=cfg.newton_tol)
    bars = _pick_barriers(cfg, alpha)
    nan = np.full(cfg.mesh.size, math.nan)
    lower = bars.lower.values if bars else nan
    upper = bars.upper.values if bars else nan
    out = _out_dir(args, cfg)
    io.write_csv(out / "solution.csv", ("x", "u", "lower_barrier", "upper_barrier"),
                 zip(cfg.mesh.nodes, u.values, lower, upper))
    meta = {"alpha": alpha, "sup_norm": u.sup, "mesh": cfg.mesh.describe(), "report": rep.summary()}
    if bars:
        meta["barriers"] = {"regime": bars.regime, "valid": bars.valid, "q": bars.q, "l": bars.l,
                            "t": bars.t, "alpha0": bars.alpha0, "alpha_inf": bars.alpha_inf}
    else:
        meta["barriers"] = None
    io.write_json(out / "solution.json", meta)
    print(f"alpha={alpha:g} sup|u|={u.sup:.6g} iterations={rep.iterations} "
          f"residual={rep.final_residual:.3g} -> {out / 'solution.csv'}")
    return EXIT_OK


def cmd_eig(cfg, args):
    try:
        eig = first_eigenpair(cfg.spec, cfg.mesh)
    except InstructingCallerToUseTorsionOnly as exc:
        raise config.ConfigError(str(exc)) from None
    out = _out_dir(args, cfg)
    io.write_csv(out / "eigen.csv", ("x", "phi1", "H1"),
                 zip(cfg.mesh.nodes, eig.phi1.values, eig.weight_H1.values))
    io.write_json(out / "eigen.json", {
        "lambda1": eig.lambda1, "iterations": eig.iterations,
        "rayleigh_residual": eig.rayleigh_residual(cfg.spec.p), "mesh": cfg.mesh.describe(),
        "min_phi_over_distance": eig.distance_ratio()})
    print(f"lambda1={eig.lambda1:.10g} iterations={eig.iterations} -> {out / 'eigen.csv'}")
    return EXIT_OK


def cmd_torsion(cfg, args):
    tor = torsion(cfg.spec, cfg.mesh)
    out = _out_dir(args, cfg)
    io.write_csv(out / "torsion.csv", ("x", "e", "H2"),
                 zip(cfg.mesh.nodes, tor.e_field.values, tor.weight_H2.values))
    io.write_json(out / "torsion.json", {"sup_e": tor.e_field.sup, "mesh": cfg.mesh.describe()})
    print(f"sup e={tor.e_field.sup:.10g} -> {out / 'torsion.csv'}")
    return EXIT_OK


def cmd_trace(cfg, args):
    sw = cfg.sweep
    br = trace_branch(cfg.spec, cfg.mesh, sw.alpha_min, sw.alpha_max, sw.K,
                      ladder_tol=cfg.ladder_tol, newton_tol=cfg.newton_tol,
                      threads=_threads(args))
    predicted = predict_case(cfg.spec)
    extra = {"predicted_case": predicted, "prediction_available": predicted is not None,
             "matches_prediction": None if predicted is None else predicted == br.case_label}
    out = _out_dir(args, cfg)
    csv_path, _ = io.write_branch(br, out, extra)
    star = "" if br.lambda_star is None else f" lambda*={br.lambda_star:.10g}"
    print(f"{br.case_label}{star} points={len(br.points)} -> {csv_path}")
    return EXIT_OK


def cmd_verify(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    res = verify.run_all(cfg, threads=_threads(args))
    out = _out_dir(args, cfg)
    io.write_json(out / "verify.json", res)
    for name in verify.SUITES:
        print(f"{name:15s} {res[name]['status']}")
    return EXIT_OK if res["passed"] else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "eig": cmd_eig, "torsion": cmd_torsion,
            "trace": cmd_trace, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="plapbranch",
                                 description="Branches of nonlocal singular p-Laplacian problems")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $PLAPBRANCH_THREADS or 1)")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized suites")
        if name == "solve":
            sp.add_argument("--alpha", type=float, default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BranchError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
