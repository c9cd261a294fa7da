"""Command-line front end.

Exit codes: 0 property holds / feasible, 1 refuted / infeasible,
2 unknown (budget exhausted), 64 usage, 65 bad input data, 66 missing
input, 74 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blocks import (BlockStructure, Detuning, GainMatrix, assemble_AEK, enumerate_full_selections,
                     enumerate_reduced_selections, full_squared_matrices)
from .conjecture import Distribution, InstanceSpec, run_search
from .dominance import dominance_implies_vl, find_balance_D
from .dus import Sampler, falsify_condition, simulate_static_loop, sweep_condition, theorem2_check
from .errors import (DimensionError, EnumerationCapError, MatrixFileError, NumericalError,
                     PreconditionError)
from .formats import parse_matrix_file
from .gamma import verify_aggregation_identity
from .linalg import Tolerances, eigenvalues, positive_stable
from .lyapunov import Status, find_common_D, find_individual_Ds
from .report import TOOL, dumps, sha256_bytes

EXIT_OK, EXIT_REFUTED, EXIT_UNKNOWN = 0, 1, 2
EX_USAGE, EX_DATAERR, EX_NOINPUT, EX_IOERR = 64, 65, 66, 74

log = logging.getLogger("nsqstab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _status_code(status):
    return {Status.FEASIBLE: EXIT_OK, Status.INFEASIBLE: EXIT_REFUTED, Status.UNKNOWN: EXIT_UNKNOWN}[status]


def _tol(args):
    return Tolerances(eig_tol=args.eig_tol, sym_tol=args.sym_tol, margin_tol=args.margin_tol)


def _load(args):
    path = Path(args.matrix)
    if not path.exists():
        raise FileNotFoundError(str(path))
    data = path.read_bytes()
    args._input_sha256 = sha256_bytes(data)
    return parse_matrix_file(path)


def _verdict_doc(v):
    return {
        "status": v.status.value,
        "d": list(v.certificate.d) if v.certificate else list(v.best_d),
        "margin": v.certificate.margin if v.certificate else None,
        "best_objective": v.best_objective,
        "upper_bound": v.upper_bound,
        "iterations": v.iterations,
    }


def _dus_doc(rep):
    if rep is None:
        return None
    return {
        "verdict": rep.verdict.value,
        "worst_margin": rep.worst_margin,
        "samples_tested": rep.samples_tested,
        "boundary": rep.boundary,
        "witness": _witness_doc(rep.witness),
    }


def _witness_doc(w):
    if w is None:
        return None
    return {"eps": list(w.eps), "subset": list(w.subset), "spectrum": [list(z) for z in w.spectrum],
            "margin": w.margin}


# -- commands -------------------------------------------------------------

def cmd_enum(args, out):
    mf = _load(args)
    s = mf.A.structure
    sels = (enumerate_full_selections(s) if args.k is None
            else enumerate_reduced_selections(s, args.k))
    out(f"groups {s.p}: {len(sels)} selections" + ("" if args.k is None else f" with {args.k} active groups"))
    for sel in sels:
        out(f"  active={sel.active} choice={sel.choice}")
    return EXIT_OK, {"count": len(sels), "selections": [{"active": sel.active, "choice": sel.choice} for sel in sels]}


def cmd_vl(args, out):
    mf = _load(args)
    tol = _tol(args)
    mats = full_squared_matrices(mf.A)
    if args.mode == "sim":
        v = find_common_D(mats, budget=args.budget, tol=tol)
        out(f"simultaneous: {v.status.value}  margin {v.best_objective:.6g}  upper bound {v.upper_bound:.6g}")
        if v.certificate:
            out(f"  d = {list(v.certificate.d)}")
        return _status_code(v.status), {"mode": "sim", "verdict": _verdict_doc(v)}
    verdicts = find_individual_Ds(mats, budget=args.budget, tol=tol)
    for sel, v in zip(enumerate_full_selections(mf.A.structure), verdicts):
        out(f"  choice {sel.choice}: {v.status.value}  margin {v.best_objective:.6g}")
    statuses = [v.status for v in verdicts]
    if all(s is Status.FEASIBLE for s in statuses):
        overall = Status.FEASIBLE
    elif any(s is Status.INFEASIBLE for s in statuses):
        overall = Status.INFEASIBLE
    else:
        overall = Status.UNKNOWN
    out(f"individual: {overall.value}")
    return _status_code(overall), {"mode": "ind", "status": overall.value,
                                   "verdicts": [_verdict_doc(v) for v in verdicts]}


def cmd_dom(args, out):
    mf = _load(args)
    mats = full_squared_matrices(mf.A)
    rep = find_balance_D(mats, budget=args.budget, tol=_tol(args), entrywise_abs=args.entrywise_abs)
    v = rep.verdict
    out(f"balanced dominance: {v.status.value}  margin {v.best_objective:.6g}  upper bound {v.upper_bound:.6g}")
    implied = dominance_implies_vl(mats, rep) if v.feasible else None
    if implied is not None:
        out(f"  Lyapunov LMI at the same D: {'holds' if implied else 'FAILS'}")
    return _status_code(v.status), {"verdict": _verdict_doc(v), "per_matrix_margins": rep.per_matrix_margins,
                                    "diagonal_positive": rep.diagonal_positive, "implies_vl": implied}


def cmd_dus(args, out):
    mf = _load(args)
    tol = _tol(args)
    K = mf.K or GainMatrix.ones(mf.A.structure)
    rep = sweep_condition(mf.A, K, Sampler(n_samples=args.samples, seed=args.seed), tol)
    witness = None
    if args.falsify_budget:
        witness = falsify_condition(mf.A, K, budget=args.falsify_budget, seed=args.seed, tol=tol)
    refuted = (not rep.holds) or witness is not None
    out(f"condition: {'REFUTED' if refuted else 'HOLDS-ON-SAMPLES'}  worst margin {rep.worst_margin:.6g} "
        f"over {rep.samples_tested} detunings")
    w = rep.witness if not rep.holds else witness
    if refuted and w is not None:
        out(f"  witness eps={list(w.eps)} subset={w.subset} min Re = {w.margin:.6g}")
    return (EXIT_REFUTED if refuted else EXIT_OK), {"sweep": _dus_doc(rep), "falsifier_witness": _witness_doc(witness)}


def cmd_gamma_verify(args, out):
    mf = _load(args)
    s = mf.A.structure
    K = mf.K or GainMatrix.ones(s)
    E = mf.E or Detuning.ones(s)
    chk = verify_aggregation_identity(mf.A, E, K)
    ok = chk.residual <= args.residual_tol
    out(f"aggregation residual {chk.residual:.3e} ({'ok' if ok else 'FAIL'}); "
        f"without column factors {chk.literal_residual:.3e}")
    return (EXIT_OK if ok else EXIT_REFUTED), {
        "residual": chk.residual, "residual_tol": args.residual_tol, "d_used": chk.d_used,
        "scaling": chk.scaling, "anchor": chk.anchor, "literal_residual": chk.literal_residual}


def cmd_theorem2(args, out):
    mf = _load(args)
    res = theorem2_check(mf.A, _tol(args), Sampler(n_samples=args.samples, seed=args.seed),
                         falsify_budget=args.falsify_budget)
    for h in res.hypotheses:
        out(f"  choice {h['choice']}: normal={h['normal']} class_F={h['class_F']} "
            f"positive_stable={h['positive_stable']}")
    doc = {"hypotheses": list(res.hypotheses), "hypotheses_hold": res.hypotheses_hold}
    if not res.hypotheses_hold:
        out("hypotheses rejected")
        return EXIT_REFUTED, doc
    p = res.pipeline
    doc["certificate"] = _verdict_doc(p.certificate)
    doc["conclusion"] = _dus_doc(p.dus)
    doc["falsifier_witness"] = _witness_doc(p.falsifier_witness)
    if p.dus is None:
        out(f"hypotheses hold but common-D search is {p.certificate.status.value}")
        return _status_code(p.certificate.status), doc
    ok = p.dus.holds and p.falsifier_witness is None
    out(f"conclusion: {'HOLDS-ON-SAMPLES' if ok else 'REFUTED'}  worst margin {p.dus.worst_margin:.6g}")
    return (EXIT_OK if ok else EXIT_REFUTED), doc


def cmd_conjecture(args, out):
    structure = BlockStructure(tuple(args.groups))
    spec = InstanceSpec(structure, Distribution(args.distribution), args.scale, args.seed,
                        require_individual_vl=True, max_retries=args.max_retries)
    res = run_search(spec, args.budget, args.falsify_budget, args.random_k, args.archive, args.jobs, _tol(args))
    out(f"searched {res.instances_tested} instances ({res.instances_skipped} skipped): "
        f"{len(res.candidates)} candidates")
    for c in res.candidates:
        out(f"  instance {c.index}: margin {c.violation_margin:.6g} subset {c.witness_subset} hash {c.matrix_hash[:16]}")
    doc = {"instances_tested": res.instances_tested, "instances_skipped": res.instances_skipped,
           "candidates": [c.to_document() for c in res.candidates],
           "scope": "all-ones gain searched; no candidate is evidence, not proof"}
    if args.budget == 0 or res.instances_tested == 0:
        return EXIT_UNKNOWN, doc
    return (EXIT_REFUTED if res.candidates else EXIT_OK), doc


def cmd_demo(args, out):
    mf = _load(args)
    s = mf.A.structure
    K = mf.K or GainMatrix.ones(s)
    E = mf.E or Detuning.ones(s)
    x0 = np.ones(s.m) if args.x0 is None else np.array(args.x0, dtype=float)
    M = assemble_AEK(mf.A, E, K)
    sim = simulate_static_loop(mf.A, E, K, x0, args.dt, args.t)
    stable = positive_stable(M, _tol(args))
    out(f"|e(T)|/|e(0)| = {sim.final_ratio:.6g}  decays={sim.decays}  diverged={sim.diverged}  "
        f"spectrum positive-stable={stable}")
    doc = {"final_ratio": sim.final_ratio, "decays": sim.decays, "diverged": sim.diverged,
           "positive_stable": stable,
           "spectrum": [[float(z.real), float(z.imag)] for z in sorted(eigenvalues(M), key=lambda z: (z.real, z.imag))]}
    return (EXIT_OK if sim.decays else EXIT_REFUTED), doc


# -- plumbing -------------------------------------------------------------

def _group_list(text):
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated group sizes, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("group sizes must be positive")
    return vals


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--report", metavar="PATH", help="write a machine-readable JSON report")
    common.add_argument("--eig-tol", type=float, default=1e-9)
    common.add_argument("--sym-tol", type=float, default=1e-9)
    common.add_argument("--margin-tol", type=float, default=1e-8)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="nsqstab", description="Stability certificates for block-structured non-square matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enum", parents=[common], help="list squared-matrix selections")
    p.add_argument("matrix")
    p.add_argument("--k", type=int, default=None, help="number of active groups (default: all)")
    p.set_defaults(func=cmd_enum)

    p = sub.add_parser("vl", parents=[common], help="Volterra-Lyapunov diagonal stability")
    p.add_argument("matrix")
    p.add_argument("--mode", choices=["sim", "ind"], default="sim")
    p.add_argument("--budget", type=_nonneg, default=5000)
    p.set_defaults(func=cmd_vl)

    p = sub.add_parser("dom", parents=[common], help="simultaneous positive diagonally balanced dominance")
    p.add_argument("matrix")
    p.add_argument("--budget", type=_nonneg, default=5000)
    p.add_argument("--abs", dest="entrywise_abs", action="store_true",
                   help="measure dominance on |AD| + |DA^T|")
    p.set_defaults(func=cmd_dom)

    p = sub.add_parser("dus", parents=[common], help="check the DUS eigenvalue condition")
    p.add_argument("matrix")
    p.add_argument("--samples", type=_nonneg, required=True)
    p.add_argument("--seed", type=_nonneg, required=True)
    p.add_argument("--falsify-budget", type=_nonneg, default=0)
    p.set_defaults(func=cmd_dus)

    p = sub.add_parser("gamma-verify", parents=[common], help="check the gamma aggregation identity")
    p.add_argument("matrix")
    p.add_argument("--residual-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_gamma_verify)

    p = sub.add_parser("theorem2", parents=[common], help="normal class-F hypotheses and conclusion")
    p.add_argument("matrix")
    p.add_argument("--samples", type=_nonneg, default=100)
    p.add_argument("--seed", type=_nonneg, required=True)
    p.add_argument("--falsify-budget", type=_nonneg, default=500)
    p.set_defaults(func=cmd_theorem2)

    p = sub.add_parser("conjecture", parents=[common], help="counterexample search")
    p.add_argument("--groups", type=_group_list, default=[2, 2, 2], help="group sizes, e.g. 2,2,2")
    p.add_argument("--distribution", choices=[d.value for d in Distribution], default="uniform")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--budget", type=_nonneg, required=True, help="number of instances")
    p.add_argument("--seed", type=_nonneg, required=True)
    p.add_argument("--falsify-budget", type=_nonneg, default=500)
    p.add_argument("--random-k", type=_nonneg, default=0, help="extra random positive gains per candidate")
    p.add_argument("--max-retries", type=int, default=200)
    p.add_argument("--archive", metavar="PATH", help="append candidates here, one JSON document per line")
    p.set_defaults(func=cmd_conjecture)

    p = sub.add_parser("demo", parents=[common], help="simulate the static integral loop")
    p.add_argument("matrix")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x0", type=float, nargs="+", default=None)
    p.set_defaults(func=cmd_demo)
    return parser


def _config(args):
    skip = {"func", "_input_sha256", "verbose", "report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run_command(argv=None, stdout=None) -> int:
    """Run one CLI invocation and return its exit code."""
    stdout = sys.stdout if stdout is None else stdout

    def out(line):
        print(line, file=stdout)

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("nsqstab: --jobs must be >= 1", file=sys.stderr)
        return EX_USAGE
    args._input_sha256 = None
    try:
        code, result = args.func(args, out)
    except FileNotFoundError as exc:
        print(f"nsqstab: no such file: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except (MatrixFileError, DimensionError, PreconditionError, EnumerationCapError, ValueError) as exc:
        print(f"nsqstab: {exc}", file=sys.stderr)
        return EX_DATAERR
    except NumericalError as exc:
        print(f"nsqstab: numerical failure: {exc}", file=sys.stderr)
        return EX_DATAERR
    except OSError as exc:
        print(f"nsqstab: I/O error: {exc}", file=sys.stderr)
        return EX_IOERR
    if args.report:
        doc = {
            "tool": TOOL,
            "version": __version__,
            "command": args.command,
            "config": _config(args),
            "input_sha256": args._input_sha256,
            "exit_code": code,
            "result": result,
        }
        try:
            Path(args.report).write_text(dumps(doc) + "\n", encoding="utf-8")
        except OSError as exc:
            print(f"nsqstab: cannot write report: {exc}", file=sys.stderr)
            return EX_IOERR
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
