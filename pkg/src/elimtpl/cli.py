"""Command-line front end: generate plans, solve instances, sweep benchmarks,
verify plans.  All commands are deterministic under --seed.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from .arith import PrimeField, RealField
from .plan import SolverPlan
from .problems import builtin_fixtures, parse_problem
from .templategen import (
    GenerateOptions,
    GenerationFailed,
    Template,
    generate,
    verify_template,
)
from . import solverun


def _load_problem(ref):
    if os.path.exists(ref):
        with open(ref) as fh:
            return parse_problem(fh.read(), name=os.path.splitext(os.path.basename(ref))[0])
    fixtures = builtin_fixtures()
    if ref in fixtures:
        return fixtures[ref]
    raise SystemExit("problem %r: no such file or built-in fixture" % ref)


def _actions_arg(value):
    if value == "all":
        return "all"
    if value.startswith("recip:"):
        return ("recip", value.split(":", 1)[1])
    return [v for v in value.split(",") if v]


def _options_from_args(args):
    return GenerateOptions(
        orderings=args.orderings,
        bases=args.bases,
        actions=_actions_arg(args.action),
        redundancy=args.redundancy,
        use_schur=args.schur,
        seed=args.seed,
        verify_instances=args.verify_trials,
        jobs=args.jobs,
        require_pivoting=args.pivoting,
    )


def _add_sweep_flags(p):
    p.add_argument("--ordering", choices=["grevlex", "weighted"], default="grevlex",
                   help="ordering family for the primary candidate")
    p.add_argument("--weights", type=int, nargs="+", default=None,
                   help="weight vector for a single weighted ordering")
    p.add_argument("--orderings", type=int, default=1,
                   help="number of monomial orderings to sample")
    p.add_argument("--bases", type=int, default=0,
                   help="number of sampled non-standard bases")
    p.add_argument("--action", default="all",
                   help="'all', comma-separated variables, or recip:<var>")
    p.add_argument("--redundancy", type=int, default=0,
                   help="extra monomials beyond d for sampled bases")
    p.add_argument("--schur", action="store_true",
                   help="apply the Schur complement reduction to constant polynomials")
    p.add_argument("--pivoting", action="store_true",
                   help="only accept plans usable with column pivoting")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--verify-trials", type=int, default=3)


def _apply_single_weighted(problem, args, options):
    if args.ordering == "weighted" and args.weights:
        if len(args.weights) != problem.nvars:
            raise SystemExit("--weights needs %d entries" % problem.nvars)
        from .poly import MonomialOrdering

        options.forced_orderings = [MonomialOrdering.weighted(tuple(args.weights))]
    return options


def cmd_generate(args):
    problem = _load_problem(args.problem)
    options = _apply_single_weighted(problem, args, _options_from_args(args))
    plan, records = generate(problem, options)
    plan.save(args.output)
    s, n = plan.size
    print("plan: %dx%d  basis=%d monomials  action=%s%s  strategy candidates=%d" % (
        s, n, len(plan.basis),
        "recip " if plan.reciprocal else "",
        _mono_str(plan.action, plan.var_names), len(records)))
    print("written to", args.output)
    return 0


def _mono_str(m, names):
    from .poly import mono_format

    return mono_format(m, names)


def cmd_solve(args):
    plan = SolverPlan.load(args.plan)
    slots = solverun.load_slots(args.slots)
    try:
        sols = solverun.solve(plan, slots, pivoting=args.pivoting)
    except solverun.IllConditioned as exc:
        print("solve failed:", exc, file=sys.stderr)
        return 2
    if args.filter:
        clauses = solverun.parse_filters(args.filter, plan.var_names)
        sols = solverun.filter_roots(sols, clauses, tau_im=args.tau_im)
    header = "  ".join("%14s" % v for v in plan.var_names)
    print(header + "  %12s" % "residual")
    for pt, res in zip(sols.points, sols.residuals):
        cells = []
        for z in pt:
            if abs(z.imag) <= args.tau_im * (1 + abs(z.real)):
                cells.append("%14.8g" % z.real)
            else:
                cells.append("%14s" % ("%.5g%+.5gi" % (z.real, z.imag)))
        print("  ".join(cells) + "  %12.3e" % res)
    if args.filter and len(sols) == 0:
        print("no feasible roots", file=sys.stderr)
        return 2
    return 0


def cmd_bench(args):
    problem = _load_problem(args.problem)
    options = _options_from_args(args)
    try:
        plan, records = generate(problem, options)
        best = "%dx%d" % plan.size
    except GenerationFailed as exc:
        records = exc.diagnostics
        best = "none"
    fields = [
        "candidate", "kind", "ordering", "action", "d", "s_param", "n_param",
        "s_rowwise", "n_rowwise", "s_columnwise", "n_columnwise", "strategy",
        "s_schur", "n_schur", "s_prune", "n_prune", "verified", "ms",
    ]
    rows = []
    for i, rec in enumerate(records):
        stage = {st.name: (st.s, st.n) for st in rec.stages}
        row = {
            "candidate": i,
            "kind": rec.kind,
            "ordering": rec.ordering_desc,
            "action": _mono_str(rec.action, problem.var_names),
            "d": rec.d,
            "strategy": rec.strategy,
            "verified": int(rec.verified),
            "ms": "%.1f" % rec.ms,
        }
        for name in ("param", "rowwise", "columnwise", "schur", "prune"):
            key = "parameterized" if name == "param" else name
            s_n = stage.get(key)
            row["s_" + name] = s_n[0] if s_n else ""
            row["n_" + name] = s_n[1] if s_n else ""
        rows.append(row)
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    sizes = [
        r["s_prune"] * r["n_prune"] for r in rows if r["verified"] and r["s_prune"] != ""
    ]
    print("bench: %d candidates, best plan %s" % (len(rows), best))
    if sizes:
        q = np.quantile(sizes, [0.0, 0.5, 1.0])
        print("s*n after prune: min=%d median=%d max=%d" % (q[0], q[1], q[2]))
    print("report written to", args.output)
    return 0


def cmd_verify(args):
    plan = SolverPlan.load(args.plan)
    problem = _load_problem(args.problem)
    if [list(t) for t in plan.poly_templates] != [list(t) for t in problem.polys]:
        print("plan and problem polynomial templates differ", file=sys.stderr)
        return 1
    plan.structural_check()
    print("structural checks passed (%dx%d template)" % plan.size)
    if args.trials == 0:
        return 0
    field = PrimeField(plan.field_p) if plan.field_p else PrimeField()
    shim = Template(
        rows=plan.rows,
        cols_E=plan.cols_E,
        cols_R=plan.cols_R,
        cols_B=plan.cols_B,
        basis=None,
    )
    if plan.schur is not None:
        from .templategen import SchurInfo

        shim.schur = SchurInfo(
            acols=plan.schur.acols, fstar_rows=plan.schur.fstar_rows, K=plan.schur.K
        )
    residuals = []
    for t in range(args.trials):
        seed = args.seed + t
        F, _ = problem.random_instance(field, seed=seed, ordering=plan.ordering)
        res = verify_template(shim, F)
        if not res:
            print("Z/p verification failed at seed %d: %s" % (seed, res.reason), file=sys.stderr)
            return 1
        _, env = problem.random_instance(RealField(), seed=seed)
        try:
            sols = solverun.solve(plan, env, pivoting=args.pivoting)
        except solverun.IllConditioned as exc:
            print("real solve failed at seed %d: %s" % (seed, exc), file=sys.stderr)
            return 1
        residuals.append(np.median(sols.residuals))
    print(
        "verified %d instances: median residual %.3e, max %.3e"
        % (args.trials, float(np.median(residuals)), float(np.max(residuals)))
    )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="elimtpl",
        description="Elimination-template generator and action-matrix solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build the smallest verified solver plan")
    g.add_argument("problem", help="problem file or built-in fixture name")
    g.add_argument("-o", "--output", required=True)
    _add_sweep_flags(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a plan on a coefficient-slot file")
    s.add_argument("plan")
    s.add_argument("slots")
    s.add_argument("--filter", action="append", default=[],
                   help="feasibility clauses, e.g. 'real(x), x>0, -1<=y<=1'")
    s.add_argument("--pivoting", action="store_true")
    s.add_argument("--tau-im", type=float, default=1e-6)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="sweep candidates and write a CSV report")
    b.add_argument("problem")
    b.add_argument("-o", "--output", required=True)
    _add_sweep_flags(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="re-verify a plan against its problem")
    v.add_argument("plan")
    v.add_argument("problem")
    v.add_argument("--trials", type=int, default=5)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--pivoting", action="store_true")
    v.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
