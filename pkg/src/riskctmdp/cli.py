"""Command-line front end.

Exit codes: 0 success, 1 domain violation (invalid model, failed
cross-check), 2 usage or I/O error, 3 solved but some states diverged.

Defaults for ``--tol``, ``--max-iter``, ``--divergence-cap`` and
``--tie-tol`` can be overridden with the environment variables
``RISKCTMDP_TOL``, ``RISKCTMDP_MAX_ITER``, ``RISKCTMDP_DIVERGENCE_CAP``
and ``RISKCTMDP_TIE_TOL``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import fileio
from .model import InvalidModelError, ModelStructureError, rat_example, validate_model
from .pipeline import (
    compare,
    comparison_to_dict,
    format_comparison,
    format_table,
    result_to_dict,
    solve,
)
from .simulator import (
    DEFAULT_IMPULSE_CAP,
    DEFAULT_JUMP_CAP,
    estimate_utility,
    format_trace,
    simulate_path,
)
from .solver import DEFAULT_DIVERGENCE_CAP, DEFAULT_MAX_ITER, DEFAULT_TIE_TOL, DEFAULT_TOL

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class _Usage(Exception):
    pass


def _env(name, default, cast):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise _Usage(f"environment variable {name}={raw!r} is not a valid {cast.__name__}")


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path):
    try:
        return fileio.load_model(path)
    except ModelStructureError as e:
        raise fileio.ParseError(str(e), str(path)) from None


def cmd_validate(args):
    model = _load(args.model)
    violations = validate_model(model)
    if args.format == "json":
        _emit(fileio.dumps({"valid": not violations,
                            "violations": [{"kind": v.kind, "index": list(v.index),
                                            "magnitude": v.magnitude, "message": v.message}
                                           for v in violations]}), None)
    elif violations:
        for v in violations:
            where = (f"state {model.state_names[v.index[0]]}"
                     if v.kind == "bounding_function" else str(v.index))
            print(f"{v.kind} at {where}: {v.message}")
    else:
        print(f"{args.model}: valid ({model.n_states} states, {model.n_gradual} gradual, "
              f"{model.n_impulse} impulse actions)")
    return EXIT_DOMAIN if violations else EXIT_OK


def _solve_kwargs(args):
    return dict(abs_tol=args.tol, max_iter=args.max_iter,
                divergence_cap=args.divergence_cap, tie_tol=args.tie_tol)


def cmd_solve(args):
    model = _load(args.model)
    res = solve(model, **_solve_kwargs(args))
    if args.format == "json":
        _emit(fileio.dumps(result_to_dict(res)), args.out)
    else:
        _emit(format_table(res), args.out)
        if args.json_out:
            Path(args.json_out).write_text(fileio.dumps(result_to_dict(res)))
    return EXIT_DIVERGED if res.solution.diverged.any() else EXIT_OK


def cmd_simulate(args):
    model = _load(args.model)
    if args.from_solve:
        policy = solve(model, **_solve_kwargs(args)).policy
    elif args.policy:
        policy = fileio.policy_from_dict(fileio.load_json(args.policy), model)
    else:
        raise _Usage("either --policy FILE or --from-solve is required")
    if not 0 <= args.x0 < model.n_states:
        raise _Usage(f"--x0 {args.x0} is not a state")
    rep = estimate_utility(model, policy, args.x0, args.paths, args.seed, args.horizon,
                           args.impulse_cap, args.jump_cap, args.workers)
    if args.trace:
        chunks = [f"# path {i}\n" + format_trace(
            simulate_path(model, policy, args.x0, args.seed, rep.horizon, args.impulse_cap,
                          args.jump_cap, path_index=i), model)
            for i in range(args.trace_paths)]
        Path(args.trace).write_text("".join(chunks))
    doc = {"estimate": rep.estimate, "std_error": rep.std_error, "n_paths": rep.n_paths,
           "terminations": rep.terminations,
           "truncation_bias_bound": rep.truncation_bias_bound, "horizon": rep.horizon,
           "seed": rep.master_seed, "x0": args.x0}
    doc.update(fileio.policy_to_dict(policy, model))
    if args.format == "json":
        _emit(fileio.dumps(doc), args.out)
    else:
        lines = [f"estimate of E[exp(total cost)] from {model.state_names[args.x0]}: "
                 f"{rep.estimate:.8g} +/- {rep.std_error:.3g} (1 s.e.)",
                 f"paths: {rep.n_paths}  seed: {rep.master_seed}  horizon: {rep.horizon:g}",
                 "terminations: " + ", ".join(f"{k}={v}" for k, v in rep.terminations.items()),
                 rep.lower_bound_note]
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_compare(args):
    model = _load(args.model)
    c = compare(model, args.x0, args.paths, args.seed, args.horizon, args.oracle_tol,
                args.sigmas, args.enumeration_cap, args.workers, **_solve_kwargs(args))
    if args.format == "json":
        _emit(fileio.dumps(comparison_to_dict(c)), args.out)
    else:
        _emit(format_comparison(c), args.out)
    return EXIT_OK if c.ok else EXIT_DOMAIN


def cmd_example(args):
    try:
        model = rat_example(args.mu, args.l, args.p, args.C)
    except ValueError as e:
        raise _Usage(str(e))
    text = fileio.dumps(fileio.model_to_dict(model))
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskctmdp",
                                description="Risk-sensitive gradual-impulse CTMDP solver")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp):
        sp.add_argument("--format", choices=("table", "json"), default="table")
        sp.add_argument("--out", help="write the report here instead of stdout")

    def solver_flags(sp):
        sp.add_argument("--tol", type=float, default=_env("RISKCTMDP_TOL", DEFAULT_TOL, float))
        sp.add_argument("--max-iter", type=int,
                        default=_env("RISKCTMDP_MAX_ITER", DEFAULT_MAX_ITER, int))
        sp.add_argument("--divergence-cap", type=float,
                        default=_env("RISKCTMDP_DIVERGENCE_CAP", DEFAULT_DIVERGENCE_CAP, float))
        sp.add_argument("--tie-tol", type=float,
                        default=_env("RISKCTMDP_TIE_TOL", DEFAULT_TIE_TOL, float))

    def sim_flags(sp):
        sp.add_argument("--x0", type=int, default=0, help="initial state index")
        sp.add_argument("--paths", type=int, default=10_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--horizon", type=float, default=None,
                        help="default: chosen so under 0.1%% of paths are still running")
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("validate", help="check a model file")
    sp.add_argument("model")
    sp.add_argument("--format", choices=("table", "json"), default="table")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="value iteration, optimal policy and residuals")
    sp.add_argument("model")
    solver_flags(sp)
    fmt(sp)
    sp.add_argument("--json-out", help="also write the structured report here")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="Monte Carlo estimate under a policy")
    sp.add_argument("model")
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--policy", help="policy document (a solve report also works)")
    grp.add_argument("--from-solve", action="store_true", help="use the solver's policy")
    solver_flags(sp)
    sim_flags(sp)
    sp.add_argument("--impulse-cap", type=int, default=DEFAULT_IMPULSE_CAP)
    sp.add_argument("--jump-cap", type=int, default=DEFAULT_JUMP_CAP)
    sp.add_argument("--trace", help="write per-event path traces here")
    sp.add_argument("--trace-paths", type=int, default=1)
    fmt(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="value iteration vs brute force vs Monte Carlo")
    sp.add_argument("model")
    solver_flags(sp)
    sim_flags(sp)
    sp.add_argument("--oracle-tol", type=float, default=1e-7)
    sp.add_argument("--sigmas", type=float, default=3.0)
    sp.add_argument("--enumeration-cap", type=int, default=10**6)
    fmt(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("example", help="write a built-in example model")
    sp.add_argument("name", choices=("rat",))
    sp.add_argument("--mu", type=float, default=2.0)
    sp.add_argument("--l", type=float, default=1.0)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--C", type=float, default=0.1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (fileio.ParseError, _Usage) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
