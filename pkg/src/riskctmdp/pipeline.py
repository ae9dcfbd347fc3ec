"""End-to-end workflows: solve a model, cross-check it, and report."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fileio import policy_to_dict
from .model import CtmdpModel
from .oracle import ENUMERATION_CAP, EnumerationTooLarge, brute_force_value
from .simulator import SimulationReport, estimate_utility, utility_second_moment
from .solver import (
    DEFAULT_DIVERGENCE_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TIE_TOL,
    DEFAULT_TOL,
    ResidualReport,
    StationaryPolicy,
    ValueSolution,
    extract_policy,
    value_iterate,
    verify_optimality,
)
from .tilde import TildeModel, build_tilde

__all__ = ["SolveResult", "solve", "format_table", "result_to_dict",
           "Comparison", "compare", "format_comparison", "comparison_to_dict"]


@dataclass
class SolveResult:
    model: CtmdpModel
    tilde: TildeModel
    solution: ValueSolution
    policy: StationaryPolicy
    residuals: ResidualReport
    seconds: float


def solve(model: CtmdpModel, abs_tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          divergence_cap: float = DEFAULT_DIVERGENCE_CAP, tie_tol: float = DEFAULT_TIE_TOL,
          residual_tol: float = 1e-8) -> SolveResult:
    """Reduce, iterate, extract a conserving policy and check residuals."""
    start = time.perf_counter()
    tilde = build_tilde(model)
    sol = value_iterate(tilde, abs_tol, max_iter, divergence_cap)
    policy = extract_policy(tilde, sol.V, tie_tol)
    residuals = verify_optimality(model, sol.V, residual_tol)
    return SolveResult(model, tilde, sol, policy, residuals, time.perf_counter() - start)


def _num(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return float(v)


def format_table(res: SolveResult) -> str:
    m, sol, r = res.model, res.solution, res.residuals
    labels = res.policy.labels(m)
    head = f"{'state':<10}{'V':>18}  {'status':<9}{'rA':>13}{'rB':>13}  {'set':<8}action"
    lines = [head, "-" * len(head)]
    for x in range(m.n_states):
        status = "diverged" if sol.diverged[x] else "ok"
        v = "inf" if sol.diverged[x] else f"{sol.V[x]:.10f}"
        rA = "-" if np.isnan(r.gradual_residual[x]) else f"{r.gradual_residual[x]:.3e}"
        rB = "-" if np.isnan(r.impulse_residual[x]) else f"{r.impulse_residual[x]:.3e}"
        act = labels[x] + (" (untrusted)" if sol.diverged[x] else "")
        lines.append(f"{m.state_names[x]:<10}{v:>18}  {status:<9}{rA:>13}{rB:>13}  "
                     f"{r.membership(x):<8}{act}")
    lines.append("")
    lines.append(f"status: {sol.status.value}  iterations: {sol.iterations}  "
                 f"last delta: {sol.sup_norm_delta:.3e}  time: {res.seconds:.3f}s")
    lines.append(f"optimality relations hold (tol {r.tol:g}): {r.ok}")
    return "\n".join(lines) + "\n"


def result_to_dict(res: SolveResult) -> dict:
    m, sol, r = res.model, res.solution, res.residuals
    doc = {
        "status": sol.status.value,
        "iterations": sol.iterations,
        "sup_norm_delta": sol.sup_norm_delta,
        "seconds": res.seconds,
        "states": list(m.state_names),
        "V": [_num(v) for v in sol.V],
        "diverged_states": sol.diverged_states,
        "residuals": {
            "tol": r.tol,
            "gradual": [_num(v) for v in r.gradual_residual],
            "impulse": [_num(v) for v in r.impulse_residual],
            "X_G": [int(x) for x in np.flatnonzero(r.in_gradual_set)],
            "X_I": [int(x) for x in np.flatnonzero(r.in_impulse_set)],
            "ok": r.ok,
        },
    }
    doc.update(policy_to_dict(res.policy, m))
    return doc


@dataclass
class Comparison:
    solved: SolveResult
    oracle: Optional[np.ndarray]
    oracle_note: str
    simulation: Optional[SimulationReport]
    x0: int
    oracle_tol: float
    mc_sigmas: float
    checks: dict = field(default_factory=dict)
    mc_note: str = ""

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def compare(model: CtmdpModel, x0: int = 0, n_paths: int = 10_000, seed: int = 0,
            horizon: Optional[float] = None, oracle_tol: float = 1e-7,
            mc_sigmas: float = 3.0, enumeration_cap: int = ENUMERATION_CAP,
            workers: int = 1, **solve_kwargs) -> Comparison:
    """Value iteration against brute force and against Monte Carlo at ``x0``."""
    res = solve(model, **solve_kwargs)
    V = res.solution.V
    tol = solve_kwargs.get("abs_tol", DEFAULT_TOL)
    checks = {}
    try:
        orc = brute_force_value(res.tilde, abs_tol=tol, cap=enumeration_cap).V
        note = "ok"
        both = np.isfinite(V) & np.isfinite(orc)
        checks["vi_vs_oracle"] = bool(np.all(np.isinf(V) == np.isinf(orc))
                                      and np.all(np.abs(V[both] - orc[both]) <= oracle_tol))
    except EnumerationTooLarge as e:
        orc, note = None, f"skipped ({e.count} policies)"
    sim = None
    mc_note = "skipped (infinite value)"
    if np.isfinite(V[x0]):
        sim = estimate_utility(model, res.policy, x0, n_paths, seed, horizon, workers=workers)
        if np.isfinite(utility_second_moment(model, res.policy)[x0]):
            allowance = mc_sigmas * sim.std_error + sim.truncation_bias_bound
            checks["vi_vs_mc"] = bool(abs(sim.estimate - V[x0]) <= allowance)
            mc_note = "ok"
        else:
            # the standard error of a variance-free sample mean says nothing
            mc_note = "not checked (exp(total cost) has infinite variance)"
    return Comparison(res, orc, note, sim, x0, oracle_tol, mc_sigmas, checks, mc_note)


def format_comparison(c: Comparison) -> str:
    m = c.solved.model
    V = c.solved.solution.V
    lines = [f"{'state':<10}{'value iteration':>20}{'brute force':>20}{'monte carlo':>20}"
             f"{'d(vi,bf)':>12}{'d(vi,mc)':>12}"]
    for x in range(m.n_states):
        bf = "skipped" if c.oracle is None else f"{c.oracle[x]:.10g}"
        dbf = "-" if c.oracle is None else _delta(V[x], c.oracle[x])
        if x == c.x0 and c.simulation is not None:
            mc = f"{c.simulation.estimate:.6g}"
            dmc = _delta(V[x], c.simulation.estimate)
        else:
            mc, dmc = "-", "-"
        lines.append(f"{m.state_names[x]:<10}{V[x]:>20.10g}{bf:>20}{mc:>20}{dbf:>12}{dmc:>12}")
    lines.append("")
    lines.append(f"oracle: {c.oracle_note}")
    if c.simulation is not None:
        s = c.simulation
        lines.append(f"monte carlo at {m.state_names[c.x0]}: {s.n_paths} paths, "
                     f"std error {s.std_error:.3g}, truncated fraction "
                     f"{s.truncation_bias_bound:.3g}, horizon {s.horizon:g}")
    lines.append(f"monte carlo check: {c.mc_note}")
    for k, v in c.checks.items():
        lines.append(f"{k}: {'agree' if v else 'DISAGREE'}")
    return "\n".join(lines) + "\n"


def _delta(a, b):
    if np.isinf(a) and np.isinf(b):
        return "0"
    return f"{abs(a - b):.2e}"


def comparison_to_dict(c: Comparison) -> dict:
    doc = {
        "x0": c.x0,
        "value_iteration": [_num(v) for v in c.solved.solution.V],
        "brute_force": None if c.oracle is None else [_num(v) for v in c.oracle],
        "oracle_note": c.oracle_note,
        "mc_note": c.mc_note,
        "checks": c.checks,
        "ok": c.ok,
    }
    if c.simulation is not None:
        s = c.simulation
        doc["monte_carlo"] = {"estimate": s.estimate, "std_error": s.std_error,
                              "n_paths": s.n_paths, "terminations": s.terminations,
                              "truncation_bias_bound": s.truncation_bias_bound,
                              "horizon": s.horizon, "seed": s.master_seed}
    return doc
